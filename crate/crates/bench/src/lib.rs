//! Shared instance builders for the pipeline benchmarks.

use ksadapt_core::masks::make_vdrs;
use ksadapt_core::phantom::{gen_cine_phantom, gen_sensitivities, simulate_kspace, PhantomSpec};
use ksadapt_core::{CineSeries, CoilSensitivities, MultiCoilKSpace, SamplingMask};

pub struct BenchInstance {
    pub x: CineSeries,
    pub s: CoilSensitivities,
    pub y_full: MultiCoilKSpace,
    pub mask: SamplingMask,
}

/// Dynamic phantom instance with a 4x variable-density mask.
pub fn instance(nx: usize, ny: usize, nt: usize, nc: usize) -> BenchInstance {
    let spec = PhantomSpec::standard(nx, ny, nt, nc, 42);
    let x = gen_cine_phantom(&spec).expect("valid spec");
    let s = gen_sensitivities(nx, ny, nc, 42, true);
    let y_full = simulate_kspace(&x, &s, 0.0, 42).expect("consistent dims");
    let mask = make_vdrs(ny, (ny / 4).max(1), 1.0 / 3.0, 3.0, 7).expect("valid mask");
    BenchInstance { x, s, y_full, mask }
}
