//! Internal FFT plumbing: unitary centered 2-D spatial transforms and the
//! unitary temporal transform, built on rustfft.
//!
//! Spatial convention: `forward` maps an image frame to a centered spectrum,
//! `k = fftshift2(FFT2(img)) / sqrt(nx*ny)`, so frequency zero sits at index
//! `n/2` on each axis. `inverse` is the exact adjoint (= inverse, both are
//! unitary): `img = IFFT2(ifftshift2(k)) / sqrt(nx*ny)`.

use std::sync::Arc;

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Cyclic roll: element `v[i,j]` moves to `out[(i+sx)%nx, (j+sy)%ny]`.
fn roll2(a: &Array2<Complex64>, sx: usize, sy: usize) -> Array2<Complex64> {
    let (nx, ny) = a.dim();
    Array2::from_shape_fn((nx, ny), |(i, j)| {
        a[[(i + nx - sx) % nx, (j + ny - sy) % ny]]
    })
}

fn fftshift2(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (nx, ny) = a.dim();
    roll2(a, nx / 2, ny / 2)
}

fn ifftshift2(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (nx, ny) = a.dim();
    roll2(a, nx - nx / 2, ny - ny / 2)
}

/// Runs `fft` over every contiguous chunk (row) of a standard-layout array.
fn process_rows(buf: &mut Array2<Complex64>, fft: &Arc<dyn Fft<f64>>) {
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let slice = buf.as_slice_mut().expect("standard layout");
    fft.process_with_scratch(slice, &mut scratch);
}

/// Transpose into standard layout so the other axis becomes row-contiguous.
fn transposed(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().as_standard_layout().into_owned()
}

pub(crate) struct SpatialFft {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl SpatialFft {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        Self {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
            scale: 1.0 / ((nx * ny) as f64).sqrt(),
        }
    }

    fn fft2(&self, frame: &Array2<Complex64>, inverse: bool) -> Array2<Complex64> {
        let (fx, fy) = if inverse {
            (&self.inv_x, &self.inv_y)
        } else {
            (&self.fwd_x, &self.fwd_y)
        };
        let mut buf = frame.as_standard_layout().into_owned();
        if self.ny > 1 {
            process_rows(&mut buf, fy);
        }
        if self.nx > 1 {
            let mut t = transposed(&buf);
            process_rows(&mut t, fx);
            buf = transposed(&t);
        }
        buf.mapv_inplace(|c| c * self.scale);
        buf
    }

    /// Image frame -> centered unitary spectrum.
    pub fn forward(&self, img: &Array2<Complex64>) -> Array2<Complex64> {
        fftshift2(&self.fft2(img, false))
    }

    /// Centered unitary spectrum -> image frame.
    pub fn inverse(&self, kspace: &Array2<Complex64>) -> Array2<Complex64> {
        self.fft2(&ifftshift2(kspace), true)
    }
}

pub(crate) struct TemporalFft {
    nt: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl TemporalFft {
    pub fn new(nt: usize) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        Self {
            nt,
            fwd: planner.plan_fft_forward(nt),
            inv: planner.plan_fft_inverse(nt),
            scale: 1.0 / (nt as f64).sqrt(),
        }
    }

    fn apply(&self, vol: &Array3<Complex64>, inverse: bool) -> Array3<Complex64> {
        let mut out = vol.as_standard_layout().into_owned();
        if self.nt > 1 {
            let fft = if inverse { &self.inv } else { &self.fwd };
            // Axis 2 is the fastest axis in standard layout, so the whole
            // volume is a sequence of contiguous temporal lines.
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            let slice = out.as_slice_mut().expect("standard layout");
            fft.process_with_scratch(slice, &mut scratch);
        }
        out.mapv_inplace(|c| c * self.scale);
        out
    }

    /// Unitary DFT along the temporal axis; the DC bin is at index 0.
    pub fn forward(&self, vol: &Array3<Complex64>) -> Array3<Complex64> {
        self.apply(vol, false)
    }

    pub fn inverse(&self, vol: &Array3<Complex64>) -> Array3<Complex64> {
        self.apply(vol, true)
    }
}
