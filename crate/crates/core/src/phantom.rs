//! Synthetic dynamic phantom and coil-map generation: piecewise-constant
//! ellipses with one or more sinusoidally pulsating structures, evaluated
//! analytically per frame on a 2x supersampled grid.

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::forward_apply;
use crate::types::{CineSeries, CoilSensitivities, MultiCoilKSpace, SamplingMask};

/// Axis-aligned ellipse in normalized coordinates ([-1, 1] per axis).
/// `pulse_amp` modulates both semi-axes as `1 + amp*sin(2*pi*t/period + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub axes: (f64, f64),
    pub intensity: f64,
    pub pulse_amp: f64,
    pub pulse_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub nc: usize,
    pub ellipses: Vec<Ellipse>,
    /// Cardiac period in frames.
    pub heart_rate_frames: f64,
    /// Std dev of complex Gaussian k-space noise (per component).
    pub noise_sigma: f64,
    pub seed: u64,
}

impl PhantomSpec {
    /// Torso-plus-ventricle layout used by the CLI default and the tests:
    /// a static body ellipse, a pulsating wall and blood pool, and two
    /// static off-center structures for spectral richness.
    pub fn standard(nx: usize, ny: usize, nt: usize, nc: usize, seed: u64) -> Self {
        Self {
            nx,
            ny,
            nt,
            nc,
            ellipses: vec![
                Ellipse {
                    center: (0.0, 0.0),
                    axes: (0.85, 0.75),
                    intensity: 0.5,
                    pulse_amp: 0.0,
                    pulse_phase: 0.0,
                },
                Ellipse {
                    center: (-0.12, 0.08),
                    axes: (0.38, 0.34),
                    intensity: 0.35,
                    pulse_amp: 0.10,
                    pulse_phase: 0.0,
                },
                Ellipse {
                    center: (-0.12, 0.08),
                    axes: (0.20, 0.17),
                    intensity: 0.45,
                    pulse_amp: 0.28,
                    pulse_phase: 0.7,
                },
                Ellipse {
                    center: (0.42, -0.28),
                    axes: (0.14, 0.22),
                    intensity: 0.3,
                    pulse_amp: 0.0,
                    pulse_phase: 0.0,
                },
                Ellipse {
                    center: (0.30, 0.48),
                    axes: (0.09, 0.07),
                    intensity: 0.4,
                    pulse_amp: 0.0,
                    pulse_phase: 0.0,
                },
            ],
            heart_rate_frames: nt as f64,
            noise_sigma: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nt == 0 || self.nc == 0 {
            return Err(Error::InvalidSpec("all extents must be positive".into()));
        }
        if self.heart_rate_frames <= 0.0 || self.heart_rate_frames.is_nan() {
            return Err(Error::InvalidSpec(
                "heart_rate_frames must be positive".into(),
            ));
        }
        if self.noise_sigma < 0.0 || self.noise_sigma.is_nan() {
            return Err(Error::InvalidSpec("noise_sigma must be >= 0".into()));
        }
        for (i, e) in self.ellipses.iter().enumerate() {
            if !(e.axes.0 > 0.0 && e.axes.1 > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "ellipse {i}: axes must be positive"
                )));
            }
            if e.pulse_amp.abs() >= 1.0 {
                return Err(Error::InvalidSpec(format!(
                    "ellipse {i}: |pulse_amp| must be < 1 to keep axes positive"
                )));
            }
            if !e.intensity.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "ellipse {i}: non-finite intensity"
                )));
            }
        }
        Ok(())
    }
}

/// Evaluates one phantom frame at (possibly fractional / out-of-range)
/// frame index `t`, with 2x2 supersampling per pixel.
pub fn frame_at(spec: &PhantomSpec, t: f64) -> Array2<f64> {
    let phase_base = 2.0 * std::f64::consts::PI * t / spec.heart_rate_frames;
    let mut frame = Array2::zeros((spec.nx, spec.ny));
    let offsets = [-0.25, 0.25];
    for ix in 0..spec.nx {
        for iy in 0..spec.ny {
            let mut acc = 0.0;
            for ox in offsets {
                for oy in offsets {
                    let u = 2.0 * (ix as f64 + 0.5 + ox) / spec.nx as f64 - 1.0;
                    let v = 2.0 * (iy as f64 + 0.5 + oy) / spec.ny as f64 - 1.0;
                    for e in &spec.ellipses {
                        let scale = 1.0 + e.pulse_amp * (phase_base + e.pulse_phase).sin();
                        let ax = e.axes.0 * scale;
                        let ay = e.axes.1 * scale;
                        let du = (u - e.center.0) / ax;
                        let dv = (v - e.center.1) / ay;
                        if du * du + dv * dv <= 1.0 {
                            acc += e.intensity;
                        }
                    }
                }
            }
            frame[[ix, iy]] = acc / 4.0;
        }
    }
    frame
}

/// Generates the dynamic phantom series (real-valued, zero phase).
pub fn gen_cine_phantom(spec: &PhantomSpec) -> Result<CineSeries> {
    spec.validate()?;
    let mut data = Array3::zeros((spec.nx, spec.ny, spec.nt));
    for t in 0..spec.nt {
        let frame = frame_at(spec, t as f64);
        let mut slab = data.index_axis_mut(Axis(2), t);
        for ((i, j), v) in frame.indexed_iter() {
            slab[[i, j]] = Complex64::new(*v, 0.0);
        }
    }
    Ok(CineSeries::from_array(data))
}

/// Smooth complex coil profiles: Gaussian lobes centered at jittered border
/// positions with mild linear phase ramps. With `normalize`, maps are
/// root-sum-of-squares normalized per pixel.
pub fn gen_sensitivities(
    nx: usize,
    ny: usize,
    nc: usize,
    seed: u64,
    normalize: bool,
) -> CoilSensitivities {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Array3::zeros((nx, ny, nc));
    for c in 0..nc {
        let theta =
            2.0 * std::f64::consts::PI * c as f64 / nc as f64 + 0.15 * (rng.random::<f64>() - 0.5);
        let cx = 1.05 * theta.cos();
        let cy = 1.05 * theta.sin();
        let sigma = 0.75 + 0.3 * rng.random::<f64>();
        let ramp_u = 0.6 * (rng.random::<f64>() - 0.5);
        let ramp_v = 0.6 * (rng.random::<f64>() - 0.5);
        let phi0 = std::f64::consts::PI * (rng.random::<f64>() - 0.5);
        for ix in 0..nx {
            for iy in 0..ny {
                let u = 2.0 * (ix as f64 + 0.5) / nx as f64 - 1.0;
                let v = 2.0 * (iy as f64 + 0.5) / ny as f64 - 1.0;
                let r2 = (u - cx) * (u - cx) + (v - cy) * (v - cy);
                let mag = (-r2 / (2.0 * sigma * sigma)).exp();
                let phase = ramp_u * u + ramp_v * v + phi0;
                data[[ix, iy, c]] = Complex64::from_polar(mag, phase);
            }
        }
    }
    if normalize {
        for ix in 0..nx {
            for iy in 0..ny {
                let rss: f64 = (0..nc)
                    .map(|c| data[[ix, iy, c]].norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                if rss > 0.0 {
                    for c in 0..nc {
                        data[[ix, iy, c]] /= rss;
                    }
                }
            }
        }
    }
    CoilSensitivities::new(data, normalize).expect("generated maps are finite")
}

/// Fully sampled acquisition of `x` with additive i.i.d. complex Gaussian
/// noise of std dev `noise_sigma` per component. Bitwise equal to
/// [`forward_apply`] with the full mask when `noise_sigma == 0`.
pub fn simulate_kspace(
    x: &CineSeries,
    s: &CoilSensitivities,
    noise_sigma: f64,
    seed: u64,
) -> Result<MultiCoilKSpace> {
    if noise_sigma < 0.0 || noise_sigma.is_nan() {
        return Err(Error::InvalidParams("noise_sigma must be >= 0".into()));
    }
    let full = SamplingMask::full(x.ny());
    let y = forward_apply(x, s, &full)?;
    if noise_sigma == 0.0 {
        return Ok(y);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma).expect("valid sigma");
    let mut data = y.into_data();
    for v in data.iter_mut() {
        let re: f64 = normal.sample(&mut rng);
        let im: f64 = normal.sample(&mut rng);
        *v += Complex64::new(re, im);
    }
    Ok(MultiCoilKSpace::from_array(data))
}
