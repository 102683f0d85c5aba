//! The multi-coil spatiotemporal acquisition operator, its adjoint, the
//! temporal Fourier transform, and the regularized normal operator.
//!
//! All four are pure functions. Frames are processed independently (in
//! parallel) and coil sums run in fixed coil order, so results are bitwise
//! independent of the thread schedule.

use ndarray::{Array2, Array3, Array4, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{SpatialFft, TemporalFft};
use crate::types::{CineSeries, CoilSensitivities, MultiCoilKSpace, SamplingMask, XFSeries};

fn check_image_pairing(x: &CineSeries, s: &CoilSensitivities, m: &SamplingMask) -> Result<()> {
    if s.nx() != x.nx() {
        return Err(Error::DimensionMismatch("nx"));
    }
    if s.ny() != x.ny() || m.ny() != x.ny() {
        return Err(Error::DimensionMismatch("ny"));
    }
    Ok(())
}

fn check_kspace_pairing(
    y: &MultiCoilKSpace,
    s: &CoilSensitivities,
    m: &SamplingMask,
) -> Result<()> {
    if s.nx() != y.nx() {
        return Err(Error::DimensionMismatch("nx"));
    }
    if s.ny() != y.ny() || m.ny() != y.ny() {
        return Err(Error::DimensionMismatch("ny"));
    }
    if s.nc() != y.nc() {
        return Err(Error::DimensionMismatch("nc"));
    }
    Ok(())
}

fn selected_bools(m: &SamplingMask) -> Vec<bool> {
    let mut sel = vec![false; m.ny()];
    for &l in m.lines() {
        sel[l] = true;
    }
    sel
}

fn zero_unsampled_columns(frame: &mut Array2<Complex64>, selected: &[bool]) {
    for (j, &keep) in selected.iter().enumerate() {
        if !keep {
            frame.column_mut(j).fill(Complex64::new(0.0, 0.0));
        }
    }
}

/// Acquisition: per coil and frame, `Mask . FFT2c(S_c . x_t)`.
/// Unsampled phase-encode lines of the output are exactly zero.
pub fn forward_apply(
    x: &CineSeries,
    s: &CoilSensitivities,
    m: &SamplingMask,
) -> Result<MultiCoilKSpace> {
    check_image_pairing(x, s, m)?;
    let (nx, ny, nt, nc) = (x.nx(), x.ny(), x.nt(), s.nc());
    let sfft = SpatialFft::new(nx, ny);
    let sel = selected_bools(m);

    let frames: Vec<Array3<Complex64>> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let xt = x.data().index_axis(Axis(2), t);
            let mut out = Array3::zeros((nx, ny, nc));
            for c in 0..nc {
                let sc = s.data().index_axis(Axis(2), c);
                let weighted = Array2::from_shape_fn((nx, ny), |(i, j)| xt[[i, j]] * sc[[i, j]]);
                let mut k = sfft.forward(&weighted);
                zero_unsampled_columns(&mut k, &sel);
                out.index_axis_mut(Axis(2), c).assign(&k);
            }
            out
        })
        .collect();

    let mut data = Array4::zeros((nx, ny, nt, nc));
    for (t, frame) in frames.iter().enumerate() {
        for c in 0..nc {
            data.index_axis_mut(Axis(3), c)
                .index_axis_mut(Axis(2), t)
                .assign(&frame.index_axis(Axis(2), c));
        }
    }
    Ok(MultiCoilKSpace::from_array(data))
}

/// Adjoint of [`forward_apply`]: `sum_c conj(S_c) . IFFT2c(Mask . y_c)` per
/// frame. Exact adjoint under the standard complex inner product.
pub fn adjoint_apply(
    y: &MultiCoilKSpace,
    s: &CoilSensitivities,
    m: &SamplingMask,
) -> Result<CineSeries> {
    check_kspace_pairing(y, s, m)?;
    let (nx, ny, nt, nc) = (y.nx(), y.ny(), y.nt(), y.nc());
    let sfft = SpatialFft::new(nx, ny);
    let sel = selected_bools(m);

    let frames: Vec<Array2<Complex64>> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let mut acc: Array2<Complex64> = Array2::zeros((nx, ny));
            for c in 0..nc {
                let mut k = y
                    .data()
                    .index_axis(Axis(3), c)
                    .index_axis(Axis(2), t)
                    .to_owned();
                zero_unsampled_columns(&mut k, &sel);
                let img = sfft.inverse(&k);
                let sc = s.data().index_axis(Axis(2), c);
                for ((i, j), v) in img.indexed_iter() {
                    acc[[i, j]] += sc[[i, j]].conj() * v;
                }
            }
            acc
        })
        .collect();

    let mut data = Array3::zeros((nx, ny, nt));
    for (t, frame) in frames.iter().enumerate() {
        data.index_axis_mut(Axis(2), t).assign(frame);
    }
    Ok(CineSeries::from_array(data))
}

/// Unitary DFT along the temporal axis, DC bin at frequency index 0.
pub fn temporal_fft(x: &CineSeries) -> XFSeries {
    let tf = TemporalFft::new(x.nt());
    XFSeries::from_array(tf.forward(x.data()))
}

/// Inverse of [`temporal_fft`].
pub fn temporal_ifft(xf: &XFSeries) -> CineSeries {
    let tf = TemporalFft::new(xf.nf());
    CineSeries::from_array(tf.inverse(xf.data()))
}

/// The regularized normal operator `(A^H A + lambda I) x`. Linear,
/// self-adjoint, and positive semidefinite for `lambda >= 0`.
pub fn normal_apply(
    x: &CineSeries,
    s: &CoilSensitivities,
    m: &SamplingMask,
    lambda: f64,
) -> Result<CineSeries> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParams(
            "lambda must be finite and >= 0".into(),
        ));
    }
    let y = forward_apply(x, s, m)?;
    let mut out = adjoint_apply(&y, s, m)?.into_data();
    if lambda != 0.0 {
        out.zip_mut_with(x.data(), |o, &xi| *o += xi * lambda);
    }
    Ok(CineSeries::from_array(out))
}

/// Zeroes every unsampled phase-encode line of `y` (retrospective
/// undersampling of fully sampled data).
pub fn apply_mask(y: &MultiCoilKSpace, m: &SamplingMask) -> Result<MultiCoilKSpace> {
    if m.ny() != y.ny() {
        return Err(Error::DimensionMismatch("ny"));
    }
    let sel = selected_bools(m);
    let mut data = y.data().clone();
    for (j, &keep) in sel.iter().enumerate() {
        if !keep {
            data.index_axis_mut(Axis(1), j)
                .fill(Complex64::new(0.0, 0.0));
        }
    }
    Ok(MultiCoilKSpace::from_array(data))
}
