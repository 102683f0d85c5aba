//! Image-quality metrics (NMSE, PSNR, SSIM) computed on magnitude images
//! with all frames pooled.
//!
//! SSIM uses global means/variances by default; a windowed-mean variant is
//! available for cross-tool comparison.

use ndarray::{s, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::CineSeries;

/// Rectangular spatial region of interest, applied to every frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nmse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    /// Total number of pixels entering the metrics (frames included).
    pub pixels: usize,
    pub roi: Option<Roi>,
}

/// Header of the metrics CSV emitted by the evaluation pipeline.
pub const METRICS_CSV_HEADER: &str = "slice_id,mask_name,recon_name,accel,nmse,psnr_db,ssim";

fn check_same_dims(a: &CineSeries, b: &CineSeries) -> Result<()> {
    if a.nx() != b.nx() {
        return Err(Error::DimensionMismatch("nx"));
    }
    if a.ny() != b.ny() {
        return Err(Error::DimensionMismatch("ny"));
    }
    if a.nt() != b.nt() {
        return Err(Error::DimensionMismatch("nt"));
    }
    Ok(())
}

fn nmse_mag(gt: &Array3<f64>, hat: &Array3<f64>) -> Result<f64> {
    let signal: f64 = gt.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    let err: f64 = gt
        .iter()
        .zip(hat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(err / signal)
}

fn psnr_mag(gt: &Array3<f64>, hat: &Array3<f64>) -> f64 {
    let err: f64 = gt
        .iter()
        .zip(hat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if err == 0.0 {
        return f64::INFINITY;
    }
    let peak = gt.iter().cloned().fold(0.0f64, f64::max);
    let d = gt.len() as f64;
    10.0 * (peak * peak * d / err).log10()
}

fn ssim_mag(gt: &Array3<f64>, hat: &Array3<f64>, c1: Option<f64>, c2: Option<f64>) -> f64 {
    let peak = gt.iter().cloned().fold(0.0f64, f64::max);
    let c1 = c1.unwrap_or((0.01 * peak) * (0.01 * peak));
    let c2 = c2.unwrap_or((0.03 * peak) * (0.03 * peak));
    let d = gt.len() as f64;

    let mu_x = gt.iter().sum::<f64>() / d;
    let mu_y = hat.iter().sum::<f64>() / d;
    let var_x = gt.iter().map(|v| (v - mu_x) * (v - mu_x)).sum::<f64>() / d;
    let var_y = hat.iter().map(|v| (v - mu_y) * (v - mu_y)).sum::<f64>() / d;
    let cov = gt
        .iter()
        .zip(hat.iter())
        .map(|(a, b)| (a - mu_x) * (b - mu_y))
        .sum::<f64>()
        / d;

    ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
        / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2))
}

/// Normalized mean square error `||x - x_hat||^2 / ||x||^2` on magnitudes.
pub fn nmse(x_gt: &CineSeries, x_hat: &CineSeries) -> Result<f64> {
    check_same_dims(x_gt, x_hat)?;
    nmse_mag(&x_gt.magnitude(), &x_hat.magnitude())
}

/// Peak signal-to-noise ratio in dB, `10 log10(max(|x|)^2 d / ||e||^2)` with
/// `d` the total pixel count over all frames. Returns `+inf` when the
/// magnitude images are identical.
pub fn psnr(x_gt: &CineSeries, x_hat: &CineSeries) -> Result<f64> {
    check_same_dims(x_gt, x_hat)?;
    Ok(psnr_mag(&x_gt.magnitude(), &x_hat.magnitude()))
}

/// Structural similarity with global statistics (single formula over all
/// pooled pixels). Defaults `c1 = (0.01 L)^2`, `c2 = (0.03 L)^2` with
/// `L = max(|x_gt|)`.
pub fn ssim(
    x_gt: &CineSeries,
    x_hat: &CineSeries,
    c1: Option<f64>,
    c2: Option<f64>,
) -> Result<f64> {
    check_same_dims(x_gt, x_hat)?;
    Ok(ssim_mag(&x_gt.magnitude(), &x_hat.magnitude(), c1, c2))
}

/// Windowed-mean SSIM variant: the global formula evaluated over every
/// `window x window` patch (valid positions, all frames) and averaged.
/// Falls back to the global formula when a frame is smaller than the window.
pub fn ssim_windowed(
    x_gt: &CineSeries,
    x_hat: &CineSeries,
    window: usize,
    c1: Option<f64>,
    c2: Option<f64>,
) -> Result<f64> {
    check_same_dims(x_gt, x_hat)?;
    let gt = x_gt.magnitude();
    let hat = x_hat.magnitude();
    let (nx, ny, nt) = (x_gt.nx(), x_gt.ny(), x_gt.nt());
    if window == 0 || nx < window || ny < window {
        return Ok(ssim_mag(&gt, &hat, c1, c2));
    }
    let peak = gt.iter().cloned().fold(0.0f64, f64::max);
    let c1 = c1.unwrap_or((0.01 * peak) * (0.01 * peak));
    let c2 = c2.unwrap_or((0.03 * peak) * (0.03 * peak));

    let mut total = 0.0;
    let mut count = 0usize;
    for t in 0..nt {
        for i in 0..=(nx - window) {
            for j in 0..=(ny - window) {
                let a = gt.slice(s![i..i + window, j..j + window, t..t + 1]);
                let b = hat.slice(s![i..i + window, j..j + window, t..t + 1]);
                let patch = ssim_mag(&a.to_owned(), &b.to_owned(), Some(c1), Some(c2));
                total += patch;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

fn crop(x: &CineSeries, roi: &Roi) -> Result<Array3<f64>> {
    if roi.width == 0
        || roi.height == 0
        || roi.x0 + roi.width > x.nx()
        || roi.y0 + roi.height > x.ny()
    {
        return Err(Error::RoiOutOfBounds);
    }
    Ok(x.magnitude()
        .slice(s![
            roi.x0..roi.x0 + roi.width,
            roi.y0..roi.y0 + roi.height,
            ..
        ])
        .to_owned())
}

/// All three metrics on the full image or an ROI crop.
pub fn report(x_gt: &CineSeries, x_hat: &CineSeries, roi: Option<Roi>) -> Result<MetricReport> {
    check_same_dims(x_gt, x_hat)?;
    let (gt, hat) = match &roi {
        Some(r) => (crop(x_gt, r)?, crop(x_hat, r)?),
        None => (x_gt.magnitude(), x_hat.magnitude()),
    };
    Ok(MetricReport {
        nmse: nmse_mag(&gt, &hat)?,
        psnr_db: psnr_mag(&gt, &hat),
        ssim: ssim_mag(&gt, &hat, None, None),
        pixels: gt.len(),
        roi,
    })
}
