//! Domain data types: dynamic image series, multi-coil k-space, sampling
//! masks, coil maps, and the parameter bundles shared by the solvers.
//!
//! Array axis conventions used throughout the crate:
//!   - images: `(x, y, t)` with the phase-encode direction along `y`
//!   - k-space: `(x, y, t, coil)`, stored as a centered spectrum
//!     (frequency zero at index `n/2` on both spatial axes)
//!   - coil maps: `(x, y, coil)`
//!
//! All arithmetic is in 64-bit floats.

use ndarray::{Array3, Array4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn all_finite3(data: &Array3<Complex64>) -> bool {
    data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

fn all_finite4(data: &Array4<Complex64>) -> bool {
    data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// Complex dynamic image series over `(nx, ny, nt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CineSeries {
    data: Array3<Complex64>,
}

impl CineSeries {
    pub fn new(data: Array3<Complex64>) -> Result<Self> {
        if data.iter().count() == 0 {
            return Err(Error::InvalidParams("empty cine series".into()));
        }
        if !all_finite3(&data) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { data })
    }

    /// Construction without the finiteness scan, for values the crate just
    /// computed from finite inputs.
    pub(crate) fn from_array(data: Array3<Complex64>) -> Self {
        Self { data }
    }

    pub fn zeros(nx: usize, ny: usize, nt: usize) -> Self {
        Self {
            data: Array3::zeros((nx, ny, nt)),
        }
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<Complex64> {
        self.data
    }

    pub fn nx(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn ny(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn nt(&self) -> usize {
        self.data.shape()[2]
    }

    /// Per-pixel magnitudes, same shape as the series.
    pub fn magnitude(&self) -> Array3<f64> {
        self.data.mapv(|c| c.norm())
    }
}

/// Temporal-frequency representation of a [`CineSeries`], indexed
/// `(x, y, f)` with the DC bin at `f = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct XFSeries {
    data: Array3<Complex64>,
}

impl XFSeries {
    pub fn new(data: Array3<Complex64>) -> Result<Self> {
        if !all_finite3(&data) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { data })
    }

    pub(crate) fn from_array(data: Array3<Complex64>) -> Self {
        Self { data }
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<Complex64> {
        self.data
    }

    pub fn nx(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn ny(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn nf(&self) -> usize {
        self.data.shape()[2]
    }
}

/// Complex multi-coil k-space measurements over `(nx, ny, nt, nc)`.
/// Unacquired phase-encode lines are stored as exact zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiCoilKSpace {
    data: Array4<Complex64>,
}

impl MultiCoilKSpace {
    pub fn new(data: Array4<Complex64>) -> Result<Self> {
        if data.iter().count() == 0 {
            return Err(Error::InvalidParams("empty k-space".into()));
        }
        if !all_finite4(&data) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { data })
    }

    pub(crate) fn from_array(data: Array4<Complex64>) -> Self {
        Self { data }
    }

    pub fn zeros(nx: usize, ny: usize, nt: usize, nc: usize) -> Self {
        Self {
            data: Array4::zeros((nx, ny, nt, nc)),
        }
    }

    pub fn data(&self) -> &Array4<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array4<Complex64> {
        self.data
    }

    pub fn nx(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn ny(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn nt(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn nc(&self) -> usize {
        self.data.shape()[3]
    }
}

/// Complex coil sensitivity maps over `(nx, ny, nc)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilSensitivities {
    data: Array3<Complex64>,
    normalized: bool,
}

impl CoilSensitivities {
    /// Tolerance on the per-pixel sum-of-squares condition for maps flagged
    /// as normalized.
    pub const NORMALIZATION_TOL: f64 = 1e-6;

    pub fn new(data: Array3<Complex64>, normalized: bool) -> Result<Self> {
        if data.iter().count() == 0 {
            return Err(Error::InvalidParams("empty sensitivities".into()));
        }
        if !all_finite3(&data) {
            return Err(Error::NonFiniteInput);
        }
        if normalized && !Self::check_normalized(&data) {
            return Err(Error::InvalidParams(
                "sensitivities flagged normalized but per-pixel sum of squares is not 1".into(),
            ));
        }
        Ok(Self { data, normalized })
    }

    /// True when `sum_c |S_c(x,y)|^2 == 1` within tolerance at every pixel
    /// where any coil is nonzero.
    pub fn check_normalized(data: &Array3<Complex64>) -> bool {
        let (nx, ny, nc) = (data.shape()[0], data.shape()[1], data.shape()[2]);
        for ix in 0..nx {
            for iy in 0..ny {
                let mut ss = 0.0;
                let mut any = false;
                for c in 0..nc {
                    let v = data[[ix, iy, c]];
                    if v != Complex64::new(0.0, 0.0) {
                        any = true;
                    }
                    ss += v.norm_sqr();
                }
                if any && (ss - 1.0).abs() > Self::NORMALIZATION_TOL {
                    return false;
                }
            }
        }
        true
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<Complex64> {
        self.data
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn nx(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn ny(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn nc(&self) -> usize {
        self.data.shape()[2]
    }
}

/// Binary selection of phase-encode lines, shared by every temporal frame,
/// with a protected low-frequency (ACS) subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingMask {
    ny: usize,
    lines: Vec<usize>,
    acs: Vec<usize>,
}

impl SamplingMask {
    /// Builds a mask from arbitrary-order line lists. Rejects duplicates,
    /// out-of-range indices, and ACS lines not contained in `lines`.
    pub fn new(ny: usize, mut lines: Vec<usize>, mut acs: Vec<usize>) -> Result<Self> {
        if ny == 0 {
            return Err(Error::InvalidMask("ny must be positive".into()));
        }
        lines.sort_unstable();
        acs.sort_unstable();
        for w in lines.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidMask(format!("duplicate line {}", w[0])));
            }
        }
        if let Some(&l) = lines.last() {
            if l >= ny {
                return Err(Error::InvalidMask(format!(
                    "line {l} out of range for ny={ny}"
                )));
            }
        }
        for w in acs.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidMask(format!("duplicate ACS line {}", w[0])));
            }
        }
        for &a in &acs {
            if lines.binary_search(&a).is_err() {
                return Err(Error::InvalidMask(format!(
                    "ACS line {a} not in sampled lines"
                )));
            }
        }
        Ok(Self { ny, lines, acs })
    }

    /// Fully sampled mask with an empty ACS designation.
    pub fn full(ny: usize) -> Self {
        Self {
            ny,
            lines: (0..ny).collect(),
            acs: Vec::new(),
        }
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn budget(&self) -> usize {
        self.lines.len()
    }

    pub fn lines(&self) -> &[usize] {
        &self.lines
    }

    pub fn acs(&self) -> &[usize] {
        &self.acs
    }

    pub fn contains(&self, line: usize) -> bool {
        self.lines.binary_search(&line).is_ok()
    }

    /// Sampled lines that are not in the protected ACS set.
    pub fn movable_lines(&self) -> Vec<usize> {
        self.lines
            .iter()
            .copied()
            .filter(|l| self.acs.binary_search(l).is_err())
            .collect()
    }

    /// Phase-encode indices not currently sampled.
    pub fn free_lines(&self) -> Vec<usize> {
        (0..self.ny).filter(|l| !self.contains(*l)).collect()
    }

    /// New mask with the lines in `remove` relocated to the lines in `add`.
    /// `remove` must be sampled and non-ACS; `add` must be free.
    pub fn relocate(&self, remove: &[usize], add: &[usize]) -> Result<Self> {
        if remove.len() != add.len() {
            return Err(Error::InvalidMask("relocation sets differ in size".into()));
        }
        for &r in remove {
            if !self.contains(r) {
                return Err(Error::InvalidMask(format!("line {r} is not sampled")));
            }
            if self.acs.binary_search(&r).is_ok() {
                return Err(Error::InvalidMask(format!("line {r} is in the ACS set")));
            }
        }
        for &a in add {
            if self.contains(a) {
                return Err(Error::InvalidMask(format!("line {a} is already sampled")));
            }
        }
        let mut lines: Vec<usize> = self
            .lines
            .iter()
            .copied()
            .filter(|l| !remove.contains(l))
            .collect();
        lines.extend_from_slice(add);
        Self::new(self.ny, lines, self.acs.clone())
    }
}

/// Reconstruction parameters for the data-consistency solve and the unrolled
/// scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconParams {
    /// Regularization weight (>= 0) balancing data fidelity and the prior.
    pub lambda: f64,
    /// Blend in [0, 1] between the image-domain and temporal-frequency
    /// denoising branches.
    pub gamma: f64,
    /// Number of unrolled stages.
    pub k_stages: usize,
    /// Relative-residual stopping tolerance for the inner CG solve.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for ReconParams {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            gamma: 0.5,
            k_stages: 6,
            cg_tol: 1e-5,
            cg_max_iter: 50,
        }
    }
}

impl ReconParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParams(
                "lambda must be finite and >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParams("gamma must be in [0, 1]".into()));
        }
        if self.k_stages == 0 {
            return Err(Error::InvalidParams("k_stages must be positive".into()));
        }
        if self.cg_tol <= 0.0 || self.cg_tol.is_nan() {
            return Err(Error::InvalidParams("cg_tol must be positive".into()));
        }
        if self.cg_max_iter == 0 {
            return Err(Error::InvalidParams("cg_max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Parameters of the randomized batched coordinate-descent mask optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbIcdParams {
    /// Total number of sampled lines B.
    pub budget: usize,
    /// Number of protected central low-frequency lines F.
    pub acs_count: usize,
    /// Lines relocated together per update s.
    pub subset_size: usize,
    /// Number of passes over the mask.
    pub n_iter: usize,
    /// Candidate relocations evaluated per subset.
    pub n_cand: usize,
    pub seed: u64,
    /// Enumerate every size-matched relocation instead of sampling
    /// `n_cand` random ones. Intended for small grids; `n_cand` is ignored.
    #[serde(default)]
    pub exhaustive: bool,
}

impl RbIcdParams {
    pub fn validate(&self, ny: usize) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidParams("budget must be positive".into()));
        }
        if self.budget > ny {
            return Err(Error::BudgetExceedsGrid {
                budget: self.budget,
                ny,
            });
        }
        if self.acs_count > self.budget {
            return Err(Error::InvalidParams(
                "acs_count must not exceed budget".into(),
            ));
        }
        let movable = self.budget - self.acs_count;
        if movable > 0 {
            if self.subset_size == 0 {
                return Err(Error::InvalidParams("subset_size must be positive".into()));
            }
            if self.subset_size > movable {
                return Err(Error::InvalidParams(format!(
                    "subset_size {} exceeds movable line count {}",
                    self.subset_size, movable
                )));
            }
        }
        if self.n_iter == 0 {
            return Err(Error::InvalidParams("n_iter must be positive".into()));
        }
        if !self.exhaustive && self.n_cand == 0 {
            return Err(Error::InvalidParams("n_cand must be positive".into()));
        }
        Ok(())
    }
}

/// Checks that a series, its k-space, coil maps, and mask agree on every
/// shared axis. Fails with the first inconsistent axis in the order
/// nx, ny, nt, nc.
pub fn validate_pairing(
    x: &CineSeries,
    y: &MultiCoilKSpace,
    s: &CoilSensitivities,
    m: &SamplingMask,
) -> Result<()> {
    if y.nx() != x.nx() || s.nx() != x.nx() {
        return Err(Error::DimensionMismatch("nx"));
    }
    if y.ny() != x.ny() || s.ny() != x.ny() || m.ny() != x.ny() {
        return Err(Error::DimensionMismatch("ny"));
    }
    if y.nt() != x.nt() {
        return Err(Error::DimensionMismatch("nt"));
    }
    if s.nc() != y.nc() {
        return Err(Error::DimensionMismatch("nc"));
    }
    Ok(())
}
