//! Scan-adaptive Cartesian undersampling design for dynamic MRI: the
//! multi-coil spatiotemporal acquisition model, classical and unrolled
//! reconstructions, randomized batched coordinate-descent mask optimization,
//! and nearest-neighbor mask selection from a dictionary of optimized
//! training slices.

pub mod container;
pub mod dsuno;
pub mod error;
mod fft;
pub mod masks;
pub mod metrics;
pub mod operators;
pub mod phantom;
pub mod recon;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    validate_pairing, CineSeries, CoilSensitivities, MultiCoilKSpace, RbIcdParams, ReconParams,
    SamplingMask, XFSeries,
};
