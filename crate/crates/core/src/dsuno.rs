//! Scan-adaptive mask selection: a dictionary of low-frequency reference
//! frames from optimized training slices, searched at test time by a
//! three-frame temporal-neighborhood normalized RMS difference.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{read_container, write_container, Container, MaskDocument};
use crate::error::{Error, Result};
use crate::fft::SpatialFft;
use crate::masks::acs_lines;
use crate::types::{CineSeries, MultiCoilKSpace, SamplingMask};

/// One training slice in the dictionary: per-frame low-frequency magnitude
/// references plus the mask optimized for that slice.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryEntry {
    pub slice_id: String,
    /// Magnitude image stack `(nx, ny, nt)`, one reference per frame.
    pub lowfreq_frames: Array3<f64>,
    pub mask: SamplingMask,
    pub accel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskDictionary {
    /// Number of central lines used to build every reference frame.
    pub f_acs: usize,
    pub entries: Vec<DictionaryEntry>,
}

/// Input to [`build_dictionary`].
#[derive(Debug, Clone)]
pub struct DictionarySlice {
    pub slice_id: String,
    pub y_full: MultiCoilKSpace,
    pub mask: SamplingMask,
}

/// Low-frequency reference: keep the central `f_acs` phase-encode lines,
/// zero-fill, inverse-transform per coil, and combine by root-sum-of-squares.
pub fn lowfreq_frame(y: &MultiCoilKSpace, frame: usize, f_acs: usize) -> Result<Array2<f64>> {
    if frame >= y.nt() {
        return Err(Error::DimensionMismatch("nt"));
    }
    let (nx, ny, nc) = (y.nx(), y.ny(), y.nc());
    let keep = acs_lines(ny, f_acs)?;
    let sfft = SpatialFft::new(nx, ny);
    let mut acc: Array2<f64> = Array2::zeros((nx, ny));
    for c in 0..nc {
        let mut k: Array2<Complex64> = Array2::zeros((nx, ny));
        for &l in &keep {
            for i in 0..nx {
                k[[i, l]] = y.data()[[i, l, frame, c]];
            }
        }
        let img = sfft.inverse(&k);
        for ((i, j), v) in img.indexed_iter() {
            acc[[i, j]] += v.norm_sqr();
        }
    }
    Ok(acc.mapv(f64::sqrt))
}

/// Builds the dictionary: stores the low-frequency reference of every frame
/// of every slice alongside its optimized mask. Every slice needs at least
/// three frames (the neighborhood spans i-1, i, i+1).
pub fn build_dictionary(slices: &[DictionarySlice], f_acs: usize) -> Result<MaskDictionary> {
    let mut entries = Vec::with_capacity(slices.len());
    let mut shared_dims: Option<(usize, usize)> = None;
    for slice in slices {
        let y = &slice.y_full;
        if y.nt() < 3 {
            return Err(Error::TooFewFrames {
                min: 3,
                got: y.nt(),
            });
        }
        if slice.mask.ny() != y.ny() {
            return Err(Error::DimensionMismatch("ny"));
        }
        match shared_dims {
            None => shared_dims = Some((y.nx(), y.ny())),
            Some((nx, ny)) => {
                if y.nx() != nx {
                    return Err(Error::DimensionMismatch("nx"));
                }
                if y.ny() != ny {
                    return Err(Error::DimensionMismatch("ny"));
                }
            }
        }
        let mut frames = Array3::zeros((y.nx(), y.ny(), y.nt()));
        for t in 0..y.nt() {
            let reference = lowfreq_frame(y, t, f_acs)?;
            frames.index_axis_mut(Axis(2), t).assign(&reference);
        }
        entries.push(DictionaryEntry {
            slice_id: slice.slice_id.clone(),
            lowfreq_frames: frames,
            mask: slice.mask.clone(),
            accel: slice.mask.ny() as f64 / slice.mask.budget() as f64,
        });
    }
    Ok(MaskDictionary { f_acs, entries })
}

/// Three-frame neighborhood distance centered at frame `i` (zero-based,
/// valid range `1 ..= nt-2`):
/// `d_i = sum_{j=-1..1} ||x_test - frames[i+j]|| / (3 ||x_test||)`.
pub fn nrmsd(x_test: &Array2<f64>, entry: &DictionaryEntry, i: usize) -> Result<f64> {
    let nt = entry.lowfreq_frames.shape()[2];
    if i < 1 || i + 1 >= nt {
        return Err(Error::IndexOutOfNeighborhoodRange {
            index: i,
            lo: 1,
            hi: nt.saturating_sub(2),
        });
    }
    let (nx, ny) = x_test.dim();
    if entry.lowfreq_frames.shape()[0] != nx {
        return Err(Error::DimensionMismatch("nx"));
    }
    if entry.lowfreq_frames.shape()[1] != ny {
        return Err(Error::DimensionMismatch("ny"));
    }
    let test_norm = x_test.iter().map(|v| v * v).sum::<f64>().sqrt();
    if test_norm == 0.0 {
        return Err(Error::ZeroNormTestFrame);
    }
    let mut total = 0.0;
    for offset in [-1isize, 0, 1] {
        let t = (i as isize + offset) as usize;
        let frame = entry.lowfreq_frames.index_axis(Axis(2), t);
        let diff: f64 = x_test
            .iter()
            .zip(frame.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        total += diff;
    }
    Ok(total / (3.0 * test_norm))
}

/// Best neighborhood distance within one entry: (distance, center frame).
fn entry_best(x_test: &Array2<f64>, entry: &DictionaryEntry) -> Result<(f64, usize)> {
    let nt = entry.lowfreq_frames.shape()[2];
    let mut best = f64::INFINITY;
    let mut best_i = 1;
    for i in 1..nt - 1 {
        let d = nrmsd(x_test, entry, i)?;
        if d < best {
            best = d;
            best_i = i;
        }
    }
    Ok((best, best_i))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSelection {
    pub mask: SamplingMask,
    pub neighbor_slice_id: String,
    pub best_d: f64,
}

/// Scan-adaptive selection: builds the low-frequency reference of the first
/// test frame and returns the mask of the dictionary entry minimizing the
/// neighborhood distance. Ties break toward the lexicographically smallest
/// slice id.
pub fn select_mask(
    y_test: &MultiCoilKSpace,
    dict: &MaskDictionary,
    f_acs: usize,
) -> Result<MaskSelection> {
    if dict.entries.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    if f_acs != dict.f_acs {
        return Err(Error::InvalidParams(format!(
            "f_acs {} differs from dictionary's {}",
            f_acs, dict.f_acs
        )));
    }
    let (nx, ny) = (
        dict.entries[0].lowfreq_frames.shape()[0],
        dict.entries[0].lowfreq_frames.shape()[1],
    );
    if y_test.nx() != nx {
        return Err(Error::DimensionMismatch("nx"));
    }
    if y_test.ny() != ny {
        return Err(Error::DimensionMismatch("ny"));
    }
    let x_test = lowfreq_frame(y_test, 0, f_acs)?;
    if x_test.iter().map(|v| v * v).sum::<f64>() == 0.0 {
        return Err(Error::ZeroNormTestFrame);
    }

    let scored: Vec<(f64, &DictionaryEntry)> = dict
        .entries
        .par_iter()
        .map(|e| entry_best(&x_test, e).map(|(d, _)| (d, e)))
        .collect::<Result<_>>()?;

    // Deterministic reduction: min by (distance, slice_id).
    let mut best = &scored[0];
    for cand in &scored[1..] {
        if cand.0 < best.0 || (cand.0 == best.0 && cand.1.slice_id < best.1.slice_id) {
            best = cand;
        }
    }
    Ok(MaskSelection {
        mask: best.1.mask.clone(),
        neighbor_slice_id: best.1.slice_id.clone(),
        best_d: best.0,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct DictionaryIndexEntry {
    slice_id: String,
    frames_file: String,
    accel: f64,
    mask: MaskDocument,
}

#[derive(Debug, Serialize, Deserialize)]
struct DictionaryIndex {
    f_acs: usize,
    entries: Vec<DictionaryIndexEntry>,
}

fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `index.json` plus one frame-stack container per entry into `dir`.
pub fn save_dictionary<P: AsRef<Path>>(dict: &MaskDictionary, dir: P) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut index = DictionaryIndex {
        f_acs: dict.f_acs,
        entries: Vec::with_capacity(dict.entries.len()),
    };
    for (i, e) in dict.entries.iter().enumerate() {
        let frames_file = format!("{:04}_{}.ksd", i, sanitize_id(&e.slice_id));
        let complex = e.lowfreq_frames.mapv(|v| Complex64::new(v, 0.0));
        write_container(
            &Container::Cine(CineSeries::new(complex)?),
            dir.join(&frames_file),
        )?;
        index.entries.push(DictionaryIndexEntry {
            slice_id: e.slice_id.clone(),
            frames_file,
            accel: e.accel,
            mask: MaskDocument::from_mask(&e.mask, format!("dictionary entry {}", e.slice_id)),
        });
    }
    let mut f = BufWriter::new(fs::File::create(dir.join("index.json"))?);
    serde_json::to_writer_pretty(&mut f, &index)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn load_dictionary<P: AsRef<Path>>(dir: P) -> Result<MaskDictionary> {
    let dir = dir.as_ref();
    let f = BufReader::new(fs::File::open(dir.join("index.json"))?);
    let index: DictionaryIndex = serde_json::from_reader(f)?;
    let mut entries = Vec::with_capacity(index.entries.len());
    for e in index.entries {
        let cine = read_container(dir.join(&e.frames_file))?.into_cine()?;
        entries.push(DictionaryEntry {
            slice_id: e.slice_id,
            lowfreq_frames: cine.data().mapv(|c| c.norm()),
            mask: e.mask.to_mask()?,
            accel: e.accel,
        });
    }
    Ok(MaskDictionary {
        f_acs: index.f_acs,
        entries,
    })
}
