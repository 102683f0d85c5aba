//! File formats: the `KSD1` binary array container and the mask JSON
//! document.
//!
//! KSD1 layout, little-endian throughout:
//!
//! ```text
//! offset 0   magic  b"KSD1"
//! offset 4   u32    version (currently 1)
//! offset 8   u8     kind: 0 = cine, 1 = kspace, 2 = sensitivities
//! offset 9   u32x4  dims d0..d3, unused trailing dims stored as 1
//! offset 25  f64x2  payload, interleaved (re, im) per element,
//!                   row-major with d3 fastest
//! ```
//!
//! Axis order per kind: cine `(nx, ny, nt, 1)`, kspace `(nx, ny, nt, nc)`,
//! sensitivities `(nx, ny, nc, 1)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array3, Array4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{CineSeries, CoilSensitivities, MultiCoilKSpace, SamplingMask};

pub const KSD1_MAGIC: [u8; 4] = *b"KSD1";
pub const KSD1_VERSION: u32 = 1;

const KIND_CINE: u8 = 0;
const KIND_KSPACE: u8 = 1;
const KIND_SENS: u8 = 2;

/// A value read from or written to a KSD1 file.
#[derive(Debug, Clone, PartialEq)]
pub enum Container {
    Cine(CineSeries),
    KSpace(MultiCoilKSpace),
    Sens(CoilSensitivities),
}

impl Container {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Container::Cine(_) => "cine",
            Container::KSpace(_) => "kspace",
            Container::Sens(_) => "sensitivities",
        }
    }

    pub fn into_cine(self) -> Result<CineSeries> {
        match self {
            Container::Cine(x) => Ok(x),
            other => Err(Error::UnexpectedKind {
                expected: "cine",
                found: other.kind_name(),
            }),
        }
    }

    pub fn into_kspace(self) -> Result<MultiCoilKSpace> {
        match self {
            Container::KSpace(y) => Ok(y),
            other => Err(Error::UnexpectedKind {
                expected: "kspace",
                found: other.kind_name(),
            }),
        }
    }

    pub fn into_sens(self) -> Result<CoilSensitivities> {
        match self {
            Container::Sens(s) => Ok(s),
            other => Err(Error::UnexpectedKind {
                expected: "sensitivities",
                found: other.kind_name(),
            }),
        }
    }
}

fn write_payload<'a, W: Write>(
    w: &mut W,
    values: impl Iterator<Item = &'a Complex64>,
) -> Result<()> {
    for v in values {
        w.write_f64::<LittleEndian>(v.re)?;
        w.write_f64::<LittleEndian>(v.im)?;
    }
    Ok(())
}

/// Writes a container to `path`, byte layout as documented above.
pub fn write_container<P: AsRef<Path>>(obj: &Container, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&KSD1_MAGIC)?;
    w.write_u32::<LittleEndian>(KSD1_VERSION)?;
    let (kind, dims): (u8, [u32; 4]) = match obj {
        Container::Cine(x) => (KIND_CINE, [x.nx() as u32, x.ny() as u32, x.nt() as u32, 1]),
        Container::KSpace(y) => (
            KIND_KSPACE,
            [y.nx() as u32, y.ny() as u32, y.nt() as u32, y.nc() as u32],
        ),
        Container::Sens(s) => (KIND_SENS, [s.nx() as u32, s.ny() as u32, s.nc() as u32, 1]),
    };
    w.write_u8(kind)?;
    for d in dims {
        w.write_u32::<LittleEndian>(d)?;
    }
    // Arrays are in standard (row-major) layout, so element order matches the
    // declared axis order with the last dim fastest.
    match obj {
        Container::Cine(x) => write_payload(&mut w, x.data().iter())?,
        Container::KSpace(y) => write_payload(&mut w, y.data().iter())?,
        Container::Sens(s) => write_payload(&mut w, s.data().iter())?,
    }
    w.flush()?;
    Ok(())
}

fn read_payload<R: Read>(r: &mut R, n: usize) -> Result<Vec<Complex64>> {
    let mut buf = vec![0u8; n * 16];
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => return Err(Error::TruncatedPayload),
            k => filled += k,
        }
    }
    let mut out = Vec::with_capacity(n);
    for chunk in buf.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

/// Reads a KSD1 container. For sensitivities the `normalized` flag is
/// re-derived from the payload (the format does not store it).
pub fn read_container<P: AsRef<Path>>(path: P) -> Result<Container> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    if r.read_exact(&mut magic).is_err() {
        return Err(Error::BadMagic);
    }
    if magic != KSD1_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::TruncatedPayload)?;
    if version != KSD1_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let kind = r.read_u8().map_err(|_| Error::TruncatedPayload)?;
    let mut dims = [0usize; 4];
    for d in dims.iter_mut() {
        *d = r
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::TruncatedPayload)? as usize;
    }
    if dims.contains(&0) {
        return Err(Error::MalformedContainer("zero-sized dimension".into()));
    }
    let n: usize = dims.iter().product();
    let payload = read_payload(&mut r, n)?;

    match kind {
        KIND_CINE => {
            if dims[3] != 1 {
                return Err(Error::MalformedContainer(
                    "cine container must have d3 = 1".into(),
                ));
            }
            let arr = Array3::from_shape_vec((dims[0], dims[1], dims[2]), payload)
                .map_err(|e| Error::MalformedContainer(e.to_string()))?;
            Ok(Container::Cine(CineSeries::new(arr)?))
        }
        KIND_KSPACE => {
            let arr = Array4::from_shape_vec((dims[0], dims[1], dims[2], dims[3]), payload)
                .map_err(|e| Error::MalformedContainer(e.to_string()))?;
            Ok(Container::KSpace(MultiCoilKSpace::new(arr)?))
        }
        KIND_SENS => {
            if dims[3] != 1 {
                return Err(Error::MalformedContainer(
                    "sensitivities container must have d3 = 1".into(),
                ));
            }
            let arr = Array3::from_shape_vec((dims[0], dims[1], dims[2]), payload)
                .map_err(|e| Error::MalformedContainer(e.to_string()))?;
            let normalized = CoilSensitivities::check_normalized(&arr);
            Ok(Container::Sens(CoilSensitivities::new(arr, normalized)?))
        }
        k => Err(Error::UnknownKind(k)),
    }
}

pub fn read_cine<P: AsRef<Path>>(path: P) -> Result<CineSeries> {
    read_container(path)?.into_cine()
}

pub fn read_kspace<P: AsRef<Path>>(path: P) -> Result<MultiCoilKSpace> {
    read_container(path)?.into_kspace()
}

pub fn read_sens<P: AsRef<Path>>(path: P) -> Result<CoilSensitivities> {
    read_container(path)?.into_sens()
}

/// Human-diffable on-disk form of a [`SamplingMask`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskDocument {
    pub ny: usize,
    pub budget: usize,
    pub lines: Vec<usize>,
    pub acs: Vec<usize>,
    pub provenance: String,
}

impl MaskDocument {
    pub fn from_mask(mask: &SamplingMask, provenance: impl Into<String>) -> Self {
        Self {
            ny: mask.ny(),
            budget: mask.budget(),
            lines: mask.lines().to_vec(),
            acs: mask.acs().to_vec(),
            provenance: provenance.into(),
        }
    }

    pub fn to_mask(&self) -> Result<SamplingMask> {
        let mask = SamplingMask::new(self.ny, self.lines.clone(), self.acs.clone())?;
        if mask.budget() != self.budget {
            return Err(Error::InvalidMask(format!(
                "declared budget {} does not match {} lines",
                self.budget,
                mask.budget()
            )));
        }
        Ok(mask)
    }
}

pub fn write_mask_json<P: AsRef<Path>>(
    mask: &SamplingMask,
    provenance: &str,
    path: P,
) -> Result<()> {
    let doc = MaskDocument::from_mask(mask, provenance);
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, &doc)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_mask_json<P: AsRef<Path>>(path: P) -> Result<(SamplingMask, String)> {
    let f = BufReader::new(File::open(path)?);
    let doc: MaskDocument = serde_json::from_reader(f)?;
    Ok((doc.to_mask()?, doc.provenance))
}
