//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes  "STXGCN\0\0"
//! version   u32      1
//! dropout   f64
//! count     u32      number of matrices (2)
//! per matrix:
//!   rows    u64
//!   cols    u64
//!   values  rows*cols f64, row-major
//! ```
//!
//! A JSON sidecar next to the binary carries the training config, the class
//! list and the taxonomy fingerprint.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::GcnModel;
use super::train::TrainConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"STXGCN\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub config: TrainConfig,
    pub graph_kind: String,
    pub classes: Vec<String>,
    pub taxonomy_fingerprint: String,
    pub selected_epoch: usize,
    /// Wall-clock creation time; the only non-reproducible field.
    pub created_at: String,
}

pub fn write_model<W: Write>(mut out: W, model: &GcnModel) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&model.dropout_rate.to_le_bytes())?;
    out.write_all(&2u32.to_le_bytes())?;
    for m in [&model.w0, &model.w1] {
        out.write_all(&(m.nrows() as u64).to_le_bytes())?;
        out.write_all(&(m.ncols() as u64).to_le_bytes())?;
        for v in m.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn take<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_model<R: Read>(mut input: R) -> Result<GcnModel> {
    let bad = |m: &str| Error::format("checkpoint", m);
    if &take::<8>(&mut input)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(take(&mut input)?);
    if version != CHECKPOINT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let dropout = f64::from_le_bytes(take(&mut input)?);
    let count = u32::from_le_bytes(take(&mut input)?);
    if count != 2 {
        return Err(bad(&format!("expected 2 matrices, found {count}")));
    }
    let mut mats = Vec::with_capacity(2);
    for _ in 0..2 {
        let rows = u64::from_le_bytes(take(&mut input)?) as usize;
        let cols = u64::from_le_bytes(take(&mut input)?) as usize;
        let len = rows.checked_mul(cols).filter(|&l| l <= 1 << 32).ok_or_else(|| bad("matrix too large"))?;
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(f64::from_le_bytes(take(&mut input)?));
        }
        mats.push(Array2::from_shape_vec((rows, cols), values).map_err(|e| bad(&e.to_string()))?);
    }
    let w1 = mats.pop().unwrap();
    let w0 = mats.pop().unwrap();
    GcnModel::new(w0, w1, dropout)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `path` and `path.json`.
pub fn save_checkpoint(path: impl AsRef<Path>, model: &GcnModel, meta: &CheckpointMeta) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    write_model(&mut bytes, model)?;
    fs::write(path, bytes)?;
    fs::write(sidecar(path), serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(GcnModel, CheckpointMeta)> {
    let path = path.as_ref();
    let model = read_model(fs::File::open(path)?)?;
    let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(sidecar(path))?)?;
    if meta.classes.len() < model.classes() {
        return Err(Error::format(
            path,
            format!("sidecar lists {} classes, model has {}", meta.classes.len(), model.classes()),
        ));
    }
    Ok((model, meta))
}
