//! Field snapshots: a flat little-endian `f64` payload (row-major, one
//! component after another, no header) plus a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrswError};
use crate::spectral::{ScalarField, TorusGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub n: usize,
    pub length: f64,
    pub components: Vec<String>,
    pub time: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

/// Paths of the payload and sidecar for a snapshot stem.
pub fn snapshot_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

pub fn encode_fields(fields: &[&ScalarField]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(fields.iter().map(|f| f.values().len() * 8).sum());
    for f in fields {
        for v in f.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

pub fn decode_fields(
    grid: &Arc<TorusGrid>,
    count: usize,
    bytes: &[u8],
) -> Result<Vec<ScalarField>> {
    let per = grid.n() * grid.n();
    if bytes.len() != count * per * 8 {
        return Err(SrswError::InsufficientData(format!(
            "snapshot payload has {} bytes, expected {}",
            bytes.len(),
            count * per * 8
        )));
    }
    bytes
        .chunks_exact(per * 8)
        .map(|chunk| {
            let vals = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
                .collect();
            ScalarField::from_values(grid, vals)
        })
        .collect()
}

pub fn write_snapshot(
    stem: &Path,
    names: &[&str],
    fields: &[&ScalarField],
    time: f64,
    seed: u64,
    extra: Option<serde_json::Value>,
) -> Result<()> {
    assert_eq!(names.len(), fields.len());
    let grid = fields
        .first()
        .map(|f| f.grid().clone())
        .ok_or_else(|| SrswError::InsufficientData("empty snapshot".into()))?;
    for f in fields {
        grid.check_same(f.grid())?;
    }
    let meta = SnapshotMeta {
        n: grid.n(),
        length: grid.length(),
        components: names.iter().map(|s| s.to_string()).collect(),
        time,
        seed,
        extra,
    };
    let (bin, json) = snapshot_paths(stem);
    fs::write(bin, encode_fields(fields))?;
    fs::write(json, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Reads a snapshot back; the grid is rebuilt from the sidecar.
pub fn read_snapshot(stem: &Path) -> Result<(SnapshotMeta, Vec<ScalarField>)> {
    let (bin, json) = snapshot_paths(stem);
    let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(json)?)?;
    let grid = TorusGrid::new(meta.n, meta.length)?;
    let fields = decode_fields(&grid, meta.components.len(), &fs::read(bin)?)?;
    Ok((meta, fields))
}
