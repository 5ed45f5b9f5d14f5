//! Item feature files (`AFEA`) and their item-key sidecars.

use std::fs;
use std::path::Path;

use alignrec_core::{CoreError, FeatureMatrix, IdMap};

use crate::binfmt::{read_file, write_atomic, Reader, Writer};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"AFEA";
pub const VERSION: u32 = 1;

pub fn encode_features(feat: &FeatureMatrix) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, VERSION);
    w.usize(feat.rows());
    w.usize(feat.dim());
    w.f64s(feat.as_slice());
    w.into_bytes()
}

pub fn decode_features(
    path: &Path,
    bytes: &[u8],
    expected_rows: Option<usize>,
) -> Result<FeatureMatrix> {
    let (mut r, version) = Reader::open(path, bytes, MAGIC)?;
    if version != VERSION {
        return Err(r.err(format!("unsupported feature format version {version}")));
    }
    let rows = r.usize()?;
    let dim = r.usize()?;
    if let Some(expected) = expected_rows {
        if rows != expected {
            return Err(CoreError::Dimension(format!(
                "{} has {rows} feature rows, expected {expected}",
                path.display()
            ))
            .into());
        }
    }
    let n = rows
        .checked_mul(dim)
        .ok_or_else(|| r.err("rows x dim overflows"))?;
    let data = r.f64s(n)?;
    r.finish()?;
    Ok(FeatureMatrix::new(rows, dim, data)?)
}

pub fn write_features(path: &Path, feat: &FeatureMatrix) -> Result<()> {
    write_atomic(path, &encode_features(feat))
}

pub fn read_features(path: &Path, expected_rows: Option<usize>) -> Result<FeatureMatrix> {
    decode_features(path, &read_file(path)?, expected_rows)
}

/// One key per line; blank lines are not allowed.
pub fn read_keys(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut keys = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: "empty key".into(),
            });
        }
        keys.push(line.to_string());
    }
    Ok(keys)
}

pub fn write_keys(path: &Path, keys: &[String]) -> Result<()> {
    let mut text = keys.join("\n");
    if !keys.is_empty() {
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Reorders feature rows (listed in `row_keys` order) into the dataset's
/// item index order. Rows for unknown items are dropped with a warning; a
/// dataset item without a row is an error.
pub fn align_features(
    feat: &FeatureMatrix,
    row_keys: &[String],
    items: &IdMap,
) -> Result<FeatureMatrix> {
    if row_keys.len() != feat.rows() {
        return Err(CoreError::Dimension(format!(
            "feature file has {} rows but the sidecar lists {} keys",
            feat.rows(),
            row_keys.len()
        ))
        .into());
    }
    let mut row_of: Vec<Option<usize>> = vec![None; items.len()];
    let mut dropped = 0usize;
    for (row, key) in row_keys.iter().enumerate() {
        match items.index(key) {
            Some(i) => {
                if row_of[i].is_some() {
                    return Err(CoreError::Data(format!(
                        "item {key} has more than one feature row"
                    ))
                    .into());
                }
                row_of[i] = Some(row);
            }
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("dropping {dropped} feature rows for items absent from the interactions");
    }
    let order = row_of
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.ok_or_else(|| CoreError::Data(format!("item {} has no feature row", items.key(i))))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(feat.select_rows(&order))
}

/// Reads a feature file plus sidecar and aligns it to `items`.
pub fn load_aligned(features: &Path, keys: &Path, items: &IdMap) -> Result<FeatureMatrix> {
    let feat = read_features(features, None)?;
    let row_keys = read_keys(keys)?;
    align_features(&feat, &row_keys, items)
}
