//! Graph cache (`AGRF`): the three CSR graphs keyed by a SHA-256 digest of
//! the inputs that determine them.

use std::path::Path;

use alignrec_core::{Dataset, FeatureMatrix, GraphBundle, SparseMatrix};
use sha2::{Digest, Sha256};

use crate::binfmt::{read_file, write_atomic, Reader, Writer};
use crate::error::Result;

pub const MAGIC: &[u8; 4] = b"AGRF";
pub const VERSION: u32 = 1;

/// Digest of the training interactions, feature values and `k'`.
pub fn graph_key(ds: &Dataset, feat: &FeatureMatrix, k_prime: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"alignrec-graphs-1");
    for v in [
        ds.num_users,
        ds.num_items,
        ds.train.len(),
        feat.rows(),
        feat.dim(),
        k_prime,
    ] {
        h.update((v as u64).to_le_bytes());
    }
    for &(u, i) in &ds.train {
        h.update((u as u64).to_le_bytes());
        h.update((i as u64).to_le_bytes());
    }
    for &v in feat.as_slice() {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    Ok(hex(&Sha256::digest(read_file(path)?)))
}

fn put_csr(w: &mut Writer, m: &SparseMatrix) {
    w.usize(m.rows());
    w.usize(m.cols());
    w.usize(m.nnz());
    w.usizes(m.indptr());
    w.usizes(m.indices());
    w.f64s(m.values());
}

fn get_csr(r: &mut Reader) -> Result<SparseMatrix> {
    let rows = r.usize()?;
    let cols = r.usize()?;
    let nnz = r.usize()?;
    let indptr = r.usizes(
        rows.checked_add(1)
            .ok_or_else(|| r.err("row count overflows"))?,
    )?;
    let indices = r.usizes(nnz)?;
    let values = r.f64s(nnz)?;
    Ok(SparseMatrix::from_csr(rows, cols, indptr, indices, values)?)
}

pub fn encode(key: &[u8; 32], g: &GraphBundle) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, VERSION);
    w.bytes(key);
    put_csr(&mut w, &g.adj_norm);
    put_csr(&mut w, &g.inter_norm);
    put_csr(&mut w, &g.sim);
    w.into_bytes()
}

/// Decoded graphs with the key they were stored under.
pub fn decode(path: &Path, bytes: &[u8]) -> Result<([u8; 32], GraphBundle)> {
    let (mut r, version) = Reader::open(path, bytes, MAGIC)?;
    if version != VERSION {
        return Err(r.err(format!("unsupported graph cache version {version}")));
    }
    let mut key = [0u8; 32];
    key.copy_from_slice(r.take(32)?);
    let adj = get_csr(&mut r)?;
    let inter = get_csr(&mut r)?;
    let sim = get_csr(&mut r)?;
    r.finish()?;
    Ok((key, GraphBundle::from_parts(adj, inter, sim)?))
}

/// Cached graphs when `path` holds a readable entry for `key`.
pub fn load(path: &Path, key: &[u8; 32]) -> Option<GraphBundle> {
    let bytes = std::fs::read(path).ok()?;
    match decode(path, &bytes) {
        Ok((stored, g)) if &stored == key => Some(g),
        Ok(_) => {
            log::info!("graph cache {} is stale", path.display());
            None
        }
        Err(e) => {
            log::warn!("ignoring unreadable graph cache: {e}");
            None
        }
    }
}

pub fn store(path: &Path, key: &[u8; 32], g: &GraphBundle) -> Result<()> {
    write_atomic(path, &encode(key, g))
}
