//! Feature-quality protocols that need no trained parameters: zero-shot
//! next-item retrieval, item-CF target retrieval and the masked-modality
//! variant of either.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{CoreError, Result};
use crate::eval::{self, normalize_ks, EvalReport, Slice};
use crate::math::{dot, floor, norm, sqrt};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub ks: Vec<usize>,
    /// Fraction of items whose features are replaced in the masked variant.
    pub mask_ratio: f64,
    pub mask_seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            ks: eval::DEFAULT_KS.to_vec(),
            mask_ratio: 0.5,
            mask_seed: 0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(CoreError::Config(
                "protocol Ks must be a nonempty list of positive values".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.mask_ratio) {
            return Err(CoreError::Config(format!(
                "mask ratio {} outside [0, 1]",
                self.mask_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseProtocol {
    ZeroShot,
    ItemCf,
}

/// Ranks `candidates` by cosine similarity between `query` and their feature
/// rows, returning the top `k` item indices.
fn cosine_top_k(
    feat: &FeatureMatrix,
    norms: &[f64],
    query: &[f64],
    candidates: impl Iterator<Item = usize>,
    k: usize,
) -> Vec<usize> {
    let qn = norm(query);
    let cand: Vec<(usize, f64)> = candidates
        .map(|j| {
            let denom = qn * norms[j];
            let s = if denom == 0.0 {
                0.0
            } else {
                dot(query, feat.row(j)) / denom
            };
            (j, s)
        })
        .collect();
    eval::top_k(cand, k).into_iter().map(|(j, _)| j).collect()
}

fn hit_metrics(ranked: &[usize], relevant: &[usize], ks: &[usize]) -> Vec<(f64, f64)> {
    ks.iter()
        .map(|&k| {
            (
                eval::recall_at_k(ranked, relevant, k),
                eval::ndcg_at_k(ranked, relevant, k),
            )
        })
        .collect()
}

/// Retrieves each user's held-out items from the mean feature of their
/// training history. Candidates are all items outside the history.
pub fn zero_shot_eval(
    feat: &FeatureMatrix,
    ds: &Dataset,
    cfg: &ProtocolConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    feat.expect_rows(ds.num_items)?;
    let ks = normalize_ks(&cfg.ks);
    let max_k = *ks.last().expect("validated nonempty");
    let history = ds.user_train_items();
    let targets = ds.per_user(&ds.test);
    let norms = feat.row_norms();
    let d = feat.dim();
    let mut per_user = Vec::new();
    let mut skipped = 0;
    for (u, target) in targets.iter().enumerate() {
        if target.is_empty() {
            continue;
        }
        let hist = &history[u];
        if hist.is_empty() {
            skipped += 1;
            continue;
        }
        // History is sorted, so the sum order does not depend on log order.
        let mut profile = vec![0.0; d];
        for &j in hist {
            crate::math::axpy(&mut profile, 1.0, feat.row(j));
        }
        let inv = 1.0 / hist.len() as f64;
        profile.iter_mut().for_each(|v| *v *= inv);
        let cands = (0..ds.num_items).filter(|j| hist.binary_search(j).is_err());
        let ranked = cosine_top_k(feat, &norms, &profile, cands, max_k);
        per_user.push(hit_metrics(&ranked, target, &ks));
    }
    Ok(eval::reduce(Slice::Full, &ks, &per_user, skipped))
}

/// Co-occurrence cosine `|U_i ∩ U_j| / sqrt(|U_i| |U_j|)` over training
/// interactions, diagonal excluded.
pub fn itemcf_score(ds: &Dataset) -> SparseMatrix {
    let item_users = ds.item_train_users();
    let user_items = ds.user_train_items();
    let mut counts = vec![0usize; ds.num_items];
    let mut touched: Vec<usize> = Vec::new();
    let mut rows = Vec::with_capacity(ds.num_items);
    for i in 0..ds.num_items {
        for &u in &item_users[i] {
            for &j in &user_items[u] {
                if j == i {
                    continue;
                }
                if counts[j] == 0 {
                    touched.push(j);
                }
                counts[j] += 1;
            }
        }
        touched.sort_unstable();
        let row: Vec<(usize, f64)> = touched
            .iter()
            .map(|&j| {
                let denom = sqrt((item_users[i].len() * item_users[j].len()) as f64);
                (j, counts[j] as f64 / denom)
            })
            .collect();
        for &j in &touched {
            counts[j] = 0;
        }
        touched.clear();
        rows.push(row);
    }
    SparseMatrix::from_rows(ds.num_items, rows).expect("rows built sorted and finite")
}

/// For every item with a nonzero CF row, retrieves its highest-CF partner by
/// feature cosine among all other items.
pub fn itemcf_eval(feat: &FeatureMatrix, ds: &Dataset, cfg: &ProtocolConfig) -> Result<EvalReport> {
    cfg.validate()?;
    feat.expect_rows(ds.num_items)?;
    let ks = normalize_ks(&cfg.ks);
    let max_k = *ks.last().expect("validated nonempty");
    let cf = itemcf_score(ds);
    let norms = feat.row_norms();
    let mut per_item = Vec::new();
    let mut skipped = 0;
    for j in 0..ds.num_items {
        let (cols, vals) = cf.row(j);
        // Columns ascend, so the first maximum is the lowest index.
        let mut best: Option<(usize, f64)> = None;
        for (&c, &v) in cols.iter().zip(vals) {
            if best.is_none_or(|b| v > b.1) {
                best = Some((c, v));
            }
        }
        let Some((target, _)) = best else {
            skipped += 1;
            continue;
        };
        let ranked = cosine_top_k(
            feat,
            &norms,
            feat.row(j),
            (0..ds.num_items).filter(|&c| c != j),
            max_k,
        );
        per_item.push(hit_metrics(&ranked, &[target], &ks));
    }
    Ok(eval::reduce(Slice::Full, &ks, &per_item, skipped))
}

/// Item indices whose rows get replaced: `floor(ratio * n)` drawn uniformly.
pub fn mask_indices(num_items: usize, ratio: f64, seed: u64) -> Vec<usize> {
    let count = (floor(ratio * num_items as f64 + 1e-9) as usize).min(num_items);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, num_items, count).into_vec();
    picked.sort_unstable();
    picked
}

/// Replaces a random subset of rows of `primary` with the matching rows of
/// `masked`, then runs the base protocol on the result.
pub fn mask_modality_eval(
    primary: &FeatureMatrix,
    masked: &FeatureMatrix,
    cfg: &ProtocolConfig,
    base: BaseProtocol,
    ds: &Dataset,
) -> Result<EvalReport> {
    cfg.validate()?;
    if primary.rows() != masked.rows() || primary.dim() != masked.dim() {
        return Err(CoreError::Dimension(format!(
            "primary features are {}x{}, masked {}x{}",
            primary.rows(),
            primary.dim(),
            masked.rows(),
            masked.dim()
        )));
    }
    let picked = mask_indices(primary.rows(), cfg.mask_ratio, cfg.mask_seed);
    let mut data = primary.as_slice().to_vec();
    let d = primary.dim();
    for &i in &picked {
        data[i * d..(i + 1) * d].copy_from_slice(masked.row(i));
    }
    let composite = FeatureMatrix::new(primary.rows(), d, data)?;
    match base {
        BaseProtocol::ZeroShot => zero_shot_eval(&composite, ds, cfg),
        BaseProtocol::ItemCf => itemcf_eval(&composite, ds, cfg),
    }
}
