//! The three sparse operators the model propagates over: normalized
//! bipartite adjacency, normalized interaction matrix and the item-item kNN
//! similarity graph.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{CoreError, Result};
use crate::math::{dot, sqrt};
use crate::sparse::SparseMatrix;

/// Training-graph degrees, `(user_degree, item_degree)`. Errors on any node
/// without a training interaction.
fn train_degrees(ds: &Dataset) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut du = vec![0usize; ds.num_users];
    let mut di = vec![0usize; ds.num_items];
    for &(u, i) in &ds.train {
        du[u] += 1;
        di[i] += 1;
    }
    if let Some(u) = du.iter().position(|&d| d == 0) {
        return Err(CoreError::Invariant(format!(
            "user {u} has no training interaction"
        )));
    }
    if let Some(i) = di.iter().position(|&d| d == 0) {
        return Err(CoreError::Invariant(format!(
            "item {i} has no training interaction"
        )));
    }
    Ok((du, di))
}

#[inline]
fn edge_weight(du: usize, di: usize) -> f64 {
    1.0 / sqrt((du as f64) * (di as f64))
}

/// `D^{-1/2} A D^{-1/2}` over the `(users + items)` node set, users first.
pub fn build_norm_adjacency(ds: &Dataset) -> Result<SparseMatrix> {
    let (du, di) = train_degrees(ds)?;
    let nu = ds.num_users;
    let n = nu + ds.num_items;
    let mut trip = Vec::with_capacity(2 * ds.train.len());
    for &(u, i) in &ds.train {
        let w = edge_weight(du[u], di[i]);
        trip.push((u, nu + i, w));
        trip.push((nu + i, u, w));
    }
    SparseMatrix::from_triplets(n, n, trip)
}

/// User-by-item block of the normalized adjacency.
pub fn build_norm_interaction(ds: &Dataset) -> Result<SparseMatrix> {
    let (du, di) = train_degrees(ds)?;
    let trip = ds
        .train
        .iter()
        .map(|&(u, i)| (u, i, edge_weight(du[u], di[i])))
        .collect();
    SparseMatrix::from_triplets(ds.num_users, ds.num_items, trip)
}

/// Validates kNN inputs and returns the feature row norms.
pub fn knn_prepare(feat: &FeatureMatrix, k_prime: usize) -> Result<Vec<f64>> {
    if feat.rows() < 2 {
        return Err(CoreError::Config(
            "similarity graph needs at least two items".into(),
        ));
    }
    if k_prime == 0 || k_prime >= feat.rows() {
        return Err(CoreError::Config(format!(
            "k' = {k_prime} must lie in [1, {}) for {} items",
            feat.rows(),
            feat.rows()
        )));
    }
    let norms = feat.row_norms();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(CoreError::Data(format!(
            "item {i} has a zero-norm feature vector"
        )));
    }
    Ok(norms)
}

/// The `k_prime` most similar other items of item `i`, by cosine, with
/// negative similarities clamped away. Ties go to the lower item index.
/// Returned sorted by item index.
pub fn knn_row(feat: &FeatureMatrix, norms: &[f64], i: usize, k_prime: usize) -> Vec<(usize, f64)> {
    let xi = feat.row(i);
    let mut cand: Vec<(usize, f64)> = (0..feat.rows())
        .filter(|&j| j != i)
        .map(|j| (j, dot(xi, feat.row(j)) / (norms[i] * norms[j])))
        .collect();
    if cand.len() > k_prime {
        cand.select_nth_unstable_by(k_prime - 1, crate::eval::rank_order);
        cand.truncate(k_prime);
    }
    cand.retain(|&(_, s)| s > 0.0);
    cand.sort_unstable_by_key(|&(j, _)| j);
    cand
}

/// Symmetric degree normalization of kept kNN rows:
/// `S_ij = s_ij / sqrt(d_i d_j)` with `d` the row sums.
pub fn normalize_knn(rows: Vec<Vec<(usize, f64)>>) -> Result<SparseMatrix> {
    let n = rows.len();
    let deg: Vec<f64> = rows.iter().map(|r| r.iter().map(|e| e.1).sum()).collect();
    let normalized = rows
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .filter(|&(j, _)| deg[j] > 0.0)
                .map(|(j, s)| (j, s / sqrt(deg[i] * deg[j])))
                .collect()
        })
        .collect();
    SparseMatrix::from_rows(n, normalized)
}

/// Item-item kNN similarity graph over feature cosine similarity.
pub fn build_knn_similarity(feat: &FeatureMatrix, k_prime: usize) -> Result<SparseMatrix> {
    let norms = knn_prepare(feat, k_prime)?;
    let rows = (0..feat.rows())
        .map(|i| knn_row(feat, &norms, i, k_prime))
        .collect();
    normalize_knn(rows)
}

/// The propagation operators, built once from training data and frozen
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBundle {
    pub adj_norm: SparseMatrix,
    pub inter_norm: SparseMatrix,
    pub sim: SparseMatrix,
    inter_norm_t: SparseMatrix,
    sim_t: SparseMatrix,
}

impl GraphBundle {
    pub fn build(ds: &Dataset, feat: &FeatureMatrix, k_prime: usize) -> Result<Self> {
        feat.expect_rows(ds.num_items)?;
        let adj = build_norm_adjacency(ds)?;
        let inter = build_norm_interaction(ds)?;
        let sim = build_knn_similarity(feat, k_prime)?;
        Self::from_parts(adj, inter, sim)
    }

    pub fn from_parts(
        adj_norm: SparseMatrix,
        inter_norm: SparseMatrix,
        sim: SparseMatrix,
    ) -> Result<Self> {
        let (nu, ni) = (inter_norm.rows(), inter_norm.cols());
        if adj_norm.rows() != nu + ni
            || adj_norm.cols() != nu + ni
            || sim.rows() != ni
            || sim.cols() != ni
        {
            return Err(CoreError::Dimension(format!(
                "graph shapes disagree: adjacency {}x{}, interaction {nu}x{ni}, similarity {}x{}",
                adj_norm.rows(),
                adj_norm.cols(),
                sim.rows(),
                sim.cols()
            )));
        }
        Ok(GraphBundle {
            inter_norm_t: inter_norm.transpose(),
            sim_t: sim.transpose(),
            adj_norm,
            inter_norm,
            sim,
        })
    }

    pub fn num_users(&self) -> usize {
        self.inter_norm.rows()
    }

    pub fn num_items(&self) -> usize {
        self.inter_norm.cols()
    }

    pub(crate) fn inter_norm_t(&self) -> &SparseMatrix {
        &self.inter_norm_t
    }

    pub(crate) fn sim_t(&self) -> &SparseMatrix {
        &self.sim_t
    }
}
