//! Trainable parameters, the forward pass and its hand-derived backward pass.
//!
//! The forward pass is
//!
//! ```text
//! H_id      = mean(E, ÂE, ..., Â^L E)                   (LightGCN)
//! gate      = σ(W2 · relu(W1 · h_enc + b1) + b2)
//! h_con^i   = e_id^i ⊙ gate^i
//! H_mm^I    = S · H_con
//! H_mm^U    = R̂ · H_mm^I
//! h         = h_mm + h_id
//! ```
//!
//! Every step is linear in its previous output except the gate, so the
//! backward pass is short: push gradients through the transposed sparse
//! operators, then through the gating MLP.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::data::FeatureMatrix;
use crate::dense::Matrix;
use crate::error::{CoreError, Result};
use crate::graph::GraphBundle;
use crate::math::{dot, sigmoid, sqrt};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Embedding dimension.
    pub d_e: usize,
    /// Gating MLP hidden size.
    pub d_h: usize,
    /// LightGCN layers over the interaction graph.
    pub gcn_layers: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_e: 64,
            d_h: 64,
            gcn_layers: 2,
        }
    }
}

/// Parameter tensor names, in storage order.
pub const TENSOR_NAMES: [&str; 6] = [
    "user_emb", "item_emb", "gate.w1", "gate.b1", "gate.w2", "gate.b2",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub user_emb: Matrix,
    pub item_emb: Matrix,
    /// `d_f x d_h`
    pub w1: Matrix,
    /// `1 x d_h`
    pub b1: Matrix,
    /// `d_h x d_e`
    pub w2: Matrix,
    /// `1 x d_e`
    pub b2: Matrix,
}

fn xavier_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let bound = sqrt(6.0 / (rows + cols) as f64);
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
}

impl ModelParams {
    /// Xavier-uniform matrices, zero biases.
    pub fn init<R: Rng + ?Sized>(
        num_users: usize,
        num_items: usize,
        d_f: usize,
        cfg: &ModelConfig,
        rng: &mut R,
    ) -> Self {
        let user_emb = xavier_uniform(num_users, cfg.d_e, rng);
        let item_emb = xavier_uniform(num_items, cfg.d_e, rng);
        let w1 = xavier_uniform(d_f, cfg.d_h, rng);
        let w2 = xavier_uniform(cfg.d_h, cfg.d_e, rng);
        ModelParams {
            user_emb,
            item_emb,
            w1,
            b1: Matrix::zeros(1, cfg.d_h),
            w2,
            b2: Matrix::zeros(1, cfg.d_e),
        }
    }

    /// All-zero tensors with the same shapes as `self`.
    pub fn zeros_like(&self) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        ModelParams {
            user_emb: z(&self.user_emb),
            item_emb: z(&self.item_emb),
            w1: z(&self.w1),
            b1: z(&self.b1),
            w2: z(&self.w2),
            b2: z(&self.b2),
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_emb.rows()
    }

    pub fn num_items(&self) -> usize {
        self.item_emb.rows()
    }

    pub fn d_e(&self) -> usize {
        self.user_emb.cols()
    }

    pub fn d_f(&self) -> usize {
        self.w1.rows()
    }

    pub fn d_h(&self) -> usize {
        self.w1.cols()
    }

    pub fn tensors(&self) -> [&Matrix; 6] {
        [
            &self.user_emb,
            &self.item_emb,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 6] {
        [
            &mut self.user_emb,
            &mut self.item_emb,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
        ]
    }

    /// Rebuilds parameters from tensors in [`TENSOR_NAMES`] order, checking
    /// that the shapes fit together.
    pub fn from_tensors(tensors: [Matrix; 6]) -> Result<Self> {
        let [user_emb, item_emb, w1, b1, w2, b2] = tensors;
        let d_e = user_emb.cols();
        let d_h = w1.cols();
        let ok = item_emb.cols() == d_e
            && b1.shape() == (1, d_h)
            && w2.shape() == (d_h, d_e)
            && b2.shape() == (1, d_e);
        if !ok {
            return Err(CoreError::Dimension(
                "parameter tensor shapes are inconsistent".into(),
            ));
        }
        Ok(ModelParams {
            user_emb,
            item_emb,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.rows() * t.cols()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_scaled(b, scale);
        }
    }
}

/// Parameter gradients share the parameter layout.
pub type ParamGrads = ModelParams;

/// Every intermediate representation of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Representations {
    pub h_id_users: Matrix,
    pub h_id_items: Matrix,
    pub h_con_items: Matrix,
    pub h_mm_items: Matrix,
    pub h_mm_users: Matrix,
    pub h_users: Matrix,
    pub h_items: Matrix,
}

/// Gate activations kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GateCache {
    /// `W1 h_enc + b1`, before the ReLU.
    pub hidden_pre: Matrix,
    /// `σ(...)`, one row per item.
    pub gate: Matrix,
}

fn check_params(graphs: &GraphBundle, params: &ModelParams, feat: &FeatureMatrix) -> Result<()> {
    if params.num_users() != graphs.num_users() || params.num_items() != graphs.num_items() {
        return Err(CoreError::Dimension(format!(
            "parameters cover {} users x {} items, graphs {} x {}",
            params.num_users(),
            params.num_items(),
            graphs.num_users(),
            graphs.num_items()
        )));
    }
    if feat.rows() != params.num_items() || feat.dim() != params.d_f() {
        return Err(CoreError::Dimension(format!(
            "features are {}x{}, model expects {}x{}",
            feat.rows(),
            feat.dim(),
            params.num_items(),
            params.d_f()
        )));
    }
    Ok(())
}

/// Layer-mean propagation of a stacked `(users + items) x d` matrix.
fn propagate_mean(adj_norm: &SparseMatrix, stacked: &Matrix, layers: usize) -> Result<Matrix> {
    if adj_norm.cols() != stacked.rows() {
        return Err(CoreError::Dimension(format!(
            "adjacency is {}x{}, embedding stack has {} rows",
            adj_norm.rows(),
            adj_norm.cols(),
            stacked.rows()
        )));
    }
    let mut acc = stacked.clone();
    let mut layer = stacked.clone();
    for _ in 0..layers {
        layer = adj_norm.mul_dense(&layer)?;
        acc.add_scaled(&layer, 1.0);
    }
    acc.scale(1.0 / (layers + 1) as f64);
    Ok(acc)
}

/// LightGCN: `(1/(L+1)) Σ_l Â^l E`, split into user and item blocks.
pub fn lightgcn_propagate(
    adj_norm: &SparseMatrix,
    params: &ModelParams,
    layers: usize,
) -> Result<(Matrix, Matrix)> {
    let stacked = Matrix::vstack(&params.user_emb, &params.item_emb)?;
    let h = propagate_mean(adj_norm, &stacked, layers)?;
    Ok(h.split_rows(params.num_users()))
}

/// Gated content representation `e_id ⊙ σ(MLP(h_enc))`, with activations.
pub fn content_gate_cached(
    params: &ModelParams,
    feat: &FeatureMatrix,
) -> Result<(Matrix, GateCache)> {
    if feat.dim() != params.d_f() || feat.rows() != params.num_items() {
        return Err(CoreError::Dimension(format!(
            "features are {}x{}, gate expects {}x{}",
            feat.rows(),
            feat.dim(),
            params.num_items(),
            params.d_f()
        )));
    }
    let x = feat.to_matrix();
    let mut hidden_pre = x.matmul(&params.w1);
    for r in 0..hidden_pre.rows() {
        crate::math::axpy(hidden_pre.row_mut(r), 1.0, params.b1.row(0));
    }
    let mut hidden = hidden_pre.clone();
    hidden
        .as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = v.max(0.0));
    let mut gate = hidden.matmul(&params.w2);
    for r in 0..gate.rows() {
        let row = gate.row_mut(r);
        for (g, b) in row.iter_mut().zip(params.b2.row(0)) {
            *g = sigmoid(*g + b);
        }
    }
    let mut h_con = params.item_emb.clone();
    for (h, g) in h_con.as_mut_slice().iter_mut().zip(gate.as_slice()) {
        *h *= g;
    }
    Ok((h_con, GateCache { hidden_pre, gate }))
}

pub fn content_gate(params: &ModelParams, feat: &FeatureMatrix) -> Result<Matrix> {
    content_gate_cached(params, feat).map(|(h, _)| h)
}

/// One propagation layer over the similarity graph: `S · H_con`.
pub fn item_multimodal(sim: &SparseMatrix, h_con_items: &Matrix) -> Result<Matrix> {
    sim.mul_dense(h_con_items)
}

/// `R̂ · H_mm^I`.
pub fn user_multimodal(inter_norm: &SparseMatrix, h_mm_items: &Matrix) -> Result<Matrix> {
    inter_norm.mul_dense(h_mm_items)
}

/// Element-wise sum fusion.
pub fn fuse(h_mm: &Matrix, h_id: &Matrix) -> Result<Matrix> {
    h_mm.add(h_id)
}

/// Inner-product preference score.
#[inline]
pub fn score(h_user: &[f64], h_item: &[f64]) -> f64 {
    dot(h_user, h_item)
}

pub fn forward_cached(
    params: &ModelParams,
    graphs: &GraphBundle,
    feat: &FeatureMatrix,
    layers: usize,
) -> Result<(Representations, GateCache)> {
    check_params(graphs, params, feat)?;
    let (h_id_users, h_id_items) = lightgcn_propagate(&graphs.adj_norm, params, layers)?;
    let (h_con_items, cache) = content_gate_cached(params, feat)?;
    let h_mm_items = item_multimodal(&graphs.sim, &h_con_items)?;
    let h_mm_users = user_multimodal(&graphs.inter_norm, &h_mm_items)?;
    let h_items = fuse(&h_mm_items, &h_id_items)?;
    let h_users = fuse(&h_mm_users, &h_id_users)?;
    Ok((
        Representations {
            h_id_users,
            h_id_items,
            h_con_items,
            h_mm_items,
            h_mm_users,
            h_users,
            h_items,
        },
        cache,
    ))
}

pub fn forward(
    params: &ModelParams,
    graphs: &GraphBundle,
    feat: &FeatureMatrix,
    layers: usize,
) -> Result<Representations> {
    forward_cached(params, graphs, feat, layers).map(|(r, _)| r)
}

/// Loss gradients with respect to the representations a loss reads.
#[derive(Debug, Clone, PartialEq)]
pub struct RepGrads {
    pub h_users: Matrix,
    pub h_items: Matrix,
    pub mm_users: Matrix,
    pub mm_items: Matrix,
    pub id_users: Matrix,
    pub id_items: Matrix,
}

impl RepGrads {
    pub fn zeros(num_users: usize, num_items: usize, d: usize) -> Self {
        RepGrads {
            h_users: Matrix::zeros(num_users, d),
            h_items: Matrix::zeros(num_items, d),
            mm_users: Matrix::zeros(num_users, d),
            mm_items: Matrix::zeros(num_items, d),
            id_users: Matrix::zeros(num_users, d),
            id_items: Matrix::zeros(num_items, d),
        }
    }

    pub fn zeros_for(reps: &Representations) -> Self {
        Self::zeros(
            reps.h_users.rows(),
            reps.h_items.rows(),
            reps.h_users.cols(),
        )
    }

    fn parts(&self) -> [&Matrix; 6] {
        [
            &self.h_users,
            &self.h_items,
            &self.mm_users,
            &self.mm_items,
            &self.id_users,
            &self.id_items,
        ]
    }

    fn parts_mut(&mut self) -> [&mut Matrix; 6] {
        [
            &mut self.h_users,
            &mut self.h_items,
            &mut self.mm_users,
            &mut self.mm_items,
            &mut self.id_users,
            &mut self.id_items,
        ]
    }

    pub fn add_scaled(&mut self, other: &RepGrads, scale: f64) {
        for (a, b) in self.parts_mut().into_iter().zip(other.parts()) {
            a.add_scaled(b, scale);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.parts().iter().all(|m| m.is_finite())
    }
}

/// Maps representation gradients to parameter gradients.
pub fn backward(
    params: &ModelParams,
    graphs: &GraphBundle,
    feat: &FeatureMatrix,
    layers: usize,
    cache: &GateCache,
    grads: &RepGrads,
) -> Result<ParamGrads> {
    check_params(graphs, params, feat)?;
    let nu = params.num_users();

    // Fusion is a sum, so the fused gradient flows to both branches.
    let mut g_mm_users = grads.mm_users.clone();
    g_mm_users.add_scaled(&grads.h_users, 1.0);
    let mut g_mm_items = grads.mm_items.clone();
    g_mm_items.add_scaled(&grads.h_items, 1.0);
    g_mm_items.add_scaled(&graphs.inter_norm_t().mul_dense(&g_mm_users)?, 1.0);
    let g_con = graphs.sim_t().mul_dense(&g_mm_items)?;

    let mut g_id_users = grads.id_users.clone();
    g_id_users.add_scaled(&grads.h_users, 1.0);
    let mut g_id_items = grads.id_items.clone();
    g_id_items.add_scaled(&grads.h_items, 1.0);
    // Â is symmetric, so the adjoint of layer-mean propagation is itself.
    let g_stack = propagate_mean(
        &graphs.adj_norm,
        &Matrix::vstack(&g_id_users, &g_id_items)?,
        layers,
    )?;
    let (g_user_emb, mut g_item_emb) = g_stack.split_rows(nu);

    // h_con = e ⊙ g, g = σ(z2).
    let d_e = params.d_e();
    let mut g_z2 = Matrix::zeros(params.num_items(), d_e);
    {
        let gate = cache.gate.as_slice();
        let emb = params.item_emb.as_slice();
        let gc = g_con.as_slice();
        let gi = g_item_emb.as_mut_slice();
        let gz = g_z2.as_mut_slice();
        for k in 0..gate.len() {
            gi[k] += gc[k] * gate[k];
            gz[k] = gc[k] * emb[k] * gate[k] * (1.0 - gate[k]);
        }
    }
    let mut hidden = cache.hidden_pre.clone();
    hidden
        .as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = v.max(0.0));
    let g_w2 = hidden.t_matmul(&g_z2);
    let g_b2 = g_z2.col_sums();
    let mut g_z1 = g_z2.matmul_t(&params.w2);
    for (g, &pre) in g_z1
        .as_mut_slice()
        .iter_mut()
        .zip(cache.hidden_pre.as_slice())
    {
        if pre <= 0.0 {
            *g = 0.0;
        }
    }
    let g_w1 = feat.to_matrix().t_matmul(&g_z1);
    let g_b1 = g_z1.col_sums();
    Ok(ModelParams {
        user_emb: g_user_emb,
        item_emb: g_item_emb,
        w1: g_w1,
        b1: g_b1,
        w2: g_w2,
        b2: g_b2,
    })
}

/// Number of trainable scalars for a given shape.
pub fn expected_param_count(
    num_users: usize,
    num_items: usize,
    d_f: usize,
    cfg: &ModelConfig,
) -> usize {
    (num_users + num_items) * cfg.d_e + d_f * cfg.d_h + cfg.d_h + cfg.d_h * cfg.d_e + cfg.d_e
}

/// All parameters as one vector, tensors in [`TENSOR_NAMES`] order.
pub fn flatten(params: &ModelParams) -> Vec<f64> {
    params
        .tensors()
        .iter()
        .flat_map(|t| t.as_slice().iter().copied())
        .collect()
}
