//! Training losses. Each returns its value together with gradients with
//! respect to the representations it reads; [`crate::model::backward`]
//! carries those to the parameters.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::FeatureMatrix;
use crate::dense::Matrix;
use crate::error::{CoreError, Result};
use crate::math::{
    axpy, cosine, cosine_grad_x, dot, exp, ln, norm, normalize_backward, sigmoid, softplus,
};
use crate::model::{RepGrads, Representations};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Content-category alignment weight.
    pub alpha: f64,
    /// User-item alignment weight.
    pub beta: f64,
    /// Similarity regularizer weight.
    pub lambda: f64,
    /// InfoNCE temperature.
    pub tau: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 0.01,
            beta: 0.1,
            lambda: 0.1,
            tau: 0.2,
        }
    }
}

impl LossWeights {
    /// Weights may be zero (ablations); the temperature must be positive.
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lambda", self.lambda),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(CoreError::Config(format!(
                    "loss weight {name} = {w} must be non-negative"
                )));
            }
        }
        if !self.tau.is_finite() || self.tau <= 0.0 {
            return Err(CoreError::Config(format!(
                "temperature tau = {} must be positive",
                self.tau
            )));
        }
        Ok(())
    }
}

/// `(user, positive item, negative item)` triples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchSample {
    pub users: Vec<usize>,
    pub pos_items: Vec<usize>,
    pub neg_items: Vec<usize>,
}

impl BatchSample {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.is_empty() {
            return Err(CoreError::EmptyInput("empty batch".into()));
        }
        if self.pos_items.len() != self.len() || self.neg_items.len() != self.len() {
            return Err(CoreError::Dimension(
                "batch columns have different lengths".into(),
            ));
        }
        Ok(())
    }

    /// Distinct positive items, ascending.
    pub fn distinct_items(&self) -> Vec<usize> {
        distinct(&self.pos_items)
    }

    /// Distinct users, ascending.
    pub fn distinct_users(&self) -> Vec<usize> {
        distinct(&self.users)
    }
}

fn distinct(xs: &[usize]) -> Vec<usize> {
    let mut v = xs.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub grads: RepGrads,
    /// Pairs skipped because a vector had zero norm.
    pub degenerate: usize,
}

/// Mean of `-ln σ(s(u,i) - s(u,i'))`, computed as `softplus(-(s_pos - s_neg))`.
pub fn bpr_loss(reps: &Representations, batch: &BatchSample) -> Result<LossOutput> {
    batch.check()?;
    let mut grads = RepGrads::zeros_for(reps);
    let n = batch.len() as f64;
    let mut total = 0.0;
    for k in 0..batch.len() {
        let (u, i, j) = (batch.users[k], batch.pos_items[k], batch.neg_items[k]);
        let hu = reps.h_users.row(u);
        let hi = reps.h_items.row(i);
        let hj = reps.h_items.row(j);
        let x = dot(hu, hi) - dot(hu, hj);
        total += softplus(-x);
        // d/dx softplus(-x) = -σ(-x)
        let g = -sigmoid(-x) / n;
        let gu = grads.h_users.row_mut(u);
        axpy(gu, g, hi);
        axpy(gu, -g, hj);
        axpy(grads.h_items.row_mut(i), g, hu);
        axpy(grads.h_items.row_mut(j), -g, hu);
    }
    Ok(LossOutput {
        value: total / n,
        grads,
        degenerate: 0,
    })
}

/// One side of the InfoNCE objective: mean over `ids` of the softmax
/// cross-entropy that picks `targets[a]` for `anchors[a]` among all targets.
/// Accumulates gradients into the two gradient matrices.
fn info_nce_side(
    anchors: &Matrix,
    targets: &Matrix,
    ids: &[usize],
    tau: f64,
    g_anchor: &mut Matrix,
    g_target: &mut Matrix,
) -> f64 {
    let n = ids.len();
    let d = anchors.cols();
    let unit = |m: &Matrix, r: usize| -> Vec<f64> {
        let row = m.row(r);
        let len = norm(row);
        if len == 0.0 {
            vec![0.0; d]
        } else {
            row.iter().map(|v| v / len).collect()
        }
    };
    let a_hat: Vec<Vec<f64>> = ids.iter().map(|&r| unit(anchors, r)).collect();
    let t_hat: Vec<Vec<f64>> = ids.iter().map(|&r| unit(targets, r)).collect();
    let mut ga_hat = vec![vec![0.0; d]; n];
    let mut gt_hat = vec![vec![0.0; d]; n];
    let scale = 1.0 / (n as f64 * tau);
    let mut total = 0.0;
    let mut probs = vec![0.0; n];
    for a in 0..n {
        let logits: Vec<f64> = (0..n).map(|b| dot(&a_hat[a], &t_hat[b]) / tau).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (p, &l) in probs.iter_mut().zip(&logits) {
            *p = exp(l - max);
            z += *p;
        }
        total += max + ln(z) - logits[a];
        for b in 0..n {
            let coef = probs[b] / z - if a == b { 1.0 } else { 0.0 };
            axpy(&mut ga_hat[a], coef * scale, &t_hat[b]);
            axpy(&mut gt_hat[b], coef * scale, &a_hat[a]);
        }
    }
    for (k, &r) in ids.iter().enumerate() {
        normalize_backward(anchors.row(r), &ga_hat[k], 1.0, g_anchor.row_mut(r));
        normalize_backward(targets.row(r), &gt_hat[k], 1.0, g_target.row_mut(r));
    }
    total / n as f64
}

/// Content-category alignment: in-batch InfoNCE between L2-normalized
/// multimodal and ID representations, item side plus user side. Negatives are
/// the other distinct items (users) of the batch.
pub fn cca_infonce(reps: &Representations, batch: &BatchSample, tau: f64) -> Result<LossOutput> {
    batch.check()?;
    if tau.is_nan() || tau <= 0.0 {
        return Err(CoreError::Config(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let mut grads = RepGrads::zeros_for(reps);
    let items = batch.distinct_items();
    let users = batch.distinct_users();
    let item_term = info_nce_side(
        &reps.h_mm_items,
        &reps.h_id_items,
        &items,
        tau,
        &mut grads.mm_items,
        &mut grads.id_items,
    );
    let user_term = info_nce_side(
        &reps.h_mm_users,
        &reps.h_id_users,
        &users,
        tau,
        &mut grads.mm_users,
        &mut grads.id_users,
    );
    Ok(LossOutput {
        value: item_term + user_term,
        grads,
        degenerate: 0,
    })
}

/// Keeps pairwise cosine similarities of multimodal item representations
/// close to those of the frozen input features: mean over distinct in-batch
/// item pairs of `|C(h_mm^i, h_mm^j) - C(h_enc^i, h_enc^j)|`.
pub fn reg_similarity(
    reps: &Representations,
    feat: &FeatureMatrix,
    batch: &BatchSample,
) -> Result<LossOutput> {
    batch.check()?;
    feat.expect_rows(reps.h_mm_items.rows())?;
    let mut grads = RepGrads::zeros_for(reps);
    let items = batch.distinct_items();
    if items.len() < 2 {
        return Ok(LossOutput {
            value: 0.0,
            grads,
            degenerate: 0,
        });
    }
    let d = reps.h_mm_items.cols();
    let unit = |row: &[f64]| -> (Vec<f64>, f64) {
        let len = norm(row);
        if len == 0.0 {
            (vec![0.0; row.len()], 0.0)
        } else {
            (row.iter().map(|v| v / len).collect(), len)
        }
    };
    let enc: Vec<Vec<f64>> = items.iter().map(|&i| unit(feat.row(i)).0).collect();
    let mm: Vec<(Vec<f64>, f64)> = items
        .iter()
        .map(|&i| unit(reps.h_mm_items.row(i)))
        .collect();
    let n = items.len();
    let pairs = (n * (n - 1) / 2) as f64;
    // Gradient w.r.t. the unit vectors, mapped back through the norm at the end.
    let mut g_hat = vec![vec![0.0; d]; n];
    let mut total = 0.0;
    let mut degenerate = 0;
    for a in 0..n {
        for b in (a + 1)..n {
            let target = dot(&enc[a], &enc[b]);
            let c = dot(&mm[a].0, &mm[b].0);
            let diff = c - target;
            total += diff.abs();
            if mm[a].1 == 0.0 || mm[b].1 == 0.0 {
                degenerate += 1;
                continue;
            }
            let s = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            if s != 0.0 {
                axpy(&mut g_hat[a], s / pairs, &mm[b].0);
                axpy(&mut g_hat[b], s / pairs, &mm[a].0);
            }
        }
    }
    for (k, &i) in items.iter().enumerate() {
        normalize_backward(
            reps.h_mm_items.row(i),
            &g_hat[k],
            1.0,
            grads.mm_items.row_mut(i),
        );
    }
    Ok(LossOutput {
        value: total / pairs,
        grads,
        degenerate,
    })
}

/// User-item alignment: mean over positive pairs of `1 - C(h^i, h^u)`.
pub fn uia_cosine(reps: &Representations, batch: &BatchSample) -> Result<LossOutput> {
    batch.check()?;
    let mut grads = RepGrads::zeros_for(reps);
    let n = batch.len() as f64;
    let mut total = 0.0;
    let mut degenerate = 0;
    for k in 0..batch.len() {
        let (u, i) = (batch.users[k], batch.pos_items[k]);
        let hu = reps.h_users.row(u);
        let hi = reps.h_items.row(i);
        if norm(hu) == 0.0 || norm(hi) == 0.0 {
            degenerate += 1;
            total += 1.0;
            continue;
        }
        total += 1.0 - cosine(hi, hu);
        cosine_grad_x(hi, hu, -1.0 / n, grads.h_items.row_mut(i));
        cosine_grad_x(hu, hi, -1.0 / n, grads.h_users.row_mut(u));
    }
    Ok(LossOutput {
        value: total / n,
        grads,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub bpr: f64,
    pub cca: f64,
    pub uia: f64,
    pub reg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub components: LossComponents,
    pub grads: RepGrads,
    pub degenerate: usize,
}

/// `L_BPR + α L_CCA + β L_UIA + λ L_REG`.
pub fn total_loss(
    reps: &Representations,
    feat: &FeatureMatrix,
    batch: &BatchSample,
    weights: &LossWeights,
) -> Result<TotalLoss> {
    let bpr = bpr_loss(reps, batch)?;
    let cca = cca_infonce(reps, batch, weights.tau)?;
    let uia = uia_cosine(reps, batch)?;
    let reg = reg_similarity(reps, feat, batch)?;
    Ok(combine(&bpr, &cca, &uia, &reg, weights))
}

/// Weighted sum of already computed components.
pub fn combine(
    bpr: &LossOutput,
    cca: &LossOutput,
    uia: &LossOutput,
    reg: &LossOutput,
    w: &LossWeights,
) -> TotalLoss {
    let mut grads = bpr.grads.clone();
    grads.add_scaled(&cca.grads, w.alpha);
    grads.add_scaled(&uia.grads, w.beta);
    grads.add_scaled(&reg.grads, w.lambda);
    TotalLoss {
        value: bpr.value + w.alpha * cca.value + w.beta * uia.value + w.lambda * reg.value,
        components: LossComponents {
            bpr: bpr.value,
            cca: cca.value,
            uia: uia.value,
            reg: reg.value,
        },
        grads,
        degenerate: uia.degenerate + reg.degenerate,
    }
}
