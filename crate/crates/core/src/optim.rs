//! First-order optimizers over [`ModelParams`].

use alloc::vec::Vec;

use crate::math::{powi, sqrt};
use crate::model::{ModelParams, ParamGrads};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl OptimizerKind {
    pub const ADAM_DEFAULT: OptimizerKind = OptimizerKind::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::ADAM_DEFAULT
    }
}

/// Optimizer state: step count plus first and second moments (Adam only),
/// one flat buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &ModelParams) -> Self {
        let zeros = || {
            params
                .tensors()
                .iter()
                .map(|t| alloc::vec![0.0; t.as_slice().len()])
                .collect()
        };
        match kind {
            OptimizerKind::Adam { .. } => OptimizerState {
                kind,
                step: 0,
                m: zeros(),
                v: zeros(),
            },
            OptimizerKind::Sgd => OptimizerState {
                kind,
                step: 0,
                m: Vec::new(),
                v: Vec::new(),
            },
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ParamGrads, lr: f64) {
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                    for (pv, gv) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step.min(i32::MAX as u64) as i32;
                let bias1 = 1.0 - powi(beta1, t);
                let bias2 = 1.0 - powi(beta2, t);
                for (k, (p, g)) in params
                    .tensors_mut()
                    .into_iter()
                    .zip(grads.tensors())
                    .enumerate()
                {
                    adam_update(
                        p.as_mut_slice(),
                        g.as_slice(),
                        &mut self.m[k],
                        &mut self.v[k],
                        lr,
                        beta1,
                        beta2,
                        eps,
                        bias1,
                        bias2,
                    );
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bias1: f64,
    bias2: f64,
) {
    for k in 0..p.len() {
        m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
        v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
        let m_hat = m[k] / bias1;
        let v_hat = v[k] / bias2;
        p[k] -= lr * m_hat / (sqrt(v_hat) + eps);
    }
}

/// Per-epoch learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `lr * factor^(epoch - 1)` for 1-based epochs.
    MultiplicativeDecay { factor: f64 },
}

impl LrSchedule {
    pub fn rate(&self, base: f64, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::MultiplicativeDecay { factor } => {
                base * powi(factor, epoch.saturating_sub(1) as i32)
            }
        }
    }
}
