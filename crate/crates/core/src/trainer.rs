//! Mini-batch optimization of the training objective with one sampled
//! negative per positive, per-epoch validation and best-epoch selection.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{CoreError, Result};
use crate::eval::{self, EvalReport, Split};
use crate::graph::GraphBundle;
use crate::losses::{self, BatchSample, LossComponents, LossWeights};
use crate::model::{self, ModelConfig, ModelParams, Representations};
use crate::optim::{LrSchedule, OptimizerKind, OptimizerState};

/// Validation metric cut-off used for model selection.
pub const SELECTION_K: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub weights: LossWeights,
    pub model: ModelConfig,
    /// Neighbours kept per item in the similarity graph.
    pub k_prime: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub lr_schedule: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-4,
            batch_size: 2048,
            max_epochs: 1000,
            patience: 20,
            weights: LossWeights::default(),
            model: ModelConfig::default(),
            k_prime: 10,
            seed: 2024,
            optimizer: OptimizerKind::ADAM_DEFAULT,
            lr_schedule: LrSchedule::Constant,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(CoreError::Config(format!(
                "learning rate {} must be >= 0",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(CoreError::Config("batch size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(CoreError::Config("patience must be at least 1".into()));
        }
        if self.model.d_e == 0 || self.model.d_h == 0 {
            return Err(CoreError::Config(
                "embedding and hidden sizes must be positive".into(),
            ));
        }
        if self.k_prime == 0 {
            return Err(CoreError::Config("k' must be at least 1".into()));
        }
        if let LrSchedule::MultiplicativeDecay { factor } = self.lr_schedule {
            if !(factor > 0.0 && factor.is_finite()) {
                return Err(CoreError::Config(format!(
                    "learning-rate decay factor {factor} must be positive"
                )));
            }
        }
        self.weights.validate()
    }
}

/// Snapshot of a ChaCha stream position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    /// Completed epochs.
    pub epoch: usize,
    /// Best validation Recall@20 so far, `-inf` before the first epoch.
    pub best_recall: f64,
    /// Epoch that produced `best_params`, 0 before the first epoch.
    pub best_epoch: usize,
    pub best_params: ModelParams,
    pub rng: ChaCha8Rng,
}

impl TrainState {
    /// Fresh state: parameters are drawn from the seeded stream that later
    /// drives shuffling and negative sampling.
    pub fn init(num_users: usize, num_items: usize, d_f: usize, cfg: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = ModelParams::init(num_users, num_items, d_f, &cfg.model, &mut rng);
        TrainState {
            optimizer: OptimizerState::new(cfg.optimizer, &params),
            best_params: params.clone(),
            params,
            epoch: 0,
            best_recall: f64::NEG_INFINITY,
            best_epoch: 0,
            rng,
        }
    }
}

/// Draws training batches and negatives.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    user_items: Vec<Vec<usize>>,
    num_items: usize,
}

impl BatchSampler {
    pub fn new(ds: &Dataset) -> Self {
        BatchSampler {
            user_items: ds.user_train_items(),
            num_items: ds.num_items,
        }
    }

    /// Uniform item the user has no training interaction with, by rejection.
    pub fn sample_negative<R: Rng + ?Sized>(&self, user: usize, rng: &mut R) -> Result<usize> {
        let seen = &self.user_items[user];
        if seen.len() >= self.num_items {
            return Err(CoreError::UnsampleableNegative { user });
        }
        loop {
            let j = rng.gen_range(0..self.num_items);
            if seen.binary_search(&j).is_err() {
                return Ok(j);
            }
        }
    }

    /// Builds one batch from the given training-interaction positions.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        ds: &Dataset,
        positions: &[usize],
        rng: &mut R,
    ) -> Result<BatchSample> {
        let mut batch = BatchSample {
            users: Vec::with_capacity(positions.len()),
            pos_items: Vec::with_capacity(positions.len()),
            neg_items: Vec::with_capacity(positions.len()),
        };
        for &p in positions {
            let (u, i) = ds.train[p];
            batch.users.push(u);
            batch.pos_items.push(i);
            batch.neg_items.push(self.sample_negative(u, rng)?);
        }
        Ok(batch)
    }

    /// One shuffled pass over the training interactions, cut into batches.
    pub fn epoch_batches<R: Rng + ?Sized>(
        &self,
        ds: &Dataset,
        rng: &mut R,
        batch_size: usize,
    ) -> Result<Vec<BatchSample>> {
        if ds.train.is_empty() {
            return Err(CoreError::EmptyInput("no training interactions".into()));
        }
        let mut order: Vec<usize> = (0..ds.train.len()).collect();
        order.shuffle(rng);
        order
            .chunks(batch_size.max(1))
            .map(|chunk| self.sample_batch(ds, chunk, rng))
            .collect()
    }
}

/// Per-epoch means of the objective and its components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub batches: usize,
    pub total: f64,
    pub components: LossComponents,
    pub degenerate: usize,
}

fn diverged(epoch: usize, batch: usize, reason: &str) -> CoreError {
    CoreError::Diverged {
        epoch,
        batch,
        reason: reason.into(),
    }
}

/// Runs one epoch of forward, loss, backward and optimizer steps.
pub fn train_epoch(
    state: &mut TrainState,
    ds: &Dataset,
    graphs: &GraphBundle,
    feat: &FeatureMatrix,
    cfg: &TrainConfig,
    sampler: &BatchSampler,
) -> Result<EpochStats> {
    let epoch = state.epoch + 1;
    let lr = cfg.lr_schedule.rate(cfg.learning_rate, epoch);
    let layers = cfg.model.gcn_layers;
    let batches = sampler.epoch_batches(ds, &mut state.rng, cfg.batch_size)?;
    let mut sum = LossComponents::default();
    let mut total = 0.0;
    let mut degenerate = 0;
    for (b, batch) in batches.iter().enumerate() {
        let (reps, cache) = model::forward_cached(&state.params, graphs, feat, layers)?;
        let loss = losses::total_loss(&reps, feat, batch, &cfg.weights)?;
        if !loss.value.is_finite() {
            return Err(diverged(epoch, b, "non-finite loss"));
        }
        if !loss.grads.is_finite() {
            return Err(diverged(epoch, b, "non-finite representation gradient"));
        }
        let grads = model::backward(&state.params, graphs, feat, layers, &cache, &loss.grads)?;
        if !grads.is_finite() {
            return Err(diverged(epoch, b, "non-finite parameter gradient"));
        }
        state.optimizer.step(&mut state.params, &grads, lr);
        if !state.params.is_finite() {
            return Err(diverged(epoch, b, "non-finite parameters after update"));
        }
        total += loss.value;
        sum.bpr += loss.components.bpr;
        sum.cca += loss.components.cca;
        sum.uia += loss.components.uia;
        sum.reg += loss.components.reg;
        degenerate += loss.degenerate;
    }
    state.epoch = epoch;
    let n = batches.len() as f64;
    Ok(EpochStats {
        epoch,
        learning_rate: lr,
        batches: batches.len(),
        total: total / n,
        components: LossComponents {
            bpr: sum.bpr / n,
            cca: sum.cca / n,
            uia: sum.uia / n,
            reg: sum.reg / n,
        },
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointKind {
    /// New best validation metric.
    Best,
    /// Normal end of training.
    Final,
    /// Training stopped on an error.
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub stats: EpochStats,
    pub val_recall: f64,
    pub val_ndcg: f64,
    pub improved: bool,
}

/// Hooks into [`fit`]. The defaults validate sequentially and ignore events.
pub trait TrainObserver {
    fn validate(&mut self, reps: &Representations, ds: &Dataset) -> EvalReport {
        eval::evaluate(reps, ds, Split::Val, &[SELECTION_K])
    }

    fn on_epoch(&mut self, _record: &EpochRecord, _state: &TrainState) {}

    fn on_checkpoint(&mut self, _kind: CheckpointKind, _state: &TrainState) {}
}

pub struct NoopObserver;

impl TrainObserver for NoopObserver {}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    /// Parameters from the best validation epoch.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_recall: f64,
    pub log: Vec<EpochRecord>,
    pub state: TrainState,
}

/// Trains from a fresh, seeded state.
pub fn fit(
    ds: &Dataset,
    graphs: &GraphBundle,
    feat: &FeatureMatrix,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<FitOutput> {
    cfg.validate()?;
    let state = TrainState::init(ds.num_users, ds.num_items, feat.dim(), cfg);
    fit_from(state, ds, graphs, feat, cfg, observer)
}

/// Continues training from `state` until `max_epochs` or until `patience`
/// epochs pass without a strictly better validation Recall@20.
pub fn fit_from(
    mut state: TrainState,
    ds: &Dataset,
    graphs: &GraphBundle,
    feat: &FeatureMatrix,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<FitOutput> {
    cfg.validate()?;
    let sampler = BatchSampler::new(ds);
    let mut log = Vec::new();
    while state.epoch < cfg.max_epochs {
        if state.best_epoch > 0 && state.epoch - state.best_epoch >= cfg.patience {
            break;
        }
        let step = train_epoch(&mut state, ds, graphs, feat, cfg, &sampler).and_then(|stats| {
            let reps = model::forward(&state.params, graphs, feat, cfg.model.gcn_layers)?;
            Ok((stats, observer.validate(&reps, ds)))
        });
        let (stats, report) = match step {
            Ok(v) => v,
            Err(e) => {
                observer.on_checkpoint(CheckpointKind::Failed, &state);
                return Err(e);
            }
        };
        let val_recall = report.recall(SELECTION_K);
        let improved = val_recall > state.best_recall;
        if improved {
            state.best_recall = val_recall;
            state.best_epoch = state.epoch;
            state.best_params = state.params.clone();
        }
        let record = EpochRecord {
            stats,
            val_recall,
            val_ndcg: report.ndcg(SELECTION_K),
            improved,
        };
        observer.on_epoch(&record, &state);
        if improved {
            observer.on_checkpoint(CheckpointKind::Best, &state);
        }
        log.push(record);
    }
    observer.on_checkpoint(CheckpointKind::Final, &state);
    Ok(FitOutput {
        params: state.best_params.clone(),
        best_epoch: state.best_epoch,
        best_recall: state.best_recall,
        log,
        state,
    })
}
