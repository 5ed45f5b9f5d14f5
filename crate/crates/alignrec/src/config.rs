//! Run configuration: a TOML file with flat sections. Every field has a
//! default, so a file naming only the input paths reproduces the standard
//! training setup. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use alignrec_core::data::{SplitRatios, SplitStrategy};
use alignrec_core::model::ModelConfig;
use alignrec_core::optim::{LrSchedule, OptimizerKind};
use alignrec_core::protocols::{BaseProtocol, ProtocolConfig};
use alignrec_core::{LossWeights, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::dataset::parse_strategy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub interactions: Option<PathBuf>,
    pub features: Option<PathBuf>,
    /// Item keys of the feature rows, one per line.
    pub item_keys: Option<PathBuf>,
    /// Replacement rows for the masked-modality protocol, in `item_keys` order.
    pub masked_features: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            interactions: None,
            features: None,
            item_keys: None,
            masked_features: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub kcore: usize,
    pub strategy: String,
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    pub split_seed: u64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            kcore: 5,
            strategy: "random".into(),
            train_ratio: 0.8,
            val_ratio: 0.1,
            test_ratio: 0.1,
            split_seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    /// Per-epoch multiplicative learning-rate factor; 1 keeps it constant.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub optimizer: String,
    pub seed: u64,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub gcn_layers: usize,
    pub knn_k: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            lr_decay: 1.0,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            optimizer: "adam".into(),
            seed: t.seed,
            embedding_dim: t.model.d_e,
            hidden_dim: t.model.d_h,
            gcn_layers: t.model.gcn_layers,
            knn_k: t.k_prime,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub tau: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        let w = LossWeights::default();
        LossSection {
            alpha: w.alpha,
            beta: w.beta,
            lambda: w.lambda,
            tau: w.tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub ks: Vec<usize>,
    pub long_tail: bool,
    pub long_tail_threshold: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            ks: vec![10, 20, 50],
            long_tail: false,
            long_tail_threshold: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub ks: Vec<usize>,
    pub zero_shot: bool,
    pub item_cf: bool,
    pub mask_modality: bool,
    pub mask_ratio: f64,
    pub mask_seed: u64,
    /// `zero-shot` or `item-cf`.
    pub mask_base: String,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            ks: vec![10, 20, 50],
            zero_shot: true,
            item_cf: true,
            mask_modality: false,
            mask_ratio: 0.5,
            mask_seed: 0,
            mask_base: "zero-shot".into(),
        }
    }
}

/// Value lists swept by the grid command; an empty list keeps the
/// configured value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub learning_rate: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub paths: Paths,
    pub data: DataSection,
    pub train: TrainSection,
    pub loss: LossSection,
    pub eval: EvalSection,
    pub protocol: ProtocolSection,
    pub grid: GridSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a file, resolves relative paths against its directory and
    /// validates the result.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        for p in [
            &mut paths.interactions,
            &mut paths.features,
            &mut paths.item_keys,
            &mut paths.masked_features,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut paths.output_dir);
    }

    /// Canonical TOML text of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for p in [
            &self.paths.interactions,
            &self.paths.features,
            &self.paths.item_keys,
            &self.paths.masked_features,
        ]
        .into_iter()
        .flatten()
        {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        if self.paths.output_dir.exists() && !self.paths.output_dir.is_dir() {
            return Err(Error::Config(format!(
                "{} is not a directory",
                self.paths.output_dir.display()
            )));
        }
        if self.paths.features.is_some() != self.paths.item_keys.is_some() {
            return Err(Error::Config(
                "paths.features and paths.item_keys must be given together".into(),
            ));
        }
        if self.data.kcore == 0 {
            return Err(Error::Config("data.kcore must be at least 1".into()));
        }
        self.split_strategy()?;
        self.split_ratios().validate()?;
        self.train_config()?.validate()?;
        self.protocol_config().validate()?;
        self.mask_base()?;
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return Err(Error::Config(
                "eval.ks must be a nonempty list of positive values".into(),
            ));
        }
        for (name, vs) in [
            ("learning_rate", &self.grid.learning_rate),
            ("alpha", &self.grid.alpha),
            ("beta", &self.grid.beta),
            ("lambda", &self.grid.lambda),
        ] {
            if vs.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Config(format!(
                    "grid.{name} values must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    pub fn split_strategy(&self) -> Result<SplitStrategy> {
        parse_strategy(&self.data.strategy).ok_or_else(|| {
            Error::Config(format!(
                "data.strategy {:?} is neither \"random\" nor \"temporal-leave-one-out\"",
                self.data.strategy
            ))
        })
    }

    pub fn split_ratios(&self) -> SplitRatios {
        SplitRatios {
            train: self.data.train_ratio,
            val: self.data.val_ratio,
            test: self.data.test_ratio,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let optimizer = match t.optimizer.as_str() {
            "adam" => OptimizerKind::ADAM_DEFAULT,
            "sgd" => OptimizerKind::Sgd,
            other => {
                return Err(Error::Config(format!(
                    "train.optimizer {other:?} is neither \"adam\" nor \"sgd\""
                )))
            }
        };
        let lr_schedule = if t.lr_decay == 1.0 {
            LrSchedule::Constant
        } else {
            LrSchedule::MultiplicativeDecay { factor: t.lr_decay }
        };
        Ok(TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            weights: LossWeights {
                alpha: self.loss.alpha,
                beta: self.loss.beta,
                lambda: self.loss.lambda,
                tau: self.loss.tau,
            },
            model: ModelConfig {
                d_e: t.embedding_dim,
                d_h: t.hidden_dim,
                gcn_layers: t.gcn_layers,
            },
            k_prime: t.knn_k,
            seed: t.seed,
            optimizer,
            lr_schedule,
        })
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            ks: self.protocol.ks.clone(),
            mask_ratio: self.protocol.mask_ratio,
            mask_seed: self.protocol.mask_seed,
        }
    }

    pub fn mask_base(&self) -> Result<BaseProtocol> {
        match self.protocol.mask_base.as_str() {
            "zero-shot" => Ok(BaseProtocol::ZeroShot),
            "item-cf" => Ok(BaseProtocol::ItemCf),
            other => Err(Error::Config(format!(
                "protocol.mask_base {other:?} is neither \"zero-shot\" nor \"item-cf\""
            ))),
        }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.paths.output_dir.join("dataset")
    }

    pub fn require<'a>(&self, p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| Error::Config(format!("paths.{name} is required for this command")))
    }
}
