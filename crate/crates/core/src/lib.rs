//! Numerical core of the alignrec engine.
//!
//! Everything here is pure computation over in-memory data: k-core filtering
//! and splitting of interaction logs, sparse graph construction, the gated
//! multimodal LightGCN model with hand-derived gradients, the four training
//! losses, the optimizer loop, all-ranking evaluation and the feature-quality
//! protocols. The crate is `no_std` and only needs `alloc`; file formats and
//! the command line live in the companion `alignrec` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod dense;
pub mod error;
pub mod eval;
pub mod graph;
pub mod losses;
pub mod math;
pub mod model;
pub mod optim;
pub mod protocols;
pub mod sparse;
pub mod trainer;

pub use data::{
    Dataset, FeatureMatrix, IdMap, Interaction, RawInteractions, SplitRatios, SplitStrategy,
};
pub use dense::Matrix;
pub use error::{CoreError, Result};
pub use eval::{EvalReport, Slice, Split};
pub use graph::GraphBundle;
pub use losses::{BatchSample, LossWeights};
pub use model::{ModelConfig, ModelParams, Representations};
pub use sparse::SparseMatrix;
pub use trainer::{TrainConfig, TrainState};
