//! Learning sentence-level relation classifiers from noisily labeled data.
//!
//! The pipeline trains a featurized softmax classifier with negative training
//! on sampled complementary labels, uses the resulting confidence gap to
//! filter suspected label noise with per-class dynamic thresholds, re-labels
//! confidently predicted filtered instances, and repeats with a fresh
//! classifier on the refined data. A final cross-entropy pass on the refined
//! data produces the deployable model.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the CLI uses.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod noisegen;
pub mod prob;
pub mod refine;
pub mod scalar;
pub mod seed;
pub mod trainer;

pub use dataset::{Instance, InstanceState, LabelId, LabelSpace, RefinedDataset, Span, Status};
pub use error::{Result, SentError};
pub use losses::{ComplementarySample, LossKind};
pub use metrics::{Histogram, Prf};
pub use model::{FeaturizerConfig, HiddenSpec, OptimizerKind, OptimizerSpec};
pub use noisegen::{NoiseSpec, NoiseWeighting, SynthSpec};
pub use refine::{RefineConfig, RefineReport};
pub use scalar::Scalar;
pub use trainer::{RunConfig, TrainHistory};

pub type Model = model::Classifier<f64>;
pub type Model32 = model::Classifier<f32>;
pub type ProbVec = prob::ProbVector<f64>;
pub type Optimizer = model::OptimizerState<f64>;
pub type Thresholds = refine::ClassThresholds<f64>;
