//! Featurized softmax classifier, its optimizer, and checkpoint I/O.

pub mod checkpoint;
pub mod classifier;
pub mod featurize;
pub mod optim;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use classifier::{Activation, Classifier, Example, HiddenSpec, Target};
pub use featurize::{featurize, FeaturizerConfig, SparseFeatures};
pub use optim::{OptimizerKind, OptimizerSpec, OptimizerState};
