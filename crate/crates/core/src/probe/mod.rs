//! Probing classifier: optional learned scalar mix over layers, then a
//! one-hidden-layer ReLU MLP with dropout, trained by Adam with early
//! stopping on a dev metric.

mod adam;
mod model;
mod probing;
mod train;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use model::{
    argmax, scalar_mix, softmax, weighted_sum, LayerMode, ProbeModel, ProbeParams, ProbeShape,
    DEFAULT_HIDDEN_UNITS,
};
pub use probing::{pooled_input, probe_examples, train_probe, ProbeReport, ProbeRun};
pub use train::{accuracy, evaluate, fit, EpochRecord, Examples, FitOutcome, TrainerConfig};
