//! Caption-generator laboratory: a small reverse-mode autodiff engine, four
//! image-conditioned GRU caption generators (init-inject, pre-inject,
//! par-inject and merge), a synthetic grounded caption dataset, a trainer,
//! and the visual-sensitivity analyses (gradient sensitivity, foil omission
//! scoring, logits diagnostics) with CSV/SVG reporting.

pub mod analysis;
pub mod autodiff;
pub mod captioner;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod synthworld;
pub mod tensor;
pub mod trainer;

pub use analysis::{
    aggregate, cosine_distance, js_divergence, omission_scoring, select_foil,
    sensitivity_analysis, word_class_table, AggregateCurve, Metric, OmissionRecord,
    SensitivityRecord, WordClassTable,
};
pub use autodiff::{backward, finite_diff, ExprGraph, GradientMap, NodeId, OpKind};
pub use captioner::{
    forward_replay, generate, gru_step, load_params, save_params, ArchitectureKind, ModelDims,
    ModelParams, StepTrace,
};
pub use error::{Error, Result};
pub use synthworld::{
    build_vocabulary, generate_dataset, read_dataset, write_dataset, DatasetConfig,
    GroundedExample, Vocabulary, WordClass,
};
pub use tensor::Tensor;
pub use trainer::{perplexity, train, Hyperparams, TrainingLog};
