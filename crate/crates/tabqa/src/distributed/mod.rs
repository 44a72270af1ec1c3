//! Distributed executor: model, end-to-end training, label extraction.

mod gradtest;
pub mod model;
pub mod train;

pub use model::{
    denotation_cell, field_marginal_of, DistributedConfig, DistributedForward, DistributedModel,
};
pub use train::{
    denotation_correct, extract_field_labels, predict_cell, train_end_to_end, ExtractedLabels,
    FieldLabels, TrainOptions, TrainReport,
};
