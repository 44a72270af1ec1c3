//! The coupling pipeline: distributed → symbolic label transfer, REINFORCE
//! policy improvement with restarts, and symbolic → distributed feedback.

pub mod feedback;
pub mod pretrain;
pub mod reinforce;

pub use feedback::{decode_labels, feedback_train, FeedbackReport};
pub use pretrain::{
    align_labels, extract_labels, label_agreement, pretrain_columns, PretrainOptions,
    PretrainReport,
};
pub use reinforce::{
    adjust_rewards, greedy_accuracy, reinforce_epoch, run_trajectories, train_reinforce,
    ReinforceOptions, ReinforceReport, TrajectoryOutcome, TrajectoryRun,
};
