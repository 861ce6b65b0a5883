//! Optimization loop, learning-rate schedule, checkpoint selection and the
//! component ablation.

mod ablation;
mod config;
mod eval;
mod history;
mod optim;
mod train;

pub use ablation::{load_all_splits, run_ablation, run_ablation_on, AblationReport};
pub use config::{cosine_lr, TrainConfig};
pub use eval::{evaluate, mask_for, predict, stack_images, stack_targets, validation_loss};
pub use history::{EpochRecord, TrainHistory, HISTORY_HEADER};
pub use optim::Adam;
pub use train::{load_training_splits, train, train_on, train_on_with, TrainOutcome};
