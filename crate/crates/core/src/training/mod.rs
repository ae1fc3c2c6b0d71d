//! Losses, regularizers, optimizers, the batch training loop and online updates.

pub mod config;
mod loss;
mod online;
mod optim;
mod trainer;

pub use config::{OptimizerKind, ScheduleKind, TrainConfig};
pub use loss::{coverage_regularizer, cross_entropy, token_loss};
pub use online::{online_update, sample_loss};
pub use optim::{
    clip_gradients, optimizer_step, schedule_lr, OptimizerState, ADADELTA_EPS, ADADELTA_RHO, ADAM_BETA1,
    ADAM_BETA2, ADAM_EPS,
};
pub use trainer::{
    batch_loss_and_grad, corpus_bleu, sample_loss_and_grad, train, translate_corpus, LogRecord, TrainData,
    TrainLog, TrainOutcome,
};
