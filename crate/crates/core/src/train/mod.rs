//! Optimisation: L1 loss, Adam, the multi-stage flexible-window schedule,
//! the degradation/augmentation pipeline and the training loop.

mod adam;
pub mod data;
mod loss;
mod run;
mod schedule;

pub use adam::{adam_step, Adam, AdamConfig};
pub use loss::l1_loss;
pub use run::{train_loop, LogRow, NullObserver, Observer, TrainConfig, TrainState};
pub use schedule::{cosine_lr, FlexibleSchedule, ScheduleStep, Stage, StageSpec};
