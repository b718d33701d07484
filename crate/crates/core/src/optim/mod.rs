//! Reverse-mode autodiff, parameters, the Adam optimizer and learning-rate
//! schedules.

mod adam;
mod param;
mod schedule;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use param::{Param, ParamSet};
pub use schedule::{schedule_lr, LrSchedule, ScheduleKind};
pub use tape::{Gradients, NodeId, Tape};
