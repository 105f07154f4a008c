//! Performance-aware IoU threshold curriculum for group-relative policy
//! optimization, with a synthetic box-grounding task to train on.
//!
//! The pieces compose into one training loop:
//!
//! 1. [`simenv`] samples a group of candidate boxes from a Gaussian policy
//! 2. [`reward`] scores them against the current IoU threshold
//! 3. [`grpo`] turns rewards into group-relative advantages and a policy step
//! 4. [`tracker`] keeps a sliding window of recent outcomes
//! 5. [`scheduler`] raises the threshold once the window shows readiness
//!
//! [`runner`] wraps the loop with configs, seeded sweeps and trace files, and
//! [`evalmetrics`] scores prediction sets offline.

pub mod error;
pub mod evalmetrics;
pub mod geometry;
pub mod grpo;
pub mod reward;
pub mod runner;
pub mod scheduler;
pub mod simenv;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{clamp_to_unit, iou, BBox};
pub use grpo::{group_advantages, GroupSample, GrpoConfig};
pub use runner::{run_experiment, MetricsRecord, RunConfig};
pub use scheduler::{DecayKind, RegimeMode, ScheduleConfig, SchedulerState};
pub use simenv::{train_run, PolicyParams, RewardScheme, TaskSpec};
pub use tracker::{RefreshStrategy, WindowStats};
