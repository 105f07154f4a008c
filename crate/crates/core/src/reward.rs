//! Per-candidate rewards computed from IoU.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One entry of a progress-staged threshold table: from `start` (fraction of
/// total training steps) onward, the threshold is `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub start: f64,
    pub tau: f64,
}

/// Early (0-10%), middle (10-25%) and late (25-100%) thresholds.
pub fn default_stages() -> Vec<Stage> {
    vec![
        Stage {
            start: 0.0,
            tau: 0.3,
        },
        Stage {
            start: 0.10,
            tau: 0.5,
        },
        Stage {
            start: 0.25,
            tau: 0.7,
        },
    ]
}

/// Which reward a candidate earns for its IoU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RewardSpec {
    /// 1 when IoU reaches `tau`, else 0.
    BinaryThreshold { tau: f64 },
    /// The IoU itself.
    RawIou,
    /// Binary reward whose threshold follows a calendar of training progress.
    StagedProgress { stages: Vec<Stage> },
}

impl RewardSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RewardSpec::BinaryThreshold { tau } => check_unit("tau", *tau),
            RewardSpec::RawIou => Ok(()),
            RewardSpec::StagedProgress { stages } => validate_stages(stages),
        }
    }

    /// Reward for `iou` at training `progress` in `[0, 1]`.
    pub fn reward(&self, iou: f64, progress: f64) -> Result<f64> {
        match self {
            RewardSpec::BinaryThreshold { tau } => binary_reward(iou, *tau),
            RewardSpec::RawIou => raw_iou_reward(iou),
            RewardSpec::StagedProgress { stages } => {
                binary_reward(iou, staged_threshold(progress, stages)?)
            }
        }
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::input(format!("{name} must lie in [0, 1], got {v}")))
    }
}

pub fn binary_reward(iou: f64, tau: f64) -> Result<f64> {
    check_unit("iou", iou)?;
    check_unit("tau", tau)?;
    Ok(if iou >= tau { 1.0 } else { 0.0 })
}

pub fn raw_iou_reward(iou: f64) -> Result<f64> {
    check_unit("iou", iou)?;
    Ok(iou)
}

pub fn validate_stages(stages: &[Stage]) -> Result<()> {
    let Some(first) = stages.first() else {
        return Err(Error::config("stages", "stage table is empty"));
    };
    if first.start != 0.0 {
        return Err(Error::config(
            "stages",
            "first stage must start at progress 0",
        ));
    }
    for s in stages {
        if !(0.0..=1.0).contains(&s.start) || !(0.0..=1.0).contains(&s.tau) {
            return Err(Error::config(
                "stages",
                format!("stage {s:?} outside [0, 1]"),
            ));
        }
    }
    if stages.windows(2).any(|w| w[1].start <= w[0].start) {
        return Err(Error::config(
            "stages",
            "stage starts must be strictly increasing",
        ));
    }
    Ok(())
}

/// Threshold of the last stage whose start is at or before `progress`.
pub fn staged_threshold(progress: f64, stages: &[Stage]) -> Result<f64> {
    if stages.is_empty() {
        return Err(Error::config("stages", "stage table is empty"));
    }
    check_unit("progress", progress)?;
    let tau = stages
        .iter()
        .take_while(|s| s.start <= progress)
        .last()
        .map_or(stages[0].tau, |s| s.tau);
    Ok(tau)
}
