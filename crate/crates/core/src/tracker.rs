//! Sliding-window tracking of recent group outcomes.
//!
//! The window keeps the raw per-candidate IoUs of the last `N` steps, so the
//! hit rate, its spread, and the IoU margin can be evaluated against whatever
//! threshold is current, including records collected under an older one.
//! Metrics exist only once the window holds exactly `N` records.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefreshStrategy {
    None,
    Quarter,
    Half,
    Full,
}

impl RefreshStrategy {
    pub const ALL: [RefreshStrategy; 4] = [Self::None, Self::Quarter, Self::Half, Self::Full];

    /// How many of the newest records survive a refresh of a window of size `n`.
    pub fn retained(self, n: usize) -> usize {
        match self {
            RefreshStrategy::None => n,
            RefreshStrategy::Quarter => (3 * n).div_ceil(4),
            RefreshStrategy::Half => n / 2,
            RefreshStrategy::Full => 0,
        }
    }
}

impl std::str::FromStr for RefreshStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "quarter" => Ok(Self::Quarter),
            "half" => Ok(Self::Half),
            "full" => Ok(Self::Full),
            other => Err(Error::input(format!("unknown refresh strategy `{other}`"))),
        }
    }
}

/// Outcome of one training step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub ious: Vec<f64>,
    /// Rewards under the threshold that was active at this step.
    pub rewards: Vec<f64>,
    pub mean_reward: f64,
    pub mean_iou: f64,
}

impl StepRecord {
    pub fn new(step: usize, ious: Vec<f64>, rewards: Vec<f64>) -> Result<Self> {
        if ious.is_empty() || ious.len() != rewards.len() {
            return Err(Error::input(format!(
                "step record needs equal non-empty lists, got {} ious and {} rewards",
                ious.len(),
                rewards.len()
            )));
        }
        if ious.iter().chain(&rewards).any(|v| !v.is_finite()) {
            return Err(Error::input("step record values must be finite"));
        }
        let n = ious.len() as f64;
        let mean_iou = ious.iter().sum::<f64>() / n;
        let mean_reward = rewards.iter().sum::<f64>() / n;
        Ok(Self {
            step,
            ious,
            rewards,
            mean_reward,
            mean_iou,
        })
    }

    /// Fraction of candidates with IoU at or above `tau`.
    pub fn hit_rate(&self, tau: f64) -> f64 {
        self.ious.iter().filter(|&&v| v >= tau).count() as f64 / self.ious.len() as f64
    }
}

/// Window statistics evaluated against one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    /// Window hit rate.
    pub mean_reward: f64,
    /// Population std of the per-step hit rates.
    pub reward_std: f64,
    /// Mean IoU minus the threshold.
    pub iou_margin: f64,
}

/// The sliding window plus cached per-record hit rates for the tracked
/// threshold. Cheap to clone for logging snapshots.
#[derive(Debug, Clone)]
pub struct WindowStats {
    capacity: usize,
    refresh: RefreshStrategy,
    records: VecDeque<StepRecord>,
    last_step: Option<usize>,
    tracked_tau: f64,
    hits: VecDeque<f64>,
    hit_sum: f64,
    iou_sum: f64,
}

impl WindowStats {
    pub fn new(capacity: usize, refresh: RefreshStrategy, tau: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config(
                "window.size",
                "window size must be at least 1",
            ));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::input(format!(
                "threshold must lie in [0, 1], got {tau}"
            )));
        }
        Ok(Self {
            capacity,
            refresh,
            records: VecDeque::with_capacity(capacity + 1),
            last_step: None,
            tracked_tau: tau,
            hits: VecDeque::with_capacity(capacity + 1),
            hit_sum: 0.0,
            iou_sum: 0.0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn refresh_strategy(&self) -> RefreshStrategy {
        self.refresh
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.records.len() == self.capacity
    }

    pub fn records(&self) -> impl ExactSizeIterator<Item = &StepRecord> {
        self.records.iter()
    }

    pub fn tracked_tau(&self) -> f64 {
        self.tracked_tau
    }

    /// Append a record, evicting the oldest once the window exceeds its size.
    pub fn push(&mut self, record: StepRecord) -> Result<()> {
        if let Some(last) = self.last_step {
            if record.step <= last {
                return Err(Error::input(format!(
                    "step {} pushed after step {last}; steps must strictly increase",
                    record.step
                )));
            }
        }
        self.last_step = Some(record.step);
        let h = record.hit_rate(self.tracked_tau);
        self.hit_sum += h;
        self.iou_sum += record.mean_iou;
        self.hits.push_back(h);
        self.records.push_back(record);
        if self.records.len() > self.capacity {
            self.evict_oldest();
        }
        Ok(())
    }

    fn evict_oldest(&mut self) {
        if let (Some(r), Some(h)) = (self.records.pop_front(), self.hits.pop_front()) {
            self.hit_sum -= h;
            self.iou_sum -= r.mean_iou;
        }
    }

    fn resum(&mut self) {
        self.hit_sum = self.hits.iter().sum();
        self.iou_sum = self.records.iter().map(|r| r.mean_iou).sum();
    }

    /// Re-key the cached hit rates to a new threshold.
    pub fn track_threshold(&mut self, tau: f64) {
        if tau == self.tracked_tau {
            return;
        }
        self.tracked_tau = tau;
        self.hits = self.records.iter().map(|r| r.hit_rate(tau)).collect();
        self.resum();
    }

    /// Drop older records according to the refresh strategy.
    pub fn refresh_on_update(&mut self) {
        let keep = self.refresh.retained(self.capacity).min(self.records.len());
        while self.records.len() > keep {
            self.records.pop_front();
            self.hits.pop_front();
        }
        self.resum();
    }

    fn per_step_hits(&self, tau: f64) -> Vec<f64> {
        if tau == self.tracked_tau {
            self.hits.iter().copied().collect()
        } else {
            self.records.iter().map(|r| r.hit_rate(tau)).collect()
        }
    }

    /// Window hit rate at `tau`; `None` until the window is full.
    pub fn mean_reward(&self, tau: f64) -> Option<f64> {
        if !self.is_full() {
            return None;
        }
        let n = self.len() as f64;
        if tau == self.tracked_tau {
            Some(self.hit_sum / n)
        } else {
            Some(self.per_step_hits(tau).iter().sum::<f64>() / n)
        }
    }

    pub fn reward_std(&self, tau: f64) -> Option<f64> {
        let mean = self.mean_reward(tau)?;
        let hits = self.per_step_hits(tau);
        let var = hits.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / hits.len() as f64;
        Some(var.sqrt())
    }

    pub fn iou_margin(&self, tau: f64) -> Option<f64> {
        if !self.is_full() {
            return None;
        }
        Some(self.iou_sum / self.len() as f64 - tau)
    }

    pub fn metrics(&self, tau: f64) -> Option<WindowMetrics> {
        Some(WindowMetrics {
            mean_reward: self.mean_reward(tau)?,
            reward_std: self.reward_std(tau)?,
            iou_margin: self.iou_margin(tau)?,
        })
    }
}
