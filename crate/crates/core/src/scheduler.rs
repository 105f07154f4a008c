//! IoU threshold curriculum.
//!
//! The scheduler owns the current threshold and decides, from the sliding
//! window's statistics, when to raise it and by how much. Several schedule
//! families share one state type:
//!
//! * `piecewise`: performance-gated, step size chosen by threshold regime
//! * `linear` / `cosine`: performance-gated, step size decays with the threshold
//! * `fixed`: the threshold never moves
//! * `staged`: the threshold follows training progress, ignoring performance

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{default_stages, staged_threshold, validate_stages, Stage};
use crate::tracker::{WindowMetrics, WindowStats};

/// Thresholds are kept on this grid so that repeated additions land exactly
/// on round values.
pub const TAU_GRID: f64 = 1e-9;

pub fn snap_to_grid(tau: f64) -> f64 {
    let scale = TAU_GRID.recip().round();
    (tau * scale).round() / scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayKind {
    Piecewise,
    Linear,
    Cosine,
    Fixed,
    Staged,
}

impl DecayKind {
    pub const ALL: [DecayKind; 5] = [
        Self::Piecewise,
        Self::Linear,
        Self::Cosine,
        Self::Fixed,
        Self::Staged,
    ];

    /// Whether threshold changes are gated on window statistics.
    pub fn is_performance_gated(self) -> bool {
        matches!(self, Self::Piecewise | Self::Linear | Self::Cosine)
    }
}

impl std::str::FromStr for DecayKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "piecewise" => Ok(Self::Piecewise),
            "linear" => Ok(Self::Linear),
            "cosine" => Ok(Self::Cosine),
            "fixed" => Ok(Self::Fixed),
            "staged" => Ok(Self::Staged),
            other => Err(Error::input(format!("unknown schedule `{other}`"))),
        }
    }
}

/// Step size and gating bounds for one difficulty regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeParams {
    pub step: f64,
    /// Minimum window hit rate.
    pub min_mean_reward: f64,
    /// Maximum std of per-step hit rates.
    pub max_reward_std: f64,
}

/// Upper thresholds (exclusive) of the first two adaptive regimes.
pub const ADAPTIVE_BOUNDARIES: [f64; 2] = [0.60, 0.75];

const ADAPTIVE: [RegimeParams; 3] = [
    RegimeParams {
        step: 0.15,
        min_mean_reward: 0.80,
        max_reward_std: 0.20,
    },
    RegimeParams {
        step: 0.10,
        min_mean_reward: 0.75,
        max_reward_std: 0.35,
    },
    RegimeParams {
        step: 0.05,
        min_mean_reward: 0.55,
        max_reward_std: 0.40,
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum RegimeMode {
    /// Bounds and step size depend on the current threshold.
    Adaptive,
    FixedAggressive,
    FixedModerate,
    FixedConservative,
    Custom(RegimeParams),
}

impl RegimeMode {
    pub const PRESETS: [RegimeMode; 4] = [
        Self::Adaptive,
        Self::FixedAggressive,
        Self::FixedModerate,
        Self::FixedConservative,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            RegimeMode::Adaptive => "adaptive",
            RegimeMode::FixedAggressive => "fixed-aggressive",
            RegimeMode::FixedModerate => "fixed-moderate",
            RegimeMode::FixedConservative => "fixed-conservative",
            RegimeMode::Custom(_) => "custom",
        }
    }
}

/// Regime parameters active at threshold `tau`.
pub fn regime_for(tau: f64, mode: &RegimeMode) -> RegimeParams {
    match mode {
        RegimeMode::Adaptive => {
            if tau < ADAPTIVE_BOUNDARIES[0] {
                ADAPTIVE[0]
            } else if tau < ADAPTIVE_BOUNDARIES[1] {
                ADAPTIVE[1]
            } else {
                ADAPTIVE[2]
            }
        }
        RegimeMode::FixedAggressive => RegimeParams {
            step: 0.15,
            min_mean_reward: 0.60,
            max_reward_std: 0.40,
        },
        RegimeMode::FixedModerate => RegimeParams {
            step: 0.10,
            min_mean_reward: 0.70,
            max_reward_std: 0.25,
        },
        RegimeMode::FixedConservative => RegimeParams {
            step: 0.05,
            min_mean_reward: 0.80,
            max_reward_std: 0.15,
        },
        RegimeMode::Custom(p) => *p,
    }
}

/// Which conditions of the update rule are enforced. Disabled conditions are
/// treated as satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriterionMask {
    pub reward: bool,
    pub stability: bool,
    pub margin: bool,
}

impl Default for CriterionMask {
    fn default() -> Self {
        Self::ALL
    }
}

impl CriterionMask {
    pub const ALL: CriterionMask = CriterionMask {
        reward: true,
        stability: true,
        margin: true,
    };

    pub fn new(reward: bool, stability: bool, margin: bool) -> Self {
        Self {
            reward,
            stability,
            margin,
        }
    }

    /// Every non-empty subset, singletons first, full set last.
    pub fn ablations() -> [CriterionMask; 7] {
        [
            Self::new(true, false, false),
            Self::new(false, true, false),
            Self::new(false, false, true),
            Self::new(true, true, false),
            Self::new(true, false, true),
            Self::new(false, true, true),
            Self::ALL,
        ]
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.reward {
            parts.push("reward");
        }
        if self.stability {
            parts.push("stability");
        }
        if self.margin {
            parts.push("margin");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

/// All three update conditions, each inclusive.
pub fn criterion(metrics: &WindowMetrics, regime: &RegimeParams, margin_bound: f64) -> bool {
    criterion_masked(metrics, regime, margin_bound, CriterionMask::ALL)
}

pub fn criterion_masked(
    metrics: &WindowMetrics,
    regime: &RegimeParams,
    margin_bound: f64,
    mask: CriterionMask,
) -> bool {
    (!mask.reward || metrics.mean_reward >= regime.min_mean_reward)
        && (!mask.stability || metrics.reward_std <= regime.max_reward_std)
        && (!mask.margin || metrics.iou_margin >= margin_bound)
}

/// How a piecewise schedule chooses its step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "step")]
pub enum StepRule {
    /// The step size of the active regime.
    Regime,
    /// `piecewise_steps[i]` between the `piecewise_boundaries`.
    Table,
    /// The same step everywhere.
    Identical(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: DecayKind,
    pub tau_0: f64,
    pub tau_target: f64,
    pub step_rule: StepRule,
    pub piecewise_steps: [f64; 3],
    pub piecewise_boundaries: [f64; 2],
    /// Initial step for linear and cosine decay.
    pub delta_0: f64,
    /// Minimum mean IoU margin over the threshold.
    pub margin_bound: f64,
    pub regime: RegimeMode,
    pub criteria: CriterionMask,
    /// Never step past the next boundary of the active step rule.
    pub land_on_stage_boundaries: bool,
    /// Progress calendar for the staged kind.
    pub stages: Vec<Stage>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            kind: DecayKind::Piecewise,
            tau_0: 0.3,
            tau_target: 0.8,
            step_rule: StepRule::Regime,
            piecewise_steps: [0.15, 0.10, 0.05],
            piecewise_boundaries: [0.55, 0.75],
            delta_0: 0.2,
            margin_bound: 0.10,
            regime: RegimeMode::Adaptive,
            criteria: CriterionMask::ALL,
            land_on_stage_boundaries: true,
            stages: default_stages(),
        }
    }
}

impl ScheduleConfig {
    pub fn piecewise() -> Self {
        Self::default()
    }

    pub fn linear(delta_0: f64) -> Self {
        Self {
            kind: DecayKind::Linear,
            tau_0: 0.2,
            delta_0,
            ..Self::default()
        }
    }

    pub fn cosine(delta_0: f64) -> Self {
        Self {
            kind: DecayKind::Cosine,
            tau_0: 0.2,
            delta_0,
            ..Self::default()
        }
    }

    pub fn fixed(tau: f64) -> Self {
        Self {
            kind: DecayKind::Fixed,
            tau_0: tau,
            tau_target: tau,
            ..Self::default()
        }
    }

    pub fn staged() -> Self {
        let stages = default_stages();
        Self {
            kind: DecayKind::Staged,
            tau_0: stages[0].tau,
            tau_target: stages.iter().map(|s| s.tau).fold(0.0, f64::max),
            stages,
            ..Self::default()
        }
    }

    /// Preset for a schedule name as accepted on the command line.
    pub fn preset(kind: DecayKind) -> Self {
        match kind {
            DecayKind::Piecewise => Self::piecewise(),
            DecayKind::Linear => Self::linear(0.2),
            DecayKind::Cosine => Self::cosine(0.2),
            DecayKind::Fixed => Self::fixed(0.5),
            DecayKind::Staged => Self::staged(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |field: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(field, format!("must lie in [0, 1], got {v}")))
            }
        };
        unit("schedule.tau_0", self.tau_0)?;
        unit("schedule.tau_target", self.tau_target)?;
        if self.tau_0 > self.tau_target {
            return Err(Error::config("schedule.tau_0", "tau_0 exceeds tau_target"));
        }
        if !self.margin_bound.is_finite() {
            return Err(Error::config("schedule.margin_bound", "must be finite"));
        }
        if self.piecewise_steps.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
            return Err(Error::config(
                "schedule.piecewise_steps",
                "steps must lie in (0, 1]",
            ));
        }
        let [b1, b2] = self.piecewise_boundaries;
        if self.step_rule == StepRule::Table
            && !(b1 <= b2 && (0.0..=1.0).contains(&b1) && b2 <= 1.0)
        {
            return Err(Error::config(
                "schedule.piecewise_boundaries",
                "boundaries must be ordered and lie in [0, 1]",
            ));
        }
        if let StepRule::Identical(d) = self.step_rule {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::config(
                    "schedule.step_rule",
                    "identical step must lie in (0, 1]",
                ));
            }
        }
        if matches!(self.kind, DecayKind::Linear | DecayKind::Cosine)
            && !(self.delta_0 > 0.0 && self.delta_0 <= 1.0)
        {
            return Err(Error::config(
                "schedule.delta_0",
                "initial step must lie in (0, 1]",
            ));
        }
        if let RegimeMode::Custom(p) = self.regime {
            if !(p.step > 0.0 && p.step <= 1.0) {
                return Err(Error::config("schedule.regime.step", "must lie in (0, 1]"));
            }
            if !(0.0..=1.0).contains(&p.min_mean_reward) || !(0.0..=1.0).contains(&p.max_reward_std)
            {
                return Err(Error::config(
                    "schedule.regime",
                    "bounds must lie in [0, 1]",
                ));
            }
        }
        if self.kind == DecayKind::Staged {
            validate_stages(&self.stages)?;
            if self
                .stages
                .iter()
                .any(|s| s.tau < self.tau_0 || s.tau > self.tau_target)
            {
                return Err(Error::config(
                    "schedule.stages",
                    "stage thresholds must lie in [tau_0, tau_target]",
                ));
            }
            if self.stages.windows(2).any(|w| w[1].tau < w[0].tau) {
                return Err(Error::config(
                    "schedule.stages",
                    "stage thresholds must not decrease",
                ));
            }
        }
        Ok(())
    }
}

/// A recorded threshold change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateEvent {
    pub step: usize,
    pub from: f64,
    pub to: f64,
    /// Window statistics that triggered the change, if gated.
    pub metrics: Option<WindowMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    config: ScheduleConfig,
    tau: f64,
    log: Vec<UpdateEvent>,
}

impl SchedulerState {
    pub fn new(config: ScheduleConfig) -> Result<Self> {
        config.validate()?;
        let tau = snap_to_grid(config.tau_0);
        Ok(Self {
            config,
            tau,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &ScheduleConfig {
        &self.config
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn updates(&self) -> &[UpdateEvent] {
        &self.log
    }

    pub fn is_complete(&self) -> bool {
        self.tau >= self.config.tau_target - 0.5 * TAU_GRID
    }

    /// Bounds in force at the current threshold.
    pub fn regime(&self) -> RegimeParams {
        regime_for(self.tau, &self.config.regime)
    }

    /// Raw step size at threshold `tau`, before boundary landing and the
    /// target cap. `None` for kinds that do not step.
    pub fn step_size(&self, tau: f64) -> Option<f64> {
        let c = &self.config;
        match c.kind {
            DecayKind::Piecewise => Some(match c.step_rule {
                StepRule::Regime => regime_for(tau, &c.regime).step,
                StepRule::Identical(d) => d,
                StepRule::Table => {
                    let [b1, b2] = c.piecewise_boundaries;
                    if tau >= b2 {
                        c.piecewise_steps[2]
                    } else if tau >= b1 {
                        c.piecewise_steps[1]
                    } else {
                        c.piecewise_steps[0]
                    }
                }
            }),
            DecayKind::Linear => Some(c.delta_0 * (1.0 - self.progress_fraction(tau))),
            DecayKind::Cosine => {
                Some(0.5 * c.delta_0 * (1.0 + (PI * self.progress_fraction(tau)).cos()))
            }
            DecayKind::Fixed | DecayKind::Staged => None,
        }
    }

    fn progress_fraction(&self, tau: f64) -> f64 {
        let span = self.config.tau_target - self.config.tau_0;
        if span <= 0.0 {
            1.0
        } else {
            ((tau - self.config.tau_0) / span).clamp(0.0, 1.0)
        }
    }

    /// Thresholds at which the active step rule changes.
    pub fn stage_boundaries(&self) -> Vec<f64> {
        let c = &self.config;
        match (c.kind, c.step_rule, c.regime) {
            (DecayKind::Piecewise, StepRule::Regime, RegimeMode::Adaptive) => {
                ADAPTIVE_BOUNDARIES.to_vec()
            }
            (DecayKind::Piecewise, StepRule::Table, _) => c.piecewise_boundaries.to_vec(),
            _ => Vec::new(),
        }
    }

    /// The threshold one update would move to from `tau`.
    pub fn next_tau(&self, tau: f64) -> Option<f64> {
        let step = self.step_size(tau)?;
        let mut next = tau + step;
        if self.config.land_on_stage_boundaries {
            if let Some(b) = self
                .stage_boundaries()
                .into_iter()
                .find(|&b| b > tau + 0.5 * TAU_GRID)
            {
                next = next.min(b);
            }
        }
        Some(snap_to_grid(next.min(self.config.tau_target)))
    }

    /// Apply the update rule against the window. Returns the event when the
    /// threshold rose.
    pub fn maybe_update(&mut self, window: &WindowStats, step: usize) -> Option<UpdateEvent> {
        if !self.config.kind.is_performance_gated() || self.is_complete() {
            return None;
        }
        let metrics = window.metrics(self.tau)?;
        if !criterion_masked(
            &metrics,
            &self.regime(),
            self.config.margin_bound,
            self.config.criteria,
        ) {
            return None;
        }
        self.advance(step, Some(metrics))
    }

    /// Step the threshold unconditionally, as if the criterion had passed.
    pub fn advance(&mut self, step: usize, metrics: Option<WindowMetrics>) -> Option<UpdateEvent> {
        let next = self.next_tau(self.tau)?;
        self.record(step, next, metrics)
    }

    /// Move a staged schedule to the threshold for `step` of `total_steps`.
    pub fn sync_progress(
        &mut self,
        step: usize,
        total_steps: usize,
    ) -> Result<Option<UpdateEvent>> {
        if self.config.kind != DecayKind::Staged {
            return Ok(None);
        }
        let progress = if total_steps == 0 {
            0.0
        } else {
            (step as f64 / total_steps as f64).min(1.0)
        };
        let tau = snap_to_grid(staged_threshold(progress, &self.config.stages)?);
        Ok(self.record(step, tau, None))
    }

    fn record(
        &mut self,
        step: usize,
        to: f64,
        metrics: Option<WindowMetrics>,
    ) -> Option<UpdateEvent> {
        if to <= self.tau {
            return None;
        }
        let ev = UpdateEvent {
            step,
            from: self.tau,
            to,
            metrics,
        };
        self.tau = to;
        self.log.push(ev);
        Some(ev)
    }
}
