//! Synthetic grounding task and a learnable Gaussian box policy.
//!
//! Each step draws one ground-truth box. The policy proposes candidates in a
//! frame anchored on that box: the latent action `u ~ N(mean, diag(sigma^2))`
//! shifts the center by `u[0..2]` box widths/heights and scales the size by
//! `exp(u[2..4])`. The optimum (`mean = 0`, scales at the noise floor) is
//! known in closed form, so learning progress can be measured exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalmetrics::PredictionRecord;
use crate::geometry::{clamp_to_unit, iou, BBox};
use crate::grpo::{
    group_advantages, objective_at, policy_gradient_step, GroupSample, GrpoConfig, ObjectiveValue,
};
use crate::runner::MetricsRecord;
use crate::scheduler::{SchedulerState, UpdateEvent};
use crate::tracker::{StepRecord, WindowStats};

pub const ACTION_DIM: usize = 4;

/// Default direction of the untrained policy's bias: shifted right and down,
/// and undersized.
pub const BIAS_DIRECTION: [f64; ACTION_DIM] = [1.0, 1.0, -1.75, -1.75];

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSpec {
    /// Ground-truth centers are uniform in this range on both axes.
    pub center_range: [f64; 2],
    /// Ground-truth widths and heights are uniform in this range.
    pub size_range: [f64; 2],
    /// Magnitude of the untrained policy's offset.
    pub bias: f64,
    /// Direction of that offset in the latent action space.
    pub bias_direction: [f64; ACTION_DIM],
    /// Untrained policy scale on every coordinate.
    pub initial_scale: f64,
    /// Smallest scale the policy can reach.
    pub noise_floor: f64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self::hard()
    }
}

impl TaskSpec {
    pub fn hard() -> Self {
        Self {
            center_range: [0.3, 0.7],
            size_range: [0.2, 0.4],
            bias: 0.3,
            bias_direction: BIAS_DIRECTION,
            initial_scale: 0.2,
            noise_floor: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [c0, c1] = self.center_range;
        let [s0, s1] = self.size_range;
        if !(c0 <= c1 && s0 <= s1 && s0 > 0.0) {
            return Err(Error::config(
                "task",
                "ranges must be ordered with positive sizes",
            ));
        }
        if c0 - 0.5 * s1 < 0.0 || c1 + 0.5 * s1 > 1.0 {
            return Err(Error::config(
                "task.center_range",
                "ground-truth boxes would leave the unit square",
            ));
        }
        if !(self.bias >= 0.0 && self.bias.is_finite()) {
            return Err(Error::config("task.bias", "must be finite and >= 0"));
        }
        if self.bias_direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("task.bias_direction", "must be finite"));
        }
        if !(self.initial_scale > 0.0 && self.initial_scale.is_finite()) {
            return Err(Error::config(
                "task.initial_scale",
                "must be finite and > 0",
            ));
        }
        if !(self.noise_floor >= 0.0 && self.noise_floor.is_finite()) {
            return Err(Error::config("task.noise_floor", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn sample_ground_truth<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<BBox> {
        let mut u = |[lo, hi]: [f64; 2]| lo + (hi - lo) * rng.random::<f64>();
        let cx = u(self.center_range);
        let cy = u(self.center_range);
        let w = u(self.size_range);
        let h = u(self.size_range);
        BBox::new(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
    }
}

/// Policy parameters together with the frozen reference copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub mean: [f64; ACTION_DIM],
    pub log_scale: [f64; ACTION_DIM],
    pub reference_mean: [f64; ACTION_DIM],
    pub reference_log_scale: [f64; ACTION_DIM],
    pub scale_floor: f64,
}

/// A gradient (or any tangent vector) in parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyGradient {
    pub mean: [f64; ACTION_DIM],
    pub log_scale: [f64; ACTION_DIM],
}

impl PolicyGradient {
    pub fn zero() -> Self {
        Self {
            mean: [0.0; ACTION_DIM],
            log_scale: [0.0; ACTION_DIM],
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(j) = self.mean.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                component: format!("mean[{j}]"),
            });
        }
        if let Some(j) = self.log_scale.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                component: format!("log_scale[{j}]"),
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.mean
            .iter()
            .chain(&self.log_scale)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl PolicyParams {
    /// Build parameters whose reference copy equals the starting point.
    pub fn new(
        mean: [f64; ACTION_DIM],
        log_scale: [f64; ACTION_DIM],
        scale_floor: f64,
    ) -> Result<Self> {
        if mean.iter().chain(&log_scale).any(|v| !v.is_finite()) {
            return Err(Error::input("policy parameters must be finite"));
        }
        if !(scale_floor >= 0.0 && scale_floor.is_finite()) {
            return Err(Error::input(format!(
                "scale floor must be finite and >= 0, got {scale_floor}"
            )));
        }
        let mut p = Self {
            mean,
            log_scale,
            reference_mean: mean,
            reference_log_scale: log_scale,
            scale_floor,
        };
        p.project_to_floor();
        p.reference_log_scale = p.log_scale;
        Ok(p)
    }

    /// The untrained policy of a task.
    pub fn initial(task: &TaskSpec) -> Result<Self> {
        let mean = task.bias_direction.map(|d| task.bias * d);
        Self::new(
            mean,
            [task.initial_scale.ln(); ACTION_DIM],
            task.noise_floor,
        )
    }

    /// The best policy a task admits: no bias, scales at the floor.
    pub fn optimal(task: &TaskSpec) -> Result<Self> {
        let s = if task.noise_floor > 0.0 {
            task.noise_floor.ln()
        } else {
            -50.0
        };
        Self::new([0.0; ACTION_DIM], [s; ACTION_DIM], task.noise_floor)
    }

    fn log_floor(&self) -> f64 {
        if self.scale_floor > 0.0 {
            self.scale_floor.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn effective_log_scale(&self, s: f64) -> f64 {
        s.max(self.log_floor())
    }

    pub fn scales(&self) -> [f64; ACTION_DIM] {
        self.log_scale.map(|s| self.effective_log_scale(s).exp())
    }

    fn reference_scales(&self) -> [f64; ACTION_DIM] {
        self.reference_log_scale
            .map(|s| self.effective_log_scale(s).exp())
    }

    fn scale_active(&self, j: usize) -> bool {
        self.log_scale[j] > self.log_floor()
    }

    pub fn project_to_floor(&mut self) {
        let floor = self.log_floor();
        for s in &mut self.log_scale {
            if *s < floor {
                *s = floor;
            }
        }
    }

    /// Log-density of a latent action.
    pub fn log_prob(&self, action: &[f64; ACTION_DIM]) -> f64 {
        (0..ACTION_DIM)
            .map(|j| {
                let s = self.effective_log_scale(self.log_scale[j]);
                let z = (action[j] - self.mean[j]) / s.exp();
                -0.5 * z * z - s - 0.5 * LN_2PI
            })
            .sum()
    }

    /// Gradient of [`log_prob`](Self::log_prob) with respect to the parameters.
    pub fn score(&self, action: &[f64; ACTION_DIM]) -> PolicyGradient {
        let scales = self.scales();
        let mut g = PolicyGradient::zero();
        for j in 0..ACTION_DIM {
            let d = action[j] - self.mean[j];
            g.mean[j] = d / (scales[j] * scales[j]);
            if self.scale_active(j) {
                let z = d / scales[j];
                g.log_scale[j] = z * z - 1.0;
            }
        }
        g
    }

    /// KL divergence to the reference, averaged over coordinates.
    pub fn kl_to_reference(&self) -> f64 {
        let (sig, rsig) = (self.scales(), self.reference_scales());
        (0..ACTION_DIM)
            .map(|j| {
                let dm = self.mean[j] - self.reference_mean[j];
                (rsig[j] / sig[j]).ln() + (sig[j] * sig[j] + dm * dm) / (2.0 * rsig[j] * rsig[j])
                    - 0.5
            })
            .sum::<f64>()
            / ACTION_DIM as f64
    }

    pub fn kl_gradient(&self) -> PolicyGradient {
        let (sig, rsig) = (self.scales(), self.reference_scales());
        let n = ACTION_DIM as f64;
        let mut g = PolicyGradient::zero();
        for j in 0..ACTION_DIM {
            let r2 = rsig[j] * rsig[j];
            g.mean[j] = (self.mean[j] - self.reference_mean[j]) / r2 / n;
            if self.scale_active(j) {
                g.log_scale[j] = (sig[j] * sig[j] / r2 - 1.0) / n;
            }
        }
        g
    }

    /// Shift every parameter by `h * direction`.
    pub fn perturbed(&self, direction: &PolicyGradient, h: f64) -> Self {
        let mut p = self.clone();
        for j in 0..ACTION_DIM {
            p.mean[j] += h * direction.mean[j];
            p.log_scale[j] += h * direction.log_scale[j];
        }
        p
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; ACTION_DIM] {
        let scales = self.scales();
        let mut u = [0.0; ACTION_DIM];
        for j in 0..ACTION_DIM {
            let eps: f64 = rng.sample(StandardNormal);
            u[j] = self.mean[j] + scales[j] * eps;
        }
        u
    }
}

/// Map a latent action to a box around `truth`.
pub fn decode_action(truth: &BBox, action: &[f64; ACTION_DIM]) -> Result<BBox> {
    let enc = truth.encode();
    let frame = [truth.width(), truth.height(), 1.0, 1.0];
    let mut raw = [0.0; ACTION_DIM];
    for j in 0..ACTION_DIM {
        raw[j] = enc[j] + frame[j] * action[j];
    }
    clamp_to_unit(raw)
}

/// Draw one ground truth and `group_size` candidates for it. Rewards are left
/// at zero for the caller to fill.
pub fn sample_group<R: Rng + ?Sized>(
    params: &PolicyParams,
    task: &TaskSpec,
    group_size: usize,
    rng: &mut R,
    step: usize,
) -> Result<GroupSample> {
    if group_size < 2 {
        return Err(Error::input(format!(
            "group size must be at least 2, got {group_size}"
        )));
    }
    let truth = task.sample_ground_truth(rng)?;
    let mut boxes = Vec::with_capacity(group_size);
    let mut actions = Vec::with_capacity(group_size);
    let mut ious = Vec::with_capacity(group_size);
    let mut logp = Vec::with_capacity(group_size);
    for _ in 0..group_size {
        let u = params.sample_action(rng);
        let b = decode_action(&truth, &u)?;
        ious.push(iou(&b, &truth));
        logp.push(params.log_prob(&u));
        boxes.push(b);
        actions.push(u);
    }
    Ok(GroupSample {
        step,
        ground_truth: truth,
        boxes,
        actions,
        ious,
        rewards: vec![0.0; group_size],
        logp_new: logp.clone(),
        logp_old: logp,
    })
}

/// How candidates are scored during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RewardScheme {
    /// 1 when IoU reaches the scheduler's current threshold.
    #[default]
    Binary,
    /// The IoU itself; the threshold only affects logging.
    RawIou,
}

impl RewardScheme {
    pub fn reward(self, iou: f64, tau: f64) -> Result<f64> {
        match self {
            RewardScheme::Binary => crate::reward::binary_reward(iou, tau),
            RewardScheme::RawIou => crate::reward::raw_iou_reward(iou),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub trace: Vec<MetricsRecord>,
    pub updates: Vec<UpdateEvent>,
    pub initial_params: PolicyParams,
    pub final_params: PolicyParams,
    /// Steps in which an importance ratio was clamped.
    pub ratio_clamped_steps: usize,
}

impl RunResult {
    /// Fraction of steps whose whole group earned zero reward.
    pub fn all_zero_fraction(&self) -> f64 {
        if self.trace.is_empty() {
            return 0.0;
        }
        let zero = self
            .trace
            .iter()
            .filter(|r| r.group_mean_reward == 0.0)
            .count();
        zero as f64 / self.trace.len() as f64
    }

    /// Mean group IoU over the last `n` steps (or all, if fewer).
    pub fn final_mean_iou(&self, n: usize) -> f64 {
        let tail = &self.trace[self.trace.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|r| r.group_mean_iou).sum::<f64>() / tail.len() as f64
    }

    pub fn tau_is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| w[1].tau >= w[0].tau)
    }
}

/// Run the training loop from the task's untrained policy.
pub fn train_run(
    task: &TaskSpec,
    cfg: &GrpoConfig,
    reward: RewardScheme,
    mut sched: SchedulerState,
    mut window: WindowStats,
    steps: usize,
    seed: u64,
) -> Result<RunResult> {
    task.validate()?;
    cfg.validate()?;
    let initial = PolicyParams::initial(task)?;
    let mut params = initial.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Vec::with_capacity(steps);
    let mut clamped = 0;
    window.track_threshold(sched.tau());

    for t in 0..steps {
        let mut updated = false;
        if sched
            .sync_progress(t, steps)
            .map_err(|e| e.at_step(t))?
            .is_some()
        {
            window.track_threshold(sched.tau());
            updated = true;
        }
        let tau = sched.tau();
        let (group, obj, next) =
            train_step(&params, task, cfg, reward, tau, &mut rng, t).map_err(|e| e.at_step(t))?;
        params = next;
        clamped += obj.ratio_clamped as usize;

        let record = StepRecord::new(t, group.ious.clone(), group.rewards.clone())
            .map_err(|e| e.at_step(t))?;
        window.push(record).map_err(|e| e.at_step(t))?;
        let metrics = window.metrics(tau);
        if sched.maybe_update(&window, t).is_some() {
            window.refresh_on_update();
            window.track_threshold(sched.tau());
            updated = true;
        }
        trace.push(MetricsRecord {
            step: t,
            tau,
            group_mean_reward: group.mean_reward(),
            window_mean_reward: metrics.map(|m| m.mean_reward),
            window_reward_std: metrics.map(|m| m.reward_std),
            iou_margin: metrics.map(|m| m.iou_margin),
            group_mean_iou: group.mean_iou(),
            updated,
            objective: obj.value,
        });
    }

    Ok(RunResult {
        seed,
        trace,
        updates: sched.updates().to_vec(),
        initial_params: initial,
        final_params: params,
        ratio_clamped_steps: clamped,
    })
}

fn train_step<R: Rng + ?Sized>(
    params: &PolicyParams,
    task: &TaskSpec,
    cfg: &GrpoConfig,
    reward: RewardScheme,
    tau: f64,
    rng: &mut R,
    t: usize,
) -> Result<(GroupSample, ObjectiveValue, PolicyParams)> {
    let mut group = sample_group(params, task, cfg.group_size, rng, t)?;
    group.rewards = group
        .ious
        .iter()
        .map(|&v| reward.reward(v, tau))
        .collect::<Result<_>>()?;
    let adv = group_advantages(&group.rewards, cfg.advantage_eps)?;
    let obj = objective_at(params, &group, &adv, cfg)?;
    let next = policy_gradient_step(params, &group, &adv, cfg)?;
    Ok((group, obj, next))
}

/// One sampled prediction per held-out ground truth.
pub fn evaluate_policy(
    params: &PolicyParams,
    task: &TaskSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<PredictionRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let gt = task.sample_ground_truth(&mut rng)?;
            let pred = decode_action(&gt, &params.sample_action(&mut rng))?;
            Ok(PredictionRecord {
                id: format!("sample-{i}"),
                pred,
                gt,
            })
        })
        .collect()
}

/// Monte-Carlo mean IoU of the best policy the task admits.
pub fn iou_ceiling(task: &TaskSpec, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::input("need at least one sample"));
    }
    let best = PolicyParams::optimal(task)?;
    let recs = evaluate_policy(&best, task, samples, seed)?;
    Ok(recs.iter().map(|r| iou(&r.pred, &r.gt)).sum::<f64>() / samples as f64)
}
