//! Group-relative advantages and the clipped, KL-regularized surrogate.
//!
//! Rewards of the `G` candidates drawn for one query are standardized within
//! the group, so no value network is needed. The surrogate is the PPO-style
//! clipped ratio objective minus `beta` times the KL divergence from the
//! frozen reference policy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::simenv::{PolicyGradient, PolicyParams, ACTION_DIM};

/// Log-ratios beyond this magnitude are clamped before exponentiation.
pub const MAX_LOG_RATIO: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    pub group_size: usize,
    /// Clip half-width on the importance ratio.
    pub clip_epsilon: f64,
    /// KL coefficient `beta`.
    pub kl_coef: f64,
    /// Added to the group reward variance before the square root.
    pub advantage_eps: f64,
    pub learning_rate: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            clip_epsilon: 0.2,
            kl_coef: 0.4,
            advantage_eps: 1e-6,
            learning_rate: 0.1,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::config(
                "grpo.group_size",
                "group size must be at least 2",
            ));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::config(
                "grpo.clip_epsilon",
                "clip epsilon must lie in (0, 1)",
            ));
        }
        if !(self.kl_coef >= 0.0 && self.kl_coef.is_finite()) {
            return Err(Error::config(
                "grpo.kl_coef",
                "kl coefficient must be finite and >= 0",
            ));
        }
        if !(self.advantage_eps > 0.0 && self.advantage_eps.is_finite()) {
            return Err(Error::config(
                "grpo.advantage_eps",
                "advantage epsilon must be > 0",
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(
                "grpo.learning_rate",
                "learning rate must be > 0",
            ));
        }
        Ok(())
    }
}

/// One step's group of candidates for a single ground-truth box.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    pub step: usize,
    pub ground_truth: BBox,
    pub boxes: Vec<BBox>,
    /// Latent Gaussian draws in the policy's action space.
    pub actions: Vec<[f64; ACTION_DIM]>,
    pub ious: Vec<f64>,
    pub rewards: Vec<f64>,
    pub logp_new: Vec<f64>,
    pub logp_old: Vec<f64>,
}

impl GroupSample {
    pub fn len(&self) -> usize {
        self.ious.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ious.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.len();
        if g < 2 {
            return Err(Error::input(format!(
                "group needs at least 2 candidates, got {g}"
            )));
        }
        let lens = [
            self.boxes.len(),
            self.actions.len(),
            self.rewards.len(),
            self.logp_new.len(),
            self.logp_old.len(),
        ];
        if lens.iter().any(|&l| l != g) {
            return Err(Error::input(format!(
                "group lists disagree in length: {g} vs {lens:?}"
            )));
        }
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::input("group rewards must be finite"));
        }
        Ok(())
    }

    /// Replace the rewards, checking the length.
    pub fn with_rewards(mut self, rewards: Vec<f64>) -> Result<Self> {
        if rewards.len() != self.len() {
            return Err(Error::input(format!(
                "expected {} rewards, got {}",
                self.len(),
                rewards.len()
            )));
        }
        self.rewards = rewards;
        self.validate()?;
        Ok(self)
    }

    pub fn mean_reward(&self) -> f64 {
        mean(&self.rewards)
    }

    pub fn mean_iou(&self) -> f64 {
        mean(&self.ious)
    }

    /// True when no candidate earned any reward.
    pub fn all_zero(&self) -> bool {
        self.rewards.iter().all(|&r| r == 0.0)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `A_i = (r_i - mean(r)) / sqrt(var(r) + eps)` with population variance.
///
/// A group whose rewards are all equal gets exactly zero advantages.
pub fn group_advantages(rewards: &[f64], eps: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::input(format!(
            "group needs at least 2 rewards, got {}",
            rewards.len()
        )));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::input(format!(
            "advantage epsilon must be > 0, got {eps}"
        )));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::input("rewards must be finite"));
    }
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let m = mean(rewards);
    let var = rewards.iter().map(|r| (r - m).powi(2)).sum::<f64>() / rewards.len() as f64;
    let denom = (var + eps).sqrt();
    Ok(rewards.iter().map(|r| (r - m) / denom).collect())
}

/// `min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    (ratio * advantage).min(clipped * advantage)
}

/// True when the unclipped branch is the active one, i.e. the surrogate
/// carries gradient through the ratio.
fn unclipped_active(ratio: f64, advantage: f64, eps: f64) -> bool {
    if advantage > 0.0 {
        ratio < 1.0 + eps
    } else if advantage < 0.0 {
        ratio > 1.0 - eps
    } else {
        false
    }
}

fn ratio_from_logs(logp_new: f64, logp_old: f64) -> (f64, bool) {
    let lr = logp_new - logp_old;
    if lr.is_nan() {
        return (1.0, true);
    }
    if lr.abs() > MAX_LOG_RATIO {
        ((lr.signum() * MAX_LOG_RATIO).exp(), true)
    } else {
        (lr.exp(), false)
    }
}

/// Value of the surrogate objective, with a flag raised when any importance
/// ratio had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    pub ratio_clamped: bool,
}

/// `(1/G) sum_i min(rho_i A_i, clip(rho_i) A_i) - beta * kl`.
pub fn grpo_objective(
    group: &GroupSample,
    advantages: &[f64],
    kl: f64,
    cfg: &GrpoConfig,
) -> Result<ObjectiveValue> {
    if advantages.len() != group.len() {
        return Err(Error::input(format!(
            "{} advantages for a group of {}",
            advantages.len(),
            group.len()
        )));
    }
    if group
        .logp_new
        .iter()
        .chain(&group.logp_old)
        .any(|l| !l.is_finite())
    {
        return Err(Error::input("log-probabilities must be finite"));
    }
    let mut clamped = false;
    let total: f64 = group
        .logp_new
        .iter()
        .zip(&group.logp_old)
        .zip(advantages)
        .map(|((&new, &old), &adv)| {
            let (ratio, c) = ratio_from_logs(new, old);
            clamped |= c;
            clipped_surrogate(ratio, adv, cfg.clip_epsilon)
        })
        .sum();
    Ok(ObjectiveValue {
        value: total / group.len() as f64 - cfg.kl_coef * kl,
        ratio_clamped: clamped,
    })
}

/// The surrogate objective evaluated at `params`: log-probabilities of the
/// stored actions and the KL term are recomputed from the parameters.
pub fn objective_at(
    params: &PolicyParams,
    group: &GroupSample,
    advantages: &[f64],
    cfg: &GrpoConfig,
) -> Result<ObjectiveValue> {
    let mut g = group.clone();
    g.logp_new = group.actions.iter().map(|a| params.log_prob(a)).collect();
    grpo_objective(&g, advantages, params.kl_to_reference(), cfg)
}

/// Analytic gradient of [`objective_at`] with respect to the policy mean and
/// log-scales.
pub fn objective_gradient(
    params: &PolicyParams,
    group: &GroupSample,
    advantages: &[f64],
    cfg: &GrpoConfig,
) -> Result<PolicyGradient> {
    group.validate()?;
    if advantages.len() != group.len() {
        return Err(Error::input(format!(
            "{} advantages for a group of {}",
            advantages.len(),
            group.len()
        )));
    }
    let g = group.len() as f64;
    let mut grad = PolicyGradient::zero();
    for ((action, &old), &adv) in group.actions.iter().zip(&group.logp_old).zip(advantages) {
        let (ratio, _) = ratio_from_logs(params.log_prob(action), old);
        if !unclipped_active(ratio, adv, cfg.clip_epsilon) {
            continue;
        }
        let score = params.score(action);
        let w = adv * ratio / g;
        for j in 0..ACTION_DIM {
            grad.mean[j] += w * score.mean[j];
            grad.log_scale[j] += w * score.log_scale[j];
        }
    }
    if cfg.kl_coef != 0.0 {
        let kl = params.kl_gradient();
        for j in 0..ACTION_DIM {
            grad.mean[j] -= cfg.kl_coef * kl.mean[j];
            grad.log_scale[j] -= cfg.kl_coef * kl.log_scale[j];
        }
    }
    grad.check_finite()?;
    Ok(grad)
}

/// One ascent step on the surrogate.
///
/// The gradient is preconditioned by the inverse Fisher information of the
/// diagonal Gaussian (`sigma^2` for the mean, `1/2` for log-scales), which
/// makes the step size independent of the current spread. The reference
/// parameters are carried over unchanged.
pub fn policy_gradient_step(
    params: &PolicyParams,
    group: &GroupSample,
    advantages: &[f64],
    cfg: &GrpoConfig,
) -> Result<PolicyParams> {
    let grad = objective_gradient(params, group, advantages, cfg)?;
    let scales = params.scales();
    let mut next = params.clone();
    for (j, s) in scales.iter().enumerate() {
        next.mean[j] += cfg.learning_rate * s * s * grad.mean[j];
        next.log_scale[j] += cfg.learning_rate * 0.5 * grad.log_scale[j];
    }
    next.project_to_floor();
    if let Some(j) = next.mean.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient {
            component: format!("mean[{j}]"),
        });
    }
    if let Some(j) = next.log_scale.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient {
            component: format!("log_scale[{j}]"),
        });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Mean and population std computed the long way.
    fn brute_advantages(r: &[f64], eps: f64) -> Vec<f64> {
        let n = r.len() as f64;
        let mut m = 0.0;
        for x in r {
            m += x;
        }
        m /= n;
        let mut v = 0.0;
        for x in r {
            v += (x - m) * (x - m);
        }
        v /= n;
        r.iter().map(|x| (x - m) / (v + eps).sqrt()).collect()
    }

    #[test]
    fn all_zero_group_has_zero_advantage() {
        assert_eq!(group_advantages(&[0.0; 4], 1e-6).unwrap(), vec![0.0; 4]);
        assert_eq!(group_advantages(&[0.3; 7], 1.0).unwrap(), vec![0.0; 7]);
    }

    #[test]
    fn single_success_advantages() {
        let a = group_advantages(&[1.0, 0.0, 0.0, 0.0], 1e-15).unwrap();
        let want = [
            3f64.sqrt(),
            -1.0 / 3f64.sqrt(),
            -1.0 / 3f64.sqrt(),
            -1.0 / 3f64.sqrt(),
        ];
        for (x, y) in a.iter().zip(want) {
            assert!((x - y).abs() < 1e-9, "{a:?}");
        }
    }

    #[test]
    fn advantage_errors() {
        assert!(group_advantages(&[1.0], 1e-6).is_err());
        assert!(group_advantages(&[1.0, f64::NAN], 1e-6).is_err());
        assert!(group_advantages(&[1.0, 0.0], 0.0).is_err());
    }

    fn dummy_group(logp_new: Vec<f64>, logp_old: Vec<f64>) -> GroupSample {
        let n = logp_new.len();
        let b = BBox::new(0.1, 0.1, 0.5, 0.5).unwrap();
        GroupSample {
            step: 0,
            ground_truth: b,
            boxes: vec![b; n],
            actions: vec![[0.0; ACTION_DIM]; n],
            ious: vec![1.0; n],
            rewards: vec![0.0; n],
            logp_new,
            logp_old,
        }
    }

    #[test]
    fn on_policy_objective_is_mean_advantage() {
        let adv = group_advantages(&[1.0, 0.0, 0.0, 0.0], 1e-6).unwrap();
        let g = dummy_group(vec![-1.0; 4], vec![-1.0; 4]);
        let cfg = GrpoConfig::default();
        let v = grpo_objective(&g, &adv, 0.0, &cfg).unwrap();
        assert!(v.value.abs() < 1e-12);
        assert!(!v.ratio_clamped);
        let v = grpo_objective(&g, &[0.0; 4], 0.25, &cfg).unwrap();
        assert_eq!(v.value, -cfg.kl_coef * 0.25);
    }

    #[test]
    fn clip_branch_caps_positive_advantage() {
        assert!((clipped_surrogate(2.0, 1.0, 0.2) - 1.2).abs() < 1e-15);
        // two candidates, the second with zero advantage
        let g = dummy_group(vec![2f64.ln(), 0.0], vec![0.0, 0.0]);
        let cfg = GrpoConfig {
            kl_coef: 0.0,
            ..GrpoConfig::default()
        };
        let v = grpo_objective(&g, &[1.0, 0.0], 0.0, &cfg).unwrap();
        assert!((v.value - 0.6).abs() < 1e-12);
    }

    #[test]
    fn huge_ratio_is_clamped_and_flagged() {
        let g = dummy_group(vec![1000.0, 0.0], vec![0.0, 0.0]);
        let cfg = GrpoConfig::default();
        let v = grpo_objective(&g, &[-1.0, 1.0], 0.0, &cfg).unwrap();
        assert!(v.ratio_clamped);
        assert!(v.value.is_finite());
    }

    #[test]
    fn config_validation() {
        assert!(GrpoConfig::default().validate().is_ok());
        for bad in [
            GrpoConfig {
                group_size: 1,
                ..Default::default()
            },
            GrpoConfig {
                clip_epsilon: 1.0,
                ..Default::default()
            },
            GrpoConfig {
                kl_coef: -0.1,
                ..Default::default()
            },
            GrpoConfig {
                advantage_eps: 0.0,
                ..Default::default()
            },
            GrpoConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    proptest! {
        #[test]
        fn advantages_match_brute_force(r in proptest::collection::vec(-5.0..5.0f64, 2..16)) {
            let a = group_advantages(&r, 1e-6).unwrap();
            let b = brute_advantages(&r, 1e-6);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn advantages_sum_to_zero_unit_std(r in proptest::collection::vec(proptest::bool::ANY, 2..16)) {
            let r: Vec<f64> = r.into_iter().map(|b| b as u8 as f64).collect();
            prop_assume!(r.iter().any(|&x| x != r[0]));
            let a = group_advantages(&r, 1e-300).unwrap();
            let s: f64 = a.iter().sum();
            prop_assert!(s.abs() < 1e-9);
            let var = a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64;
            prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn advantages_scale_invariant(
            r in proptest::collection::vec(0.0..1.0f64, 2..16),
            scale in 0.1..10.0f64,
            shift in -3.0..3.0f64,
        ) {
            prop_assume!(r.iter().any(|&x| (x - r[0]).abs() > 1e-3));
            let a = group_advantages(&r, 1e-300).unwrap();
            let moved: Vec<f64> = r.iter().map(|x| scale * x + shift).collect();
            let b = group_advantages(&moved, 1e-300).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn clip_ceiling_respected(ratio in 1.21..50.0f64, adv in 0.01..5.0f64) {
            let eps = 0.2;
            prop_assert!((clipped_surrogate(ratio, adv, eps) - 1.2 * adv).abs() < 1e-12);
            prop_assert!(!unclipped_active(ratio, adv, eps));
        }
    }
}
