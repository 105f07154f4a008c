use iou_curriculum::grpo::{
    clipped_surrogate, group_advantages, grpo_objective, objective_gradient, policy_gradient_step,
    GrpoConfig,
};
use iou_curriculum::simenv::{sample_group, PolicyParams, TaskSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn group(seed: u64) -> (PolicyParams, iou_curriculum::GroupSample) {
    let task = TaskSpec::hard();
    let p = PolicyParams::initial(&task).unwrap();
    let g = sample_group(&p, &task, 8, &mut ChaCha8Rng::seed_from_u64(seed), 0).unwrap();
    (p, g)
}

#[test]
fn zero_reward_group_gives_no_update_without_kl() {
    let (p, g) = group(5);
    let cfg = GrpoConfig {
        kl_coef: 0.0,
        ..GrpoConfig::default()
    };
    let adv = group_advantages(&g.rewards, cfg.advantage_eps).unwrap();
    assert_eq!(
        objective_gradient(&p, &g, &adv, &cfg).unwrap().max_abs(),
        0.0
    );
    assert_eq!(policy_gradient_step(&p, &g, &adv, &cfg).unwrap(), p);
}

#[test]
fn successful_candidates_pull_the_mean() {
    let (p, g) = group(6);
    let best = g.ious.iter().cloned().fold(0.0, f64::max);
    let g = g
        .clone()
        .with_rewards(g.ious.iter().map(|&v| (v == best) as u8 as f64).collect())
        .unwrap();
    let cfg = GrpoConfig::default();
    let adv = group_advantages(&g.rewards, cfg.advantage_eps).unwrap();
    let next = policy_gradient_step(&p, &g, &adv, &cfg).unwrap();
    let winner = g.rewards.iter().position(|&r| r == 1.0).unwrap();
    let before: f64 = (0..4)
        .map(|j| (g.actions[winner][j] - p.mean[j]).powi(2))
        .sum();
    let after: f64 = (0..4)
        .map(|j| (g.actions[winner][j] - next.mean[j]).powi(2))
        .sum();
    assert!(after < before);
}

#[test]
fn on_policy_objective_is_minus_kl() {
    let (_, g) = group(7);
    let cfg = GrpoConfig::default();
    let g = g.clone().with_rewards(g.ious.clone()).unwrap();
    let adv = group_advantages(&g.rewards, cfg.advantage_eps).unwrap();
    let v = grpo_objective(&g, &adv, 0.3, &cfg).unwrap();
    assert!((v.value + 0.4 * 0.3).abs() < 1e-12);
}

#[test]
fn mismatched_lengths_are_rejected() {
    let (p, g) = group(8);
    let cfg = GrpoConfig::default();
    assert!(objective_gradient(&p, &g, &[0.0; 3], &cfg).is_err());
    assert!(g.with_rewards(vec![1.0]).is_err());
}

proptest! {
    #[test]
    fn surrogate_never_exceeds_unclipped(ratio in 0.0..5.0f64, adv in -3.0..3.0f64) {
        prop_assert!(clipped_surrogate(ratio, adv, 0.2) <= ratio * adv + 1e-15);
    }

    #[test]
    fn clip_floor_for_negative_advantage(ratio in 0.0..0.79f64, adv in -3.0..-0.01f64) {
        prop_assert!((clipped_surrogate(ratio, adv, 0.2) - 0.8 * adv).abs() < 1e-12);
    }
}
