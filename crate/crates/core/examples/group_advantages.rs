//! Group-relative advantages and the clipped surrogate for one sampled group.
//!
//! cargo run --example group_advantages

use iou_curriculum::grpo::{group_advantages, grpo_objective, policy_gradient_step, GrpoConfig};
use iou_curriculum::reward::binary_reward;
use iou_curriculum::simenv::{sample_group, PolicyParams, TaskSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> iou_curriculum::Result<()> {
    let task = TaskSpec::hard();
    let policy = PolicyParams::initial(&task)?;
    let cfg = GrpoConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    for tau in [0.3, 0.5] {
        let mut group = sample_group(&policy, &task, cfg.group_size, &mut rng, 0)?;
        group.rewards = group
            .ious
            .iter()
            .map(|&v| binary_reward(v, tau))
            .collect::<Result<_, _>>()?;
        let adv = group_advantages(&group.rewards, cfg.advantage_eps)?;
        println!("tau {tau}");
        for ((v, r), a) in group.ious.iter().zip(&group.rewards).zip(&adv) {
            println!("  iou {v:.3}  reward {r}  advantage {a:+.3}");
        }
        let obj = grpo_objective(&group, &adv, policy.kl_to_reference(), &cfg)?;
        let next = policy_gradient_step(&policy, &group, &adv, &cfg)?;
        println!(
            "  objective {:.4}, all-zero group: {}, mean moved to {:.3?}",
            obj.value,
            group.all_zero(),
            next.mean
        );
    }
    Ok(())
}
