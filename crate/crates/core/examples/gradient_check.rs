//! Compare the analytic surrogate gradient with central finite differences.
//!
//! cargo run --example gradient_check

use iou_curriculum::grpo::{group_advantages, objective_at, objective_gradient, GrpoConfig};
use iou_curriculum::simenv::{sample_group, PolicyGradient, PolicyParams, TaskSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> iou_curriculum::Result<()> {
    let task = TaskSpec::hard();
    let old = PolicyParams::initial(&task)?;
    let mut group = sample_group(&old, &task, 8, &mut ChaCha8Rng::seed_from_u64(4), 0)?;
    group.rewards = group.ious.clone();
    let cfg = GrpoConfig::default();
    let adv = group_advantages(&group.rewards, cfg.advantage_eps)?;

    let mut params = old.clone();
    params.mean[0] += 0.01;
    params.log_scale[2] -= 0.03;
    let analytic = objective_gradient(&params, &group, &adv, &cfg)?;

    let h = 1e-5;
    for j in 0..8 {
        let mut e = PolicyGradient::zero();
        let (name, a) = if j < 4 {
            e.mean[j] = 1.0;
            (format!("mean[{j}]"), analytic.mean[j])
        } else {
            e.log_scale[j - 4] = 1.0;
            (format!("log_scale[{}]", j - 4), analytic.log_scale[j - 4])
        };
        let up = objective_at(&params.perturbed(&e, h), &group, &adv, &cfg)?.value;
        let down = objective_at(&params.perturbed(&e, -h), &group, &adv, &cfg)?.value;
        let fd = (up - down) / (2.0 * h);
        println!("{name:<13} analytic {a:+.6e}  finite-diff {fd:+.6e}");
    }
    Ok(())
}
