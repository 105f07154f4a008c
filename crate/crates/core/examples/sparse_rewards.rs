//! A strict fixed threshold starves the policy of signal; the curriculum does not.
//!
//! cargo run --release --example sparse_rewards

use iou_curriculum::runner::{run_seed, RunConfig};
use iou_curriculum::scheduler::ScheduleConfig;

fn main() -> iou_curriculum::Result<()> {
    let strict = RunConfig {
        schedule: ScheduleConfig::fixed(0.8),
        ..RunConfig::default()
    };
    let mut frozen = strict.clone();
    frozen.grpo.kl_coef = 0.0;
    let curriculum = RunConfig::default();

    for seed in [42, 43, 44] {
        let (_, s) = run_seed(&strict, seed)?;
        let (r, _) = run_seed(&frozen, seed)?;
        let (_, c) = run_seed(&curriculum, seed)?;
        println!(
            "seed {seed}: fixed 0.8 all-zero {:>5.1}% (params unchanged without KL: {}) | curriculum all-zero {:>4.1}%, {} updates",
            100.0 * s.all_zero_fraction,
            r.final_params == r.initial_params,
            100.0 * c.all_zero_fraction,
            c.update_count
        );
    }
    Ok(())
}
