//! One training run under the default curriculum, printing the threshold
//! staircase and window statistics at each update.
//!
//! cargo run --release --example train_curriculum -- [seed]

use iou_curriculum::runner::{run_seed, RunConfig};

fn main() -> iou_curriculum::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(42);
    let cfg = RunConfig::default();
    let (result, summary) = run_seed(&cfg, seed)?;

    for ev in &result.updates {
        let m = ev.metrics.expect("gated updates carry metrics");
        println!(
            "step {:>3}: tau {:.2} -> {:.2}  (hit rate {:.2}, std {:.2}, margin {:+.3})",
            ev.step, ev.from, ev.to, m.mean_reward, m.reward_std, m.iou_margin
        );
    }
    for r in result.trace.iter().step_by(25) {
        println!(
            "step {:>3}  tau {:.2}  group reward {:.3}  group iou {:.3}",
            r.step, r.tau, r.group_mean_reward, r.group_mean_iou
        );
    }
    println!(
        "final mean IoU {:.3}, all-zero groups {:.1}%, held-out A@0.5 {:.3} A@0.8 {:.3} mAP {:.3}",
        summary.final_mean_iou,
        100.0 * summary.all_zero_fraction,
        summary.eval.a50,
        summary.eval.a80,
        summary.eval.map
    );
    println!(
        "learned mean {:.3?}, scales {:.3?}",
        result.final_params.mean,
        result.final_params.scales()
    );
    Ok(())
}
