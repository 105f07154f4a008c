//! Curriculum against fixed, progress-staged and raw-IoU rewards.
//!
//! cargo run --release --example baselines

use iou_curriculum::runner::{run_sweep, RunConfig, SweepRecipe};

fn main() -> iou_curriculum::Result<()> {
    let dir = tempfile::tempdir()?;
    let base = RunConfig {
        out_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    let report = run_sweep(&base, SweepRecipe::Baselines)?;
    println!(
        "{:<12} {:>10} {:>8} {:>8}",
        "variant", "final IoU", "A@0.5", "A@0.8"
    );
    for v in &report.variants {
        let n = v.runs.len() as f64;
        let a50 = v.runs.iter().map(|r| r.eval.a50).sum::<f64>() / n;
        let a80 = v.runs.iter().map(|r| r.eval.a80).sum::<f64>() / n;
        println!(
            "{:<12} {:>10.3} {:>8.3} {:>8.3}",
            v.label, v.mean_final_iou, a50, a80
        );
    }
    Ok(())
}
