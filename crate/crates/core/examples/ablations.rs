//! Run one of the bundled ablation grids and print a table.
//!
//! cargo run --release --example ablations -- criteria
//! (also: strategy, delta, window, decay, compare, baselines)

use iou_curriculum::runner::{run_sweep, RunConfig, SweepRecipe};

fn main() -> iou_curriculum::Result<()> {
    let recipe: SweepRecipe = std::env::args()
        .nth(1)
        .as_deref()
        .unwrap_or("criteria")
        .parse()?;
    let dir = tempfile::tempdir()?;
    let base = RunConfig {
        out_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    let report = run_sweep(&base, recipe)?;
    println!(
        "{:<36} {:>10} {:>8} {:>9}",
        "variant", "final IoU", "updates", "all-zero"
    );
    for v in &report.variants {
        println!(
            "{:<36} {:>10.3} {:>8.1} {:>8.1}%",
            v.label,
            v.mean_final_iou,
            v.mean_update_count,
            100.0 * v.mean_all_zero_fraction
        );
    }
    Ok(())
}
