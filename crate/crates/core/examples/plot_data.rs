//! Train curriculum and fixed runs, then emit long-format plot data for an
//! overlay of their reward curves and thresholds.
//!
//! cargo run --release --example plot_data > curves.csv

use iou_curriculum::runner::{emit_plotdata, run_experiment, trace_path, RunConfig};
use iou_curriculum::scheduler::ScheduleConfig;

fn main() -> iou_curriculum::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut traces = Vec::new();
    for (name, schedule) in [
        ("curriculum", ScheduleConfig::piecewise()),
        ("fixed", ScheduleConfig::fixed(0.5)),
    ] {
        let out = dir.path().join(name);
        let cfg = RunConfig {
            seeds: vec![42],
            schedule,
            out_dir: out.clone(),
            ..RunConfig::default()
        };
        run_experiment(&cfg)?;
        let renamed = dir.path().join(format!("{name}.csv"));
        std::fs::rename(trace_path(&out, 42), &renamed)?;
        traces.push(renamed);
    }
    emit_plotdata(&traces, 10, std::io::stdout().lock())
}
