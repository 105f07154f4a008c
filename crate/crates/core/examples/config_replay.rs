//! Run from a JSON config, then replay the written manifest and confirm the
//! traces match byte for byte.
//!
//! cargo run --release --example config_replay

use iou_curriculum::runner::{run_experiment, trace_path, RunConfig};

const CONFIG: &str = r#"{
  "steps": 150,
  "seeds": [7, 8],
  "schedule": { "kind": "cosine", "tau_0": 0.2, "delta_0": 0.15 },
  "window": { "size": 20, "refresh": "quarter" },
  "grpo": { "group_size": 6 }
}"#;

fn main() -> iou_curriculum::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig::from_json(CONFIG)?;
    cfg.out_dir = dir.path().join("first");
    for s in run_experiment(&cfg)? {
        println!(
            "seed {}: final tau {}, final mean IoU {:.3}",
            s.seed, s.final_tau, s.final_mean_iou
        );
    }

    let mut replay = RunConfig::load(&cfg.out_dir.join("manifest.json"))?;
    replay.out_dir = dir.path().join("replay");
    run_experiment(&replay)?;
    for &seed in &cfg.seeds {
        let same = std::fs::read(trace_path(&cfg.out_dir, seed))?
            == std::fs::read(trace_path(&replay.out_dir, seed))?;
        println!("seed {seed}: replay identical: {same}");
    }

    match RunConfig::from_json(r#"{"schedule": {"tau_0": 0.9}}"#) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
