//! Score a line-delimited JSON prediction file.
//!
//! cargo run --example evaluate_predictions -- [path.jsonl]

use std::io::Write;

use iou_curriculum::evalmetrics::{accuracy_at, load_predictions, summarize};

fn main() -> iou_curriculum::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let path = std::env::temp_dir().join("iou_curriculum_demo.jsonl");
            let mut f = std::fs::File::create(&path)?;
            for (i, w) in [1.0, 0.9, 0.72, 0.55, 0.3].iter().enumerate() {
                writeln!(
                    f,
                    r#"{{"id":"img-{i}","pred":[0.0,0.0,{w},1.0],"gt":[0.0,0.0,1.0,1.0]}}"#
                )?;
            }
            path
        }
    };
    let records = load_predictions(&path)?;
    for r in &records {
        println!("{:<8} iou {:.3}", r.id, r.iou());
    }
    for tau in [0.5, 0.7, 0.9] {
        println!("A@{tau}: {:.3}", accuracy_at(&records, tau)?);
    }
    println!("{}", serde_json::to_string(&summarize(&records)?)?);
    Ok(())
}
