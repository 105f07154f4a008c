//! Monte-Carlo profile of the untrained policy on the default task.
//!
//! cargo run --release --example calibrate_task

use iou_curriculum::geometry::iou;
use iou_curriculum::simenv::{iou_ceiling, sample_group, PolicyParams, TaskSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> iou_curriculum::Result<()> {
    let task = TaskSpec::hard();
    let policy = PolicyParams::initial(&task)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let groups = 20_000;
    let (mut n, mut hit50, mut hit80, mut any30, mut max) =
        (0usize, 0usize, 0usize, 0usize, 0.0f64);
    for _ in 0..groups {
        let g = sample_group(&policy, &task, 8, &mut rng, 0)?;
        any30 += g.ious.iter().any(|&v| v >= 0.3) as usize;
        for v in g.ious {
            n += 1;
            hit50 += (v >= 0.5) as usize;
            hit80 += (v >= 0.8) as usize;
            max = max.max(v);
        }
    }
    println!("untrained A@0.5           {:.4}", hit50 as f64 / n as f64);
    println!("untrained P(iou >= 0.8)   {:.2e}", hit80 as f64 / n as f64);
    println!("untrained max iou         {max:.3}");
    println!(
        "groups with a hit at 0.3  {:.3}",
        any30 as f64 / groups as f64
    );
    println!(
        "optimal-policy mean iou   {:.4}",
        iou_ceiling(&task, 50_000, 1)?
    );

    let best = PolicyParams::optimal(&task)?;
    let recs = iou_curriculum::simenv::evaluate_policy(&best, &task, 5, 2)?;
    for r in recs {
        println!("optimal sample iou {:.3}", iou(&r.pred, &r.gt));
    }
    Ok(())
}
