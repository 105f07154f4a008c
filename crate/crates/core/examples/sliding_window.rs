//! Window statistics, re-thresholding, and refresh strategies.
//!
//! cargo run --example sliding_window

use iou_curriculum::tracker::{RefreshStrategy, StepRecord, WindowStats};

fn main() -> iou_curriculum::Result<()> {
    let mut window = WindowStats::new(6, RefreshStrategy::Half, 0.3)?;
    for step in 0..8 {
        let base = 0.25 + 0.05 * step as f64;
        let ious = vec![base, base + 0.1, base + 0.2, base - 0.1];
        let rewards = ious.iter().map(|&v| (v >= 0.3) as u8 as f64).collect();
        window.push(StepRecord::new(step, ious, rewards)?)?;
        match window.metrics(0.3) {
            Some(m) => println!(
                "step {step}: hit rate {:.3}  std {:.3}  margin {:+.3}",
                m.mean_reward, m.reward_std, m.iou_margin
            ),
            None => println!(
                "step {step}: warming up ({}/{})",
                window.len(),
                window.capacity()
            ),
        }
    }

    // the same records judged against a stricter threshold
    println!("at 0.45: {:?}", window.metrics(0.45));

    for strategy in RefreshStrategy::ALL {
        let mut w = WindowStats::new(30, strategy, 0.3)?;
        for step in 0..30 {
            w.push(StepRecord::new(step, vec![0.5], vec![1.0])?)?;
        }
        w.refresh_on_update();
        println!("{strategy:?} refresh keeps {} of 30", w.len());
    }
    Ok(())
}
