//! Threshold trajectories of each schedule when every update is allowed.
//!
//! cargo run --example threshold_schedules

use iou_curriculum::scheduler::{regime_for, RegimeMode, ScheduleConfig, SchedulerState, StepRule};

fn trajectory(cfg: ScheduleConfig) -> iou_curriculum::Result<Vec<f64>> {
    let mut s = SchedulerState::new(cfg)?;
    let mut taus = vec![s.tau()];
    for step in 0..100 {
        if s.advance(step, None).is_some() {
            taus.push(s.tau());
        }
    }
    Ok(taus)
}

fn main() -> iou_curriculum::Result<()> {
    println!("adaptive regimes:");
    for tau in [0.3, 0.6, 0.75] {
        println!("  tau {tau}: {:?}", regime_for(tau, &RegimeMode::Adaptive));
    }
    println!(
        "piecewise       {:?}",
        trajectory(ScheduleConfig::piecewise())?
    );
    println!(
        "piecewise table {:?}",
        trajectory(ScheduleConfig {
            step_rule: StepRule::Table,
            ..ScheduleConfig::piecewise()
        })?
    );
    println!(
        "no landing      {:?}",
        trajectory(ScheduleConfig {
            land_on_stage_boundaries: false,
            ..ScheduleConfig::piecewise()
        })?
    );
    let lin = trajectory(ScheduleConfig::linear(0.2))?;
    let cos = trajectory(ScheduleConfig::cosine(0.2))?;
    println!(
        "linear ({} updates) {:.3?}",
        lin.len() - 1,
        &lin[..6.min(lin.len())]
    );
    println!(
        "cosine ({} updates) {:.3?}",
        cos.len() - 1,
        &cos[..6.min(cos.len())]
    );

    let mut staged = SchedulerState::new(ScheduleConfig::staged())?;
    for step in 0..200 {
        if let Some(ev) = staged.sync_progress(step, 200)? {
            println!("staged: step {} tau {} -> {}", ev.step, ev.from, ev.to);
        }
    }
    Ok(())
}
