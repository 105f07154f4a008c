//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any failed.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use iou_curriculum::evalmetrics::{accuracy_at, load_predictions, pseudo_map};
use iou_curriculum::grpo::{
    group_advantages, objective_at, objective_gradient, GroupSample, GrpoConfig,
};
use iou_curriculum::runner::{
    run_experiment, run_seed, run_sweep, trace_path, RunConfig, RunSummary, SweepRecipe,
};
use iou_curriculum::scheduler::{ScheduleConfig, SchedulerState};
use iou_curriculum::simenv::{PolicyGradient, PolicyParams, RewardScheme, RunResult, ACTION_DIM};
use iou_curriculum::tracker::{RefreshStrategy, StepRecord, WindowStats};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 3] = [42, 43, 44];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn brute_advantages(r: &[f64], eps: f64) -> Vec<f64> {
    let n = r.len() as f64;
    let mut m = 0.0;
    for x in r {
        m += x;
    }
    m /= n;
    let mut v = 0.0;
    for x in r {
        v += (x - m) * (x - m);
    }
    v /= n;
    r.iter().map(|x| (x - m) / (v + eps).sqrt()).collect()
}

fn advantages() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut equal_ok = true;
    for i in 0..10_000 {
        let g = rng.random_range(2..=16);
        let r: Vec<f64> = if i % 10 == 0 {
            vec![rng.random::<f64>(); g]
        } else if i % 2 == 0 {
            (0..g).map(|_| rng.random_bool(0.5) as u8 as f64).collect()
        } else {
            (0..g).map(|_| rng.random::<f64>()).collect()
        };
        let a = group_advantages(&r, 1e-6).unwrap();
        if r.iter().all(|&x| x == r[0]) {
            equal_ok &= a.iter().all(|&x| x == 0.0);
            continue;
        }
        for (x, y) in a.iter().zip(brute_advantages(&r, 1e-6)) {
            worst = worst.max((x - y).abs());
        }
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-9 && equal_ok && t < Duration::from_secs(5),
        format!(
            "max abs deviation {worst:.2e}, all-equal groups zero: {equal_ok}, {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn random_params(rng: &mut ChaCha8Rng) -> PolicyParams {
    let mean = [0; ACTION_DIM].map(|_| rng.random_range(-0.5..0.5));
    let log_scale = [0; ACTION_DIM].map(|_| rng.random_range(0.08f64.ln()..0.5f64.ln()));
    PolicyParams::new(mean, log_scale, 0.05).unwrap()
}

fn gradient_instance(rng: &mut ChaCha8Rng) -> f64 {
    let reference = random_params(rng);
    let mut old = reference.clone();
    let mut params = reference.clone();
    for j in 0..ACTION_DIM {
        old.mean[j] += rng.random_range(-0.1..0.1);
        old.log_scale[j] += rng.random_range(-0.2..0.2);
        params.mean[j] = old.mean[j] + rng.random_range(-0.02..0.02);
        params.log_scale[j] = old.log_scale[j] + rng.random_range(-0.05..0.05);
    }
    let g = rng.random_range(2..=12);
    let actions: Vec<[f64; ACTION_DIM]> = (0..g).map(|_| old.sample_action(rng)).collect();
    let rewards: Vec<f64> = (0..g).map(|_| rng.random::<f64>()).collect();
    let truth = iou_curriculum::BBox::new(0.3, 0.3, 0.6, 0.6).unwrap();
    let group = GroupSample {
        step: 0,
        ground_truth: truth,
        boxes: vec![truth; g],
        actions: actions.clone(),
        ious: vec![0.5; g],
        rewards: rewards.clone(),
        logp_new: actions.iter().map(|a| old.log_prob(a)).collect(),
        logp_old: actions.iter().map(|a| old.log_prob(a)).collect(),
    };
    let cfg = GrpoConfig {
        kl_coef: rng.random_range(0.0..1.0),
        ..GrpoConfig::default()
    };
    let adv = group_advantages(&rewards, cfg.advantage_eps).unwrap();
    let analytic = objective_gradient(&params, &group, &adv, &cfg).unwrap();

    let h = 1e-5;
    let f = |p: &PolicyParams| objective_at(p, &group, &adv, &cfg).unwrap().value;
    let mut fd = PolicyGradient::zero();
    for j in 0..2 * ACTION_DIM {
        let mut e = PolicyGradient::zero();
        if j < ACTION_DIM {
            e.mean[j] = 1.0;
        } else {
            e.log_scale[j - ACTION_DIM] = 1.0;
        }
        let d = (f(&params.perturbed(&e, h)) - f(&params.perturbed(&e, -h))) / (2.0 * h);
        if j < ACTION_DIM {
            fd.mean[j] = d;
        } else {
            fd.log_scale[j - ACTION_DIM] = d;
        }
    }
    let mut diff = PolicyGradient::zero();
    for j in 0..ACTION_DIM {
        diff.mean[j] = analytic.mean[j] - fd.mean[j];
        diff.log_scale[j] = analytic.log_scale[j] - fd.log_scale[j];
    }
    diff.max_abs() / fd.max_abs().max(1e-8)
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let worst = (0..100)
        .map(|_| gradient_instance(&mut rng))
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-4,
        format!("max relative error {worst:.2e} over 100 instances"),
    )
}

/// Window kept as plain lists and recomputed from scratch on every query.
struct NaiveWindow {
    cap: usize,
    items: Vec<Vec<f64>>,
}

impl NaiveWindow {
    fn metrics(&self, tau: f64) -> Option<(f64, f64, f64)> {
        if self.items.len() != self.cap {
            return None;
        }
        let hits: Vec<f64> = self
            .items
            .iter()
            .map(|v| v.iter().filter(|&&x| x >= tau).count() as f64 / v.len() as f64)
            .collect();
        let n = hits.len() as f64;
        let mean = hits.iter().sum::<f64>() / n;
        let std = (hits.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / n).sqrt();
        let iou = self
            .items
            .iter()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .sum::<f64>()
            / n;
        Some((mean, std, iou - tau))
    }
}

fn tracker() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    let mut refreshes = 0;
    for round in 0..10 {
        let cap = [1, 7, 30, 64][round % 4];
        let mut tau = 0.3;
        let mut win = WindowStats::new(cap, RefreshStrategy::Half, tau).unwrap();
        let mut naive = NaiveWindow {
            cap,
            items: Vec::new(),
        };
        for step in 0..1_000 {
            let g = rng.random_range(2..=16);
            let ious: Vec<f64> = (0..g)
                .map(|_| (rng.random::<f64>() * 20.0).round() / 20.0)
                .collect();
            win.push(StepRecord::new(step, ious.clone(), vec![0.0; g]).unwrap())
                .unwrap();
            naive.items.push(ious);
            if naive.items.len() > cap {
                naive.items.remove(0);
            }
            if rng.random_bool(0.05) {
                let strategy = [
                    RefreshStrategy::Half,
                    RefreshStrategy::Quarter,
                    RefreshStrategy::Full,
                ][rng.random_range(0..3)];
                let keep = strategy.retained(cap).min(naive.items.len());
                naive.items.drain(..naive.items.len() - keep);
                let mut w2 = WindowStats::new(cap, strategy, win.tracked_tau()).unwrap();
                for r in win.records() {
                    w2.push(r.clone()).unwrap();
                }
                w2.refresh_on_update();
                win = w2;
                refreshes += 1;
                tau = (tau + 0.05f64).min(0.95);
                win.track_threshold(tau);
            }
            for q in [tau, 0.5] {
                match (win.metrics(q), naive.metrics(q)) {
                    (None, None) => {}
                    (Some(m), Some((r, s, mg))) => {
                        worst = worst
                            .max((m.mean_reward - r).abs())
                            .max((m.reward_std - s).abs())
                            .max((m.iou_margin - mg).abs());
                    }
                    _ => mismatched += 1,
                }
            }
        }
    }
    outcome(
        worst <= 1e-9 && mismatched == 0,
        format!("10^4 pushes, {refreshes} refreshes, max deviation {worst:.2e}, availability mismatches {mismatched}"),
    )
}

fn trajectory() -> Outcome {
    let mut s = SchedulerState::new(ScheduleConfig::piecewise()).unwrap();
    let mut seen = vec![s.tau()];
    for step in 0..20 {
        if s.advance(step, None).is_some() {
            seen.push(s.tau());
        }
    }
    let want = [0.30, 0.45, 0.60, 0.70, 0.75, 0.80];
    let traj_ok = seen == want;
    let mut ends_ok = true;
    for cfg in [ScheduleConfig::linear(0.2), ScheduleConfig::cosine(0.2)] {
        let s = SchedulerState::new(cfg.clone()).unwrap();
        ends_ok &= s.step_size(cfg.tau_0) == Some(cfg.delta_0);
        ends_ok &= s.step_size(cfg.tau_target) == Some(0.0);
    }
    outcome(
        traj_ok && ends_ok,
        format!("trajectory {seen:?}, decay endpoints exact: {ends_ok}"),
    )
}

fn config(schedule: ScheduleConfig) -> RunConfig {
    RunConfig {
        schedule,
        ..RunConfig::default()
    }
}

fn seeds_run(cfg: &RunConfig) -> Vec<(RunResult, RunSummary)> {
    SEEDS.iter().map(|&s| run_seed(cfg, s).unwrap()).collect()
}

struct Runs {
    curriculum: Vec<(RunResult, RunSummary)>,
    curriculum_secs: Vec<f64>,
}

fn sparsity(runs: &Runs) -> Outcome {
    let hard = config(ScheduleConfig::fixed(0.8));
    let mut no_kl = hard.clone();
    no_kl.grpo.kl_coef = 0.0;
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, &seed) in SEEDS.iter().enumerate() {
        let (_, fixed) = run_seed(&hard, seed).unwrap();
        let (frozen, _) = run_seed(&no_kl, seed).unwrap();
        let unchanged = frozen.final_params == frozen.initial_params;
        let (cur, cur_sum) = &runs.curriculum[i];
        let ok = fixed.all_zero_fraction > 0.8
            && unchanged
            && cur.all_zero_fraction() < 0.2
            && cur_sum.update_count >= 3
            && runs.curriculum_secs[i] < 60.0;
        pass &= ok;
        detail.push(format!(
            "seed {seed}: fixed-0.8 zero {:.1}% params unchanged {unchanged}; curriculum zero {:.1}% updates {} ({:.1}s)",
            100.0 * fixed.all_zero_fraction,
            100.0 * cur.all_zero_fraction(),
            cur_sum.update_count,
            runs.curriculum_secs[i],
        ));
    }
    outcome(pass, detail.join("; "))
}

fn superiority(runs: &Runs) -> Outcome {
    let fixed = seeds_run(&config(ScheduleConfig::fixed(0.5)));
    let staged = seeds_run(&config(ScheduleConfig::staged()));
    let mut wins = 0;
    let mut detail = Vec::new();
    for i in 0..SEEDS.len() {
        let c = runs.curriculum[i].1.final_mean_iou;
        let f = fixed[i].1.final_mean_iou;
        let s = staged[i].1.final_mean_iou;
        if c > f + 0.02 && c > s + 0.02 {
            wins += 1;
        }
        detail.push(format!(
            "seed {}: curriculum {c:.3} fixed-0.5 {f:.3} staged {s:.3}",
            SEEDS[i]
        ));
    }
    outcome(
        wins == SEEDS.len(),
        format!("{wins}/3 seeds; {}", detail.join("; ")),
    )
}

fn refresh_ablation(runs: &Runs) -> Outcome {
    let mut full = config(ScheduleConfig::piecewise());
    full.window.refresh = RefreshStrategy::Full;
    let full = seeds_run(&full);
    let mut worst_gap = f64::NEG_INFINITY;
    for (f, c) in full.iter().zip(&runs.curriculum) {
        worst_gap = worst_gap.max(f.1.final_mean_iou - c.1.final_mean_iou);
    }
    let mut monotone = true;
    let mut completed = 0;
    for size in [10, 30, 100] {
        let mut cfg = config(ScheduleConfig::piecewise());
        cfg.window.size = size;
        for (r, _) in seeds_run(&cfg) {
            monotone &= r.tau_is_monotone();
            completed += (r.trace.len() == cfg.steps) as usize;
        }
    }
    outcome(
        worst_gap <= 0.02 && monotone && completed == 9,
        format!("largest full-minus-half gap {worst_gap:+.4}; window sweep {completed}/9 runs complete, tau monotone {monotone}"),
    )
}

fn metric_file(dir: &Path) -> Outcome {
    let path = dir.join("crafted.jsonl");
    let gt = [0.0, 0.0, 1.0, 1.0];
    let mut lines = Vec::new();
    let widths = [1.0, 1.0, 0.72, 0.72, 0.72, 0.72, 0.3, 0.3, 0.3, 0.3];
    for (i, w) in widths.iter().enumerate() {
        lines.push(format!(
            r#"{{"id":"r{i}","pred":[0.0,0.0,{w},1.0],"gt":{gt:?}}}"#
        ));
    }
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let recs = load_predictions(&path).unwrap();
    let map = pseudo_map(&recs).unwrap();
    let a50 = accuracy_at(&recs, 0.5).unwrap();
    outcome(
        map == 0.4 && a50 == 0.6,
        format!("pseudo-mAP {map}, A@0.5 {a50}"),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let base = RunConfig {
        out_dir: dir.join("sweep"),
        ..RunConfig::default()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let start = Instant::now();
    let report = pool
        .install(|| run_sweep(&base, SweepRecipe::Compare))
        .unwrap();
    let secs = start.elapsed().as_secs_f64();

    let mut identical = true;
    let mut compared = 0;
    for v in &report.variants {
        let first_dir = base.out_dir.join(&v.label);
        let mut replay = RunConfig::load(&first_dir.join("manifest.json")).unwrap();
        replay.out_dir = dir.join("replay").join(&v.label);
        run_experiment(&replay).unwrap();
        for &seed in &SEEDS {
            let a = fs::read(trace_path(&first_dir, seed)).unwrap();
            let b = fs::read(trace_path(&replay.out_dir, seed)).unwrap();
            identical &= a == b;
            compared += 1;
        }
    }
    outcome(
        identical && compared == 6 && secs < 300.0,
        format!("{compared} traces replayed byte-identical: {identical}; single-thread sweep {secs:.1}s"),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let curriculum_cfg = config(ScheduleConfig::piecewise());
    assert_eq!(curriculum_cfg.reward, RewardScheme::Binary);
    let mut curriculum = Vec::new();
    let mut curriculum_secs = Vec::new();
    for &seed in &SEEDS {
        let t = Instant::now();
        curriculum.push(run_seed(&curriculum_cfg, seed).unwrap());
        curriculum_secs.push(t.elapsed().as_secs_f64());
    }
    let runs = Runs {
        curriculum,
        curriculum_secs,
    };

    let results = [
        ("advantage correctness", advantages()),
        ("gradient correctness", gradients()),
        ("tracker oracle equivalence", tracker()),
        ("schedule trajectory", trajectory()),
        ("sparsity reproduction", sparsity(&runs)),
        ("curriculum superiority", superiority(&runs)),
        ("refresh ablation", refresh_ablation(&runs)),
        ("metric module", metric_file(dir.path())),
        ("determinism", determinism(dir.path())),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "criterion {} {name}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += (!o.pass) as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
