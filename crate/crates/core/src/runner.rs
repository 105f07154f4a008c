//! Experiment orchestration: configs, trace files, sweeps and plot data.
//!
//! A run writes, for every seed, `trace_seed{seed}.csv` and
//! `summary_seed{seed}.json`, plus one `manifest.json` holding the resolved
//! config. Passing a manifest back as the config replays the run exactly.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalmetrics::{summarize, EvalSummary};
use crate::grpo::GrpoConfig;
use crate::scheduler::{
    CriterionMask, DecayKind, RegimeMode, ScheduleConfig, SchedulerState, StepRule, UpdateEvent,
};
use crate::simenv::{evaluate_policy, train_run, RewardScheme, RunResult, TaskSpec};
use crate::tracker::{RefreshStrategy, WindowStats};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column names of a trace file, in order.
pub const TRACE_COLUMNS: [&str; 9] = [
    "step",
    "tau",
    "group_mean_reward",
    "window_mean_reward",
    "window_reward_std",
    "iou_margin",
    "group_mean_iou",
    "updated",
    "objective",
];

/// Steps averaged for the headline final-IoU number.
pub const FINAL_IOU_STEPS: usize = 100;

/// One line of a trace file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub step: usize,
    /// Threshold in force during the step.
    pub tau: f64,
    pub group_mean_reward: f64,
    pub window_mean_reward: Option<f64>,
    pub window_reward_std: Option<f64>,
    pub iou_margin: Option<f64>,
    pub group_mean_iou: f64,
    /// The threshold changed at the end of this step.
    pub updated: bool,
    pub objective: f64,
}

impl MetricsRecord {
    fn fields(&self) -> [String; 9] {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        [
            self.step.to_string(),
            self.tau.to_string(),
            self.group_mean_reward.to_string(),
            opt(self.window_mean_reward),
            opt(self.window_reward_std),
            opt(self.iou_margin),
            self.group_mean_iou.to_string(),
            (self.updated as u8).to_string(),
            self.objective.to_string(),
        ]
    }

    fn parse(row: &csv::StringRecord) -> Result<Self> {
        if row.len() != TRACE_COLUMNS.len() {
            return Err(Error::Schema {
                column: TRACE_COLUMNS
                    .get(row.len())
                    .unwrap_or(&"<extra>")
                    .to_string(),
                message: format!(
                    "expected {} fields, found {}",
                    TRACE_COLUMNS.len(),
                    row.len()
                ),
            });
        }
        let bad = |i: usize, v: &str| Error::Schema {
            column: TRACE_COLUMNS[i].into(),
            message: format!("cannot parse `{v}`"),
        };
        let num = |i: usize| row[i].parse::<f64>().map_err(|_| bad(i, &row[i]));
        let opt = |i: usize| {
            if row[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        Ok(Self {
            step: row[0].parse().map_err(|_| bad(0, &row[0]))?,
            tau: num(1)?,
            group_mean_reward: num(2)?,
            window_mean_reward: opt(3)?,
            window_reward_std: opt(4)?,
            iou_margin: opt(5)?,
            group_mean_iou: num(6)?,
            updated: match &row[7] {
                "0" => false,
                "1" => true,
                v => return Err(bad(7, v)),
            },
            objective: num(8)?,
        })
    }
}

pub fn write_trace<W: Write>(out: W, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: std::io::Read>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = rd.headers()?.clone();
    for (i, want) in TRACE_COLUMNS.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == *want => {}
            Some(got) => {
                return Err(Error::Schema {
                    column: got.to_string(),
                    message: format!("expected column `{want}` at position {i}"),
                })
            }
            None => {
                return Err(Error::Schema {
                    column: want.to_string(),
                    message: "missing column".into(),
                })
            }
        }
    }
    if let Some(extra) = header.get(TRACE_COLUMNS.len()) {
        return Err(Error::Schema {
            column: extra.to_string(),
            message: "unexpected column".into(),
        });
    }
    let mut out: Vec<MetricsRecord> = Vec::new();
    for row in rd.records() {
        let rec = MetricsRecord::parse(&row?)?;
        if out.last().is_some_and(|p| rec.step <= p.step) {
            return Err(Error::Schema {
                column: "step".into(),
                message: "steps must strictly increase".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_trace(path: &Path) -> Result<Vec<MetricsRecord>> {
    read_trace(fs::File::open(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub size: usize,
    pub refresh: RefreshStrategy,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            size: 30,
            refresh: RefreshStrategy::Half,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub steps: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub reward: RewardScheme,
    pub schedule: ScheduleConfig,
    pub grpo: GrpoConfig,
    pub task: TaskSpec,
    pub window: WindowConfig,
    /// Recorded for reference only; the Gaussian policy has no temperature.
    pub temperature: f64,
    /// Held-out ground truths used to evaluate the final policy.
    pub eval_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            seeds: vec![42, 43, 44],
            out_dir: PathBuf::from("runs/default"),
            reward: RewardScheme::Binary,
            schedule: ScheduleConfig::default(),
            grpo: GrpoConfig::default(),
            task: TaskSpec::default(),
            window: WindowConfig::default(),
            temperature: 0.9,
            eval_samples: 500,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::config("seeds", "seeds must be distinct"));
        }
        if self.window.size == 0 {
            return Err(Error::config(
                "window.size",
                "window size must be at least 1",
            ));
        }
        if self.eval_samples == 0 {
            return Err(Error::config("eval_samples", "must be at least 1"));
        }
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(Error::config("temperature", "must be finite and > 0"));
        }
        self.schedule.validate()?;
        self.grpo.validate()?;
        self.task.validate()?;
        Ok(())
    }

    /// Parse a config document. A manifest written by a previous run is
    /// accepted too, and yields the config it recorded.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let cfg = if value.get("manifest_version").is_some() {
            serde_json::from_value::<Manifest>(value)?.config
        } else {
            serde_json::from_value::<RunConfig>(value)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest_version: u32,
    pub code_version: String,
    pub seeds: Vec<u64>,
    pub adaptive_regime_boundaries: [f64; 2],
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            manifest_version: 1,
            code_version: CODE_VERSION.to_string(),
            seeds: config.seeds.clone(),
            adaptive_regime_boundaries: crate::scheduler::ADAPTIVE_BOUNDARIES,
            config: config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub steps: usize,
    pub final_mean_iou: f64,
    pub final_tau: f64,
    pub update_count: usize,
    pub all_zero_fraction: f64,
    pub ratio_clamped_steps: usize,
    pub eval: EvalSummary,
    pub updates: Vec<UpdateEvent>,
}

/// Seed for the held-out evaluation set, kept apart from the training stream.
fn eval_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_e7a1_0000_0000
}

/// Train one seed without touching the disk.
pub fn run_seed(config: &RunConfig, seed: u64) -> Result<(RunResult, RunSummary)> {
    config.validate()?;
    let sched = SchedulerState::new(config.schedule.clone())?;
    let window = WindowStats::new(config.window.size, config.window.refresh, sched.tau())?;
    let result = train_run(
        &config.task,
        &config.grpo,
        config.reward,
        sched,
        window,
        config.steps,
        seed,
    )?;
    let preds = evaluate_policy(
        &result.final_params,
        &config.task,
        config.eval_samples,
        eval_seed(seed),
    )?;
    let summary = RunSummary {
        seed,
        steps: config.steps,
        final_mean_iou: result.final_mean_iou(FINAL_IOU_STEPS),
        final_tau: result.trace.last().map_or(config.schedule.tau_0, |r| r.tau),
        update_count: result.updates.len(),
        all_zero_fraction: result.all_zero_fraction(),
        ratio_clamped_steps: result.ratio_clamped_steps,
        eval: summarize(&preds)?,
        updates: result.updates.clone(),
    };
    Ok((result, summary))
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.csv"))
}

pub fn summary_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("summary_seed{seed}.json"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Run every seed of `config` and write its artifacts under `config.out_dir`.
pub fn run_experiment(config: &RunConfig) -> Result<Vec<RunSummary>> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir)?;
    let summaries = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let (result, summary) = run_seed(config, seed)?;
            write_trace(
                fs::File::create(trace_path(&config.out_dir, seed))?,
                &result.trace,
            )?;
            write_json(&summary_path(&config.out_dir, seed), &summary)?;
            Ok(summary)
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(
        &config.out_dir.join("manifest.json"),
        &Manifest::new(config),
    )?;
    Ok(summaries)
}

/// Named grids of configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepRecipe {
    /// Curriculum against a fixed 0.5 threshold.
    Compare,
    /// Curriculum, fixed 0.5, staged calendar, and raw-IoU reward.
    Baselines,
    /// Every non-empty subset of the update conditions.
    Criteria,
    /// Adaptive regimes against each fixed regime.
    Strategy,
    /// Regime step sizes against identical steps.
    Delta,
    /// Window size by refresh strategy.
    Window,
    /// Linear and cosine decay at several initial steps.
    Decay,
}

impl SweepRecipe {
    pub const ALL: [SweepRecipe; 7] = [
        Self::Compare,
        Self::Baselines,
        Self::Criteria,
        Self::Strategy,
        Self::Delta,
        Self::Window,
        Self::Decay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepRecipe::Compare => "compare",
            SweepRecipe::Baselines => "baselines",
            SweepRecipe::Criteria => "criteria",
            SweepRecipe::Strategy => "strategy",
            SweepRecipe::Delta => "delta",
            SweepRecipe::Window => "window",
            SweepRecipe::Decay => "decay",
        }
    }

    /// Labelled variants of `base`, each writing to its own subdirectory.
    pub fn expand(self, base: &RunConfig) -> Vec<(String, RunConfig)> {
        let with = |label: String, f: &dyn Fn(&mut RunConfig)| {
            let mut c = base.clone();
            f(&mut c);
            c.out_dir = base.out_dir.join(&label);
            (label, c)
        };
        let curriculum = |c: &mut RunConfig| {
            c.reward = RewardScheme::Binary;
            c.schedule = ScheduleConfig::piecewise();
        };
        match self {
            SweepRecipe::Compare => vec![
                with("curriculum".into(), &curriculum),
                with("fixed-0.5".into(), &|c| {
                    c.schedule = ScheduleConfig::fixed(0.5)
                }),
            ],
            SweepRecipe::Baselines => vec![
                with("curriculum".into(), &curriculum),
                with("fixed-0.5".into(), &|c| {
                    c.schedule = ScheduleConfig::fixed(0.5)
                }),
                with("staged".into(), &|c| c.schedule = ScheduleConfig::staged()),
                with("raw-iou".into(), &|c| {
                    c.reward = RewardScheme::RawIou;
                    c.schedule = ScheduleConfig::fixed(0.5);
                }),
            ],
            SweepRecipe::Criteria => CriterionMask::ablations()
                .into_iter()
                .map(|mask| {
                    with(format!("criteria-{}", mask.label()), &|c| {
                        curriculum(c);
                        c.schedule.criteria = mask;
                    })
                })
                .collect(),
            SweepRecipe::Strategy => RegimeMode::PRESETS
                .into_iter()
                .map(|mode| {
                    with(format!("strategy-{}", mode.label()), &|c| {
                        curriculum(c);
                        c.schedule.regime = mode;
                    })
                })
                .collect(),
            SweepRecipe::Delta => {
                let mut v = vec![with("delta-dynamic".into(), &curriculum)];
                for d in [0.05, 0.15, 0.25] {
                    v.push(with(format!("delta-{d}"), &|c| {
                        curriculum(c);
                        c.schedule.step_rule = StepRule::Identical(d);
                    }));
                }
                v
            }
            SweepRecipe::Window => {
                let mut v = Vec::new();
                for size in [10, 30, 100] {
                    for refresh in [
                        RefreshStrategy::Full,
                        RefreshStrategy::Half,
                        RefreshStrategy::Quarter,
                    ] {
                        let name = serde_json::to_value(refresh).ok();
                        let name = name.as_ref().and_then(|n| n.as_str()).unwrap_or("?");
                        v.push(with(format!("window-{size}-{name}"), &|c| {
                            curriculum(c);
                            c.window = WindowConfig { size, refresh };
                        }));
                    }
                }
                v
            }
            SweepRecipe::Decay => {
                let mut v = Vec::new();
                for kind in [DecayKind::Linear, DecayKind::Cosine] {
                    for d in [0.1, 0.2, 0.3] {
                        let name = if kind == DecayKind::Linear {
                            "linear"
                        } else {
                            "cosine"
                        };
                        v.push(with(format!("decay-{name}-{d}"), &|c| {
                            c.reward = RewardScheme::Binary;
                            c.schedule = if kind == DecayKind::Linear {
                                ScheduleConfig::linear(d)
                            } else {
                                ScheduleConfig::cosine(d)
                            };
                        }));
                    }
                }
                v
            }
        }
    }
}

impl std::str::FromStr for SweepRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::input(format!("unknown sweep recipe `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub label: String,
    pub mean_final_iou: f64,
    pub mean_update_count: f64,
    pub mean_all_zero_fraction: f64,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub recipe: SweepRecipe,
    pub variants: Vec<VariantSummary>,
}

/// Run every variant of a recipe and write `sweep_summary.json` into the base
/// output directory.
pub fn run_sweep(base: &RunConfig, recipe: SweepRecipe) -> Result<SweepReport> {
    base.validate()?;
    let variants = recipe
        .expand(base)
        .into_par_iter()
        .map(|(label, cfg)| {
            let runs = run_experiment(&cfg)?;
            let n = runs.len() as f64;
            Ok(VariantSummary {
                label,
                mean_final_iou: runs.iter().map(|r| r.final_mean_iou).sum::<f64>() / n,
                mean_update_count: runs.iter().map(|r| r.update_count as f64).sum::<f64>() / n,
                mean_all_zero_fraction: runs.iter().map(|r| r.all_zero_fraction).sum::<f64>() / n,
                runs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = SweepReport { recipe, variants };
    fs::create_dir_all(&base.out_dir)?;
    write_json(&base.out_dir.join("sweep_summary.json"), &report)?;
    Ok(report)
}

/// Trailing moving average; the first points average what is available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= w {
            sum -= values[i - w];
        }
        out.push(if w == 1 {
            *v
        } else {
            sum / (i + 1).min(w) as f64
        });
    }
    out
}

/// Long-format plot data (`step,series,value`) for the given traces.
///
/// Group mean reward is smoothed with a moving average of `smoothing` steps;
/// the threshold series is emitted raw. With more than one trace every series
/// name is prefixed by the trace's file stem.
pub fn emit_plotdata<W: Write>(traces: &[PathBuf], smoothing: usize, mut out: W) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::input("no trace files given"));
    }
    let mut labelled = BTreeMap::new();
    for (i, path) in traces.iter().enumerate() {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("trace")
            .to_string();
        let records = load_trace(path)?;
        labelled.insert((i, stem), records);
    }
    writeln!(out, "# smoothing window: {}", smoothing.max(1))?;
    writeln!(out, "step,series,value")?;
    let prefix = traces.len() > 1;
    for ((_, stem), records) in &labelled {
        let name = |s: &str| {
            if prefix {
                format!("{stem}/{s}")
            } else {
                s.to_string()
            }
        };
        let rewards: Vec<f64> = records.iter().map(|r| r.group_mean_reward).collect();
        for (r, v) in records.iter().zip(moving_average(&rewards, smoothing)) {
            writeln!(out, "{},{},{}", r.step, name("reward"), v)?;
        }
        for r in records {
            writeln!(out, "{},{},{}", r.step, name("tau"), r.tau)?;
        }
    }
    Ok(())
}
