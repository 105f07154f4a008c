use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iou_curriculum::evalmetrics::{load_predictions, summarize};
use iou_curriculum::runner::{emit_plotdata, run_experiment, run_sweep, RunConfig, SweepRecipe};
use iou_curriculum::scheduler::{DecayKind, ScheduleConfig};
use iou_curriculum::tracker::RefreshStrategy;

#[derive(Parser)]
#[command(
    version,
    about = "IoU threshold curriculum for group-relative policy optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of one config.
    Run(RunArgs),
    /// Run a named grid of variants.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// compare, baselines, criteria, strategy, delta, window or decay
        #[arg(long, default_value = "compare")]
        recipe: SweepRecipe,
    },
    /// Score a line-delimited JSON prediction file.
    Eval {
        predictions: PathBuf,
        /// Write the JSON summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn trace files into long-format plot data.
    Plotdata {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        smoothing: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config, or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// piecewise, linear, cosine, fixed or staged
    #[arg(long)]
    schedule: Option<DecayKind>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    /// none, quarter, half or full
    #[arg(long)]
    refresh: Option<RefreshStrategy>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> iou_curriculum::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if let Some(kind) = self.schedule {
            cfg.schedule = ScheduleConfig::preset(kind);
        }
        if let Some(steps) = self.steps {
            cfg.steps = steps;
        }
        if let Some(size) = self.window {
            cfg.window.size = size;
        }
        if let Some(refresh) = self.refresh {
            cfg.window.refresh = refresh;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> iou_curriculum::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            for s in run_experiment(&cfg)? {
                println!(
                    "seed {}: final mean IoU {:.4}, {} updates, final tau {}, all-zero groups {:.1}%",
                    s.seed,
                    s.final_mean_iou,
                    s.update_count,
                    s.final_tau,
                    100.0 * s.all_zero_fraction
                );
            }
            println!("wrote {}", cfg.out_dir.display());
        }
        Command::Sweep { run, recipe } => {
            let cfg = run.resolve()?;
            let report = run_sweep(&cfg, recipe)?;
            for v in &report.variants {
                println!(
                    "{:<32} final mean IoU {:.4}  updates {:.1}  all-zero {:.1}%",
                    v.label,
                    v.mean_final_iou,
                    v.mean_update_count,
                    100.0 * v.mean_all_zero_fraction
                );
            }
            println!("wrote {}", cfg.out_dir.display());
        }
        Command::Eval { predictions, out } => {
            let summary = summarize(&load_predictions(&predictions)?)?;
            let text = serde_json::to_string_pretty(&summary)?;
            match out {
                Some(path) => std::fs::write(path, text + "\n")?,
                None => println!("{text}"),
            }
        }
        Command::Plotdata {
            traces,
            smoothing,
            out,
        } => match out {
            Some(path) => emit_plotdata(&traces, smoothing, std::fs::File::create(path)?)?,
            None => emit_plotdata(&traces, smoothing, std::io::stdout().lock())?,
        },
    }
    Ok(())
}
