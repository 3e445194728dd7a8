use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use mssm_cli::commands::aggregate::AggregateOptions;
use mssm_cli::commands::eval::EvalOptions;
use mssm_cli::commands::fit::FitOptions;
use mssm_cli::commands::forecast::ForecastOptions;
use mssm_cli::commands::simulate::{load_synthetic, Preset, SimulateOptions};
use mssm_cli::commands::{self, Outcome};
use mssm_cli::config::{resolve, FitMethod, InputSpec, RunConfig};
use mssm_core::aggregation::FloorPolicy;
use mssm_core::ingest::{CsvOptions, Direction};
use mssm_core::AggregationMode;

/// Multi-resolution state space forecasting of network traffic.
///
/// Exit codes: 0 success, 1 input or validation error, 2 an optimizer
/// stopped at its iteration limit (outputs are still written).
#[derive(Parser)]
#[command(name = "mssm", version)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug). RUST_LOG also works.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded synthetic traffic with known parameters.
    Simulate(SimulateArgs),
    /// Average a CSV series over windows of `ratio` samples.
    Aggregate(AggregateArgs),
    /// Fit model parameters and write a posterior file.
    Fit(FitArgs),
    /// Forecast from a posterior file; write a ribbon CSV and an evaluation report.
    Forecast(ForecastArgs),
    /// Compare two evaluation reports.
    Eval(EvalArgs),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for forecasting. Outputs are identical for any count.
    #[arg(long)]
    threads: Option<usize>,
    /// Re-read and validate every output after writing it.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct DataArgs {
    /// Input series (CSV, or MRTG for `.log`); replaces the config's inputs.
    #[arg(long = "data", value_name = "PATH")]
    data: Vec<PathBuf>,
    /// Directory that relative `--data` paths are resolved against.
    #[arg(long, env = "MSSM_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// MRTG traffic direction.
    #[arg(long, value_parser = parse_direction)]
    direction: Option<Direction>,
    /// Fine samples reserved at the end for evaluation.
    #[arg(long)]
    holdout: Option<usize>,
    /// Model the logs of the traffic.
    #[arg(long)]
    log_domain: bool,
    /// How coarse CSV inputs were aggregated.
    #[arg(long, value_parser = parse_mode)]
    coarse_mode: Option<AggregationMode>,
    /// Also run on the finest segment alone (outputs tagged `fine-only`).
    #[arg(long)]
    ablate_coarse: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "paper-shape")]
    preset: Preset,
    /// Synthetic configuration JSON used instead of a preset.
    #[arg(long, conflicts_with = "preset")]
    synthetic: Option<PathBuf>,
    /// Harmonics per seasonal component.
    #[arg(long, default_value_t = 3)]
    harmonics: u32,
    #[arg(long)]
    ratio: Option<usize>,
    #[arg(long)]
    coarse_steps: Option<usize>,
    #[arg(long)]
    fine_steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    ratio: usize,
    #[arg(long, value_parser = parse_mode, default_value = "arithmetic")]
    mode: AggregationMode,
    /// `auto`, `reject` or a positive number.
    #[arg(long, value_parser = parse_floor, default_value = "auto")]
    floor: FloorPolicy,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    method: Option<FitMethod>,
    /// Variational steps.
    #[arg(long)]
    vi_steps: Option<usize>,
    /// Posterior output.
    #[arg(long, default_value = "posterior.json")]
    out: PathBuf,
    /// Objective trace CSV [default: <out>.trace.csv].
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Start from a previously fitted posterior.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct ForecastArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "posterior.json")]
    posterior: PathBuf,
    #[arg(long)]
    horizon: Option<usize>,
    /// Posterior samples, one mixture component each.
    #[arg(long)]
    samples: Option<usize>,
    /// Monte Carlo trajectories for the expected MAE.
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Ribbon CSV output.
    #[arg(long, default_value = "forecast.csv")]
    out: PathBuf,
    /// Evaluation report output.
    #[arg(long, default_value = "report.json")]
    report: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Report of the reference forecast, e.g. fine-only.
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    candidate: PathBuf,
    /// Comparison JSON output [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    check: bool,
}

fn parse_mode(s: &str) -> Result<AggregationMode, String> {
    match s {
        "arithmetic" => Ok(AggregationMode::Arithmetic),
        "geometric" => Ok(AggregationMode::Geometric),
        _ => Err(format!("expected arithmetic or geometric, got {s:?}")),
    }
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    match s {
        "in" => Ok(Direction::In),
        "out" => Ok(Direction::Out),
        _ => Err(format!("expected in or out, got {s:?}")),
    }
}

fn parse_floor(s: &str) -> Result<FloorPolicy, String> {
    match s {
        "auto" => Ok(FloorPolicy::Auto),
        "reject" => Ok(FloorPolicy::Reject),
        _ => match s.parse::<f64>() {
            Ok(v) if v > 0.0 => Ok(FloorPolicy::Fixed(v)),
            _ => Err(format!("expected auto, reject or a positive number, got {s:?}")),
        },
    }
}

fn run_config(common: &Common, data: &DataArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load_or_default(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(t) = common.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        cfg.threads = t;
    }
    if !data.data.is_empty() {
        let dir = data.data_dir.as_deref().unwrap_or(Path::new(""));
        cfg.data.inputs = data.data.iter().map(|p| InputSpec::new(resolve(dir, p))).collect();
    }
    if let Some(d) = data.direction {
        cfg.data.inputs.iter_mut().for_each(|i| i.direction = d);
    }
    if let Some(h) = data.holdout {
        cfg.data.holdout_steps = h;
    }
    cfg.data.log_domain |= data.log_domain;
    if let Some(m) = data.coarse_mode {
        cfg.data.coarse_mode = m;
    }
    cfg.fit.ablate_coarse |= data.ablate_coarse;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate(a) => {
            let mut synthetic = match &a.synthetic {
                Some(path) => load_synthetic(path)?,
                None => a.preset.config(a.harmonics),
            };
            if let Some(r) = a.ratio {
                synthetic.ratio = r;
            }
            if let Some(n) = a.coarse_steps {
                synthetic.coarse_steps = n;
            }
            if let Some(n) = a.fine_steps {
                synthetic.fine_steps = n;
            }
            commands::simulate::run(&SimulateOptions { synthetic, seed: a.seed, out_dir: a.out_dir, check: a.check })
        }
        Command::Aggregate(a) => commands::aggregate::run(&AggregateOptions {
            input: a.input,
            csv: CsvOptions::default(),
            ratio: a.ratio,
            mode: a.mode,
            floor: a.floor,
            output: a.output,
            check: a.check,
        }),
        Command::Fit(a) => {
            let mut cfg = run_config(&a.common, &a.data)?;
            if let Some(m) = a.method {
                cfg.fit.method = m;
            }
            if let Some(n) = a.vi_steps {
                cfg.fit.vi.steps = n;
            }
            let opts = FitOptions { out: a.out, trace: a.trace, resume: a.resume, check: a.common.check };
            commands::fit::run(&cfg, &opts)
        }
        Command::Forecast(a) => {
            let mut cfg = run_config(&a.common, &a.data)?;
            if let Some(h) = a.horizon {
                cfg.forecast.horizon = h;
            }
            if let Some(s) = a.samples {
                cfg.forecast.num_samples = s;
            }
            if let Some(s) = a.mc_samples {
                cfg.forecast.mc_samples = s;
            }
            let opts = ForecastOptions { posterior: a.posterior, out: a.out, report: a.report, check: a.common.check };
            commands::forecast::run(&cfg, &opts)
        }
        Command::Eval(a) => commands::eval::run(&EvalOptions {
            baseline: a.baseline,
            candidate: a.candidate,
            out: a.out,
            check: a.check,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            log::warn!("an optimizer stopped at its iteration limit");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
