#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod plot;
mod report;
mod train;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use nxs_core::dsl::{build_pipeline, parse_pipeline};
use nxs_core::graph::{Pacing, Pipeline, Termination};
use nxs_core::registry::describe_kinds;

pub const EXIT_PARSE: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn parse(message: impl Into<String>) -> Self {
        CliError { code: EXIT_PARSE, message: message.into() }
    }
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }
    pub fn runtime(message: impl Into<String>) -> Self {
        CliError { code: EXIT_RUNTIME, message: message.into() }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "nxs", version, about = "Real-time biosignal pipeline runner", after_help = node_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pipeline until it finishes, is interrupted, or hits a limit.
    Run {
        pipeline: PathBuf,
        /// Stop after this many seconds of pipeline time.
        #[arg(long)]
        duration: Option<f64>,
        /// Stop after this many scheduler steps.
        #[arg(long)]
        steps: Option<u64>,
        /// Do not sleep between steps; pipeline time advances one loop period per step.
        #[arg(long)]
        accelerated: bool,
    },
    /// Check a pipeline file without executing any node.
    Validate { pipeline: PathBuf },
    /// Run a pipeline and report step latency and throughput.
    Bench {
        pipeline: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        /// Run unpaced, measuring pure compute per step.
        #[arg(long)]
        accelerated: bool,
    },
    /// Fit an LDA model to a feature CSV.
    Train {
        features_csv: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
        #[arg(long)]
        out: PathBuf,
        /// Diagonal regularization added to the pooled covariance.
        #[arg(long, default_value_t = nxs_core::ml::DEFAULT_RIDGE)]
        ridge: f64,
        /// Fraction of rows held out for a test accuracy (0 disables).
        #[arg(long, default_value_t = 0.0)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a signal CSV as an SVG line plot.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated channel names (default: all).
        #[arg(long, value_delimiter = ',')]
        channels: Option<Vec<String>>,
    },
}

fn node_help() -> String {
    format!("Node kinds:\n\n{}", describe_kinds())
}

fn load(path: &Path) -> CliResult<Pipeline> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let spec = parse_pipeline(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    for w in &spec.warnings {
        log::warn!("{w}");
    }
    let base = path.parent().unwrap_or(Path::new("."));
    build_pipeline(&spec, base).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

fn check(pipeline: &Pipeline) -> CliResult<String> {
    let report = pipeline.validate();
    if report.is_ok() {
        Ok(report.to_string())
    } else {
        Err(CliError::validation(report.to_string().trim_end().to_string()))
    }
}

fn interrupt_flag() -> Arc<AtomicBool> {
    let flag = Arc::new(AtomicBool::new(false));
    let f = flag.clone();
    if let Err(e) = ctrlc::set_handler(move || f.store(true, Ordering::SeqCst)) {
        log::warn!("cannot install Ctrl-C handler: {e}");
    }
    flag
}

fn pacing(accelerated: bool) -> Pacing {
    if accelerated {
        Pacing::Accelerated
    } else {
        Pacing::RealTime
    }
}

fn cmd_run(path: &Path, duration: Option<f64>, steps: Option<u64>, accelerated: bool) -> CliResult {
    let mut pipeline = load(path)?;
    let warnings = check(&pipeline)?;
    eprint!("{warnings}");
    let termination = Termination {
        max_steps: steps,
        duration,
        interrupt: Some(interrupt_flag()),
        until_sources_finished: true,
    };
    let run = pipeline.run(&termination, pacing(accelerated));
    print!("{}", report::run_report(&run));
    match run.failure {
        Some(e) => Err(CliError::runtime(e.to_string())),
        None => Ok(()),
    }
}

fn cmd_validate(path: &Path) -> CliResult {
    let pipeline = load(path)?;
    let warnings = check(&pipeline)?;
    print!("{warnings}");
    println!("valid=true");
    println!("nodes={}", pipeline.len());
    Ok(())
}

fn cmd_bench(path: &Path, duration: f64, accelerated: bool) -> CliResult {
    if !(duration >= 0.0) {
        return Err(CliError::parse("--duration must be >= 0"));
    }
    let mut pipeline = load(path)?;
    check(&pipeline)?;
    if duration == 0.0 {
        print!("{}", report::empty_bench_report());
        return Ok(());
    }
    let termination = Termination { duration: Some(duration), interrupt: Some(interrupt_flag()), ..Default::default() };
    let run = pipeline.run(&termination, pacing(accelerated));
    print!("{}", report::bench_report(&run, pipeline.loop_period()));
    match run.failure {
        Some(e) => Err(CliError::runtime(e.to_string())),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("NXS_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { pipeline, duration, steps, accelerated } => cmd_run(&pipeline, duration, steps, accelerated),
        Command::Validate { pipeline } => cmd_validate(&pipeline),
        Command::Bench { pipeline, duration, accelerated } => cmd_bench(&pipeline, duration, accelerated),
        Command::Train { features_csv, label_column, out, ridge, test_fraction, seed } => {
            train::cmd_train(&features_csv, &label_column, &out, ridge, test_fraction, seed)
        }
        Command::Plot { csv, out, channels } => plot::cmd_plot(&csv, &out, channels.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
