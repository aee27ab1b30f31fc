//! `streamant`: runtime-aware evaluation of action anticipation models.

mod checks;
mod eval;
mod stub;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use streamant_core::io::config::DistillSection;
use streamant_core::io::HarnessConfig;
use streamant_core::time::{check_resolution, MICROS_PER_SECOND};
use streamant_core::{EvaluationMode, Tick};

#[derive(Parser, Debug)]
#[command(
    name = "streamant",
    version,
    about = "Runtime-aware evaluation harness for action anticipation"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Seed for every random choice (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Time resolution; must divide 1,000,000 (default 1,000,000).
    #[arg(long, global = true)]
    ticks_per_second: Option<i64>,
    /// k of the top-k metrics (default 5).
    #[arg(long, global = true)]
    k: Option<usize>,
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score predictions made on ideal observation windows.
    EvalOffline(eval::InputArgs),
    /// Score predictions as a real-time stream would deliver them.
    EvalStreaming(eval::InputArgs),
    /// Write the prediction trace of every profile and video.
    Simulate(eval::InputArgs),
    /// Check the closed-form schedule against the event simulator.
    VerifySchedule(checks::VerifyArgs),
    /// Evaluate all profiles in both modes and rank them.
    Compare(eval::InputArgs),
    /// Train the toy student with and without distillation.
    DistillDemo(checks::DemoArgs),
    /// Compare analytic gradients with finite differences.
    GradCheck(checks::GradCheckArgs),
}

/// Global settings after merging flags, configuration file and defaults.
#[derive(Clone, Debug)]
pub struct Settings {
    pub seed: u64,
    pub ticks_per_second: i64,
    pub k: usize,
    /// Simulated time after the last segment of each video.
    pub tail: Tick,
    pub distill: DistillSection,
}

impl Settings {
    fn resolve(global: &GlobalArgs) -> Result<Self> {
        let file = match &global.config {
            Some(path) => HarnessConfig::load(path)?,
            None => HarnessConfig::default(),
        };
        let ticks_per_second = global
            .ticks_per_second
            .or(file.global.ticks_per_second)
            .unwrap_or(MICROS_PER_SECOND);
        check_resolution(ticks_per_second)?;
        let k = global.k.or(file.global.k).unwrap_or(streamant_core::metrics::DEFAULT_K);
        if k == 0 {
            anyhow::bail!(streamant_core::Error::Contract("--k must be >= 1".into()));
        }
        Ok(Self {
            seed: global.seed.or(file.global.seed).unwrap_or(0),
            ticks_per_second,
            k,
            tail: Tick::from_secs_at(file.simulate.tail_s.unwrap_or(0.0), ticks_per_second)?,
            distill: file.distill,
        })
    }
}

/// Writes `text` to stdout; a reader that went away is not an error.
pub fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

/// A self-check ran to completion and found a failure.
#[derive(Debug)]
pub struct AcceptanceFailure(pub String);

impl std::fmt::Display for AcceptanceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for AcceptanceFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<AcceptanceFailure>().is_some() {
        return 4;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<streamant_core::Error>() {
            return e.exit_code() as u8;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<csv::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    let settings = Settings::resolve(&cli.global)?;
    match &cli.command {
        Command::EvalOffline(a) => eval::eval(a, EvaluationMode::Offline, &settings),
        Command::EvalStreaming(a) => eval::eval(a, EvaluationMode::Streaming, &settings),
        Command::Simulate(a) => eval::simulate(a, &settings),
        Command::VerifySchedule(a) => checks::verify_schedule(a, &settings),
        Command::Compare(a) => eval::compare(a, &settings),
        Command::DistillDemo(a) => checks::distill_demo(a, &settings),
        Command::GradCheck(a) => checks::grad_check(a, &settings),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
