//! Self-check and demonstration commands.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use streamant_core::distill::gradcheck::{self, TOLERANCE};
use streamant_core::distill::toy::{train_seeds, ToyConfig, TrainMode};
use streamant_core::distill::{write_checkpoint, write_curves, LossWeights};
use streamant_core::io::TOOL_VERSION;
use streamant_core::simulate::{check_exact_multiples, check_quantization, EquivalenceReport};

use crate::{emit, AcceptanceFailure, Settings};

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Random configurations compared against the simulator.
    #[arg(long, default_value_t = 10_000)]
    pub cases: usize,
    /// Cases of the exact-multiple sweep.
    #[arg(long, default_value_t = 1_000)]
    pub multiples: usize,
}

fn describe_mismatches(report: &EquivalenceReport) {
    for (start, cfg) in &report.mismatches {
        eprintln!("  mismatch: start={start} s {cfg}");
    }
}

pub fn verify_schedule(args: &VerifyArgs, settings: &Settings) -> Result<()> {
    let equivalence = check_quantization(args.cases, settings.seed);
    emit(&format!("{}/{} exact\n", equivalence.exact, equivalence.cases))?;
    describe_mismatches(&equivalence);
    let multiples = check_exact_multiples(args.multiples, settings.seed);
    emit(&format!(
        "exact-multiple law: {}/{} exact\n",
        multiples.exact, multiples.cases
    ))?;
    describe_mismatches(&multiples);
    if !(equivalence.passed() && multiples.passed()) {
        return Err(AcceptanceFailure("schedule verification found mismatches".into()).into());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct GradCheckArgs {
    /// Random inputs per suite.
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
}

pub fn grad_check(args: &GradCheckArgs, settings: &Settings) -> Result<()> {
    let outcomes = gradcheck::run_all(args.cases, settings.seed)?;
    for o in &outcomes {
        emit(&format!(
            "{:<12} {:>5} cases  max relative error {:.3e}  {}\n",
            o.name,
            o.cases,
            o.max_relative_error,
            if o.passed() { "PASS" } else { "FAIL" }
        ))?;
    }
    if outcomes.iter().any(|o| !o.passed()) {
        return Err(AcceptanceFailure(format!("gradient check above tolerance {TOLERANCE:e}")).into());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    /// Number of seeds (0, 1, ... n-1).
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub lambda_d: Option<f64>,
    #[arg(long)]
    pub lambda_c: Option<f64>,
    /// Labeled training pairs per class.
    #[arg(long)]
    pub labeled: Option<usize>,
    /// Unlabeled training pairs.
    #[arg(long)]
    pub unlabeled: Option<usize>,
    /// Directory for accuracy table, loss curves and student checkpoints.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn distill_demo(args: &DemoArgs, settings: &Settings) -> Result<()> {
    let file = &settings.distill;
    let mut cfg = ToyConfig::default();
    let seeds = args.seeds.or(file.seeds).unwrap_or(10);
    cfg.epochs = args.epochs.or(file.epochs).unwrap_or(cfg.epochs);
    cfg.learning_rate = args.learning_rate.or(file.learning_rate).unwrap_or(cfg.learning_rate);
    cfg.labeled_per_class = args.labeled.or(file.labeled).unwrap_or(cfg.labeled_per_class);
    cfg.unlabeled = args.unlabeled.or(file.unlabeled).unwrap_or(cfg.unlabeled);
    cfg.weights = LossWeights::new(
        args.lambda_d.or(file.lambda_d).unwrap_or(cfg.weights.lambda_d),
        args.lambda_c.or(file.lambda_c).unwrap_or(cfg.weights.lambda_c),
    )?;
    let seed_list: Vec<u64> = (0..seeds).map(|i| settings.seed + i).collect();
    let runs = train_seeds(&cfg, &seed_list, &[TrainMode::Plain, TrainMode::Distilled])?;

    let mut table = String::new();
    let _ = writeln!(
        table,
        "# streamant {TOOL_VERSION}  toy distillation  seeds={}..{}  epochs={} lr={} lambda_d={} lambda_c={} labeled/class={} unlabeled={}",
        settings.seed,
        settings.seed + seeds.saturating_sub(1),
        cfg.epochs,
        cfg.learning_rate,
        cfg.weights.lambda_d,
        cfg.weights.lambda_c,
        cfg.labeled_per_class,
        cfg.unlabeled
    );
    let _ = writeln!(
        table,
        "{:>6} {:>8} {:>8} {:>10} {:>7}",
        "SEED", "TEACHER", "PLAIN", "DISTILLED", "GAIN"
    );
    let (mut wins, mut gain_sum) = (0usize, 0.0);
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record([
        "seed",
        "teacher_accuracy",
        "plain_accuracy",
        "distilled_accuracy",
        "gain",
    ])?;
    for pair in &runs {
        let (plain, distilled) = (&pair[0], &pair[1]);
        let gain = 100.0 * (distilled.accuracy - plain.accuracy);
        wins += usize::from(distilled.accuracy >= plain.accuracy);
        gain_sum += gain;
        let _ = writeln!(
            table,
            "{:>6} {:>8.2} {:>8.2} {:>10.2} {:>+7.2}",
            plain.seed,
            100.0 * plain.teacher_accuracy,
            100.0 * plain.accuracy,
            100.0 * distilled.accuracy,
            gain
        );
        csv.write_record([
            plain.seed.to_string(),
            plain.teacher_accuracy.to_string(),
            plain.accuracy.to_string(),
            distilled.accuracy.to_string(),
            gain.to_string(),
        ])?;
    }
    let mean = |f: &dyn Fn(&[streamant_core::distill::ToyRun]) -> f64| {
        runs.iter().map(|r| f(r)).sum::<f64>() / runs.len().max(1) as f64
    };
    let _ = writeln!(
        table,
        "{:>6} {:>8.2} {:>8.2} {:>10.2} {:>+7.2}",
        "MEAN",
        100.0 * mean(&|r| r[0].teacher_accuracy),
        100.0 * mean(&|r| r[0].accuracy),
        100.0 * mean(&|r| r[1].accuracy),
        gain_sum / runs.len().max(1) as f64
    );
    let _ = writeln!(table, "distilled >= plain on {wins}/{} seeds", runs.len());
    emit(&table)?;

    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("accuracy.txt"), &table)?;
        fs::write(dir.join("accuracy.csv"), csv.into_inner()?)?;
        let curves = runs
            .iter()
            .flatten()
            .map(|r| (r.seed, r.mode.as_str(), r.curve.as_slice()));
        write_curves(BufWriter::new(File::create(dir.join("curves.csv"))?), curves)?;
        for run in runs.iter().flatten() {
            let name = format!("student_seed{}_{}.ckpt", run.seed, run.mode.as_str());
            write_checkpoint(BufWriter::new(File::create(dir.join(name))?), run.student.params())?;
        }
    }
    Ok(())
}
