//! Evaluation commands: offline and streaming scoring, profile comparison
//! and trace simulation.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Args;
use streamant_core::io::report::{format_ranking, format_results_table, ranking, write_plot_data, write_results_csv};
use streamant_core::io::{load_annotations, load_profiles, write_trace, MethodReport, PredictionDump, RuntimeProfile};
use streamant_core::metrics::{class_frequencies, evaluate_model, stream_traces};
use streamant_core::simulate::StubModel;
use streamant_core::{ActionSegment, EvaluationMode, Vocabulary};

use crate::stub::StubSpec;
use crate::{emit, Settings};

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Annotation CSV of the evaluation set.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Runtime profile CSV (one or more methods).
    #[arg(long)]
    pub profile: PathBuf,
    /// Only use this method from the profile file.
    #[arg(long)]
    pub method: Option<String>,
    /// Prediction dump to replay.
    #[arg(long, conflicts_with = "stub", required_unless_present = "stub")]
    pub dump: Option<PathBuf>,
    /// Stub model: oracle, noisy:X, degrading:OFF:ACC,..., constant, training, random.
    #[arg(long)]
    pub stub: Option<String>,
    /// Training annotations for the constant and training stubs.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Directory for the written artifacts.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Everything an evaluation run needs, loaded and validated.
pub struct Inputs {
    pub segments: Vec<ActionSegment>,
    pub vocabulary: Vocabulary,
    pub profiles: Vec<RuntimeProfile>,
    pub model: StubModel,
}

pub fn load_inputs(args: &InputArgs, settings: &Settings) -> Result<Inputs> {
    let tps = settings.ticks_per_second;
    let test = load_annotations(&args.annotations, tps)?;
    report_rejected(&args.annotations, &test.rejected);
    let train = match &args.train {
        Some(path) => {
            let set = load_annotations(path, tps)?;
            report_rejected(path, &set.rejected);
            Some(set)
        }
        None => None,
    };
    let vocabulary = match &train {
        Some(t) => test.vocabulary.union(&t.vocabulary),
        None => test.vocabulary.clone(),
    };
    let segments = test.reindexed(&vocabulary)?.segments;
    if segments.is_empty() {
        bail!(streamant_core::Error::Setup(format!(
            "{} holds no usable segments",
            args.annotations.display()
        )));
    }
    let mut profiles = load_profiles(&args.profile)?;
    if let Some(name) = &args.method {
        profiles.retain(|p| &p.method == name);
        if profiles.is_empty() {
            bail!(streamant_core::Error::Setup(format!(
                "method `{name}` not found in {}",
                args.profile.display()
            )));
        }
    }
    let model = match (&args.dump, &args.stub) {
        (Some(path), _) => {
            let dump = PredictionDump::load(path)?;
            dump.validate_classes(vocabulary.len())?;
            StubModel::DumpReplay(Arc::new(dump))
        }
        (None, Some(raw)) => {
            let spec = StubSpec::parse(raw)?;
            let frequencies = match &train {
                Some(t) if spec.needs_training_set() => {
                    Some(class_frequencies(&t.reindexed(&vocabulary)?.segments, &vocabulary))
                }
                _ => None,
            };
            spec.build(settings.seed, tps, frequencies)?
        }
        (None, None) => unreachable!("clap requires --dump or --stub"),
    };
    Ok(Inputs {
        segments,
        vocabulary,
        profiles,
        model,
    })
}

fn report_rejected(path: &Path, rejected: &[streamant_core::io::RejectedRow]) {
    if rejected.is_empty() {
        return;
    }
    eprintln!("{}: {} row(s) rejected", path.display(), rejected.len());
    for r in rejected {
        eprintln!("  line {}: {}", r.line, r.reason);
    }
}

pub fn reports(inputs: &Inputs, modes: &[EvaluationMode], settings: &Settings) -> Result<Vec<MethodReport>> {
    inputs
        .profiles
        .iter()
        .map(|profile| {
            let timing = profile.timing(settings.ticks_per_second)?;
            let mut report = MethodReport {
                profile: profile.clone(),
                timing,
                offline: None,
                streaming: None,
            };
            for &mode in modes {
                let result = evaluate_model(
                    &inputs.model,
                    &inputs.segments,
                    &inputs.vocabulary,
                    &timing,
                    mode,
                    settings.k,
                    settings.seed,
                    settings.tail,
                )
                .with_context(|| format!("{} evaluation of {}", mode.as_str(), profile.method))?;
                match mode {
                    EvaluationMode::Offline => report.offline = Some(result),
                    EvaluationMode::Streaming => report.streaming = Some(result),
                }
            }
            Ok(report)
        })
        .collect()
}

/// `name` with every character outside `[A-Za-z0-9._-]` replaced by `_`.
fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn out_dir(args: &InputArgs) -> Result<Option<&Path>> {
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(args.out_dir.as_deref())
}

pub fn eval(args: &InputArgs, mode: EvaluationMode, settings: &Settings) -> Result<()> {
    let inputs = load_inputs(args, settings)?;
    let reports = reports(&inputs, &[mode], settings)?;
    let table = format_results_table(&reports, settings.seed)?;
    emit(&table)?;
    if let Some(dir) = out_dir(args)? {
        write_results_csv(create(dir, "results.csv")?, &reports, settings.seed)?;
        fs::write(dir.join("results.txt"), &table)?;
    }
    Ok(())
}

pub fn compare(args: &InputArgs, settings: &Settings) -> Result<()> {
    let inputs = load_inputs(args, settings)?;
    let reports = reports(&inputs, &[EvaluationMode::Offline, EvaluationMode::Streaming], settings)?;
    let table = format_results_table(&reports, settings.seed)?;
    let ranks = format_ranking(&ranking(&reports));
    emit(&format!("{table}\n{ranks}"))?;
    if let Some(dir) = out_dir(args)? {
        write_results_csv(create(dir, "results.csv")?, &reports, settings.seed)?;
        fs::write(dir.join("results.txt"), &table)?;
        fs::write(dir.join("ranking.txt"), &ranks)?;
        write_plot_data(create(dir, "plot.csv")?, &reports)?;
    }
    Ok(())
}

pub fn simulate(args: &InputArgs, settings: &Settings) -> Result<()> {
    let Some(dir) = out_dir(args)? else {
        bail!(streamant_core::Error::Setup("simulate needs --out-dir".into()));
    };
    let inputs = load_inputs(args, settings)?;
    for profile in &inputs.profiles {
        let cfg = profile.timing(settings.ticks_per_second)?;
        let traces = stream_traces(
            &inputs.model,
            &inputs.segments,
            inputs.vocabulary.len(),
            &cfg,
            settings.tail,
        )?;
        for (video, trace) in traces {
            let name = format!("{}.{}.trace.csv", file_stem(&profile.method), file_stem(&video));
            write_trace(create(dir, &name)?, &trace.records)?;
            emit(&format!(
                "{name}: {} records, horizon {} s, {cfg}\n",
                trace.records.len(),
                trace.horizon
            ))?;
        }
    }
    Ok(())
}
