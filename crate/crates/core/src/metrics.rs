//! Top-k accuracy, mean top-k recall, reference baselines and the runtime
//! columns (FPS, input buffer size).
//!
//! Top-k membership breaks score ties in favour of the lower class index.
//! Mean top-k recall averages per-class recall over the classes that have at
//! least one ground-truth example in the evaluated set.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::{in_top_k, marginalize_scores, PredictionRecord, ScoreVector};
use crate::rng;
use crate::schedule::{associate, deadline, EvaluationMode};
use crate::simulate::{random_guess, SimulationTrace, StubModel, VideoContext};
use crate::time::{Tick, TimingConfig};
use crate::vocab::{ActionSegment, Vocabulary};

pub const DEFAULT_K: usize = 5;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub hits: u64,
    pub total: u64,
}

/// Per-class hit counts. Tallies merge associatively, so partial results
/// from different videos can be combined in any order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopKTally {
    k: usize,
    classes: BTreeMap<usize, ClassTally>,
}

impl TopKTally {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            classes: BTreeMap::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn add(&mut self, scores: &[f64], target: usize) -> Result<()> {
        if self.k == 0 || self.k > scores.len() {
            return Err(Error::contract(format!(
                "k = {} must be in 1..={}",
                self.k,
                scores.len()
            )));
        }
        if target >= scores.len() {
            return Err(Error::contract(format!(
                "ground truth {target} outside {} classes",
                scores.len()
            )));
        }
        let entry = self.classes.entry(target).or_default();
        entry.total += 1;
        if in_top_k(scores, target, self.k) {
            entry.hits += 1;
        }
        Ok(())
    }

    pub fn merge(mut self, other: TopKTally) -> TopKTally {
        assert_eq!(self.k, other.k, "cannot merge tallies with different k");
        for (class, t) in other.classes {
            let e = self.classes.entry(class).or_default();
            e.hits += t.hits;
            e.total += t.total;
        }
        self
    }

    pub fn count(&self) -> u64 {
        self.classes.values().map(|t| t.total).sum()
    }

    pub fn classes(&self) -> &BTreeMap<usize, ClassTally> {
        &self.classes
    }

    /// Percentage of examples whose ground truth is in the top k.
    pub fn accuracy(&self) -> Result<f64> {
        let total = self.count();
        if total == 0 {
            return Err(Error::Undefined("top-k accuracy of an empty set".into()));
        }
        let hits: u64 = self.classes.values().map(|t| t.hits).sum();
        Ok(100.0 * hits as f64 / total as f64)
    }

    /// Unweighted mean over present classes of per-class top-k recall, in percent.
    pub fn mean_recall(&self) -> Result<f64> {
        if self.classes.is_empty() {
            return Err(Error::Undefined("mean top-k recall of an empty set".into()));
        }
        let classes = self.classes.len() as u128;
        if let Some((num, den)) = self.exact_recall_sum() {
            if let Some(den) = den.checked_mul(classes) {
                return Ok(100.0 * num as f64 / den as f64);
            }
        }
        let sum: f64 = self.classes.values().map(|t| t.hits as f64 / t.total as f64).sum();
        Ok(100.0 * sum / classes as f64)
    }

    /// Sum of per-class recalls as `num / den` with `den` the least common
    /// multiple of the class totals, or `None` on overflow.
    fn exact_recall_sum(&self) -> Option<(u128, u128)> {
        fn gcd(a: u128, b: u128) -> u128 {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let mut den: u128 = 1;
        for t in self.classes.values() {
            let n = u128::from(t.total);
            den = (den / gcd(den, n)).checked_mul(n)?;
        }
        let mut num: u128 = 0;
        for t in self.classes.values() {
            num = num.checked_add(u128::from(t.hits).checked_mul(den / u128::from(t.total))?)?;
        }
        Some((num, den))
    }
}

fn tally<S: AsRef<[f64]>>(preds: &[(S, usize)], k: usize) -> Result<TopKTally> {
    let mut t = TopKTally::new(k);
    for (scores, target) in preds {
        t.add(scores.as_ref(), *target)?;
    }
    Ok(t)
}

pub fn topk_accuracy<S: AsRef<[f64]>>(preds: &[(S, usize)], k: usize) -> Result<f64> {
    tally(preds, k)?.accuracy()
}

pub fn mean_topk_recall<S: AsRef<[f64]>>(preds: &[(S, usize)], k: usize) -> Result<f64> {
    tally(preds, k)?.mean_recall()
}

/// Top-k accuracy on a class-balanced resample: `per_class` examples drawn
/// with replacement from every present class.
pub fn balanced_topk_accuracy<S: AsRef<[f64]>>(
    preds: &[(S, usize)],
    k: usize,
    per_class: usize,
    seed: u64,
) -> Result<f64> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, (_, target)) in preds.iter().enumerate() {
        by_class.entry(*target).or_default().push(i);
    }
    if by_class.is_empty() || per_class == 0 {
        return Err(Error::Undefined("balanced accuracy of an empty set".into()));
    }
    let mut t = TopKTally::new(k);
    for (class, members) in &by_class {
        let mut r = rng::stream(seed, &[*class as u64]);
        for _ in 0..per_class {
            let (scores, target) = &preds[members[r.gen_range(0..members.len())]];
            t.add(scores.as_ref(), *target)?;
        }
    }
    t.accuracy()
}

pub fn fps(runtime_ms: f64) -> Result<f64> {
    if !(runtime_ms.is_finite() && runtime_ms > 0.0) {
        return Err(Error::Domain(format!("runtime must be positive, got {runtime_ms} ms")));
    }
    Ok(1000.0 / runtime_ms)
}

/// Bytes needed to buffer `observation_s` of video: `floor(fps * tau_o)`
/// frames of `height x width x channels` samples.
pub fn buffer_bytes(
    fps: f64,
    observation_s: f64,
    height: u64,
    width: u64,
    channels: u64,
    bytes_per_sample: u64,
) -> Result<u64> {
    if !(fps >= 0.0 && observation_s >= 0.0 && fps.is_finite() && observation_s.is_finite()) {
        return Err(Error::Domain(format!(
            "frame rate and duration must be nonnegative, got {fps} fps over {observation_s} s"
        )));
    }
    let frames = (fps * observation_s).floor() as u64;
    Ok(frames * height * width * channels * bytes_per_sample)
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskScores {
    pub topk_accuracy: f64,
    pub mean_topk_recall: f64,
}

impl TaskScores {
    fn from_tally(t: &TopKTally) -> Result<Self> {
        Ok(Self {
            topk_accuracy: t.accuracy()?,
            mean_topk_recall: t.mean_recall()?,
        })
    }
}

/// Verb, noun and action cells of one evaluation run, in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub mode: EvaluationMode,
    pub k: usize,
    pub verb: TaskScores,
    pub noun: TaskScores,
    pub action: TaskScores,
    pub segments: usize,
    pub fallbacks: usize,
    /// Mean lead time of the predictions used, in seconds. Offline runs
    /// report `tau_a - tau_r`, the lead a zero-latency schedule actually gets.
    pub effective_anticipation_s: Option<f64>,
}

/// Random guess used when no streaming prediction exists by the deadline.
pub trait FallbackPolicy: Sync {
    fn guess(&self, segment: &ActionSegment, ordinal: usize, num_classes: usize) -> ScoreVector;
}

/// Uniformly random top list, seeded per segment.
#[derive(Copy, Clone, Debug)]
pub struct UniformGuess {
    pub seed: u64,
}

impl FallbackPolicy for UniformGuess {
    fn guess(&self, segment: &ActionSegment, ordinal: usize, num_classes: usize) -> ScoreVector {
        let mut r = rng::stream(
            self.seed,
            &[
                rng::hash_str(&segment.video_id),
                segment.start.micros() as u64,
                ordinal as u64,
            ],
        );
        random_guess(&mut r, num_classes)
    }
}

/// Where the scored predictions come from.
#[derive(Copy, Clone, Debug)]
pub enum Predictions<'a> {
    /// One trace per video; segments are associated with trace records.
    Streaming(&'a BTreeMap<String, SimulationTrace>),
    /// One optional prediction per segment, aligned with the segment slice.
    Offline(&'a [Option<ScoreVector>]),
}

#[derive(Clone, Debug)]
struct Partial {
    verb: TopKTally,
    noun: TopKTally,
    action: TopKTally,
    fallbacks: usize,
    lead_sum: i64,
    lead_count: usize,
}

impl Partial {
    fn new(k: usize) -> Self {
        Self {
            verb: TopKTally::new(k),
            noun: TopKTally::new(k),
            action: TopKTally::new(k),
            fallbacks: 0,
            lead_sum: 0,
            lead_count: 0,
        }
    }

    fn merge(self, o: Partial) -> Partial {
        Partial {
            verb: self.verb.merge(o.verb),
            noun: self.noun.merge(o.noun),
            action: self.action.merge(o.action),
            fallbacks: self.fallbacks + o.fallbacks,
            lead_sum: self.lead_sum + o.lead_sum,
            lead_count: self.lead_count + o.lead_count,
        }
    }

    fn score(&mut self, seg: &ActionSegment, scores: &ScoreVector, vocab: &Vocabulary) -> Result<()> {
        if scores.len() != vocab.len() {
            return Err(Error::contract(format!(
                "prediction for {} has {} classes, vocabulary has {}",
                seg.label(),
                scores.len(),
                vocab.len()
            )));
        }
        let probs = scores.to_probabilities();
        let (verbs, nouns) = marginalize_scores(&probs, vocab)?;
        let (vp, np) = vocab
            .factor_positions(seg.action_id)
            .ok_or_else(|| Error::contract(format!("{} has an unknown action", seg.label())))?;
        self.action.add(probs.as_slice(), seg.action_id)?;
        self.verb.add(verbs.as_slice(), vp)?;
        self.noun.add(nouns.as_slice(), np)?;
        Ok(())
    }
}

/// Scores every segment under `mode` and reports all six cells.
///
/// Streaming mode associates each segment with the latest trace record
/// available at its deadline and substitutes `fallback` guesses when there
/// is none. Offline mode scores the prediction supplied for each segment and
/// fails with a coverage error naming every segment without one.
pub fn evaluate(
    mode: EvaluationMode,
    segments: &[ActionSegment],
    predictions: Predictions<'_>,
    cfg: &TimingConfig,
    vocab: &Vocabulary,
    k: usize,
    fallback: &dyn FallbackPolicy,
) -> Result<EvaluationResult> {
    if segments.is_empty() {
        return Err(Error::Undefined("no segments to evaluate".into()));
    }
    let total = match (mode, predictions) {
        (EvaluationMode::Offline, Predictions::Offline(preds)) => evaluate_offline(segments, preds, vocab, k)?,
        (EvaluationMode::Streaming, Predictions::Streaming(traces)) => {
            evaluate_streaming(segments, traces, cfg, vocab, k, fallback)?
        }
        _ => {
            return Err(Error::contract(format!(
                "{} evaluation given the wrong kind of predictions",
                mode.as_str()
            )))
        }
    };
    let effective_anticipation_s = match mode {
        EvaluationMode::Offline => Some((cfg.anticipation() - cfg.runtime()).as_secs_f64()),
        EvaluationMode::Streaming => (total.lead_count > 0)
            .then(|| total.lead_sum as f64 / total.lead_count as f64 / crate::time::MICROS_PER_SECOND as f64),
    };
    Ok(EvaluationResult {
        mode,
        k,
        verb: TaskScores::from_tally(&total.verb)?,
        noun: TaskScores::from_tally(&total.noun)?,
        action: TaskScores::from_tally(&total.action)?,
        segments: segments.len(),
        fallbacks: total.fallbacks,
        effective_anticipation_s,
    })
}

fn evaluate_offline(
    segments: &[ActionSegment],
    preds: &[Option<ScoreVector>],
    vocab: &Vocabulary,
    k: usize,
) -> Result<Partial> {
    if preds.len() != segments.len() {
        return Err(Error::contract(format!(
            "{} offline predictions for {} segments",
            preds.len(),
            segments.len()
        )));
    }
    let missing: Vec<String> = segments
        .iter()
        .zip(preds)
        .filter(|(_, p)| p.is_none())
        .map(|(s, _)| s.label())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    segments
        .par_iter()
        .zip(preds.par_iter())
        .try_fold(
            || Partial::new(k),
            |mut acc, (seg, p)| {
                acc.score(seg, p.as_ref().expect("coverage checked"), vocab)?;
                Ok(acc)
            },
        )
        .try_reduce(|| Partial::new(k), |a, b| Ok(a.merge(b)))
}

/// Segments grouped by video, each group sorted by start (stable).
pub fn group_by_video(segments: &[ActionSegment]) -> BTreeMap<&str, Vec<&ActionSegment>> {
    let mut groups: BTreeMap<&str, Vec<&ActionSegment>> = BTreeMap::new();
    for s in segments {
        groups.entry(s.video_id.as_str()).or_default().push(s);
    }
    for g in groups.values_mut() {
        g.sort_by_key(|s| s.start);
    }
    groups
}

/// Owned per-video segment lists, each sorted by start.
fn video_segments(segments: &[ActionSegment]) -> BTreeMap<String, Vec<ActionSegment>> {
    group_by_video(segments)
        .into_iter()
        .map(|(v, segs)| (v.to_string(), segs.into_iter().cloned().collect()))
        .collect()
}

/// Runs `model` back to back on every video until `tail` after its last
/// segment ends.
pub fn stream_traces(
    model: &StubModel,
    segments: &[ActionSegment],
    num_classes: usize,
    cfg: &TimingConfig,
    tail: Tick,
) -> Result<BTreeMap<String, SimulationTrace>> {
    video_segments(segments)
        .into_par_iter()
        .map(|(video, segs)| {
            let ctx = VideoContext {
                video_id: &video,
                segments: &segs,
                num_classes,
                anticipation: cfg.anticipation(),
            };
            let horizon = segs.iter().map(|s| s.end).max().unwrap_or(Tick::ZERO) + tail;
            let trace = crate::simulate::run_stream(model, &ctx, cfg, horizon)?;
            Ok((video, trace))
        })
        .collect()
}

/// Scores `model` under `mode`. Offline predictions use the window ending
/// `tau_a` before each segment; streaming predictions come from
/// [`stream_traces`], with [`UniformGuess`] fallbacks seeded by `seed`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_model(
    model: &StubModel,
    segments: &[ActionSegment],
    vocab: &Vocabulary,
    cfg: &TimingConfig,
    mode: EvaluationMode,
    k: usize,
    seed: u64,
    tail: Tick,
) -> Result<EvaluationResult> {
    let fallback = UniformGuess { seed };
    match mode {
        EvaluationMode::Offline => {
            let by_video = video_segments(segments);
            let preds = segments
                .iter()
                .map(|seg| {
                    let ctx = VideoContext {
                        video_id: &seg.video_id,
                        segments: &by_video[&seg.video_id],
                        num_classes: vocab.len(),
                        anticipation: cfg.anticipation(),
                    };
                    model.predict(&ctx, seg.start - cfg.anticipation()).map(Some)
                })
                .collect::<Result<Vec<_>>>()?;
            evaluate(mode, segments, Predictions::Offline(&preds), cfg, vocab, k, &fallback)
        }
        EvaluationMode::Streaming => {
            let traces = stream_traces(model, segments, vocab.len(), cfg, tail)?;
            evaluate(
                mode,
                segments,
                Predictions::Streaming(&traces),
                cfg,
                vocab,
                k,
                &fallback,
            )
        }
    }
}

fn evaluate_streaming(
    segments: &[ActionSegment],
    traces: &BTreeMap<String, SimulationTrace>,
    cfg: &TimingConfig,
    vocab: &Vocabulary,
    k: usize,
    fallback: &dyn FallbackPolicy,
) -> Result<Partial> {
    let groups: Vec<(&str, Vec<&ActionSegment>)> = group_by_video(segments).into_iter().collect();
    let missing: Vec<String> = groups
        .iter()
        .filter(|(v, _)| !traces.contains_key(*v))
        .flat_map(|(_, segs)| segs.iter().map(|s| s.label()))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    groups
        .par_iter()
        .map(|(video, segs)| {
            let trace = &traces[*video];
            if trace.config != *cfg {
                return Err(Error::contract(format!(
                    "trace for {video} was simulated with {}, evaluating with {cfg}",
                    trace.config
                )));
            }
            let owned: Vec<ActionSegment> = segs.iter().map(|s| (*s).clone()).collect();
            let mut acc = Partial::new(k);
            for (ordinal, (seg, rec)) in associate(&owned, &trace.records, cfg)?.into_iter().enumerate() {
                match rec {
                    Some(r) => {
                        acc.score(seg, &r.scores, vocab)?;
                        acc.lead_sum += (seg.start - r.available_at).micros();
                        acc.lead_count += 1;
                    }
                    None => {
                        let guess = fallback.guess(seg, ordinal, vocab.len());
                        let rec = PredictionRecord::fallback(deadline(seg.start, cfg), guess);
                        acc.score(seg, &rec.scores, vocab)?;
                        acc.fallbacks += 1;
                    }
                }
            }
            Ok(acc)
        })
        .try_reduce(|| Partial::new(k), |a, b| Ok(a.merge(b)))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    /// Always the most frequent training classes.
    Constant,
    /// Classes sampled from the training distribution.
    Training,
    /// Uniformly random classes.
    Random,
}

/// Action frequencies of `segments` over `vocab`.
pub fn class_frequencies(segments: &[ActionSegment], vocab: &Vocabulary) -> Vec<f64> {
    let mut f = vec![0.0; vocab.len()];
    for s in segments {
        f[s.action_id] += 1.0;
    }
    f
}

/// Scores a reference baseline on `test` with both measures.
pub fn baseline_scores(
    kind: BaselineKind,
    train: &[ActionSegment],
    test: &[ActionSegment],
    vocab: &Vocabulary,
    k: usize,
    seed: u64,
) -> Result<EvaluationResult> {
    if train.is_empty() && kind != BaselineKind::Random {
        return Err(Error::Setup("frequency baselines need training segments".into()));
    }
    let frequencies = class_frequencies(train, vocab);
    let model = match kind {
        BaselineKind::Constant => StubModel::Constant { frequencies },
        BaselineKind::Training => StubModel::TrainingDistribution { frequencies, seed },
        BaselineKind::Random => StubModel::UniformRandom { seed },
    };
    let preds = test
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let ctx = VideoContext {
                video_id: &seg.video_id,
                segments: &[],
                num_classes: vocab.len(),
                anticipation: Tick::ZERO,
            };
            // distinct query time per test example keeps sampled baselines independent
            model.predict(&ctx, Tick::from_micros(i as i64)).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = TimingConfig::new(Tick::from_micros(1), Tick::ZERO, Tick::from_micros(1))?;
    evaluate(
        EvaluationMode::Offline,
        test,
        Predictions::Offline(&preds),
        &cfg,
        vocab,
        k,
        &UniformGuess { seed },
    )
    .map(|mut r| {
        r.effective_anticipation_s = None;
        r
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::ActionPair;
    use proptest::prelude::*;

    /// Scores where `gt` sits at 1-based `rank` over `n` classes.
    fn ranked(n: usize, gt: usize, rank: usize) -> Vec<f64> {
        let mut order: Vec<usize> = (0..n).filter(|c| *c != gt).collect();
        order.insert(rank - 1, gt);
        let mut s = vec![0.0; n];
        for (pos, c) in order.iter().enumerate() {
            s[*c] = (n - pos) as f64;
        }
        s
    }

    #[test]
    fn accuracy_extremes() {
        let first: Vec<_> = (0..10).map(|g| (ranked(10, g, 1), g)).collect();
        assert_eq!(topk_accuracy(&first, 5).unwrap(), 100.0);
        let sixth: Vec<_> = (0..10).map(|g| (ranked(10, g, 6), g)).collect();
        assert_eq!(topk_accuracy(&sixth, 5).unwrap(), 0.0);
    }

    #[test]
    fn hand_enumerated_ranks() {
        let preds = vec![(ranked(10, 0, 2), 0), (ranked(10, 0, 7), 0), (ranked(10, 1, 1), 1)];
        let acc = topk_accuracy(&preds, 5).unwrap();
        assert!((acc - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(format!("{acc:.2}"), "66.67");
        // class 0: 1 of 2, class 1: 1 of 1
        assert_eq!(mean_topk_recall(&preds, 5).unwrap(), 75.0);
    }

    #[test]
    fn empty_and_bad_k() {
        let none: Vec<(Vec<f64>, usize)> = vec![];
        assert!(matches!(topk_accuracy(&none, 5), Err(Error::Undefined(_))));
        assert!(matches!(mean_topk_recall(&none, 5), Err(Error::Undefined(_))));
        let one = vec![(vec![0.5, 0.5], 0)];
        assert!(matches!(topk_accuracy(&one, 5), Err(Error::Contract(_))));
        assert!(matches!(
            topk_accuracy(&[(vec![0.5, 0.5], 2)], 1),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn ties_favour_lower_index() {
        let preds = vec![(vec![1.0; 8], 4), (vec![1.0; 8], 5)];
        assert_eq!(topk_accuracy(&preds, 5).unwrap(), 50.0);
    }

    #[test]
    fn fps_columns() {
        assert!((fps(724.98).unwrap() - 1.38).abs() <= 0.005);
        assert!((fps(19.20).unwrap() - 52.08).abs() <= 0.005);
        assert_eq!(fps(1000.0).unwrap(), 1.0);
        assert!(matches!(fps(0.0), Err(Error::Domain(_))));
        assert!(fps(-3.0).is_err());
    }

    #[test]
    fn buffer_sizes() {
        assert_eq!(buffer_bytes(30.0, 1.07, 112, 112, 3, 1).unwrap(), 1_204_224);
        assert_eq!(buffer_bytes(30.0, 0.0, 112, 112, 3, 1).unwrap(), 0);
        let small = buffer_bytes(30.0, 2.0, 64, 64, 3, 4).unwrap();
        assert_eq!(buffer_bytes(30.0, 2.0, 128, 128, 3, 4).unwrap(), 4 * small);
        assert!(buffer_bytes(-1.0, 1.0, 1, 1, 1, 1).is_err());
    }

    #[test]
    fn tallies_merge_associatively() {
        let preds: Vec<_> = (0..30).map(|i| (ranked(12, i % 5, 1 + i % 9), i % 5)).collect();
        let whole = tally(&preds, 5).unwrap();
        let a = tally(&preds[..7], 5).unwrap();
        let b = tally(&preds[7..19], 5).unwrap();
        let c = tally(&preds[19..], 5).unwrap();
        assert_eq!(a.clone().merge(b.clone()).merge(c.clone()), whole);
        assert_eq!(a.merge(b.merge(c)), whole);
    }

    fn vocab(n: u32) -> Vocabulary {
        Vocabulary::from_pairs((0..n).map(|i| ActionPair { verb: i % 7, noun: i }))
    }

    fn seg(voc: &Vocabulary, video: &str, i: usize, action: usize) -> ActionSegment {
        let s = Tick::from_secs(10.0 + 5.0 * i as f64).unwrap();
        ActionSegment::new(video, s, s + Tick::from_secs(1.0).unwrap(), voc.actions()[action], voc).unwrap()
    }

    #[test]
    fn constant_baseline_on_its_own_class() {
        let voc = vocab(20);
        let train: Vec<_> = (0..50)
            .map(|i| seg(&voc, "a", i, if i < 30 { 3 } else { i % 20 }))
            .collect();
        let test: Vec<_> = (0..10).map(|i| seg(&voc, "b", i, 3)).collect();
        let r = baseline_scores(BaselineKind::Constant, &train, &test, &voc, 5, 1).unwrap();
        assert_eq!(r.action.topk_accuracy, 100.0);
        assert!(baseline_scores(BaselineKind::Constant, &[], &test, &voc, 5, 1).is_err());
        assert!(baseline_scores(BaselineKind::Random, &[], &test, &voc, 5, 1).is_ok());
    }

    #[test]
    fn constant_baseline_recall_bound() {
        let n = 25;
        let voc = vocab(n as u32);
        let train: Vec<_> = (0..300).map(|i| seg(&voc, "a", i, (i * i) % n)).collect();
        let test: Vec<_> = (0..200).map(|i| seg(&voc, "b", i, i % n)).collect();
        let r = baseline_scores(BaselineKind::Constant, &train, &test, &voc, 5, 1).unwrap();
        assert!(r.action.mean_topk_recall <= 500.0 / n as f64 + 1e-9);
    }

    #[test]
    fn training_baseline_scores_in_range() {
        let voc = vocab(30);
        let train: Vec<_> = (0..200).map(|i| seg(&voc, "a", i, (i * 7) % 11)).collect();
        let test: Vec<_> = (0..200).map(|i| seg(&voc, "b", i, (i * 3) % 11)).collect();
        let r = baseline_scores(BaselineKind::Training, &train, &test, &voc, 5, 4).unwrap();
        for c in [r.verb, r.noun, r.action] {
            assert!((0.0..=100.0).contains(&c.topk_accuracy));
            assert!((0.0..=100.0).contains(&c.mean_topk_recall));
        }
        // sampling only from the 11 seen classes beats uniform guessing over 30
        assert!(r.action.topk_accuracy > 100.0 * 5.0 / 30.0);
    }

    #[test]
    fn balanced_resample_is_deterministic() {
        let preds: Vec<_> = (0..40).map(|i| (ranked(10, i % 3, 1 + i % 8), i % 3)).collect();
        let a = balanced_topk_accuracy(&preds, 5, 1000, 3).unwrap();
        assert_eq!(a, balanced_topk_accuracy(&preds, 5, 1000, 3).unwrap());
        assert!((0.0..=100.0).contains(&a));
    }

    #[test]
    fn offline_coverage_error_names_segments() {
        let voc = vocab(10);
        let segs = vec![seg(&voc, "v1", 0, 1), seg(&voc, "v1", 1, 2)];
        let preds = vec![Some(ScoreVector::uniform(10)), None];
        let cfg = TimingConfig::from_units(1.0, 1.0, 10.0).unwrap();
        let err = evaluate(
            EvaluationMode::Offline,
            &segs,
            Predictions::Offline(&preds),
            &cfg,
            &voc,
            5,
            &UniformGuess { seed: 0 },
        )
        .unwrap_err();
        match err {
            Error::Coverage(ids) => assert_eq!(ids, vec![segs[1].label()]),
            other => panic!("unexpected {other}"),
        }
    }

    proptest! {
        #[test]
        fn duplication_invariance(
            raw in prop::collection::vec((prop::collection::vec(0.0f64..1.0, 9), 0usize..9), 1..30),
            times in 2usize..4,
        ) {
            let dup: Vec<_> = raw.iter().flat_map(|p| std::iter::repeat_n(p.clone(), times)).collect();
            prop_assert_eq!(topk_accuracy(&raw, 3).unwrap(), topk_accuracy(&dup, 3).unwrap());
            prop_assert_eq!(mean_topk_recall(&raw, 3).unwrap(), mean_topk_recall(&dup, 3).unwrap());
        }

        #[test]
        fn full_k_is_perfect(
            raw in prop::collection::vec((prop::collection::vec(-5.0f64..5.0, 6), 0usize..6), 1..20),
        ) {
            prop_assert_eq!(topk_accuracy(&raw, 6).unwrap(), 100.0);
            prop_assert_eq!(mean_topk_recall(&raw, 6).unwrap(), 100.0);
        }

        #[test]
        fn rebalancing_keeps_macro_recall(
            raw in prop::collection::vec((prop::collection::vec(0.0f64..1.0, 7), 0usize..7), 1..25),
            class in 0usize..7,
        ) {
            // replicating every example of one class changes its weight but not its recall
            let mut skewed = raw.clone();
            for p in raw.iter().filter(|p| p.1 == class) {
                skewed.push(p.clone());
                skewed.push(p.clone());
            }
            let a = mean_topk_recall(&raw, 2).unwrap();
            let b = mean_topk_recall(&skewed, 2).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
