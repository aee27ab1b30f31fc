//! Discrete-event streaming simulator.
//!
//! One compute device, one inference in flight. The first inference starts
//! as soon as a full `tau_o` buffer exists; every completion immediately
//! starts the next inference on the most recent `tau_o` of video. This is
//! the brute-force counterpart of [`crate::schedule::quantize_timestamp`]:
//! it never evaluates the closed form, it just plays the timeline forward.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::dump::PredictionDump;
use crate::prediction::{PredictionRecord, ScoreVector};
use crate::rng;
use crate::time::{Tick, TimingConfig};
use crate::vocab::ActionSegment;

/// Length of the ranked list a synthetic model commits to.
pub const STUB_TOP_LIST: usize = 5;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    BufferFilled,
    InferenceDone { input_end: Tick },
}

/// Completed inferences as `(input_end, available_at)` pairs, in completion
/// order, for every completion at or before `horizon`.
pub fn simulate_slots(cfg: &TimingConfig, horizon: Tick) -> Vec<(Tick, Tick)> {
    let mut queue: BinaryHeap<Reverse<(Tick, u64, EventKind)>> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut completed = Vec::new();
    let mut device_free_at = Tick::ZERO;

    queue.push(Reverse((cfg.observation(), seq, EventKind::BufferFilled)));
    while let Some(Reverse((now, _, event))) = queue.pop() {
        if now > horizon {
            break;
        }
        if let EventKind::InferenceDone { input_end } = event {
            completed.push((input_end, now));
        }
        // The device is idle at this point: start on the freshest full buffer.
        debug_assert!(device_free_at <= now);
        let done_at = now + cfg.runtime();
        device_free_at = done_at;
        seq += 1;
        queue.push(Reverse((done_at, seq, EventKind::InferenceDone { input_end: now })));
    }
    completed
}

/// Input-window end of the latest prediction the simulator has finished by
/// `start - tau_a`.
pub fn simulated_quantization(start: Tick, cfg: &TimingConfig) -> Option<Tick> {
    let due = start - cfg.anticipation();
    simulate_slots(cfg, due).last().map(|(input_end, _)| *input_end)
}

/// Piecewise-linear map from how far a window ends before the ideal
/// observation point to the probability of a correct top-5.
///
/// Offsets before the first knot take the first accuracy; offsets after the
/// last knot take the last one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationCurve {
    knots: Vec<(Tick, f64)>,
}

impl DegradationCurve {
    pub fn new(mut knots: Vec<(Tick, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::contract("degradation curve needs at least one knot"));
        }
        knots.sort_by_key(|k| k.0);
        if knots.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::contract("degradation curve has duplicate offsets"));
        }
        if let Some((t, a)) = knots.iter().find(|(t, a)| t.is_negative() || !(0.0..=1.0).contains(a)) {
            return Err(Error::contract(format!(
                "degradation knot ({t} s, {a}) outside offset >= 0, accuracy in [0, 1]"
            )));
        }
        Ok(Self { knots })
    }

    pub fn constant(accuracy: f64) -> Result<Self> {
        Self::new(vec![(Tick::ZERO, accuracy)])
    }

    pub fn knots(&self) -> &[(Tick, f64)] {
        &self.knots
    }

    pub fn accuracy(&self, offset: Tick) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if offset <= first.0 {
            return first.1;
        }
        if offset >= last.0 {
            return last.1;
        }
        let i = self.knots.partition_point(|k| k.0 <= offset);
        let (t0, a0) = self.knots[i - 1];
        let (t1, a1) = self.knots[i];
        let frac = (offset - t0).micros() as f64 / (t1 - t0).micros() as f64;
        a0 + (a1 - a0) * frac
    }
}

/// What a stub model sees of the video it runs on.
#[derive(Copy, Clone, Debug)]
pub struct VideoContext<'a> {
    pub video_id: &'a str,
    /// Segments sorted by start.
    pub segments: &'a [ActionSegment],
    pub num_classes: usize,
    pub anticipation: Tick,
}

/// Stand-in models that emit score vectors deterministically from a seed.
#[derive(Clone, Debug)]
pub enum StubModel {
    /// Knows the upcoming action; its hit rate follows a degradation curve.
    Oracle {
        curve: DegradationCurve,
        seed: u64,
    },
    /// Oracle whose hit rate is `1 - noise` everywhere.
    NoisyOracle {
        noise: f64,
        seed: u64,
    },
    /// Samples a ranked list from the training class distribution.
    TrainingDistribution {
        frequencies: Vec<f64>,
        seed: u64,
    },
    /// Always ranks the most frequent training classes first.
    Constant {
        frequencies: Vec<f64>,
    },
    UniformRandom {
        seed: u64,
    },
    /// Replays an external prediction dump.
    DumpReplay(Arc<PredictionDump>),
}

impl StubModel {
    pub fn perfect_oracle(seed: u64) -> Self {
        StubModel::Oracle {
            curve: DegradationCurve::constant(1.0).expect("1.0 is a valid accuracy"),
            seed,
        }
    }

    pub fn predict(&self, video: &VideoContext<'_>, input_end: Tick) -> Result<ScoreVector> {
        let n = video.num_classes;
        let path = [rng::hash_str(video.video_id), input_end.micros() as u64];
        match self {
            StubModel::Oracle { curve, seed } => Ok(oracle_lookup(input_end, video, curve, *seed)),
            StubModel::NoisyOracle { noise, seed } => {
                let curve = DegradationCurve::constant((1.0 - noise).clamp(0.0, 1.0))?;
                Ok(oracle_lookup(input_end, video, &curve, *seed))
            }
            StubModel::TrainingDistribution { frequencies, seed } => {
                check_len(frequencies.len(), n)?;
                let mut rng = rng::stream(*seed, &path);
                let ranking = weighted_ranking(&mut rng, frequencies, STUB_TOP_LIST.min(n));
                ScoreVector::from_ranking(n, &ranking)
            }
            StubModel::Constant { frequencies } => {
                check_len(frequencies.len(), n)?;
                ScoreVector::from_ranking(n, &crate::prediction::top_k(frequencies, STUB_TOP_LIST))
            }
            StubModel::UniformRandom { seed } => {
                let mut rng = rng::stream(*seed, &path);
                Ok(random_guess(&mut rng, n))
            }
            StubModel::DumpReplay(dump) => dump.replay(video.video_id, input_end, n),
        }
    }
}

fn check_len(got: usize, n: usize) -> Result<()> {
    if got != n {
        return Err(Error::contract(format!(
            "class table has {got} entries, vocabulary has {n}"
        )));
    }
    Ok(())
}

/// A uniformly random ranking expressed as probabilities.
pub fn random_guess<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ScoreVector {
    let ranking = sample(rng, n, STUB_TOP_LIST.min(n)).into_vec();
    ScoreVector::from_ranking(n, &ranking).expect("sampled classes are distinct and in range")
}

/// Draws `k` distinct classes, each draw proportional to the remaining weights.
fn weighted_ranking<R: Rng + ?Sized>(rng: &mut R, weights: &[f64], k: usize) -> Vec<usize> {
    let mut remaining: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = remaining.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = None;
            for (i, w) in remaining.iter().enumerate() {
                if *w > 0.0 {
                    if u < *w {
                        chosen = Some(i);
                        break;
                    }
                    u -= w;
                }
            }
            chosen.unwrap_or_else(|| remaining.iter().rposition(|w| *w > 0.0).unwrap())
        } else {
            let free: Vec<usize> = (0..remaining.len()).filter(|i| !out.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        remaining[pick] = 0.0;
        out.push(pick);
    }
    out
}

/// Synthetic prediction for the window ending at `t`.
///
/// The target is the first segment starting at or after `t + tau_a`; the
/// offset is how much earlier than ideal the window ends. With probability
/// `curve.accuracy(offset)` the target class is ranked first, otherwise the
/// top list is five uniformly random classes. Without a target the result
/// is uniform.
pub fn oracle_lookup(t: Tick, video: &VideoContext<'_>, curve: &DegradationCurve, seed: u64) -> ScoreVector {
    let n = video.num_classes;
    let due = t + video.anticipation;
    let idx = video.segments.partition_point(|s| s.start < due);
    let Some(target) = video.segments.get(idx) else {
        return ScoreVector::uniform(n);
    };
    let offset = target.start - due;
    let mut rng = rng::stream(seed, &[rng::hash_str(video.video_id), t.micros() as u64]);
    let hit = rng.gen::<f64>() < curve.accuracy(offset);
    if hit {
        let mut others: Vec<usize> = sample(&mut rng, n - 1, (STUB_TOP_LIST - 1).min(n - 1))
            .into_iter()
            .map(|c| if c >= target.action_id { c + 1 } else { c })
            .collect();
        others.insert(0, target.action_id);
        ScoreVector::from_ranking(n, &others).expect("distinct in-range classes")
    } else {
        random_guess(&mut rng, n)
    }
}

/// Records produced by one model on one video.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub video_id: String,
    pub config: TimingConfig,
    pub horizon: Tick,
    pub records: Vec<PredictionRecord>,
}

/// Runs `model` back to back over `[0, horizon]` and collects its predictions.
pub fn run_stream(
    model: &StubModel,
    video: &VideoContext<'_>,
    cfg: &TimingConfig,
    horizon: Tick,
) -> Result<SimulationTrace> {
    if horizon.is_negative() {
        return Err(Error::contract(format!("negative horizon {horizon} s")));
    }
    let records = simulate_slots(cfg, horizon)
        .into_iter()
        .map(|(input_end, available_at)| {
            let scores = model.predict(video, input_end)?;
            let record = PredictionRecord::streamed(input_end, cfg, scores);
            debug_assert_eq!(record.available_at, available_at);
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationTrace {
        video_id: video.video_id.to_string(),
        config: *cfg,
        horizon,
        records,
    })
}

/// Outcome of comparing the closed-form quantization with the simulator.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub cases: usize,
    pub exact: usize,
    /// `(start, config)` of the first few disagreements.
    pub mismatches: Vec<(Tick, TimingConfig)>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.exact == self.cases
    }

    fn record(&mut self, start: Tick, cfg: TimingConfig, ok: bool) {
        self.cases += 1;
        if ok {
            self.exact += 1;
        } else if self.mismatches.len() < 10 {
            self.mismatches.push((start, cfg));
        }
    }
}

/// A random integer-tick configuration whose magnitudes span several
/// decades, so both tiny and second-scale timings are exercised.
fn random_config<R: Rng + ?Sized>(rng: &mut R) -> TimingConfig {
    let mut draw = |lo: i64| {
        let scale = 10i64.pow(rng.gen_range(0..=6));
        rng.gen_range(lo..=scale)
    };
    let obs = draw(1);
    let ant = draw(0);
    let run = draw(1);
    TimingConfig::new(Tick::from_micros(obs), Tick::from_micros(ant), Tick::from_micros(run))
        .expect("positive observation and runtime")
}

/// Compares [`crate::schedule::quantize_timestamp`] with the event-driven
/// simulator on `cases` random (start, configuration) draws. Starts fall
/// within a few hundred slots of the first feasible one, including
/// infeasible ones before it.
pub fn check_quantization(cases: usize, seed: u64) -> EquivalenceReport {
    let mut rng = rng::stream(seed, &[0x5c4e]);
    let mut report = EquivalenceReport::default();
    for _ in 0..cases {
        let cfg = random_config(&mut rng);
        let run = cfg.runtime().micros();
        let base = (cfg.anticipation() + cfg.observation()).micros();
        let start = Tick::from_micros(base + rng.gen_range(-3 * run - base..=300 * run));
        let closed = crate::schedule::quantize_timestamp(start, &cfg);
        report.record(start, cfg, closed == simulated_quantization(start, &cfg));
    }
    report
}

/// Starts that sit exactly `k * tau_r` after the first observation point
/// must use the window ending one runtime before the deadline.
pub fn check_exact_multiples(cases: usize, seed: u64) -> EquivalenceReport {
    let mut rng = rng::stream(seed, &[0xe8a7]);
    let mut report = EquivalenceReport::default();
    for _ in 0..cases {
        let cfg = random_config(&mut rng);
        let k = rng.gen_range(1..=200);
        let start = cfg.anticipation() + cfg.observation() + cfg.runtime() * k;
        let expected = Some(start - cfg.anticipation() - cfg.runtime());
        let ok = crate::schedule::quantize_timestamp(start, &cfg) == expected
            && simulated_quantization(start, &cfg) == expected;
        report.record(start, cfg, ok);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::topk_accuracy;
    use crate::schedule::{quantize_timestamp, slot_input_end};
    use crate::vocab::{ActionPair, Vocabulary};
    use rand::SeedableRng;

    fn us(v: i64) -> Tick {
        Tick::from_micros(v)
    }

    fn cfg(obs: i64, ant: i64, run: i64) -> TimingConfig {
        TimingConfig::new(us(obs), us(ant), us(run)).unwrap()
    }

    fn vocab(n: u32) -> Vocabulary {
        Vocabulary::from_pairs((0..n).map(|i| ActionPair { verb: i, noun: 0 }))
    }

    fn segments(voc: &Vocabulary, spec: &[(i64, i64, usize)]) -> Vec<ActionSegment> {
        spec.iter()
            .map(|&(s, e, a)| ActionSegment::new("vid", us(s), us(e), voc.actions()[a], voc).unwrap())
            .collect()
    }

    #[test]
    fn counts_back_to_back_completions() {
        let c = cfg(2_750_000, 1_000_000, 725_000);
        let horizon = c.observation() + c.runtime() * 3;
        let voc = vocab(3);
        let ctx = VideoContext {
            video_id: "vid",
            segments: &[],
            num_classes: 3,
            anticipation: c.anticipation(),
        };
        let trace = run_stream(&StubModel::UniformRandom { seed: 1 }, &ctx, &c, horizon).unwrap();
        assert_eq!(trace.records.len(), 3);
        for (k, rec) in trace.records.iter().enumerate() {
            let k = k as i64 + 1;
            assert_eq!(rec.available_at, c.observation() + c.runtime() * k);
            assert_eq!(rec.input_end, slot_input_end(&c, k));
            assert_eq!(rec.input_end - rec.input_start, c.observation());
        }
        let _ = voc;
    }

    #[test]
    fn short_horizons_have_no_records() {
        let c = cfg(100, 0, 30);
        assert!(simulate_slots(&c, us(129)).is_empty());
        assert_eq!(simulate_slots(&c, us(130)).len(), 1);
        assert!(simulate_slots(&c, us(-5)).is_empty());
    }

    #[test]
    fn trace_gaps_and_exclusivity() {
        let c = cfg(1_070_000, 1_000_000, 96_140);
        let slots = simulate_slots(&c, us(30_000_000));
        for w in slots.windows(2) {
            assert_eq!(w[1].1 - w[0].1, c.runtime());
            // next inference starts (input_end) no earlier than the previous completes
            assert!(w[1].0 >= w[0].1);
        }
    }

    #[test]
    fn simulator_matches_closed_form_both_ways() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let c = cfg(rng.gen_range(1..200), rng.gen_range(0..100), rng.gen_range(1..60));
            let s = us(rng.gen_range(-50..2_000));
            let sim = simulated_quantization(s, &c);
            assert_eq!(sim, quantize_timestamp(s, &c));
            if let Some(t) = quantize_timestamp(s, &c) {
                let slots = simulate_slots(&c, s - c.anticipation());
                assert_eq!(slots.last(), Some(&(t, t + c.runtime())));
            }
        }
    }

    #[test]
    fn degradation_curve_interpolates() {
        let curve = DegradationCurve::new(vec![(us(0), 0.9), (us(1_000), 0.1)]).unwrap();
        assert_eq!(curve.accuracy(us(0)), 0.9);
        assert!((curve.accuracy(us(500)) - 0.5).abs() < 1e-12);
        assert_eq!(curve.accuracy(us(5_000)), 0.1);
        assert!(DegradationCurve::new(vec![(us(0), 1.5)]).is_err());
        assert!(DegradationCurve::new(vec![]).is_err());
    }

    #[test]
    fn perfect_oracle_always_hits() {
        let voc = vocab(20);
        let segs = segments(&voc, &[(1_000, 2_000, 3), (3_000, 4_000, 17), (5_000, 5_500, 0)]);
        let ctx = VideoContext {
            video_id: "vid",
            segments: &segs,
            num_classes: 20,
            anticipation: us(100),
        };
        let model = StubModel::perfect_oracle(3);
        for seg in &segs {
            let v = model.predict(&ctx, seg.start - us(100)).unwrap();
            assert_eq!(v.top_k(1), vec![seg.action_id]);
        }
        // nothing left to anticipate
        let v = model.predict(&ctx, us(6_000)).unwrap();
        assert_eq!(v, ScoreVector::uniform(20));
    }

    #[test]
    fn blind_oracle_is_at_chance() {
        let n = 50usize;
        let voc = vocab(n as u32);
        let trials = 4_000;
        let spec: Vec<(i64, i64, usize)> = (0..trials)
            .map(|i| (i as i64 * 10 + 10, i as i64 * 10 + 15, i % n))
            .collect();
        let segs = segments(&voc, &spec);
        let ctx = VideoContext {
            video_id: "vid",
            segments: &segs,
            num_classes: n,
            anticipation: Tick::ZERO,
        };
        let model = StubModel::Oracle {
            curve: DegradationCurve::constant(0.0).unwrap(),
            seed: 9,
        };
        let preds: Vec<(ScoreVector, usize)> = segs
            .iter()
            .map(|s| (model.predict(&ctx, s.start).unwrap(), s.action_id))
            .collect();
        let acc = topk_accuracy(&preds, 5).unwrap() / 100.0;
        let p = 5.0 / n as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((acc - p).abs() <= 3.0 * sigma, "acc {acc} vs {p} ± {}", 3.0 * sigma);
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let voc = vocab(10);
        let segs = segments(&voc, &[(5_000_000, 6_000_000, 4), (9_000_000, 9_500_000, 2)]);
        let ctx = VideoContext {
            video_id: "vid",
            segments: &segs,
            num_classes: 10,
            anticipation: us(1_000_000),
        };
        let c = cfg(1_000_000, 1_000_000, 100_000);
        let model = StubModel::NoisyOracle { noise: 0.4, seed: 77 };
        let a = run_stream(&model, &ctx, &c, us(10_000_000)).unwrap();
        let b = run_stream(&model, &ctx, &c, us(10_000_000)).unwrap();
        assert_eq!(a, b);
        let other = StubModel::NoisyOracle { noise: 0.4, seed: 78 };
        assert_ne!(a, run_stream(&other, &ctx, &c, us(10_000_000)).unwrap());
    }

    #[test]
    fn baseline_stubs() {
        let voc = vocab(8);
        let ctx = VideoContext {
            video_id: "vid",
            segments: &[],
            num_classes: 8,
            anticipation: Tick::ZERO,
        };
        let freq = vec![1.0, 9.0, 3.0, 0.0, 7.0, 2.0, 5.0, 0.5];
        let constant = StubModel::Constant {
            frequencies: freq.clone(),
        };
        assert_eq!(constant.predict(&ctx, us(0)).unwrap().top_k(5), vec![1, 4, 6, 2, 5]);
        let sampled = StubModel::TrainingDistribution {
            frequencies: freq,
            seed: 2,
        };
        let top = sampled.predict(&ctx, us(10)).unwrap().top_k(5);
        assert!(!top.contains(&3));
        let bad = StubModel::Constant { frequencies: vec![1.0] };
        assert!(bad.predict(&ctx, us(0)).is_err());
        let _ = voc;
    }
}
