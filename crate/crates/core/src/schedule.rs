//! Closed-form streaming schedule.
//!
//! A model that needs `tau_o` of video and `tau_r` per inference, and runs
//! inferences back to back on a single device, finishes its k-th prediction
//! at `tau_o + k * tau_r` (k >= 1). That prediction was computed on the
//! window ending at `tau_o + (k - 1) * tau_r`. An action starting at `s` is
//! scored with the most recent prediction available at the deadline
//! `s - tau_a`, whose input window ends at
//!
//! ```text
//! t* = floor((s - tau_a - tau_o) / tau_r) * tau_r + tau_o - tau_r
//! ```
//!
//! When the floor is below 1 no prediction exists by the deadline and the
//! segment is scored with a random guess.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::PredictionRecord;
use crate::time::{Tick, TimingConfig};
use crate::vocab::ActionSegment;

/// Closed interval `[start, end]` of observed video.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: Tick,
    pub end: Tick,
}

impl Window {
    pub fn ending_at(end: Tick, length: Tick) -> Self {
        Self {
            start: end - length,
            end,
        }
    }

    /// Whether the window lies after the start of the video.
    pub fn is_feasible(&self) -> bool {
        !self.start.is_negative()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvaluationMode {
    Offline,
    Streaming,
}

impl EvaluationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvaluationMode::Offline => "offline",
            EvaluationMode::Streaming => "streaming",
        }
    }
}

/// The window a zero-runtime model would observe: `[s - tau_a - tau_o, s - tau_a]`.
pub fn offline_window(start: Tick, cfg: &TimingConfig) -> Window {
    Window::ending_at(start - cfg.anticipation(), cfg.observation())
}

/// The instant by which a prediction for an action starting at `start` must exist.
pub fn deadline(start: Tick, cfg: &TimingConfig) -> Tick {
    start - cfg.anticipation()
}

/// Times at which predictions become available, up to and including `horizon`.
pub fn slot_times(cfg: &TimingConfig, horizon: Tick) -> Vec<Tick> {
    let first = cfg.observation() + cfg.runtime();
    if horizon < first {
        return Vec::new();
    }
    let count = (horizon - cfg.observation()).div_floor(cfg.runtime());
    (1..=count).map(|k| cfg.observation() + cfg.runtime() * k).collect()
}

/// End of the input window of the k-th prediction (k >= 1).
pub fn slot_input_end(cfg: &TimingConfig, k: i64) -> Tick {
    cfg.observation() + cfg.runtime() * (k - 1)
}

/// End of the input window of the most recent prediction available at
/// `start - tau_a`, or `None` when no prediction can exist yet.
pub fn quantize_timestamp(start: Tick, cfg: &TimingConfig) -> Option<Tick> {
    let slots = (start - cfg.anticipation() - cfg.observation()).div_floor(cfg.runtime());
    if slots >= 1 {
        Some(cfg.runtime() * slots + cfg.observation() - cfg.runtime())
    } else {
        None
    }
}

/// One segment to score under a timing configuration and evaluation mode.
#[derive(Copy, Clone, Debug)]
pub struct EvaluationQuery<'a> {
    pub segment: &'a ActionSegment,
    pub config: TimingConfig,
    pub mode: EvaluationMode,
}

impl EvaluationQuery<'_> {
    /// The window the model observes for this segment. Streaming queries
    /// return `None` when the segment falls back to a random guess; offline
    /// windows are always returned, feasible or not.
    pub fn window(&self) -> Option<Window> {
        match self.mode {
            EvaluationMode::Offline => Some(offline_window(self.segment.start, &self.config)),
            EvaluationMode::Streaming => quantize_timestamp(self.segment.start, &self.config)
                .map(|end| Window::ending_at(end, self.config.observation())),
        }
    }
}

/// Pairs each segment with the latest record available at its deadline
/// (inclusive), or `None` when there is none.
///
/// `segments` must be sorted by start and `records` strictly increasing in
/// `available_at`; both normally come from the same video.
pub fn associate<'a>(
    segments: &'a [ActionSegment],
    records: &'a [PredictionRecord],
    cfg: &TimingConfig,
) -> Result<Vec<(&'a ActionSegment, Option<&'a PredictionRecord>)>> {
    if let Some(w) = segments.windows(2).find(|w| w[1].start < w[0].start) {
        return Err(Error::contract(format!(
            "segments not sorted by start: {} after {}",
            w[1].label(),
            w[0].label()
        )));
    }
    if let Some(w) = records.windows(2).find(|w| w[1].available_at <= w[0].available_at) {
        return Err(Error::contract(format!(
            "records not strictly sorted by availability: {} s after {} s",
            w[1].available_at, w[0].available_at
        )));
    }
    Ok(segments
        .iter()
        .map(|seg| {
            let due = deadline(seg.start, cfg);
            let n = records.partition_point(|r| r.available_at <= due);
            (seg, n.checked_sub(1).map(|i| &records[i]))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::ScoreVector;
    use crate::vocab::{ActionPair, Vocabulary};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn secs(s: f64) -> Tick {
        Tick::from_secs(s).unwrap()
    }

    fn cfg(obs: f64, ant: f64, run: f64) -> TimingConfig {
        TimingConfig::new(secs(obs), secs(ant), secs(run)).unwrap()
    }

    fn us_cfg(obs: i64, ant: i64, run: i64) -> TimingConfig {
        TimingConfig::new(Tick::from_micros(obs), Tick::from_micros(ant), Tick::from_micros(run)).unwrap()
    }

    #[test]
    fn offline_window_substitution() {
        let c = cfg(2.75, 1.0, 0.1);
        let w = offline_window(secs(10.0), &c);
        assert_eq!((w.start, w.end), (secs(6.25), secs(9.0)));
        assert!(w.is_feasible());

        let zero = cfg(2.75, 0.0, 0.1);
        let w = offline_window(secs(10.0), &zero);
        assert_eq!((w.start, w.end), (secs(7.25), secs(10.0)));

        let w = offline_window(secs(1.0), &c);
        assert_eq!((w.start, w.end), (secs(-2.75), secs(0.0)));
        assert!(!w.is_feasible());
    }

    #[test]
    fn slot_times_progression() {
        let c = cfg(2.75, 1.0, 0.725);
        let slots = slot_times(&c, secs(9.0));
        let expected: Vec<Tick> = [3.475, 4.2, 4.925, 5.65, 6.375, 7.1, 7.825, 8.55]
            .iter()
            .map(|s| secs(*s))
            .collect();
        assert_eq!(slots, expected);
        assert!(slot_times(&c, secs(3.474999)).is_empty());
        assert_eq!(slot_times(&c, secs(3.475)), vec![secs(3.475)]);
    }

    #[test]
    fn runtime_equal_to_horizon_gives_at_most_one_slot() {
        let c = cfg(0.5, 0.0, 2.0);
        assert!(slot_times(&c, secs(2.0)).is_empty());
        let c = cfg(0.5, 0.0, 2.5);
        assert!(slot_times(&c, secs(2.5)).len() <= 1);
    }

    #[test]
    fn quantize_reference_timeline() {
        let c = cfg(2.75, 1.0, 0.725);
        let t = quantize_timestamp(secs(10.0), &c).unwrap();
        assert_eq!(t, secs(7.825));
        assert_eq!(t + c.runtime(), secs(8.55));
        assert!(t + c.runtime() * 2 > secs(9.0));
    }

    #[test]
    fn quantize_exact_multiple() {
        let c = cfg(2.0, 1.0, 0.5);
        assert_eq!(quantize_timestamp(secs(5.0), &c), Some(secs(3.5)));
    }

    #[test]
    fn quantize_early_video_is_infeasible() {
        let c = cfg(2.75, 1.0, 0.5);
        assert_eq!(quantize_timestamp(secs(2.0), &c), None);
        // k = 0 would name a window ending before the first full buffer.
        let c = us_cfg(10, 0, 4);
        assert_eq!(quantize_timestamp(Tick::from_micros(13), &c), None);
        assert_eq!(
            quantize_timestamp(Tick::from_micros(14), &c),
            Some(Tick::from_micros(10))
        );
    }

    #[test]
    fn query_windows_by_mode() {
        let voc = Vocabulary::from_pairs([ActionPair { verb: 0, noun: 0 }]);
        let seg = ActionSegment::new("v", secs(10.0), secs(12.0), ActionPair { verb: 0, noun: 0 }, &voc).unwrap();
        let c = cfg(2.75, 1.0, 0.725);
        let offline = EvaluationQuery {
            segment: &seg,
            config: c,
            mode: EvaluationMode::Offline,
        };
        assert_eq!(offline.window().unwrap().end, secs(9.0));
        let streaming = EvaluationQuery {
            segment: &seg,
            config: c,
            mode: EvaluationMode::Streaming,
        };
        let w = streaming.window().unwrap();
        assert_eq!((w.start, w.end), (secs(5.075), secs(7.825)));
    }

    fn one_class_segment(start: Tick) -> ActionSegment {
        let voc = Vocabulary::from_pairs([ActionPair { verb: 0, noun: 0 }]);
        ActionSegment::new(
            "v",
            start,
            start + Tick::from_micros(1),
            ActionPair { verb: 0, noun: 0 },
            &voc,
        )
        .unwrap()
    }

    fn grid_records(cfg: &TimingConfig, horizon: Tick) -> Vec<PredictionRecord> {
        slot_times(cfg, horizon)
            .into_iter()
            .map(|at| PredictionRecord::streamed(at - cfg.runtime(), cfg, ScoreVector::uniform(1)))
            .collect()
    }

    #[test]
    fn deadline_is_inclusive() {
        let c = us_cfg(100, 10, 25);
        let seg = one_class_segment(Tick::from_micros(135));
        let rec = PredictionRecord::streamed(Tick::from_micros(100), &c, ScoreVector::uniform(1));
        assert_eq!(rec.available_at, Tick::from_micros(125));
        let out = associate(std::slice::from_ref(&seg), std::slice::from_ref(&rec), &c).unwrap();
        assert!(out[0].1.is_some());

        let late = one_class_segment(Tick::from_micros(134));
        let out = associate(std::slice::from_ref(&late), std::slice::from_ref(&rec), &c).unwrap();
        assert!(out[0].1.is_none());
    }

    #[test]
    fn unsorted_inputs_are_rejected() {
        let c = us_cfg(100, 10, 25);
        let segs = vec![
            one_class_segment(Tick::from_micros(500)),
            one_class_segment(Tick::from_micros(400)),
        ];
        assert!(matches!(associate(&segs, &[], &c), Err(Error::Contract(_))));
        let mut recs = grid_records(&c, Tick::from_micros(300));
        recs.swap(0, 1);
        assert!(matches!(associate(&segs[..1], &recs, &c), Err(Error::Contract(_))));
    }

    #[test]
    fn association_agrees_with_quantization() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let c = us_cfg(
                rng.gen_range(1..3_000_000),
                rng.gen_range(0..2_000_000),
                rng.gen_range(1_000..1_000_000),
            );
            let horizon = Tick::from_micros(60_000_000);
            let records = grid_records(&c, horizon);
            let mut segs: Vec<ActionSegment> = (0..50)
                .map(|_| one_class_segment(Tick::from_micros(rng.gen_range(0..horizon.micros()))))
                .collect();
            segs.sort_by_key(|s| s.start);
            for (seg, rec) in associate(&segs, &records, &c).unwrap() {
                assert_eq!(rec.map(|r| r.input_end), quantize_timestamp(seg.start, &c));
            }
        }
    }

    proptest! {
        #[test]
        fn quantized_slot_is_the_latest_before_deadline(
            s in -1_000i64..20_000,
            obs in 1i64..3_000,
            ant in 0i64..2_000,
            run in 1i64..1_500,
        ) {
            let c = us_cfg(obs, ant, run);
            let start = Tick::from_micros(s);
            let due = start - c.anticipation();
            match quantize_timestamp(start, &c) {
                Some(t) => {
                    let slots = slot_times(&c, due);
                    prop_assert_eq!(slots.last().copied(), Some(t + c.runtime()));
                    prop_assert!(start - (t + c.runtime()) >= c.anticipation());
                    prop_assert!(t - c.observation() >= Tick::ZERO);
                }
                None => prop_assert!(slot_times(&c, due).is_empty()),
            }
        }

        #[test]
        fn quantization_is_monotone(
            s in 0i64..20_000,
            ds in 0i64..500,
            obs in 1i64..3_000,
            ant in 0i64..2_000,
            d in 0i64..500,
            run in 1i64..1_500,
        ) {
            let key = |t: Option<Tick>| t.map_or(i64::MIN, |t| t.micros());
            let base = key(quantize_timestamp(Tick::from_micros(s), &us_cfg(obs, ant, run)));
            prop_assert!(key(quantize_timestamp(Tick::from_micros(s + ds), &us_cfg(obs, ant, run))) >= base);
            prop_assert!(key(quantize_timestamp(Tick::from_micros(s), &us_cfg(obs, ant + d, run))) <= base);
        }

        #[test]
        fn exact_multiples_land_one_runtime_before_deadline(
            k in 1i64..200,
            obs in 1i64..3_000,
            ant in 0i64..2_000,
            run in 1i64..1_500,
        ) {
            let c = us_cfg(obs, ant, run);
            let s = Tick::from_micros(ant + obs + k * run);
            prop_assert_eq!(quantize_timestamp(s, &c), Some(s - c.anticipation() - c.runtime()));
        }
    }
}
