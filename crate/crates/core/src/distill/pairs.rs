//! Past/future training pairs sampled along a video.
//!
//! Windows are half-open tick ranges. For a timestamp `t` the future window
//! is `[t, t + obs)` and the past window `[t - ant - obs, t - ant)`. A window
//! is labeled with the action covering the most ticks of it (ties to the
//! lowest action id) provided that action covers at least half of the
//! window; overlapping segments of one action count each tick once. A pair
//! whose past window carries the same label as its future window is
//! unlabeled, as is one whose future window has no such action.

use crate::error::{Error, Result};
use crate::schedule::Window;
use crate::time::{Tick, TimingConfig};
use crate::vocab::ActionSegment;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairExample {
    pub t: Tick,
    pub past: Window,
    pub future: Window,
    pub label: Option<usize>,
}

/// Ticks of `window` covered by segments of each action, keyed by action id.
fn coverage(segments: &[&ActionSegment], window: Window) -> Vec<(usize, i64)> {
    let mut by_action: Vec<(usize, Vec<(i64, i64)>)> = Vec::new();
    for s in segments {
        let (lo, hi) = (s.start.max(window.start), s.end.min(window.end));
        if lo >= hi {
            continue;
        }
        let span = (lo.micros(), hi.micros());
        match by_action.iter_mut().find(|(a, _)| *a == s.action_id) {
            Some((_, spans)) => spans.push(span),
            None => by_action.push((s.action_id, vec![span])),
        }
    }
    by_action
        .into_iter()
        .map(|(action, mut spans)| {
            spans.sort_unstable();
            let (mut covered, mut reach) = (0, i64::MIN);
            for (lo, hi) in spans {
                let lo = lo.max(reach);
                if hi > lo {
                    covered += hi - lo;
                    reach = hi;
                }
            }
            (action, covered)
        })
        .collect()
}

/// The majority action of `window`, if it covers at least half of it.
pub fn window_label(segments: &[&ActionSegment], window: Window) -> Option<usize> {
    let length = (window.end - window.start).micros();
    coverage(segments, window)
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .filter(|&(_, covered)| 2 * covered >= length)
        .map(|(action, _)| action)
}

/// Pairs for every `t = k * stride` (k >= 0) whose past window starts at or
/// after 0 and whose future window ends at or before `video_length`.
pub fn sample_pairs<'a>(
    segments: &'a [ActionSegment],
    video_length: Tick,
    cfg: &TimingConfig,
    stride: Tick,
) -> Result<impl Iterator<Item = PairExample> + 'a> {
    if stride <= Tick::ZERO {
        return Err(Error::contract(format!("stride must be > 0, got {stride}s")));
    }
    let (obs, ant) = (cfg.observation(), cfg.anticipation());
    let lead = ant + obs;
    let first = lead.micros().div_euclid(stride.micros()) + i64::from(lead.micros().rem_euclid(stride.micros()) != 0);
    let last_t = video_length - obs;
    let count = if last_t < lead {
        0
    } else {
        last_t.micros().div_euclid(stride.micros()) - first + 1
    };
    let refs: Vec<&'a ActionSegment> = segments.iter().collect();
    Ok((0..count.max(0)).map(move |i| {
        let t = stride * (first + i);
        let future = Window { start: t, end: t + obs };
        let past = Window {
            start: t - lead,
            end: t - ant,
        };
        let label = window_label(&refs, future).filter(|&y| window_label(&refs, past) != Some(y));
        PairExample { t, past, future, label }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{ActionPair, Vocabulary};

    fn segs(spec: &[(i64, i64, u32)]) -> Vec<ActionSegment> {
        let vocab = Vocabulary::from_pairs((0..4).map(|v| ActionPair { verb: v, noun: 0 }));
        spec.iter()
            .map(|&(s, e, a)| {
                ActionSegment::new(
                    "v",
                    Tick::from_micros(s),
                    Tick::from_micros(e),
                    ActionPair { verb: a, noun: 0 },
                    &vocab,
                )
                .unwrap()
            })
            .collect()
    }

    fn cfg(obs: i64, ant: i64) -> TimingConfig {
        TimingConfig::new(Tick::from_micros(obs), Tick::from_micros(ant), Tick::from_micros(1)).unwrap()
    }

    #[test]
    fn sixty_percent_coverage_is_labeled() {
        let s = segs(&[(20, 26, 2)]);
        let pairs: Vec<_> = sample_pairs(&s, Tick::from_micros(40), &cfg(10, 2), Tick::from_micros(10))
            .unwrap()
            .collect();
        let at_20 = pairs.iter().find(|p| p.t == Tick::from_micros(20)).unwrap();
        assert_eq!(
            at_20.future,
            Window {
                start: Tick::from_micros(20),
                end: Tick::from_micros(30)
            }
        );
        assert_eq!(at_20.label, Some(2));
    }

    #[test]
    fn same_action_in_past_is_unlabeled() {
        let s = segs(&[(0, 100, 1)]);
        let pairs: Vec<_> = sample_pairs(&s, Tick::from_micros(100), &cfg(10, 5), Tick::from_micros(7))
            .unwrap()
            .collect();
        assert!(!pairs.is_empty());
        assert!(pairs.iter().all(|p| p.label.is_none()));
    }

    #[test]
    fn grid_respects_bounds() {
        let pairs: Vec<_> = sample_pairs(&[], Tick::from_micros(50), &cfg(10, 5), Tick::from_micros(4))
            .unwrap()
            .collect();
        let ts: Vec<i64> = pairs.iter().map(|p| p.t.micros()).collect();
        assert_eq!(ts, vec![16, 20, 24, 28, 32, 36, 40]);
        assert!(
            sample_pairs(&[], Tick::from_micros(10), &cfg(10, 5), Tick::from_micros(4))
                .unwrap()
                .next()
                .is_none()
        );
        assert!(sample_pairs(&[], Tick::from_micros(10), &cfg(10, 5), Tick::ZERO).is_err());
    }

    #[test]
    fn overlapping_segments_of_one_action_count_once() {
        let s = segs(&[(0, 4, 1), (2, 4, 1), (4, 8, 3)]);
        let all: Vec<&ActionSegment> = s.iter().collect();
        let w = Window {
            start: Tick::ZERO,
            end: Tick::from_micros(10),
        };
        assert_eq!(window_label(&all, w), None);
        let ties = segs(&[(0, 5, 3), (5, 10, 1)]);
        let all: Vec<&ActionSegment> = ties.iter().collect();
        assert_eq!(window_label(&all, w), Some(1));
    }
}
