//! Score vectors, prediction records and verb/noun marginalization.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{Tick, TimingConfig};
use crate::vocab::Vocabulary;

/// Tolerance on the total mass of a probability vector.
pub const PROBABILITY_TOLERANCE: f64 = 1e-6;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreKind {
    Probability,
    /// Unnormalized scores. `-inf` is allowed and means "never ranked above a finite score".
    Logit,
}

/// Dense per-class scores over one label space (actions, verbs or nouns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    scores: Vec<f64>,
    kind: ScoreKind,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>, kind: ScoreKind) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::contract("score vector is empty"));
        }
        match kind {
            ScoreKind::Probability => {
                if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
                    return Err(Error::contract(format!("invalid probability {bad}")));
                }
                let total: f64 = scores.iter().sum();
                if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
                    return Err(Error::contract(format!("probabilities sum to {total}, expected 1")));
                }
            }
            ScoreKind::Logit => {
                if let Some(bad) = scores.iter().find(|s| s.is_nan() || **s == f64::INFINITY) {
                    return Err(Error::contract(format!("invalid logit {bad}")));
                }
                if scores.iter().all(|s| *s == f64::NEG_INFINITY) {
                    return Err(Error::contract("all logits are -inf"));
                }
            }
        }
        Ok(Self { scores, kind })
    }

    pub fn probabilities(scores: Vec<f64>) -> Result<Self> {
        Self::new(scores, ScoreKind::Probability)
    }

    pub fn logits(scores: Vec<f64>) -> Result<Self> {
        Self::new(scores, ScoreKind::Logit)
    }

    /// Probability kind if the entries already form a distribution, logits otherwise.
    pub fn infer_kind(scores: Vec<f64>) -> Result<Self> {
        let looks_like_probs = scores.iter().all(|s| s.is_finite() && *s >= 0.0)
            && (scores.iter().sum::<f64>() - 1.0).abs() <= PROBABILITY_TOLERANCE;
        if looks_like_probs {
            Self::probabilities(scores)
        } else {
            Self::logits(scores)
        }
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform score vector needs at least one class");
        Self {
            scores: vec![1.0 / len as f64; len],
            kind: ScoreKind::Probability,
        }
    }

    /// A probability vector whose top classes, in order, are `ranking`.
    ///
    /// Half of the mass is spread uniformly; the other half goes to the ranked
    /// classes with linearly decreasing weights, so the order is strict.
    pub fn from_ranking(len: usize, ranking: &[usize]) -> Result<Self> {
        if len == 0 {
            return Err(Error::contract("score vector is empty"));
        }
        let mut scores = vec![0.5 / len as f64; len];
        let r = ranking.len();
        if r == 0 {
            return Ok(Self::uniform(len));
        }
        let norm = (r * (r + 1) / 2) as f64;
        for (pos, &class) in ranking.iter().enumerate() {
            let slot = scores
                .get_mut(class)
                .ok_or_else(|| Error::contract(format!("class {class} out of range {len}")))?;
            if *slot != 0.5 / len as f64 {
                return Err(Error::contract(format!("class {class} ranked twice")));
            }
            *slot += 0.5 * (r - pos) as f64 / norm;
        }
        Ok(Self {
            scores,
            kind: ScoreKind::Probability,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.scores
    }

    /// Softmax for logits; identity for probabilities.
    pub fn to_probabilities(&self) -> ScoreVector {
        match self.kind {
            ScoreKind::Probability => self.clone(),
            ScoreKind::Logit => ScoreVector {
                scores: softmax(&self.scores),
                kind: ScoreKind::Probability,
            },
        }
    }

    /// Indices of the `k` highest scores, best first, ties to the lowest index.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        top_k(&self.scores, k)
    }
}

impl AsRef<[f64]> for ScoreVector {
    fn as_ref(&self) -> &[f64] {
        &self.scores
    }
}

/// Ranking order: higher score first, then lower class index.
pub(crate) fn rank_order(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b]
        .partial_cmp(&scores[a])
        .unwrap_or(Ordering::Equal)
        .then(a.cmp(&b))
}

pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let k = k.min(idx.len());
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| rank_order(scores, a, b));
        idx.truncate(k);
    }
    idx.sort_unstable_by(|&a, &b| rank_order(scores, a, b));
    idx
}

/// Whether `class` is among the `k` best entries under the documented tie-break.
pub fn in_top_k(scores: &[f64], class: usize, k: usize) -> bool {
    let target = scores[class];
    let ahead = scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| s > target || (s == target && j < class))
        .count();
    ahead < k
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Verb and noun distributions obtained by summing action probabilities over
/// the other factor.
pub fn marginalize_scores(scores: &ScoreVector, vocab: &Vocabulary) -> Result<(ScoreVector, ScoreVector)> {
    if scores.kind() != ScoreKind::Probability {
        return Err(Error::contract(
            "marginalization needs probabilities; normalize logits first",
        ));
    }
    if scores.len() != vocab.len() {
        return Err(Error::contract(format!(
            "score vector has {} entries, vocabulary has {} actions",
            scores.len(),
            vocab.len()
        )));
    }
    let mut verbs = vec![0.0; vocab.verbs().len()];
    let mut nouns = vec![0.0; vocab.nouns().len()];
    for (action, p) in scores.as_slice().iter().enumerate() {
        let (v, n) = vocab
            .factor_positions(action)
            .expect("vocabulary factors cover every action");
        verbs[v] += p;
        nouns[n] += p;
    }
    Ok((
        ScoreVector {
            scores: verbs,
            kind: ScoreKind::Probability,
        },
        ScoreVector {
            scores: nouns,
            kind: ScoreKind::Probability,
        },
    ))
}

/// A prediction as produced under streaming constraints: the input window it
/// was computed from, when it became available, and its scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub input_start: Tick,
    pub input_end: Tick,
    pub available_at: Tick,
    pub scores: ScoreVector,
    pub is_fallback: bool,
}

impl PredictionRecord {
    /// A model prediction on the window ending at `input_end`.
    pub fn streamed(input_end: Tick, cfg: &TimingConfig, scores: ScoreVector) -> Self {
        Self {
            input_start: input_end - cfg.observation(),
            input_end,
            available_at: input_end + cfg.runtime(),
            scores,
            is_fallback: false,
        }
    }

    /// A random guess standing in for a prediction that cannot exist by `deadline`.
    pub fn fallback(deadline: Tick, scores: ScoreVector) -> Self {
        Self {
            input_start: deadline,
            input_end: deadline,
            available_at: deadline,
            scores,
            is_fallback: true,
        }
    }
}
