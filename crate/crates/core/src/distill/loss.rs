//! Losses between a student map `r_p` (past window) and a teacher map
//! `r_f` (future window). Gradients flow into the student side only.

use super::feature::FeatureMap;
use crate::error::{Error, Result};

/// Floor on the mean similarity before taking its reciprocal.
pub const SIMILARITY_FLOOR: f64 = 1e-4;

/// A loss value with its gradient with respect to the student map,
/// laid out like [`FeatureMap::data`].
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_d: f64,
    pub lambda_c: f64,
}

impl LossWeights {
    pub fn new(lambda_d: f64, lambda_c: f64) -> Result<Self> {
        if !(lambda_d >= 0.0 && lambda_c >= 0.0) || !lambda_d.is_finite() || !lambda_c.is_finite() {
            return Err(Error::contract(format!(
                "loss weights must be finite and >= 0, got lambda_d={lambda_d} lambda_c={lambda_c}"
            )));
        }
        Ok(Self { lambda_d, lambda_c })
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_d: 20.0,
            lambda_c: 1.0,
        }
    }
}

/// Feature-matching objective used between student and teacher maps.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum FeatureLoss {
    /// Reciprocal of the mean cosine over all location pairs.
    Similarity,
    /// Elementwise squared error on aligned locations.
    Mse,
    /// Squared error between location-averaged vectors.
    GapMse,
}

impl FeatureLoss {
    pub fn evaluate(self, r_p: &FeatureMap, r_f: &FeatureMap) -> Result<LossGrad> {
        match self {
            FeatureLoss::Similarity => distill_loss(r_p, r_f),
            FeatureLoss::Mse => mse_loss(r_p, r_f),
            FeatureLoss::GapMse => gap_mse_loss(r_p, r_f),
        }
    }
}

/// Sum that does not depend on the order of `values`.
fn unordered_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

fn check_compatible(r_p: &FeatureMap, r_f: &FeatureMap) -> Result<()> {
    if r_p.channels() != r_f.channels() || r_p.locations() != r_f.locations() {
        return Err(Error::contract(format!(
            "feature maps differ: {} channels x {} locations vs {} x {}",
            r_p.channels(),
            r_p.locations(),
            r_f.channels(),
            r_f.locations()
        )));
    }
    Ok(())
}

fn check_same_shape(r_p: &FeatureMap, r_f: &FeatureMap) -> Result<()> {
    if r_p.shape() != r_f.shape() {
        return Err(Error::contract(format!(
            "feature map shapes differ: {:?} vs {:?}",
            r_p.shape(),
            r_f.shape()
        )));
    }
    Ok(())
}

/// Unit vectors per location, with zero-norm locations left at zero.
fn normalized(map: &FeatureMap) -> (Vec<Vec<f64>>, Vec<f64>) {
    (0..map.locations())
        .map(|l| {
            let v = map.location(l);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                (v.iter().map(|x| x / norm).collect(), norm)
            } else {
                (vec![0.0; v.len()], 0.0)
            }
        })
        .unzip()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `M[i][j]` is the cosine between student location `i` and teacher
/// location `j`; zero-norm vectors score 0 against everything.
pub fn similarity_matrix(r_p: &FeatureMap, r_f: &FeatureMap) -> Result<Vec<Vec<f64>>> {
    check_compatible(r_p, r_f)?;
    let (p, _) = normalized(r_p);
    let (f, _) = normalized(r_f);
    Ok(p.iter()
        .map(|pi| f.iter().map(|fj| dot(pi, fj).clamp(-1.0, 1.0)).collect())
        .collect())
}

/// Mean of the similarity matrix, computed in `O(L C)` as
/// `(1/L^2) sum_i p_i . S` with `S` the sum of unit teacher vectors.
pub fn mean_similarity(r_p: &FeatureMap, r_f: &FeatureMap) -> Result<f64> {
    check_compatible(r_p, r_f)?;
    let (p, _) = normalized(r_p);
    Ok(mean_from_parts(&p, &teacher_sum(r_f)))
}

fn teacher_sum(r_f: &FeatureMap) -> Vec<f64> {
    let (f, _) = normalized(r_f);
    (0..r_f.channels())
        .map(|c| unordered_sum(f.iter().map(|v| v[c]).collect()))
        .collect()
}

fn mean_from_parts(p: &[Vec<f64>], s: &[f64]) -> f64 {
    let l = p.len() as f64;
    unordered_sum(p.iter().map(|pi| dot(pi, s)).collect()) / (l * l)
}

/// Reciprocal mean similarity `1 / max(m, SIMILARITY_FLOOR)`.
///
/// Below the floor the loss is constant and the gradient is zero.
pub fn distill_loss(r_p: &FeatureMap, r_f: &FeatureMap) -> Result<LossGrad> {
    check_compatible(r_p, r_f)?;
    let (p, norms) = normalized(r_p);
    let s = teacher_sum(r_f);
    let m = mean_from_parts(&p, &s);
    let locs = r_p.locations();
    let mut grad = vec![0.0; r_p.data().len()];
    if m <= SIMILARITY_FLOOR {
        return Ok(LossGrad {
            value: 1.0 / SIMILARITY_FLOOR,
            grad,
        });
    }
    let scale = -1.0 / (m * m) / (locs * locs) as f64;
    for (i, (pi, &norm)) in p.iter().zip(&norms).enumerate() {
        if norm == 0.0 {
            continue;
        }
        let proj = dot(pi, &s);
        for c in 0..r_p.channels() {
            grad[c * locs + i] = scale * (s[c] - proj * pi[c]) / norm;
        }
    }
    Ok(LossGrad { value: 1.0 / m, grad })
}

pub fn mse_loss(r_p: &FeatureMap, r_f: &FeatureMap) -> Result<LossGrad> {
    check_same_shape(r_p, r_f)?;
    let n = r_p.data().len() as f64;
    let diff: Vec<f64> = r_p.data().iter().zip(r_f.data()).map(|(a, b)| a - b).collect();
    Ok(LossGrad {
        value: diff.iter().map(|d| d * d).sum::<f64>() / n,
        grad: diff.iter().map(|d| 2.0 * d / n).collect(),
    })
}

fn pooled(map: &FeatureMap) -> Vec<f64> {
    let l = map.locations();
    map.data()
        .chunks(l)
        .map(|row| unordered_sum(row.to_vec()) / l as f64)
        .collect()
}

pub fn gap_mse_loss(r_p: &FeatureMap, r_f: &FeatureMap) -> Result<LossGrad> {
    check_compatible(r_p, r_f)?;
    let (gp, gf) = (pooled(r_p), pooled(r_f));
    let c = gp.len() as f64;
    let l = r_p.locations();
    let diff: Vec<f64> = gp.iter().zip(&gf).map(|(a, b)| a - b).collect();
    let mut grad = Vec::with_capacity(r_p.data().len());
    for d in &diff {
        grad.extend(std::iter::repeat_n(2.0 * d / (c * l as f64), l));
    }
    Ok(LossGrad {
        value: diff.iter().map(|d| d * d).sum::<f64>() / c,
        grad,
    })
}

/// Cross-entropy of `softmax(logits)` against `label`, with the gradient
/// with respect to the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::contract(format!(
            "label {label} outside {} classes",
            logits.len()
        )));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::contract("logits must be finite"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    let value = total.ln() + max - logits[label];
    let mut grad: Vec<f64> = exp.iter().map(|e| e / total).collect();
    grad[label] -= 1.0;
    Ok((value, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombinedGrad {
    pub value: f64,
    pub distill: f64,
    pub classification: Option<f64>,
    /// Gradient with respect to the student map.
    pub features: Vec<f64>,
    /// Gradient with respect to the student logits (all zero when unlabeled).
    pub logits: Vec<f64>,
}

/// `lambda_d * L_d + [label present] * lambda_c * CE`, with gradients.
pub fn combined_loss_grad(
    r_p: &FeatureMap,
    r_f: &FeatureMap,
    logits: &[f64],
    label: Option<usize>,
    weights: LossWeights,
) -> Result<CombinedGrad> {
    let d = distill_loss(r_p, r_f)?;
    let mut value = weights.lambda_d * d.value;
    let features = d.grad.iter().map(|g| weights.lambda_d * g).collect();
    let mut logit_grad = vec![0.0; logits.len()];
    let mut classification = None;
    if let Some(y) = label {
        let (ce, g) = cross_entropy(logits, y)?;
        value += weights.lambda_c * ce;
        for (out, g) in logit_grad.iter_mut().zip(g) {
            *out = weights.lambda_c * g;
        }
        classification = Some(ce);
    }
    Ok(CombinedGrad {
        value,
        distill: d.value,
        classification,
        features,
        logits: logit_grad,
    })
}

pub fn combined_loss(
    r_p: &FeatureMap,
    r_f: &FeatureMap,
    logits: &[f64],
    label: Option<usize>,
    weights: LossWeights,
) -> Result<f64> {
    combined_loss_grad(r_p, r_f, logits, label, weights).map(|c| c.value)
}
