//! Central finite-difference checks for analytic gradients.

use rand::Rng;
use rand_distr::StandardNormal;

use super::feature::FeatureMap;
use super::loss::{self, LossWeights};
use super::toy::ToyEncoder;
use crate::error::Result;
use crate::rng::stream;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Magnitude, per unit of loss, below which gradient entries are compared
/// absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;
const KINK_MARGIN: f64 = 1e-3;

/// `|a - n| / max(|a|, |n|, floor)` where the floor is [`RELATIVE_FLOOR`]
/// times the loss magnitude (at least 1).
pub fn relative_error(analytic: f64, numeric: f64, loss: f64) -> f64 {
    let floor = RELATIVE_FLOOR * loss.abs().max(1.0);
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central differences of `f` at `x`.
pub fn numeric_gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + STEP;
        let up = f(&probe)?;
        probe[i] = orig - STEP;
        let down = f(&probe)?;
        probe[i] = orig;
        out.push((up - down) / (2.0 * STEP));
    }
    Ok(out)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64], loss: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| relative_error(*a, *n, loss))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub max_relative_error: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_relative_error < TOLERANCE
    }
}

fn random_map(rng: &mut impl Rng, channels: usize, locations: usize, offset: f64) -> FeatureMap {
    let data = (0..channels * locations)
        .map(|_| rng.sample::<f64, _>(StandardNormal) + offset)
        .collect();
    FeatureMap::new(channels, locations, 1, 1, data).expect("finite random map")
}

fn feature_check(
    name: &'static str,
    cases: usize,
    seed: u64,
    tag: u64,
    eval: impl Fn(&FeatureMap, &FeatureMap) -> Result<loss::LossGrad>,
) -> Result<CheckOutcome> {
    let mut rng = stream(seed, &[tag]);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let (c, l) = (rng.gen_range(2..=6), rng.gen_range(2..=10));
        // Half the cases sit on a shared positive offset so the mean
        // similarity is well above the floor.
        let offset = if case % 2 == 0 { 1.0 } else { 0.0 };
        let p = random_map(&mut rng, c, l, offset);
        let f = random_map(&mut rng, c, l, offset);
        let g = eval(&p, &f)?;
        let numeric = numeric_gradient(p.data(), |x| Ok(eval(&p.with_data(x.to_vec())?, &f)?.value))?;
        worst = worst.max(max_relative_error(&g.grad, &numeric, g.value));
    }
    Ok(CheckOutcome {
        name,
        cases,
        max_relative_error: worst,
    })
}

fn combined_check(cases: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = stream(seed, &[4]);
    let w = LossWeights::default();
    let mut worst = 0.0f64;
    for case in 0..cases {
        let (c, l, k) = (rng.gen_range(2..=6), rng.gen_range(2..=10), rng.gen_range(2..=8));
        // Redraw pairs whose mean similarity is near the floor.
        let (p, f) = loop {
            let p = random_map(&mut rng, c, l, 1.0);
            let f = random_map(&mut rng, c, l, 1.0);
            if loss::mean_similarity(&p, &f)? > 10.0 * loss::SIMILARITY_FLOOR {
                break (p, f);
            }
        };
        let logits: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let label = (case % 3 != 0).then(|| rng.gen_range(0..k));
        let g = loss::combined_loss_grad(&p, &f, &logits, label, w)?;
        let numeric_p = numeric_gradient(p.data(), |x| {
            loss::combined_loss(&p.with_data(x.to_vec())?, &f, &logits, label, w)
        })?;
        let numeric_z = numeric_gradient(&logits, |z| loss::combined_loss(&p, &f, z, label, w))?;
        worst = worst
            .max(max_relative_error(&g.features, &numeric_p, g.value))
            .max(max_relative_error(&g.logits, &numeric_z, g.value));
    }
    Ok(CheckOutcome {
        name: "combined",
        cases,
        max_relative_error: worst,
    })
}

fn encoder_check(cases: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = stream(seed, &[5]);
    let w = LossWeights::new(1.0, 1.0)?;
    let mut worst = 0.0f64;
    for case in 0..cases {
        let (input, hidden, channels, classes, locs) = (3, 5, 4, 3, rng.gen_range(2..=5));
        // Redraw inputs that sit near a ReLU kink or below the similarity floor.
        let (enc, x, target) = loop {
            let enc = ToyEncoder::random(input, hidden, channels, classes, &mut rng);
            let x: Vec<Vec<f64>> = (0..locs)
                .map(|_| (0..input).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let target = random_map(&mut rng, channels, locs, 1.0);
            let features = enc.forward(&x).features()?;
            if enc.kink_margin(&x) > KINK_MARGIN
                && loss::mean_similarity(&features, &target)? > 10.0 * loss::SIMILARITY_FLOOR
            {
                break (enc, x, target);
            }
        };
        let label = (case % 2 == 0).then(|| rng.gen_range(0..classes));
        let objective = |e: &ToyEncoder| -> Result<(f64, Vec<f64>)> {
            let fwd = e.forward(&x);
            let cg = loss::combined_loss_grad(&fwd.features()?, &target, &fwd.logits, label, w)?;
            Ok((cg.value, e.backward(&fwd, &cg.features, &cg.logits)))
        };
        let (value, analytic) = objective(&enc)?;
        let numeric = numeric_gradient(
            enc.params(),
            |theta| Ok(objective(&enc.with_params(theta.to_vec())?)?.0),
        )?;
        worst = worst.max(max_relative_error(&analytic, &numeric, value));
    }
    Ok(CheckOutcome {
        name: "toy-encoder",
        cases,
        max_relative_error: worst,
    })
}

/// Runs every gradient check on `cases` random inputs each.
pub fn run_all(cases: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        feature_check("similarity", cases, seed, 1, loss::distill_loss)?,
        feature_check("mse", cases, seed, 2, loss::mse_loss)?,
        feature_check("gap-mse", cases, seed, 3, loss::gap_mse_loss)?,
        combined_check(cases, seed)?,
        encoder_check(cases, seed)?,
    ])
}
