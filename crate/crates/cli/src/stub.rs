//! Stub model specifications given on the command line.
//!
//! ```text
//! oracle                       perfect oracle
//! noisy:0.3                    oracle that misses 30% of the time
//! degrading:0:0.9,1.5:0.2      oracle whose hit rate falls with the offset (seconds:accuracy)
//! constant | training          frequency baselines (need training annotations)
//! random                       uniformly random rankings
//! ```

use anyhow::{bail, Context, Result};
use streamant_core::simulate::{DegradationCurve, StubModel};
use streamant_core::Tick;

#[derive(Clone, Debug, PartialEq)]
pub enum StubSpec {
    Oracle,
    Noisy(f64),
    Degrading(Vec<(f64, f64)>),
    Constant,
    Training,
    Random,
}

impl StubSpec {
    pub fn parse(raw: &str) -> Result<Self> {
        let (name, arg) = match raw.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (raw, None),
        };
        let spec = match (name, arg) {
            ("oracle", None) => StubSpec::Oracle,
            ("constant", None) => StubSpec::Constant,
            ("training", None) => StubSpec::Training,
            ("random", None) => StubSpec::Random,
            ("noisy", Some(a)) => {
                let noise: f64 = a.parse().with_context(|| format!("bad noise level `{a}`"))?;
                if !(0.0..=1.0).contains(&noise) {
                    bail!("noise level must be in [0, 1], got {noise}");
                }
                StubSpec::Noisy(noise)
            }
            ("degrading", Some(a)) => {
                let knots = a
                    .split(',')
                    .map(|knot| {
                        let (off, acc) = knot
                            .split_once(':')
                            .with_context(|| format!("expected offset_s:accuracy, got `{knot}`"))?;
                        Ok((
                            off.trim().parse().with_context(|| format!("bad offset `{off}`"))?,
                            acc.trim().parse().with_context(|| format!("bad accuracy `{acc}`"))?,
                        ))
                    })
                    .collect::<Result<Vec<(f64, f64)>>>()?;
                StubSpec::Degrading(knots)
            }
            _ => bail!(
                "unknown stub `{raw}` (expected oracle, noisy:X, degrading:OFF:ACC,..., constant, training or random)"
            ),
        };
        Ok(spec)
    }

    pub fn needs_training_set(&self) -> bool {
        matches!(self, StubSpec::Constant | StubSpec::Training)
    }

    /// Builds the model. `frequencies` are training class counts over the
    /// evaluation vocabulary.
    pub fn build(&self, seed: u64, ticks_per_second: i64, frequencies: Option<Vec<f64>>) -> Result<StubModel> {
        let need = || {
            frequencies
                .clone()
                .context("constant and training stubs need --train annotations")
        };
        Ok(match self {
            StubSpec::Oracle => StubModel::perfect_oracle(seed),
            StubSpec::Noisy(noise) => StubModel::NoisyOracle { noise: *noise, seed },
            StubSpec::Degrading(knots) => {
                let knots = knots
                    .iter()
                    .map(|&(off, acc)| Ok((Tick::from_secs_at(off, ticks_per_second)?, acc)))
                    .collect::<Result<Vec<_>>>()?;
                StubModel::Oracle {
                    curve: DegradationCurve::new(knots)?,
                    seed,
                }
            }
            StubSpec::Constant => StubModel::Constant { frequencies: need()? },
            StubSpec::Training => StubModel::TrainingDistribution {
                frequencies: need()?,
                seed,
            },
            StubSpec::Random => StubModel::UniformRandom { seed },
        })
    }
}
