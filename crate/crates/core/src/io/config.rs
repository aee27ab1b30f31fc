//! Harness configuration file (TOML): flat keys grouped in sections.
//!
//! ```toml
//! [global]
//! seed = 7
//! ticks_per_second = 1000000
//! k = 5
//!
//! [simulate]
//! tail_s = 5.0
//!
//! [distill]
//! seeds = 10
//! learning_rate = 0.05
//! ```
//!
//! Every key is optional; command-line flags take precedence.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    pub global: GlobalSection,
    pub simulate: SimulateSection,
    pub distill: DistillSection,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalSection {
    pub seed: Option<u64>,
    pub ticks_per_second: Option<i64>,
    pub k: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Extra simulated time after the last annotated segment, in seconds.
    pub tail_s: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillSection {
    pub seeds: Option<u64>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub lambda_d: Option<f64>,
    pub lambda_c: Option<f64>,
    pub labeled: Option<usize>,
    pub unlabeled: Option<usize>,
}

impl HarnessConfig {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format(format!("{source_name}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }
}
