//! Runtime profiles: `method,runtime_ms,observation_time_s,anticipation_time_s`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::annotations::csv_err;
use crate::error::{Error, Result};
use crate::metrics::fps;
use crate::time::{Tick, TimingConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeProfile {
    pub method: String,
    pub runtime_ms: f64,
    pub observation_time_s: f64,
    pub anticipation_time_s: f64,
}

impl RuntimeProfile {
    pub fn timing(&self, ticks_per_second: i64) -> Result<TimingConfig> {
        TimingConfig::new(
            Tick::from_secs_at(self.observation_time_s, ticks_per_second)?,
            Tick::from_secs_at(self.anticipation_time_s, ticks_per_second)?,
            Tick::from_secs_at(self.runtime_ms / 1000.0, ticks_per_second)?,
        )
    }

    pub fn fps(&self) -> Result<f64> {
        fps(self.runtime_ms)
    }

    fn validate(&self) -> Result<()> {
        if self.method.is_empty() {
            return Err(Error::format("empty method name"));
        }
        if !(self.runtime_ms > 0.0 && self.runtime_ms.is_finite()) {
            return Err(Error::format(format!(
                "runtime_ms must be positive, got {}",
                self.runtime_ms
            )));
        }
        if !(self.observation_time_s > 0.0 && self.observation_time_s.is_finite()) {
            return Err(Error::format(format!(
                "observation_time_s must be positive, got {}",
                self.observation_time_s
            )));
        }
        if !(self.anticipation_time_s >= 0.0 && self.anticipation_time_s.is_finite()) {
            return Err(Error::format(format!(
                "anticipation_time_s must be nonnegative, got {}",
                self.anticipation_time_s
            )));
        }
        Ok(())
    }
}

pub fn load_profiles(path: &Path) -> Result<Vec<RuntimeProfile>> {
    read_profiles(File::open(path)?, &path.display().to_string())
}

pub fn read_profiles<R: Read>(reader: R, source_name: &str) -> Result<Vec<RuntimeProfile>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in csv.deserialize::<RuntimeProfile>() {
        let profile = row.map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        profile.validate().map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: out.len() as u64 + 2,
            message: e.to_string(),
        })?;
        out.push(profile);
    }
    if out.is_empty() {
        return Err(Error::format(format!("{source_name}: no runtime profiles")));
    }
    Ok(out)
}

pub fn write_profiles<W: Write>(writer: W, profiles: &[RuntimeProfile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in profiles {
        w.serialize(p).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
