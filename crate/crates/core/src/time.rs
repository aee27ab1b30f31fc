//! Integer time.
//!
//! Every timestamp, duration and runtime is a count of microseconds. Keeping
//! time integral makes the slot arithmetic in [`crate::schedule`] exact: the
//! floor of a quotient of ticks is an integer division, never a float that
//! lands on either side of a slot boundary depending on rounding.
//!
//! Conversion from seconds rounds half up on the `f64` product
//! `seconds * 1e6`, i.e. `floor(seconds * 1e6 + 0.5)`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MICROS_PER_SECOND: i64 = 1_000_000;

/// Largest magnitude accepted when converting from floating point (about 290 years).
const MAX_ABS_MICROS: f64 = 9.0e15;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tick(i64);

impl Tick {
    pub const ZERO: Tick = Tick(0);

    pub const fn from_micros(us: i64) -> Self {
        Tick(us)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    /// Seconds to ticks, rounding half up.
    pub fn from_secs(seconds: f64) -> Result<Self> {
        Self::from_scaled(seconds, MICROS_PER_SECOND as f64, "seconds")
    }

    /// Milliseconds to ticks, rounding half up.
    pub fn from_millis(millis: f64) -> Result<Self> {
        Self::from_scaled(millis, 1_000.0, "milliseconds")
    }

    /// Seconds to ticks on a coarser grid of `ticks_per_second` steps.
    ///
    /// The value is first rounded half up to the nearest `1 / ticks_per_second`
    /// seconds and then expressed in microseconds, so `ticks_per_second` must
    /// divide one million.
    pub fn from_secs_at(seconds: f64, ticks_per_second: i64) -> Result<Self> {
        check_resolution(ticks_per_second)?;
        let step = MICROS_PER_SECOND / ticks_per_second;
        let coarse = Self::from_scaled(seconds, ticks_per_second as f64, "seconds")?;
        coarse
            .0
            .checked_mul(step)
            .map(Tick)
            .ok_or_else(|| Error::Domain(format!("{seconds} s overflows the tick range")))
    }

    fn from_scaled(value: f64, scale: f64, unit: &str) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Domain(format!("non-finite {unit}: {value}")));
        }
        let scaled = value * scale;
        if scaled.abs() > MAX_ABS_MICROS {
            return Err(Error::Domain(format!("{value} {unit} overflows the tick range")));
        }
        Ok(Tick((scaled + 0.5).floor() as i64))
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SECOND as f64
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    /// Floor division by a positive duration (rounds toward negative infinity).
    pub fn div_floor(self, divisor: Tick) -> i64 {
        debug_assert!(divisor.0 > 0);
        self.0.div_euclid(divisor.0)
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn max(self, other: Tick) -> Tick {
        Tick(self.0.max(other.0))
    }

    pub fn min(self, other: Tick) -> Tick {
        Tick(self.0.min(other.0))
    }
}

pub fn check_resolution(ticks_per_second: i64) -> Result<()> {
    if !(1..=MICROS_PER_SECOND).contains(&ticks_per_second) || MICROS_PER_SECOND % ticks_per_second != 0 {
        return Err(Error::Domain(format!(
            "ticks per second must divide {MICROS_PER_SECOND}, got {ticks_per_second}"
        )));
    }
    Ok(())
}

impl Add for Tick {
    type Output = Tick;
    fn add(self, rhs: Tick) -> Tick {
        Tick(self.0 + rhs.0)
    }
}

impl AddAssign for Tick {
    fn add_assign(&mut self, rhs: Tick) {
        self.0 += rhs.0;
    }
}

impl Sub for Tick {
    type Output = Tick;
    fn sub(self, rhs: Tick) -> Tick {
        Tick(self.0 - rhs.0)
    }
}

impl Mul<i64> for Tick {
    type Output = Tick;
    fn mul(self, rhs: i64) -> Tick {
        Tick(self.0 * rhs)
    }
}

impl Neg for Tick {
    type Output = Tick;
    fn neg(self) -> Tick {
        Tick(-self.0)
    }
}

/// Exact decimal seconds, e.g. `7.825000`.
impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let per = MICROS_PER_SECOND as u64;
        write!(f, "{sign}{}.{:06}", abs / per, abs % per)
    }
}

/// The timing triple that governs scheduling: observation time, anticipation
/// time and model runtime.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimingConfig {
    observation: Tick,
    anticipation: Tick,
    runtime: Tick,
}

impl TimingConfig {
    pub fn new(observation: Tick, anticipation: Tick, runtime: Tick) -> Result<Self> {
        if observation <= Tick::ZERO {
            return Err(Error::contract(format!(
                "observation time must be positive, got {observation} s"
            )));
        }
        if anticipation < Tick::ZERO {
            return Err(Error::contract(format!(
                "anticipation time must be nonnegative, got {anticipation} s"
            )));
        }
        if runtime <= Tick::ZERO {
            return Err(Error::contract(format!("runtime must be positive, got {runtime} s")));
        }
        Ok(Self {
            observation,
            anticipation,
            runtime,
        })
    }

    /// Convenience constructor in the units used by runtime profiles.
    pub fn from_units(observation_s: f64, anticipation_s: f64, runtime_ms: f64) -> Result<Self> {
        Self::new(
            Tick::from_secs(observation_s)?,
            Tick::from_secs(anticipation_s)?,
            Tick::from_millis(runtime_ms)?,
        )
    }

    pub fn observation(&self) -> Tick {
        self.observation
    }

    pub fn anticipation(&self) -> Tick {
        self.anticipation
    }

    pub fn runtime(&self) -> Tick {
        self.runtime
    }

    pub fn with_runtime(&self, runtime: Tick) -> Result<Self> {
        Self::new(self.observation, self.anticipation, runtime)
    }
}

impl fmt::Display for TimingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tau_o={}s tau_a={}s tau_r={}s",
            self.observation, self.anticipation, self.runtime
        )
    }
}
