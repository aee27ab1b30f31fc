//! Runtime-aware evaluation of action anticipation models.
//!
//! A model that needs `tau_r` per prediction cannot look at the video right
//! up to the moment it is asked about; under streaming evaluation each
//! labeled action is scored with the most recent prediction that could have
//! finished in time. This crate provides the schedule arithmetic, a
//! discrete-event simulator that checks it, top-k metrics, the file formats
//! of the harness, and a future-to-past feature distillation loss with a toy
//! training setup.

pub mod distill;
pub mod error;
pub mod io;
pub mod metrics;
pub mod prediction;
pub mod rng;
pub mod schedule;
pub mod simulate;
pub mod time;
pub mod vocab;

pub use error::{Error, Result};
pub use prediction::{marginalize_scores, PredictionRecord, ScoreKind, ScoreVector};
pub use schedule::{associate, offline_window, quantize_timestamp, slot_times, EvaluationMode, Window};
pub use time::{Tick, TimingConfig};
pub use vocab::{build_vocabulary, ActionPair, ActionSegment, RawLabel, Vocabulary};
