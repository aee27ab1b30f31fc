//! File formats and reports.

pub mod annotations;
pub mod config;
pub mod dump;
pub mod profile;
pub mod report;
pub mod trace;

pub use annotations::{load_annotations, read_annotations, write_annotations, AnnotationSet, RejectedRow};
pub use config::HarnessConfig;
pub use dump::{DumpRow, Payload, PredictionDump};
pub use profile::{load_profiles, read_profiles, write_profiles, RuntimeProfile};
pub use report::{MethodReport, TOOL_VERSION};
pub use trace::{read_trace, write_trace, TraceRow};
