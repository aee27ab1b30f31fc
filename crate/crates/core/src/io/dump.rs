//! Prediction dumps from external models.
//!
//! One record per line:
//!
//! ```text
//! video_id<TAB>input_end_us<TAB>class:score[,class:score...]
//! video_id<TAB>input_end_us<TAB>dense:s0,s1,...
//! ```
//!
//! Sparse payloads are logits in which every unlisted class scores `-inf`,
//! so unlisted classes tie below all listed ones and top-k fills up with the
//! lowest unlisted indices. Dense payloads that already sum to one are
//! treated as probabilities, anything else as logits.
//!
//! By default a dump must hold a row for every window end that is queried.
//! A first line of `#sparse` relaxes this: a query uses the row with the
//! largest `input_end` at or before the requested one. Other lines starting
//! with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::prediction::{ScoreKind, ScoreVector};
use crate::time::Tick;

pub const SPARSE_MARKER: &str = "#sparse";

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Sparse(Vec<(usize, f64)>),
    Dense(Vec<f64>),
}

impl Payload {
    pub fn to_scores(&self, num_classes: usize) -> Result<ScoreVector> {
        match self {
            Payload::Dense(v) => {
                if v.len() != num_classes {
                    return Err(Error::format(format!(
                        "dense payload has {} scores for {num_classes} classes",
                        v.len()
                    )));
                }
                ScoreVector::infer_kind(v.clone())
            }
            Payload::Sparse(entries) => {
                let mut v = vec![f64::NEG_INFINITY; num_classes];
                for &(class, score) in entries {
                    let slot = v
                        .get_mut(class)
                        .ok_or_else(|| Error::format(format!("class {class} outside {num_classes} classes")))?;
                    *slot = score;
                }
                ScoreVector::new(v, ScoreKind::Logit)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DumpRow {
    pub input_end: Tick,
    pub payload: Payload,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionDump {
    videos: BTreeMap<String, Vec<DumpRow>>,
    sparse: bool,
}

impl PredictionDump {
    pub fn new(videos: BTreeMap<String, Vec<DumpRow>>, sparse: bool) -> Result<Self> {
        if videos.values().all(|rows| rows.is_empty()) {
            return Err(Error::format("prediction dump is empty"));
        }
        for (video, rows) in &videos {
            if let Some(w) = rows.windows(2).find(|w| w[1].input_end <= w[0].input_end) {
                return Err(Error::format(format!(
                    "rows of {video} not sorted by input_end: {} after {}",
                    w[1].input_end.micros(),
                    w[0].input_end.micros()
                )));
            }
        }
        Ok(Self { videos, sparse })
    }

    pub fn is_sparse(&self) -> bool {
        self.sparse
    }

    pub fn videos(&self) -> &BTreeMap<String, Vec<DumpRow>> {
        &self.videos
    }

    /// The row used for a window ending at `input_end`.
    pub fn row_at(&self, video_id: &str, input_end: Tick) -> Option<&DumpRow> {
        let rows = self.videos.get(video_id)?;
        let n = rows.partition_point(|r| r.input_end <= input_end);
        let row = rows.get(n.checked_sub(1)?)?;
        (self.sparse || row.input_end == input_end).then_some(row)
    }

    pub fn replay(&self, video_id: &str, input_end: Tick, num_classes: usize) -> Result<ScoreVector> {
        self.row_at(video_id, input_end)
            .ok_or_else(|| Error::Coverage(vec![format!("{video_id}@{input_end}s")]))?
            .payload
            .to_scores(num_classes)
    }

    /// Checks every payload against the class count.
    pub fn validate_classes(&self, num_classes: usize) -> Result<()> {
        for (video, rows) in &self.videos {
            for r in rows {
                r.payload
                    .to_scores(num_classes)
                    .map_err(|e| Error::format(format!("{video}@{}: {e}", r.input_end.micros())))?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(File::open(path)?, &path.display().to_string())
    }

    pub fn read<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let mut videos: BTreeMap<String, Vec<DumpRow>> = BTreeMap::new();
        let mut sparse = false;
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line_no = i as u64 + 1;
            let line = line?;
            let err = |message: String| Error::Parse {
                source_name: source_name.to_string(),
                line: line_no,
                message,
            };
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() {
                continue;
            }
            if trimmed.starts_with('#') {
                if line_no == 1 && trimmed.trim() == SPARSE_MARKER {
                    sparse = true;
                }
                continue;
            }
            let mut fields = trimmed.split('\t');
            let (Some(video), Some(end), Some(payload), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(err("expected three tab-separated fields".into()));
            };
            if video.is_empty() {
                return Err(err("empty video_id".into()));
            }
            let input_end = end
                .trim()
                .parse::<i64>()
                .map(Tick::from_micros)
                .map_err(|_| err(format!("bad input_end_us `{end}`")))?;
            let payload = parse_payload(payload.trim()).map_err(err)?;
            let rows = videos.entry(video.to_string()).or_default();
            if let Some(last) = rows.last() {
                if input_end <= last.input_end {
                    return Err(err(format!(
                        "rows of {video} not sorted by input_end ({} after {})",
                        input_end.micros(),
                        last.input_end.micros()
                    )));
                }
            }
            rows.push(DumpRow { input_end, payload });
        }
        if videos.is_empty() {
            return Err(Error::format(format!("{source_name}: prediction dump is empty")));
        }
        Self::new(videos, sparse)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        if self.sparse {
            writeln!(writer, "{SPARSE_MARKER}")?;
        }
        for (video, rows) in &self.videos {
            for r in rows {
                let mut line = format!("{video}\t{}\t", r.input_end.micros());
                match &r.payload {
                    Payload::Dense(v) => {
                        line.push_str("dense:");
                        push_joined(&mut line, v.iter().map(|s| format!("{s}")));
                    }
                    Payload::Sparse(entries) => {
                        push_joined(&mut line, entries.iter().map(|(c, s)| format!("{c}:{s}")));
                    }
                }
                writeln!(writer, "{line}")?;
            }
        }
        Ok(())
    }
}

fn push_joined(out: &mut String, items: impl Iterator<Item = String>) {
    for (i, item) in items.enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{item}");
    }
}

fn parse_score(raw: &str) -> std::result::Result<f64, String> {
    let v: f64 = raw.trim().parse().map_err(|_| format!("bad score `{raw}`"))?;
    if v.is_nan() || v == f64::INFINITY {
        return Err(format!("bad score `{raw}`"));
    }
    Ok(v)
}

fn parse_payload(raw: &str) -> std::result::Result<Payload, String> {
    if let Some(dense) = raw.strip_prefix("dense:") {
        let scores = dense
            .split(',')
            .map(parse_score)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        return Ok(Payload::Dense(scores));
    }
    let mut entries = Vec::new();
    for item in raw.split(',') {
        let (class, score) = item
            .split_once(':')
            .ok_or_else(|| format!("expected class:score, got `{item}`"))?;
        let class: usize = class.trim().parse().map_err(|_| format!("bad class index `{class}`"))?;
        if entries.iter().any(|(c, _)| *c == class) {
            return Err(format!("class {class} listed twice"));
        }
        entries.push((class, parse_score(score)?));
    }
    Ok(Payload::Sparse(entries))
}
