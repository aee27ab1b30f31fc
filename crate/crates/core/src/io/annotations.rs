//! Annotation CSV: `video_id,start_s,stop_s,verb_id,noun_id[,action_id]`.
//!
//! Rows whose start is not before their stop are skipped and reported; any
//! other malformed row aborts the load with its line number. When an
//! `action_id` column is present it is only checked for consistency with the
//! (verb, noun) pairs: the dense action index is always derived.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::time::Tick;
use crate::vocab::{build_vocabulary, ActionPair, ActionSegment, RawLabel, Vocabulary};

const REQUIRED: [&str; 5] = ["video_id", "start_s", "stop_s", "verb_id", "noun_id"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct AnnotationSet {
    /// Sorted by video id, then start.
    pub segments: Vec<ActionSegment>,
    pub vocabulary: Vocabulary,
    pub rejected: Vec<RejectedRow>,
}

impl AnnotationSet {
    /// The same segments indexed against `vocabulary`, which must contain
    /// every verb/noun pair of this set.
    pub fn reindexed(&self, vocabulary: &Vocabulary) -> Result<AnnotationSet> {
        let segments = self
            .segments
            .iter()
            .map(|s| ActionSegment::new(s.video_id.clone(), s.start, s.end, s.pair(), vocabulary))
            .collect::<Result<Vec<_>>>()?;
        Ok(AnnotationSet {
            segments,
            vocabulary: vocabulary.clone(),
            rejected: self.rejected.clone(),
        })
    }
}

struct Row {
    line: u64,
    video_id: String,
    start: Tick,
    stop: Tick,
    label: RawLabel,
    action_id: Option<i64>,
}

pub fn load_annotations(path: &Path, ticks_per_second: i64) -> Result<AnnotationSet> {
    let file = File::open(path)?;
    read_annotations(file, &path.display().to_string(), ticks_per_second)
}

pub fn read_annotations<R: Read>(reader: R, source_name: &str, ticks_per_second: i64) -> Result<AnnotationSet> {
    let parse_err = |line: u64, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(REQUIRED) {
        *slot = column(name).ok_or_else(|| parse_err(1, format!("missing column `{name}`")))?;
    }
    let action_col = column("action_id");

    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let seconds = |i: usize, what: &str| -> Result<Tick> {
            let raw = field(i);
            let value: f64 = raw
                .parse()
                .map_err(|_| parse_err(line, format!("bad {what} `{raw}`")))?;
            Tick::from_secs_at(value, ticks_per_second).map_err(|e| parse_err(line, e.to_string()))
        };
        let id = |i: usize, what: &str| -> Result<Option<i64>> {
            let raw = field(i);
            if raw.is_empty() {
                return Ok(None);
            }
            raw.parse()
                .map(Some)
                .map_err(|_| parse_err(line, format!("bad {what} `{raw}`")))
        };
        let video_id = field(cols[0]).to_string();
        if video_id.is_empty() {
            return Err(parse_err(line, "empty video_id".into()));
        }
        let row = Row {
            line,
            video_id,
            start: seconds(cols[1], "start_s")?,
            stop: seconds(cols[2], "stop_s")?,
            label: RawLabel {
                verb_id: id(cols[3], "verb_id")?,
                noun_id: id(cols[4], "noun_id")?,
            },
            action_id: match action_col {
                Some(c) => id(c, "action_id")?,
                None => None,
            },
        };
        row.label.validate().map_err(|e| parse_err(line, e.to_string()))?;
        if row.start >= row.stop {
            rejected.push(RejectedRow {
                line,
                reason: format!("start {} s is not before stop {} s", row.start, row.stop),
            });
            continue;
        }
        rows.push(row);
    }

    check_action_ids(&rows, source_name)?;
    let vocabulary = build_vocabulary(rows.iter().map(|r| &r.label))?;
    let mut segments = rows
        .iter()
        .map(|r| {
            let pair = r.label.validate()?;
            ActionSegment::new(r.video_id.clone(), r.start, r.stop, pair, &vocabulary)
        })
        .collect::<Result<Vec<_>>>()?;
    segments.sort_by(|a, b| a.video_id.cmp(&b.video_id).then(a.start.cmp(&b.start)));
    Ok(AnnotationSet {
        segments,
        vocabulary,
        rejected,
    })
}

fn check_action_ids(rows: &[Row], source_name: &str) -> Result<()> {
    let mut by_id: BTreeMap<i64, (ActionPair, u64)> = BTreeMap::new();
    let mut by_pair: BTreeMap<ActionPair, (i64, u64)> = BTreeMap::new();
    for r in rows {
        let Some(aid) = r.action_id else { continue };
        let pair = r.label.validate()?;
        let clash = |other_line: u64, what: String| Error::Parse {
            source_name: source_name.to_string(),
            line: r.line,
            message: format!("{what} (see line {other_line})"),
        };
        if let Some((p, l)) = by_id.insert(aid, (pair, r.line)) {
            if p != pair {
                return Err(clash(l, format!("action_id {aid} names two verb/noun pairs")));
            }
        }
        if let Some((a, l)) = by_pair.insert(pair, (aid, r.line)) {
            if a != aid {
                return Err(clash(l, format!("verb/noun pair has action ids {a} and {aid}")));
            }
        }
    }
    Ok(())
}

/// Writes segments back in the annotation format with exact microsecond seconds.
pub fn write_annotations<W: Write>(writer: W, segments: &[ActionSegment]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REQUIRED).map_err(csv_err)?;
    for s in segments {
        w.write_record([
            s.video_id.clone(),
            s.start.to_string(),
            s.end.to_string(),
            s.verb_id.to_string(),
            s.noun_id.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TPS: i64 = crate::time::MICROS_PER_SECOND;

    #[test]
    fn reads_well_formed_rows() {
        let text = "video_id,start_s,stop_s,verb_id,noun_id\n\
                    P01_01,1.5,2.25,3,10\n\
                    P01_01,0.000001,0.5,3,11\n\
                    P02_03,10,12.125,0,10\n";
        let set = read_annotations(text.as_bytes(), "mem", TPS).unwrap();
        assert_eq!(set.segments.len(), 3);
        assert!(set.rejected.is_empty());
        assert_eq!(set.vocabulary.len(), 3);
        let first = &set.segments[0];
        assert_eq!(
            (first.video_id.as_str(), first.start.micros(), first.end.micros()),
            ("P01_01", 1, 500_000)
        );
        assert_eq!(set.segments[1].start.micros(), 1_500_000);
        assert_eq!(set.segments[2].end.micros(), 12_125_000);
    }

    #[test]
    fn reversed_rows_are_rejected_and_counted() {
        let text = "video_id,start_s,stop_s,verb_id,noun_id\n\
                    v,1,2,0,0\n\
                    v,5,4,0,1\n\
                    v,6,7,1,1\n";
        let set = read_annotations(text.as_bytes(), "mem", TPS).unwrap();
        assert_eq!(set.segments.len(), 2);
        assert_eq!(set.rejected.len(), 1);
        assert_eq!(set.rejected[0].line, 3);
        // the rejected row contributes nothing to the vocabulary
        assert_eq!(set.vocabulary.len(), 2);
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let text = "video_id,start_s,stop_s,verb_id,noun_id\nv,1,2,0,0\nv,abc,2,0,0\n";
        match read_annotations(text.as_bytes(), "mem", TPS) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let neg = "video_id,start_s,stop_s,verb_id,noun_id\nv,1,2,-1,0\n";
        assert!(matches!(
            read_annotations(neg.as_bytes(), "mem", TPS),
            Err(Error::Parse { line: 2, .. })
        ));
        let missing = "video_id,start_s,stop_s,verb_id,noun_id\nv,1,2,,0\n";
        assert!(matches!(
            read_annotations(missing.as_bytes(), "mem", TPS),
            Err(Error::Parse { line: 2, .. })
        ));
        let no_col = "video_id,start_s,stop_s,verb_id\nv,1,2,0\n";
        assert!(matches!(
            read_annotations(no_col.as_bytes(), "mem", TPS),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn action_id_column_must_be_consistent() {
        let ok = "video_id,start_s,stop_s,verb_id,noun_id,action_id\nv,1,2,0,0,7\nv,3,4,0,0,7\nv,5,6,1,0,2\n";
        let set = read_annotations(ok.as_bytes(), "mem", TPS).unwrap();
        assert_eq!(
            set.segments.iter().map(|s| s.action_id).collect::<Vec<_>>(),
            vec![0, 0, 1]
        );
        let bad = "video_id,start_s,stop_s,verb_id,noun_id,action_id\nv,1,2,0,0,7\nv,3,4,1,0,7\n";
        assert!(matches!(
            read_annotations(bad.as_bytes(), "mem", TPS),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn coarse_tick_resolution() {
        let text = "video_id,start_s,stop_s,verb_id,noun_id\nv,1.2345,2.0004,0,0\n";
        let set = read_annotations(text.as_bytes(), "mem", 1_000).unwrap();
        assert_eq!(set.segments[0].start.micros(), 1_235_000);
        assert_eq!(set.segments[0].end.micros(), 2_000_000);
    }

    #[test]
    fn write_then_read_is_tick_exact() {
        let text = "video_id,start_s,stop_s,verb_id,noun_id\n\
                    a,0.123457,9.876543,1,2\n\
                    a,100.000001,100.5,2,2\n\
                    b,3599.999999,3600,0,9\n";
        let set = read_annotations(text.as_bytes(), "mem", TPS).unwrap();
        let mut buf = Vec::new();
        write_annotations(&mut buf, &set.segments).unwrap();
        let again = read_annotations(buf.as_slice(), "mem", TPS).unwrap();
        assert_eq!(again.segments, set.segments);
        assert_eq!(again.vocabulary, set.vocabulary);
    }
}
