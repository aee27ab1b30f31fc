//! Trace files: `input_start_us,input_end_us,available_at_us,is_fallback`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::annotations::csv_err;
use crate::error::{Error, Result};
use crate::prediction::PredictionRecord;
use crate::time::Tick;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub input_start_us: i64,
    pub input_end_us: i64,
    pub available_at_us: i64,
    /// `0` or `1`.
    pub is_fallback: u8,
}

impl From<&PredictionRecord> for TraceRow {
    fn from(r: &PredictionRecord) -> Self {
        Self {
            input_start_us: r.input_start.micros(),
            input_end_us: r.input_end.micros(),
            available_at_us: r.available_at.micros(),
            is_fallback: u8::from(r.is_fallback),
        }
    }
}

impl TraceRow {
    pub fn available_at(&self) -> Tick {
        Tick::from_micros(self.available_at_us)
    }
}

pub fn write_trace<'a, W: Write>(writer: W, records: impl IntoIterator<Item = &'a PredictionRecord>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut wrote_any = false;
    for r in records {
        w.serialize(TraceRow::from(r)).map_err(csv_err)?;
        wrote_any = true;
    }
    if !wrote_any {
        w.write_record(["input_start_us", "input_end_us", "available_at_us", "is_fallback"])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize::<TraceRow>() {
        let row = row.map_err(csv_err)?;
        if row.is_fallback > 1 {
            return Err(Error::format(format!(
                "is_fallback must be 0 or 1, got {}",
                row.is_fallback
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}
