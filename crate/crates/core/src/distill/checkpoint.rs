//! Parameter checkpoints and training curves.
//!
//! A checkpoint file is the 4-byte magic `SAKP`, a little-endian `u32`
//! format version, a little-endian `u64` value count, then that many
//! little-endian `f32` values.

use std::io::{Read, Write};

use super::toy::EpochStats;
use crate::error::{Error, Result};
use crate::io::annotations::csv_err;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SAKP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Elementwise mean of equally long parameter vectors.
pub fn average_checkpoints(checkpoints: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = checkpoints
        .first()
        .ok_or_else(|| Error::contract("no checkpoints to average"))?;
    if let Some(bad) = checkpoints.iter().find(|c| c.len() != first.len()) {
        return Err(Error::contract(format!(
            "checkpoint lengths differ: {} vs {}",
            first.len(),
            bad.len()
        )));
    }
    let n = checkpoints.len() as f64;
    Ok((0..first.len())
        .map(|i| checkpoints.iter().map(|c| c[i]).sum::<f64>() / n)
        .collect())
}

pub fn write_checkpoint<W: Write>(mut writer: W, params: &[f64]) -> Result<()> {
    writer.write_all(&CHECKPOINT_MAGIC)?;
    writer.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    writer.write_all(&(params.len() as u64).to_le_bytes())?;
    for &p in params {
        writer.write_all(&(p as f32).to_le_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut reader: R) -> Result<Vec<f64>> {
    let mut header = [0u8; 16];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::format("checkpoint header truncated"))?;
    if header[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format("not a checkpoint file (bad magic)"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(format!("unsupported checkpoint version {version}")));
    }
    let len = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    if body.len() as u64 != len * 4 {
        return Err(Error::format(format!(
            "checkpoint declares {len} values but holds {} bytes",
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().expect("4 bytes"))))
        .collect())
}

/// One CSV row per epoch, tagged with the run's seed and mode.
pub fn write_curves<'a, W: Write>(
    writer: W,
    runs: impl IntoIterator<Item = (u64, &'a str, &'a [EpochStats])>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "seed",
        "mode",
        "epoch",
        "steps",
        "mean_loss",
        "mean_classification",
        "mean_distill",
    ])
    .map_err(csv_err)?;
    for (seed, mode, curve) in runs {
        for e in curve {
            w.write_record([
                seed.to_string(),
                mode.to_string(),
                e.epoch.to_string(),
                e.steps.to_string(),
                e.mean_loss.to_string(),
                e.mean_classification.to_string(),
                e.mean_distill.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
