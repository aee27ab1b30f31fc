//! Evaluation reports.
//!
//! CSV keeps full precision and one row per (method, mode); the aligned
//! text table rounds to two decimals and lays out OFFLINE and STREAMING
//! blocks side by side. Both embed the timing triple, seed, tool version
//! and fallback count of every run.

use std::fmt::Write as _;
use std::io::Write;

use super::annotations::csv_err;
use super::profile::RuntimeProfile;
use crate::error::Result;
use crate::metrics::{EvaluationResult, TaskScores};
use crate::time::TimingConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug)]
pub struct MethodReport {
    pub profile: RuntimeProfile,
    pub timing: TimingConfig,
    pub offline: Option<EvaluationResult>,
    pub streaming: Option<EvaluationResult>,
}

impl MethodReport {
    fn runs(&self) -> impl Iterator<Item = &EvaluationResult> {
        self.offline.iter().chain(self.streaming.iter())
    }
}

const CSV_HEADER: [&str; 20] = [
    "method",
    "mode",
    "runtime_ms",
    "fps",
    "tau_o_us",
    "tau_a_us",
    "tau_r_us",
    "k",
    "seed",
    "version",
    "segments",
    "fallbacks",
    "effective_anticipation_s",
    "verb_topk_accuracy",
    "noun_topk_accuracy",
    "action_topk_accuracy",
    "verb_mean_topk_recall",
    "noun_mean_topk_recall",
    "action_mean_topk_recall",
    "macro_average",
];

pub fn write_results_csv<W: Write>(writer: W, reports: &[MethodReport], seed: u64) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for rep in reports {
        let fps = rep.profile.fps()?;
        for run in rep.runs() {
            w.write_record([
                rep.profile.method.clone(),
                run.mode.as_str().to_string(),
                rep.profile.runtime_ms.to_string(),
                fps.to_string(),
                rep.timing.observation().micros().to_string(),
                rep.timing.anticipation().micros().to_string(),
                rep.timing.runtime().micros().to_string(),
                run.k.to_string(),
                seed.to_string(),
                TOOL_VERSION.to_string(),
                run.segments.to_string(),
                run.fallbacks.to_string(),
                run.effective_anticipation_s.map_or_else(String::new, |v| v.to_string()),
                run.verb.topk_accuracy.to_string(),
                run.noun.topk_accuracy.to_string(),
                run.action.topk_accuracy.to_string(),
                run.verb.mean_topk_recall.to_string(),
                run.noun.mean_topk_recall.to_string(),
                run.action.mean_topk_recall.to_string(),
                "present-classes".to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cells(r: Option<&EvaluationResult>) -> String {
    let fmt = |t: &TaskScores, acc: bool| {
        let v = if acc { t.topk_accuracy } else { t.mean_topk_recall };
        format!("{v:>6.2}")
    };
    match r {
        None => format!("{:>6} {:>6} {:>6} | {:>6} {:>6} {:>6}", "-", "-", "-", "-", "-", "-"),
        Some(r) => format!(
            "{} {} {} | {} {} {}",
            fmt(&r.verb, true),
            fmt(&r.noun, true),
            fmt(&r.action, true),
            fmt(&r.verb, false),
            fmt(&r.noun, false),
            fmt(&r.action, false)
        ),
    }
}

pub fn format_results_table(reports: &[MethodReport], seed: u64) -> Result<String> {
    let k = reports
        .iter()
        .flat_map(|r| r.runs())
        .map(|r| r.k)
        .next()
        .unwrap_or(crate::metrics::DEFAULT_K);
    let width = reports.iter().map(|r| r.profile.method.len()).max().unwrap_or(6).max(6);
    let mut out = String::new();
    let _ = writeln!(out, "# streamant {TOOL_VERSION}  seed={seed}  k={k}");
    for rep in reports {
        let fb = |r: &Option<EvaluationResult>| {
            r.as_ref()
                .map_or_else(|| "-".to_string(), |r| format!("{}/{}", r.fallbacks, r.segments))
        };
        let _ = writeln!(
            out,
            "# {}: {}  fallbacks offline={} streaming={}",
            rep.profile.method,
            rep.timing,
            fb(&rep.offline),
            fb(&rep.streaming)
        );
    }
    let block = format!(
        "{:>6} {:>6} {:>6} | {:>6} {:>6} {:>6}",
        "VERB", "NOUN", "ACT.", "VERB", "NOUN", "ACT."
    );
    let block_width = block.len();
    let _ = writeln!(
        out,
        "{:width$} {:>8} {:>7} || {:^bw$} || {:^bw$}",
        "",
        "",
        "",
        "OFFLINE",
        "STREAMING",
        bw = block_width
    );
    let sub = format!("{:^20} | {:^20}", format!("TOP-{k} ACC."), format!("MEAN TOP-{k} REC."));
    let _ = writeln!(
        out,
        "{:width$} {:>8} {:>7} || {:^bw$} || {:^bw$}",
        "",
        "",
        "",
        sub,
        sub,
        bw = block_width
    );
    let _ = writeln!(
        out,
        "{:width$} {:>8} {:>7} || {} || {}",
        "METHOD", "R.TIME", "FPS", block, block
    );
    for rep in reports {
        let _ = writeln!(
            out,
            "{:width$} {:>8.2} {:>7.2} || {} || {}",
            rep.profile.method,
            rep.profile.runtime_ms,
            rep.profile.fps()?,
            cells(rep.offline.as_ref()),
            cells(rep.streaming.as_ref())
        );
    }
    Ok(out)
}

/// Effective anticipation time against action scores, one point per method and mode.
pub fn write_plot_data<W: Write>(writer: W, reports: &[MethodReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "method",
        "mode",
        "runtime_ms",
        "effective_anticipation_s",
        "action_mean_topk_recall",
        "action_topk_accuracy",
    ])
    .map_err(csv_err)?;
    for rep in reports {
        for run in rep.runs() {
            w.write_record([
                rep.profile.method.clone(),
                run.mode.as_str().to_string(),
                rep.profile.runtime_ms.to_string(),
                run.effective_anticipation_s.map_or_else(String::new, |v| v.to_string()),
                run.action.mean_topk_recall.to_string(),
                run.action.topk_accuracy.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// 1-based ranks by descending score, ties sharing the better rank and
/// broken in listing order.
fn ranks(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut out = vec![0; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = if pos > 0 && scores[order[pos - 1]] == scores[i] {
            out[order[pos - 1]]
        } else {
            pos + 1
        };
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingRow {
    pub method: String,
    pub offline_score: f64,
    pub streaming_score: f64,
    pub offline_rank: usize,
    pub streaming_rank: usize,
}

/// Ranks methods by action mean top-k recall in both modes.
pub fn ranking(reports: &[MethodReport]) -> Vec<RankingRow> {
    let score = |r: &Option<EvaluationResult>| r.as_ref().map_or(f64::NAN, |r| r.action.mean_topk_recall);
    let off: Vec<f64> = reports.iter().map(|r| score(&r.offline)).collect();
    let on: Vec<f64> = reports.iter().map(|r| score(&r.streaming)).collect();
    let (ro, rs) = (ranks(&off), ranks(&on));
    let mut rows: Vec<RankingRow> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| RankingRow {
            method: r.profile.method.clone(),
            offline_score: off[i],
            streaming_score: on[i],
            offline_rank: ro[i],
            streaming_rank: rs[i],
        })
        .collect();
    rows.sort_by_key(|r| r.streaming_rank);
    rows
}

pub fn format_ranking(rows: &[RankingRow]) -> String {
    let width = rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:width$} {:>8} {:>10} {:>9} {:>12}",
        "METHOD", "OFF.RANK", "OFF.SCORE", "STR.RANK", "STR.SCORE"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:width$} {:>8} {:>10.2} {:>9} {:>12.2}",
            r.method, r.offline_rank, r.offline_score, r.streaming_rank, r.streaming_score
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::EvaluationMode;

    fn result(mode: EvaluationMode, action_mtr: f64) -> EvaluationResult {
        let t = TaskScores {
            topk_accuracy: 50.0,
            mean_topk_recall: action_mtr,
        };
        EvaluationResult {
            mode,
            k: 5,
            verb: t,
            noun: t,
            action: t,
            segments: 10,
            fallbacks: 1,
            effective_anticipation_s: Some(1.25),
        }
    }

    fn report(name: &str, ms: f64, off: f64, on: f64) -> MethodReport {
        let profile = RuntimeProfile {
            method: name.into(),
            runtime_ms: ms,
            observation_time_s: 1.0,
            anticipation_time_s: 1.0,
        };
        MethodReport {
            timing: profile.timing(1_000_000).unwrap(),
            profile,
            offline: Some(result(EvaluationMode::Offline, off)),
            streaming: Some(result(EvaluationMode::Streaming, on)),
        }
    }

    #[test]
    fn ranks_share_ties() {
        assert_eq!(ranks(&[3.0, 5.0, 3.0, 1.0]), vec![2, 1, 2, 4]);
    }

    #[test]
    fn ranking_can_flip() {
        let rows = ranking(&[report("slow", 725.0, 30.0, 10.0), report("fast", 25.0, 20.0, 19.0)]);
        assert_eq!(rows[0].method, "fast");
        assert_eq!((rows[0].offline_rank, rows[0].streaming_rank), (2, 1));
        assert!(format_ranking(&rows).contains("slow"));
    }

    #[test]
    fn table_and_csv_embed_audit_fields() {
        let reps = [report("fast", 19.2, 25.0, 24.5)];
        let text = format_results_table(&reps, 7).unwrap();
        assert!(text.contains("seed=7"));
        assert!(text.contains(TOOL_VERSION));
        assert!(text.contains("tau_r=0.019200s"));
        assert!(text.contains("52.08"));
        assert!(text.contains("OFFLINE") && text.contains("STREAMING"));
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &reps, 7).unwrap();
        let csv = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("fast,offline,19.2,"));
        assert!(lines[1].contains(",1000000,1000000,19200,5,7,"));
    }
}
