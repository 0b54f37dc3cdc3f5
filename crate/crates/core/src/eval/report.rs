//! Per-query traces and summary tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalReport, TraceRecord};
use crate::error::Result;
use crate::store::{read_jsonl, write_jsonl, Provenance};

pub fn save_trace(report: &EvalReport, path: &Path, header: Option<&Provenance>) -> Result<()> {
    write_jsonl(path, &report.records, header)
}

pub fn load_trace(path: &Path) -> Result<(Option<Provenance>, Vec<TraceRecord>)> {
    read_jsonl(path)
}

/// One row of a results table: a regime (or sweep setting) averaged over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub seeds: usize,
    pub accuracy: f64,
    pub accuracy_min: f64,
    pub accuracy_max: f64,
    pub mean_tokens: f64,
    pub mean_wall_ms: f64,
    pub cap_rate: f64,
    /// Token-count speedup against the row's reference, if any.
    pub speedup: Option<f64>,
    pub core_confidence: Option<f64>,
    pub other_confidence: Option<f64>,
}

impl SummaryRow {
    /// Averages reports of the same setting over seeds.
    pub fn from_reports(label: &str, reports: &[&EvalReport]) -> Self {
        let n = reports.len().max(1) as f64;
        let mean = |f: &dyn Fn(&EvalReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
        let conf: Vec<_> = reports.iter().filter_map(|r| r.confidence).collect();
        let conf_mean = |f: &dyn Fn(&super::Confidence) -> f64| {
            (!conf.is_empty() && conf.len() == reports.len()).then(|| conf.iter().map(f).sum::<f64>() / n)
        };
        SummaryRow {
            label: label.to_string(),
            seeds: reports.len(),
            accuracy: mean(&|r| r.accuracy),
            accuracy_min: reports.iter().map(|r| r.accuracy).fold(f64::INFINITY, f64::min),
            accuracy_max: reports.iter().map(|r| r.accuracy).fold(f64::NEG_INFINITY, f64::max),
            mean_tokens: mean(&|r| r.mean_tokens),
            mean_wall_ms: mean(&|r| r.mean_wall_ms),
            cap_rate: mean(&|r| r.cap_rate),
            speedup: None,
            core_confidence: conf_mean(&|c| c.core),
            other_confidence: conf_mean(&|c| c.other),
        }
    }

    pub fn gap(&self) -> Option<f64> {
        Some(self.other_confidence? - self.core_confidence?)
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

/// Fixed-width text table; accuracy in percent, confidence on the x100 scale.
pub fn render_summary(rows: &[SummaryRow]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(7);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>5}  {:>7}  {:>13}  {:>9}  {:>9}  {:>6}  {:>7}  {:>6}  {:>6}  {:>6}",
        "setting", "seeds", "acc%", "acc% min-max", "tokens", "wall ms", "cap%", "speedup", "core", "other", "gap"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}  {:>7.2}  {:>13}  {:>9.1}  {:>9.2}  {:>6.1}  {:>7}  {:>6}  {:>6}  {:>6}",
            r.label,
            r.seeds,
            100.0 * r.accuracy,
            format!("{:.1}-{:.1}", 100.0 * r.accuracy_min, 100.0 * r.accuracy_max),
            r.mean_tokens,
            r.mean_wall_ms,
            100.0 * r.cap_rate,
            opt(r.speedup, 2),
            opt(r.core_confidence, 2),
            opt(r.other_confidence, 2),
            opt(r.gap(), 2),
        );
    }
    out
}

/// The same table as CSV with a header line.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "setting,seeds,accuracy,accuracy_min,accuracy_max,mean_tokens,mean_wall_ms,cap_rate,speedup,core_confidence,other_confidence,gap\n",
    );
    let cell = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for r in rows {
        let label = if r.label.contains([',', '"']) {
            format!("\"{}\"", r.label.replace('"', "\"\""))
        } else {
            r.label.clone()
        };
        let _ = writeln!(
            out,
            "{label},{},{},{},{},{},{},{},{},{},{},{}",
            r.seeds,
            r.accuracy,
            r.accuracy_min,
            r.accuracy_max,
            r.mean_tokens,
            r.mean_wall_ms,
            r.cap_rate,
            cell(r.speedup),
            cell(r.core_confidence),
            cell(r.other_confidence),
            cell(r.gap()),
        );
    }
    out
}
