//! Aggregate many `summary.json` files into one SNR-versus-gap-length table.
//!
//! Rows are keyed by algorithm and gap length and average over input
//! signals, which is the layout of the gap-length comparison plots.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
struct SummaryView {
    input: String,
    degradation: DegradationView,
    config: ConfigView,
    final_snr_gap_db: Option<f64>,
    peak_snr_gap_db: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct DegradationView {
    gap_ms: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct ConfigView {
    algorithm: String,
}

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub algorithm: String,
    pub gap_ms: f64,
    pub num_signals: usize,
    pub mean_snr_gap_db: f64,
    pub mean_peak_snr_gap_db: f64,
}

#[derive(Default)]
struct Acc {
    inputs: Vec<String>,
    last: f64,
    peak: f64,
}

/// Average final and peak gap SNR per (algorithm, gap length).
///
/// Only gap-mode runs with a reference contribute; anything else is an
/// invalid input for this table.
pub fn gap_table(paths: &[impl AsRef<Path>]) -> Result<Vec<GapRow>> {
    let mut groups: BTreeMap<(String, u64), Acc> = BTreeMap::new();
    for path in paths {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let s: SummaryView = serde_json::from_str(&text)
            .map_err(|e| CliError::InvalidSpec(format!("{}: {e}", path.display())))?;
        let bad = |what: &str| CliError::InvalidSpec(format!("{}: {what}", path.display()));
        let gap_ms = s
            .degradation
            .gap_ms
            .ok_or_else(|| bad("not a compact-gap run"))?;
        let last = s
            .final_snr_gap_db
            .ok_or_else(|| bad("no gap SNR (run without a reference?)"))?;
        let peak = s.peak_snr_gap_db.ok_or_else(|| bad("no peak gap SNR"))?;
        let acc = groups
            .entry((s.config.algorithm, gap_ms.to_bits()))
            .or_default();
        acc.inputs.push(s.input);
        acc.last += last;
        acc.peak += peak;
    }
    Ok(groups
        .into_iter()
        .map(|((algorithm, bits), acc)| {
            let n = acc.inputs.len() as f64;
            GapRow {
                algorithm,
                gap_ms: f64::from_bits(bits),
                num_signals: acc.inputs.len(),
                mean_snr_gap_db: acc.last / n,
                mean_peak_snr_gap_db: acc.peak / n,
            }
        })
        .collect())
}

/// Write rows as CSV with a header and LF line endings.
pub fn write_gap_table(rows: &[GapRow], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}
