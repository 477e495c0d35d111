//! One degrade-restore-report run.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use nmf_inpaint::{
    make_dft_pair, run_estimator, snr, EstimatorConfig, FrameConfig, GapMask, RunOutput, Signal,
};
use serde::Serialize;

use crate::degrade::{compact_gaps, ms_to_samples, random_drop, Gap};
use crate::error::{CliError, Result};
use crate::wav::{read_wav, write_wav};

pub const RESTORED_WAV: &str = "restored.wav";
pub const MASK_FILE: &str = "mask.txt";
pub const TRACE_CSV: &str = "trace.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// Where the missing samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Degradation {
    /// Drop a fraction of the samples at random.
    Random { fraction: f64, seed: u64 },
    /// Cut `count` gaps of `gap_ms` milliseconds, `min_context_ms` apart.
    Gaps {
        count: usize,
        gap_ms: f64,
        min_context_ms: f64,
        seed: u64,
    },
    /// Missing indices listed in a file; the input is already degraded.
    MaskFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub input: PathBuf,
    pub degradation: Degradation,
    /// Ground truth for SNR columns. Defaults to the input when the
    /// degradation is generated here.
    pub reference: Option<PathBuf>,
    pub estimator: EstimatorConfig,
    pub frame_length: usize,
    pub hop: usize,
    pub bins: usize,
    pub out: PathBuf,
    /// Fill the `wall_ms` trace column. Off by default so that repeated runs
    /// produce identical files.
    pub record_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DegradationSummary {
    Random {
        drop_fraction: f64,
        seed: u64,
    },
    Gaps {
        count: usize,
        gap_ms: f64,
        gap_samples: usize,
        min_context_ms: f64,
        seed: u64,
        placements: Vec<Gap>,
    },
    Mask {
        path: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub algorithm: String,
    pub rank: usize,
    pub frame_length: usize,
    pub hop: usize,
    pub bins: usize,
    pub window: &'static str,
    pub outer_iters: usize,
    pub nmf_iters: usize,
    pub switch_after: usize,
    pub seed: u64,
    pub relative_ridge: f64,
    pub track_objective: bool,
    pub allow_heuristic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub nmf_inpaint: &'static str,
    pub nmf_inpaint_cli: &'static str,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub input: String,
    pub sample_rate: u32,
    pub num_samples: usize,
    pub num_missing: usize,
    pub degradation: DegradationSummary,
    pub config: ConfigEcho,
    pub seed: u64,
    pub iterations: usize,
    pub final_snr_db: Option<f64>,
    pub final_snr_gap_db: Option<f64>,
    pub peak_snr_gap_db: Option<f64>,
    pub peak_iteration: Option<usize>,
    pub heuristic: bool,
    pub max_imag_residual: f64,
    pub versions: Versions,
}

#[derive(Debug, Serialize)]
struct TraceRow {
    iter: usize,
    phase: &'static str,
    snr_gap_db: Option<f64>,
    nll: Option<f64>,
    rel_solution_change: Option<f64>,
    rel_objective_change: Option<f64>,
    wall_ms: Option<f64>,
}

fn build_mask(spec: &ExperimentSpec, signal: &Signal) -> Result<(GapMask, DegradationSummary)> {
    match &spec.degradation {
        Degradation::Random { fraction, seed } => Ok((
            random_drop(signal.len(), *fraction, *seed)?,
            DegradationSummary::Random {
                drop_fraction: *fraction,
                seed: *seed,
            },
        )),
        Degradation::Gaps {
            count,
            gap_ms,
            min_context_ms,
            seed,
        } => {
            let rate = signal.sample_rate();
            let gap_samples = ms_to_samples(*gap_ms, rate);
            let (mask, placements) = compact_gaps(
                signal.len(),
                *count,
                gap_samples,
                ms_to_samples(*min_context_ms, rate),
                *seed,
            )?;
            Ok((
                mask,
                DegradationSummary::Gaps {
                    count: *count,
                    gap_ms: *gap_ms,
                    gap_samples,
                    min_context_ms: *min_context_ms,
                    seed: *seed,
                    placements,
                },
            ))
        }
        Degradation::MaskFile(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let mask = GapMask::parse(&text, signal.len())
                .map_err(|e| CliError::InvalidSpec(format!("{}: {e}", path.display())))?;
            Ok((
                mask,
                DegradationSummary::Mask {
                    path: path.display().to_string(),
                },
            ))
        }
    }
}

fn load_reference(spec: &ExperimentSpec, input: &Signal) -> Result<Option<Signal>> {
    let reference = match (&spec.reference, &spec.degradation) {
        (Some(path), _) => read_wav(path)?,
        (None, Degradation::MaskFile(_)) => return Ok(None),
        (None, _) => input.clone(),
    };
    if reference.len() != input.len() {
        return Err(CliError::InvalidSpec(format!(
            "reference has {} samples, input has {}",
            reference.len(),
            input.len()
        )));
    }
    Ok(Some(reference))
}

/// Zero the missing samples so the estimator never sees them.
fn degraded(signal: &Signal, mask: &GapMask) -> Result<Signal> {
    let mut x = signal.samples().to_vec();
    for &i in mask.missing() {
        x[i] = 0.0;
    }
    Ok(Signal::new(x, signal.sample_rate())?)
}

fn write_trace(path: &Path, out: &RunOutput, record_time: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    for r in &out.trace.records {
        w.serialize(TraceRow {
            iter: r.iteration,
            phase: r.phase.as_str(),
            snr_gap_db: r.snr_gap_db,
            nll: r.nll,
            rel_solution_change: r.rel_solution_change,
            rel_objective_change: r.rel_objective_change,
            wall_ms: record_time.then_some(r.wall_ms),
        })
        .map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Degrade (or load the mask), restore, and write all artifacts to `spec.out`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Summary> {
    if spec.hop * 2 != spec.frame_length {
        return Err(CliError::InvalidSpec(format!(
            "hop must be half the frame length (frame length {}, hop {})",
            spec.frame_length, spec.hop
        )));
    }
    let input = read_wav(&spec.input)?;
    let reference = load_reference(spec, &input)?;
    let (mask, degradation) = build_mask(spec, &input)?;
    let pair = make_dft_pair(spec.frame_length, spec.bins)?;
    let signal = degraded(&input, &mask)?;
    info!(
        "{} samples at {} Hz, {} missing, {} for {} iterations",
        signal.len(),
        signal.sample_rate(),
        mask.num_missing(),
        spec.estimator.algorithm,
        spec.estimator.outer_iters
    );
    let frame_cfg = FrameConfig {
        frame_length: spec.frame_length,
        hop: spec.hop,
    };
    let out = run_estimator(
        &signal,
        &mask,
        frame_cfg,
        &pair,
        &spec.estimator,
        reference.as_ref(),
    )?;

    fs::create_dir_all(&spec.out).map_err(|e| CliError::io(&spec.out, e))?;
    write_wav(&spec.out.join(RESTORED_WAV), &out.restored)?;
    write_text(&spec.out.join(MASK_FILE), &mask.to_file_string())?;
    write_trace(&spec.out.join(TRACE_CSV), &out, spec.record_time)?;

    let (final_snr_db, final_snr_gap_db) = match &reference {
        Some(r) => (
            snr(r.samples(), out.restored.samples(), None).ok(),
            (mask.num_missing() > 0)
                .then(|| snr(r.samples(), out.restored.samples(), Some(mask.missing())).ok())
                .flatten(),
        ),
        None => (None, None),
    };
    let peak = out.trace.peak_snr();
    let cfg = &spec.estimator;
    let summary = Summary {
        input: spec.input.display().to_string(),
        sample_rate: input.sample_rate(),
        num_samples: input.len(),
        num_missing: mask.num_missing(),
        degradation,
        config: ConfigEcho {
            algorithm: cfg.algorithm.to_string(),
            rank: cfg.rank,
            frame_length: spec.frame_length,
            hop: spec.hop,
            bins: spec.bins,
            window: "sine",
            outer_iters: cfg.outer_iters,
            nmf_iters: cfg.nmf_inner_iters,
            switch_after: cfg.switch_after,
            seed: cfg.seed,
            relative_ridge: cfg.relative_ridge,
            track_objective: cfg.track_objective,
            allow_heuristic: cfg.allow_heuristic,
        },
        seed: cfg.seed,
        iterations: out.trace.len(),
        final_snr_db,
        final_snr_gap_db,
        peak_snr_gap_db: peak.map(|p| p.0),
        peak_iteration: peak.map(|p| p.1),
        heuristic: out.heuristic,
        max_imag_residual: out.max_imag_residual,
        versions: Versions {
            nmf_inpaint: nmf_inpaint::VERSION,
            nmf_inpaint_cli: env!("CARGO_PKG_VERSION"),
        },
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
    write_text(&spec.out.join(SUMMARY_JSON), &(json + "\n"))?;
    Ok(summary)
}
