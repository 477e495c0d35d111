//! Maximum-likelihood inpainting estimators.
//!
//! All three estimators alternate between a per-frame step driven by the
//! current variance model `V = W H` and an IS-NMF refit of `W`, `H`:
//!
//! | algorithm | per-frame step | power fed to the NMF |
//! |-----------|----------------|----------------------|
//! | EM-tf | posterior of the coefficients | `|mean|^2 + diag(cov)` |
//! | EM-t  | posterior mapped through `A T` | same, after the mapping |
//! | AM    | conditional mode of the missing samples | `|mean|^2` |
//!
//! `am-to-em-tf` runs AM for a few iterations and continues with EM-tf on the
//! same model.
//!
//! Frames are processed in parallel within an iteration; the NMF update is a
//! sequential barrier between iterations.

mod kernel;
mod objective;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

pub use kernel::{
    am_signal_update, e_step_frame, posterior_power_tf, transport_posterior, FrameCovariance,
    PosteriorFrame, MAX_CONDITION,
};
pub use objective::{joint_nll, neg_log_likelihood, observed_nll, Objective};

use crate::error::{InpaintError, Result};
use crate::framing::{frame_signal, make_sine_window, FrameSet, GapMask, Signal, IMAG_TOLERANCE};
use crate::isnmf::{init_model, multiplicative_update, NmfModel, PowerSpectrum};
use crate::metrics::{relative_change, relative_objective_change, snr};
use crate::transforms::TransformPair;
use crate::C64;

/// Relative solution change below which an iteration counts towards early stopping.
pub const EARLY_STOP_TOL: f64 = 1e-6;
/// Consecutive small-change iterations required to stop early.
pub const EARLY_STOP_PATIENCE: usize = 3;

/// Estimator selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    EmTf,
    EmT,
    Am,
    AmToEmTf,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::EmTf => "em-tf",
            Algorithm::EmT => "em-t",
            Algorithm::Am => "am",
            Algorithm::AmToEmTf => "am-to-em-tf",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = InpaintError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em-tf" => Ok(Algorithm::EmTf),
            "em-t" => Ok(Algorithm::EmT),
            "am" => Ok(Algorithm::Am),
            "am-to-em-tf" => Ok(Algorithm::AmToEmTf),
            other => Err(InpaintError::invalid(format!(
                "unknown algorithm `{other}`"
            ))),
        }
    }
}

/// The estimator actually run during one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    EmTf,
    EmT,
    Am,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::EmTf => "em-tf",
            Phase::EmT => "em-t",
            Phase::Am => "am",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub algorithm: Algorithm,
    /// NMF rank `K`.
    pub rank: usize,
    pub outer_iters: usize,
    pub nmf_inner_iters: usize,
    /// AM iterations before switching to EM-tf (`am-to-em-tf` only).
    pub switch_after: usize,
    pub seed: u64,
    /// Diagonal loading of the observed covariance, relative to its mean diagonal.
    pub relative_ridge: f64,
    pub track_objective: bool,
    /// Permit AM with a non-invertible synthesis operator.
    pub allow_heuristic: bool,
    /// Stop once the relative solution change stays below [`EARLY_STOP_TOL`]
    /// for [`EARLY_STOP_PATIENCE`] iterations.
    pub early_stop: bool,
    /// Mirror the rows of the initial dictionary so that estimates stay real.
    pub symmetric_init: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            algorithm: Algorithm::EmTf,
            rank: 20,
            outer_iters: 100,
            nmf_inner_iters: 10,
            switch_after: 5,
            seed: 0,
            relative_ridge: 1e-8,
            track_objective: false,
            allow_heuristic: false,
            early_stop: false,
            symmetric_init: true,
        }
    }
}

impl EstimatorConfig {
    /// Check the configuration on its own and against `pair`.
    /// Returns whether AM will run in the non-invertible heuristic mode.
    pub fn validate(&self, pair: &TransformPair) -> Result<bool> {
        if self.outer_iters == 0 {
            return Err(InpaintError::invalid("outer_iters must be at least 1"));
        }
        if self.rank == 0 {
            return Err(InpaintError::invalid("rank must be at least 1"));
        }
        if self.nmf_inner_iters == 0 {
            return Err(InpaintError::invalid("nmf_inner_iters must be at least 1"));
        }
        if !(self.relative_ridge.is_finite() && self.relative_ridge >= 0.0) {
            return Err(InpaintError::invalid(
                "relative_ridge must be finite and nonnegative",
            ));
        }
        if self.algorithm == Algorithm::AmToEmTf && self.switch_after >= self.outer_iters {
            return Err(InpaintError::invalid(format!(
                "switch_after ({}) must be below outer_iters ({})",
                self.switch_after, self.outer_iters
            )));
        }
        let uses_am = matches!(self.algorithm, Algorithm::Am | Algorithm::AmToEmTf);
        if uses_am && !pair.is_invertible() {
            if !self.allow_heuristic {
                return Err(InpaintError::invalid(format!(
                    "AM requires an invertible synthesis operator with A = T^-1 (pair is {}); \
                     enable the heuristic explicitly to proceed",
                    pair.case()
                )));
            }
            return Ok(true);
        }
        Ok(false)
    }

    pub fn phase_at(&self, iteration: usize) -> Phase {
        match self.algorithm {
            Algorithm::EmTf => Phase::EmTf,
            Algorithm::EmT => Phase::EmT,
            Algorithm::Am => Phase::Am,
            Algorithm::AmToEmTf if iteration <= self.switch_after => Phase::Am,
            Algorithm::AmToEmTf => Phase::EmTf,
        }
    }
}

/// Diagnostics of one completed outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub phase: Phase,
    pub snr_gap_db: Option<f64>,
    pub nll: Option<f64>,
    pub rel_solution_change: Option<f64>,
    pub rel_objective_change: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Highest gap SNR and the (1-based) iteration reaching it.
    pub fn peak_snr(&self) -> Option<(f64, usize)> {
        self.records
            .iter()
            .filter_map(|r| r.snr_gap_db.map(|s| (s, r.iteration)))
            .fold(None, |best, (s, i)| match best {
                Some((b, _)) if b >= s => best,
                _ => Some((s, i)),
            })
    }
}

/// What one outer iteration produced.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub phase: Phase,
    /// Power spectrum the NMF was refit to.
    pub power: PowerSpectrum,
}

/// Iterative inpainting state over a fixed set of frames.
pub struct Inpainter<'a> {
    frames: &'a FrameSet,
    pair: &'a TransformPair,
    cfg: EstimatorConfig,
    heuristic: bool,
    model: NmfModel,
    /// `F x N` current coefficient estimate.
    coefs: DMatrix<C64>,
    /// `W x N` synthesized frames `T coefs`.
    synthesized: DMatrix<C64>,
    iteration: usize,
}

impl<'a> Inpainter<'a> {
    pub fn new(
        frames: &'a FrameSet,
        pair: &'a TransformPair,
        cfg: EstimatorConfig,
    ) -> Result<Self> {
        let heuristic = cfg.validate(pair)?;
        if pair.frame_length() != frames.frame_length() {
            return Err(InpaintError::invalid(format!(
                "transform frame length {} differs from framing {}",
                pair.frame_length(),
                frames.frame_length()
            )));
        }
        let f = pair.num_bins();
        let n = frames.num_frames();
        let mut model = init_model(f, cfg.rank, n, cfg.seed, cfg.symmetric_init)?;
        calibrate_scale(&mut model, frames, f);
        Ok(Inpainter {
            frames,
            pair,
            cfg,
            heuristic,
            model,
            coefs: DMatrix::zeros(f, n),
            synthesized: frames.frames().clone(),
            iteration: 0,
        })
    }

    /// Replace the current model (e.g. to continue from another run).
    pub fn set_model(&mut self, model: NmfModel) -> Result<()> {
        if model.num_bins() != self.pair.num_bins()
            || model.num_frames() != self.frames.num_frames()
        {
            return Err(InpaintError::invalid(
                "model dimensions do not match the problem",
            ));
        }
        self.model = model;
        Ok(())
    }

    pub fn model(&self) -> &NmfModel {
        &self.model
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    /// Whether AM runs in the non-invertible heuristic mode.
    pub fn is_heuristic(&self) -> bool {
        self.heuristic
    }

    /// Coefficient estimate of the last iteration (`F x N`).
    pub fn coefficients(&self) -> &DMatrix<C64> {
        &self.coefs
    }

    /// Synthesized frames of the last iteration (`W x N`).
    pub fn synthesized_frames(&self) -> &DMatrix<C64> {
        &self.synthesized
    }

    /// Number of completed outer iterations.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Run one outer iteration: per-frame step, then NMF refit.
    pub fn step(&mut self) -> Result<StepOutput> {
        let iteration = self.iteration + 1;
        let phase = self.cfg.phase_at(iteration);
        let v = self.model.variances();
        let pair = self.pair;
        let frames = self.frames;
        let ridge = self.cfg.relative_ridge;
        let heuristic = self.heuristic;

        let per_frame = (0..frames.num_frames())
            .into_par_iter()
            .map(|n| {
                let d = FrameCovariance::from_column(&v, n);
                let (idx, x) = frames.observed(n);
                let (coefs, power) = match phase {
                    Phase::EmTf => {
                        let post = e_step_frame(pair, &d, idx, &x, false, ridge)?;
                        let p = posterior_power_tf(&post);
                        (post.mean, p)
                    }
                    Phase::EmT => {
                        let post = e_step_frame(pair, &d, idx, &x, true, ridge)?;
                        let alt = transport_posterior(pair, &post)?;
                        let p = posterior_power_tf(&alt);
                        (alt.mean, p)
                    }
                    Phase::Am => {
                        let (frame, coefs) = am_signal_update(pair, &d, idx, &x, ridge)?;
                        let coefs = if heuristic {
                            pair.analysis() * frame
                        } else {
                            coefs
                        };
                        let p = coefs.map(|c| c.norm_sqr());
                        (coefs, p)
                    }
                };
                let synth = pair.synthesis() * &coefs;
                Ok((coefs, synth, power))
            })
            .enumerate()
            .map(|(n, r): (usize, Result<_>)| r.map_err(|e| e.at(n, Some(iteration))))
            .collect::<Result<Vec<(DVector<C64>, DVector<C64>, DVector<f64>)>>>()?;

        let f = pair.num_bins();
        let n_frames = frames.num_frames();
        let mut p = DMatrix::zeros(f, n_frames);
        for (n, (c, s, pw)) in per_frame.into_iter().enumerate() {
            self.coefs.set_column(n, &c);
            self.synthesized.set_column(n, &s);
            p.set_column(n, &pw);
        }
        let power = PowerSpectrum::new(p)?;
        self.model = multiplicative_update(&self.model, &power, self.cfg.nmf_inner_iters)?;
        self.iteration = iteration;
        Ok(StepOutput { phase, power })
    }

    /// Synthesized frames with observed positions reset to the data.
    pub fn completed_frames(&self) -> DMatrix<C64> {
        let mut out = self.synthesized.clone();
        let data = self.frames.frames();
        for (n, idx) in self.frames.frame_masks().iter().enumerate() {
            for &t in idx {
                out[(t, n)] = data[(t, n)];
            }
        }
        out
    }

    /// The objective of `phase` at the current model and solution:
    /// observed-data likelihood for EM phases, joint likelihood for AM.
    /// `None` when AM runs in heuristic mode (no joint likelihood exists).
    pub fn objective(&self, phase: Phase) -> Result<Option<f64>> {
        match phase {
            Phase::EmTf | Phase::EmT => {
                observed_nll(self.frames, self.pair, &self.model, self.cfg.relative_ridge).map(Some)
            }
            Phase::Am if self.heuristic => Ok(None),
            Phase::Am => joint_nll(self.pair, &self.model, &self.completed_frames()).map(Some),
        }
    }

    /// Overlap-add of the synthesized frames and the relative imaginary residual.
    pub fn estimate(&self) -> Result<(Vec<f64>, f64)> {
        let (re, im) = self
            .frames
            .geometry()
            .overlap_add_parts(&self.synthesized)?;
        let max_re = re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_im = im.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ratio = if max_re > 0.0 {
            max_im / max_re
        } else if max_im > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        Ok((re, ratio))
    }
}

/// Rescale activations so that the mean model variance matches the mean
/// per-bin power implied by the observed samples.
fn calibrate_scale(model: &mut NmfModel, frames: &FrameSet, num_bins: usize) {
    let (mut energy, mut count) = (0.0, 0usize);
    for n in 0..frames.num_frames() {
        let (idx, x) = frames.observed(n);
        energy += x.norm_squared();
        count += idx.len();
    }
    if count == 0 || energy == 0.0 {
        return;
    }
    let per_sample = energy / count as f64;
    let target = per_sample * frames.frame_length() as f64 / num_bins as f64;
    let current = model.variances().mean();
    if current > 0.0 {
        model.scale_activations(target / current);
    }
}

/// Framing parameters of a run. The window is always the sine window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    pub frame_length: usize,
    pub hop: usize,
}

impl FrameConfig {
    pub fn half_overlap(frame_length: usize) -> Self {
        FrameConfig {
            frame_length,
            hop: frame_length / 2,
        }
    }
}

/// Result of [`run_estimator`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Restored signal; equals the input on every observed sample.
    pub restored: Signal,
    pub model: NmfModel,
    pub trace: RunTrace,
    /// Largest relative imaginary residual of the folded estimate over all iterations.
    pub max_imag_residual: f64,
    /// AM ran with a non-invertible synthesis operator (not likelihood-justified).
    pub heuristic: bool,
}

/// Restore the missing samples of `signal`.
///
/// `ground_truth`, when given, is used for the per-iteration gap SNR only.
pub fn run_estimator(
    signal: &Signal,
    mask: &GapMask,
    frame_cfg: FrameConfig,
    pair: &TransformPair,
    cfg: &EstimatorConfig,
    ground_truth: Option<&Signal>,
) -> Result<RunOutput> {
    if let Some(g) = ground_truth {
        if g.len() != signal.len() {
            return Err(InpaintError::invalid(
                "ground truth length differs from the signal",
            ));
        }
    }
    let window = make_sine_window(frame_cfg.frame_length)?;
    let frames = frame_signal(signal, mask, frame_cfg.frame_length, frame_cfg.hop, &window)?;
    let mut inp = Inpainter::new(&frames, pair, cfg.clone())?;

    let input = signal.samples();
    let observed = mask.observed();
    let mut prev: Vec<f64> = input
        .iter()
        .enumerate()
        .map(|(i, &x)| if mask.is_missing(i) { 0.0 } else { x })
        .collect();
    let mut prev_objective = if cfg.track_objective {
        let phase = cfg.phase_at(1);
        inp.objective(phase)?.map(|o| (phase, o))
    } else {
        None
    };

    let mut trace = RunTrace::default();
    let mut max_imag = 0.0f64;
    let mut quiet = 0usize;
    let mut restored = prev.clone();
    for _ in 0..cfg.outer_iters {
        let started = Instant::now();
        let step = inp.step()?;
        let (mut estimate, imag) = inp.estimate()?;
        max_imag = max_imag.max(imag);
        if imag > IMAG_TOLERANCE {
            let max_re = estimate.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            return Err(InpaintError::SymmetryViolation {
                imag: imag * max_re,
                real: max_re,
            });
        }
        for &i in &observed {
            estimate[i] = input[i];
        }
        let snr_gap_db = match ground_truth {
            Some(g) if mask.num_missing() > 0 => {
                snr(g.samples(), &estimate, Some(mask.missing())).ok()
            }
            _ => None,
        };
        let rel_solution_change = relative_change(&prev, &estimate).ok();
        let (nll, rel_objective_change) = if cfg.track_objective {
            let value = inp.objective(step.phase)?;
            let change = match (prev_objective, value) {
                (Some((p, old)), Some(new)) if p == step.phase => {
                    relative_objective_change(old, new)
                }
                _ => None,
            };
            prev_objective = value.map(|v| (step.phase, v));
            (value, change)
        } else {
            (None, None)
        };
        trace.records.push(IterationRecord {
            iteration: inp.iteration(),
            phase: step.phase,
            snr_gap_db,
            nll,
            rel_solution_change,
            rel_objective_change,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        restored = estimate;
        prev = restored.clone();

        if cfg.early_stop {
            match rel_solution_change {
                Some(c) if c < EARLY_STOP_TOL => quiet += 1,
                _ => quiet = 0,
            }
            if quiet >= EARLY_STOP_PATIENCE {
                break;
            }
        }
    }

    Ok(RunOutput {
        restored: Signal::new(restored, signal.sample_rate())?,
        model: inp.model().clone(),
        trace,
        max_imag_residual: max_imag,
        heuristic: inp.is_heuristic(),
    })
}
