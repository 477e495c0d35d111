//! Negative log-likelihood objectives.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::kernel::{condition, FrameCovariance};
use crate::error::{InpaintError, Result};
use crate::framing::FrameSet;
use crate::isnmf::{NmfModel, EPS_V};
use crate::transforms::TransformPair;
use crate::C64;

/// Which likelihood to evaluate.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// `-log p(X_obs | W, H)`: missing samples integrated out.
    ObservedOnly { relative_ridge: f64 },
    /// `-log p(X_obs, X_miss | W, H)` at the given completed `W x N` frames.
    Joint { filled: &'a DMatrix<C64> },
}

/// Evaluate `objective` for `model` on `frames`.
pub fn neg_log_likelihood(
    objective: Objective<'_>,
    frames: &FrameSet,
    pair: &TransformPair,
    model: &NmfModel,
) -> Result<f64> {
    match objective {
        Objective::ObservedOnly { relative_ridge } => {
            observed_nll(frames, pair, model, relative_ridge)
        }
        Objective::Joint { filled } => joint_nll(pair, model, filled),
    }
}

fn check_model(frames: &FrameSet, pair: &TransformPair, model: &NmfModel) -> Result<()> {
    if model.num_bins() != pair.num_bins() || model.num_frames() != frames.num_frames() {
        return Err(InpaintError::invalid(format!(
            "model is {}x{}, expected {}x{}",
            model.num_bins(),
            model.num_frames(),
            pair.num_bins(),
            frames.num_frames()
        )));
    }
    if pair.frame_length() != frames.frame_length() {
        return Err(InpaintError::invalid(
            "transform and frames disagree on frame length",
        ));
    }
    Ok(())
}

/// `sum_n log det(pi C_n) + x_n* C_n^-1 x_n` with `C_n = M_n T D_n T* M_n'`.
pub fn observed_nll(
    frames: &FrameSet,
    pair: &TransformPair,
    model: &NmfModel,
    relative_ridge: f64,
) -> Result<f64> {
    check_model(frames, pair, model)?;
    let v = model.variances();
    let terms = (0..frames.num_frames())
        .into_par_iter()
        .map(|n| {
            let (idx, x) = frames.observed(n);
            if idx.is_empty() {
                return Ok(0.0);
            }
            let d = FrameCovariance::from_column(&v, n);
            let cond = condition(pair, &d, idx, relative_ridge).map_err(|e| e.at(n, None))?;
            let y = cond
                .chol
                .l_dirty()
                .solve_lower_triangular(&x)
                .ok_or_else(|| InpaintError::NumericalBreakdown {
                    frame: n,
                    iteration: None,
                    reason: "triangular solve failed".into(),
                })?;
            Ok(idx.len() as f64 * PI.ln() + cond.log_det() + y.norm_squared())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum())
}

/// `sum_n log det(pi T D_n T*) + x_n* (T D_n T*)^-1 x_n` for completed frames.
///
/// Requires an invertible pair; uses `det(pi T D T*) = pi^W |det T|^2 det D`
/// and `(T D T*)^-1 = A* D^-1 A`. Powers `|A x|^2` are clamped at [`EPS_V`]
/// exactly as in the model update, so that the two agree on the function
/// being minimized.
pub fn joint_nll(pair: &TransformPair, model: &NmfModel, filled: &DMatrix<C64>) -> Result<f64> {
    if !pair.is_invertible() {
        return Err(InpaintError::UnsupportedConfiguration(
            "joint likelihood requires an invertible synthesis operator".into(),
        ));
    }
    if filled.nrows() != pair.frame_length() || filled.ncols() != model.num_frames() {
        return Err(InpaintError::invalid(
            "filled frames do not match the model",
        ));
    }
    if model.num_bins() != pair.num_bins() {
        return Err(InpaintError::invalid(
            "model and transform disagree on bins",
        ));
    }
    let w = pair.frame_length() as f64;
    let det_t = pair.synthesis().clone().lu().determinant().norm_sqr();
    let per_frame_const = w * PI.ln() + det_t.ln();
    let v = model.variances();
    let coefs = pair.analysis() * filled;
    let mut total = 0.0;
    for n in 0..filled.ncols() {
        let mut frame = per_frame_const;
        for f in 0..coefs.nrows() {
            let vv = v[(f, n)];
            frame += vv.ln() + coefs[(f, n)].norm_sqr().max(EPS_V) / vv;
        }
        total += frame;
    }
    Ok(total)
}
