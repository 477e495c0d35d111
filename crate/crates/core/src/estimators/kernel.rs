//! Per-frame Gaussian conditioning.
//!
//! With prior `s ~ CN(0, D)` and observations `x_obs = M T s`, the posterior
//! of `s` is Gaussian with
//!
//! ```text
//! mean = D T* M' C^-1 x_obs
//! cov  = D - D T* M' C^-1 M T D,        C = M T D T* M'
//! ```
//!
//! Only the diagonal of the covariance is needed by EM-tf, and AM needs no
//! covariance at all, so the full matrix is formed only on request.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{InpaintError, Result};
use crate::transforms::{mirror_bin, TransformPair};
use crate::C64;

/// Largest accepted condition estimate of the observed covariance.
pub const MAX_CONDITION: f64 = 1e14;

/// Diagonal of the prior covariance of one frame's coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCovariance(DVector<f64>);

impl FrameCovariance {
    pub fn new(diag: DVector<f64>) -> Result<Self> {
        if diag.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(InpaintError::invalid(
                "prior variances must be finite and positive",
            ));
        }
        Ok(FrameCovariance(diag))
    }

    /// Column `n` of a variance matrix, which must be positive (as any
    /// [`NmfModel::variances`](crate::NmfModel::variances) is).
    pub fn from_column(v: &DMatrix<f64>, n: usize) -> Self {
        FrameCovariance(v.column(n).into_owned())
    }

    pub fn diag(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Posterior mean and covariance of one frame's coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorFrame {
    pub mean: DVector<C64>,
    pub cov_diag: DVector<f64>,
    pub cov_full: Option<DMatrix<C64>>,
}

impl PosteriorFrame {
    /// The prior itself: zero mean, covariance `D`.
    fn prior(d: &FrameCovariance, need_full_cov: bool) -> Self {
        let diag = d.diag().clone();
        PosteriorFrame {
            mean: DVector::zeros(diag.len()),
            cov_full: need_full_cov
                .then(|| DMatrix::from_diagonal(&diag.map(|v| C64::new(v, 0.0)))),
            cov_diag: diag,
        }
    }
}

/// Factored observed covariance of one frame.
pub(crate) struct Conditioned {
    /// The prior diagonal actually used (see [`condition`]).
    pub d: DVector<f64>,
    /// `M T D`, `m x F`.
    pub td: DMatrix<C64>,
    pub chol: Cholesky<C64, Dyn>,
}

impl Conditioned {
    /// `log det C` from the Cholesky diagonal.
    pub fn log_det(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|l| l.re.ln())
            .sum::<f64>()
    }
}

fn check_inputs(
    pair: &TransformPair,
    d: &FrameCovariance,
    indices: &[usize],
    values: &DVector<C64>,
) -> Result<()> {
    if d.len() != pair.num_bins() {
        return Err(InpaintError::invalid(format!(
            "prior has {} bins, transform has {}",
            d.len(),
            pair.num_bins()
        )));
    }
    if indices.len() != values.len() {
        return Err(InpaintError::invalid(
            "observed indices and values differ in length",
        ));
    }
    let w = pair.frame_length();
    if indices.iter().any(|&t| t >= w) {
        return Err(InpaintError::invalid("observed index outside the frame"));
    }
    Ok(())
}

/// Relative mismatch below which `d[f]` and `d[F - f]` count as equal.
const MIRROR_TOL: f64 = 1e-9;

/// For a pair with exactly conjugate columns and a prior that is mirror
/// symmetric up to rounding, the prior averaged with its mirror image.
/// `C` is then real in exact arithmetic, so its imaginary part is pure
/// rounding noise and can be dropped. `None` otherwise.
fn real_structure(pair: &TransformPair, d: &DVector<f64>) -> Option<DVector<f64>> {
    if !pair.has_conjugate_columns() {
        return None;
    }
    let f = d.len();
    let close = (0..f).all(|k| {
        let m = mirror_bin(k, f);
        (d[k] - d[m]).abs() <= MIRROR_TOL * d[k].max(d[m])
    });
    // addition commutes exactly, so both halves get the same value
    close.then(|| DVector::from_fn(f, |k, _| 0.5 * (d[k] + d[mirror_bin(k, f)])))
}

/// Form and factor `C = M T D T* M' + ridge`, where the ridge is
/// `relative_ridge * trace(C) / m`.
pub(crate) fn condition(
    pair: &TransformPair,
    d: &FrameCovariance,
    indices: &[usize],
    relative_ridge: f64,
) -> Result<Conditioned> {
    let t = pair.synthesis();
    let f = pair.num_bins();
    let m = indices.len();
    let symmetric = real_structure(pair, d.diag());
    let real = symmetric.is_some();
    let dg = symmetric.unwrap_or_else(|| d.diag().clone());
    let td = DMatrix::from_fn(m, f, |j, k| t[(indices[j], k)] * dg[k]);
    let t_obs = DMatrix::from_fn(m, f, |j, k| t[(indices[j], k)]);
    let mut c = &td * t_obs.adjoint();
    // exact Hermitian symmetry and real diagonal
    for i in 0..m {
        c[(i, i)] = C64::new(c[(i, i)].re, 0.0);
        for j in 0..i {
            let mut avg = (c[(i, j)] + c[(j, i)].conj()) * 0.5;
            if real {
                avg.im = 0.0;
            }
            c[(i, j)] = avg;
            c[(j, i)] = avg.conj();
        }
    }
    if relative_ridge > 0.0 {
        let trace: f64 = (0..m).map(|i| c[(i, i)].re).sum();
        let r = relative_ridge * trace / m as f64;
        for i in 0..m {
            c[(i, i)].re += r;
        }
    }
    let chol = c
        .cholesky()
        .ok_or_else(|| InpaintError::NumericalBreakdown {
            frame: 0,
            iteration: None,
            reason: "observed covariance is not positive definite".into(),
        })?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), l| {
        (lo.min(l.re), hi.max(l.re))
    });
    let cond = (hi / lo).powi(2);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(InpaintError::NumericalBreakdown {
            frame: 0,
            iteration: None,
            reason: format!(
                "observed covariance condition estimate {cond:.3e} exceeds {MAX_CONDITION:e}"
            ),
        });
    }
    Ok(Conditioned { d: dg, td, chol })
}

/// Posterior of one frame's coefficients given its observed samples.
///
/// `relative_ridge` scales the diagonal loading of the observed covariance
/// (`0` for exact conditioning). The full covariance is materialized only
/// when `need_full_cov` is set.
pub fn e_step_frame(
    pair: &TransformPair,
    d: &FrameCovariance,
    indices: &[usize],
    values: &DVector<C64>,
    need_full_cov: bool,
    relative_ridge: f64,
) -> Result<PosteriorFrame> {
    check_inputs(pair, d, indices, values)?;
    if indices.is_empty() {
        return Ok(PosteriorFrame::prior(d, need_full_cov));
    }
    let cond = condition(pair, d, indices, relative_ridge)?;
    // Z = C^-1 M T D, so the gain D T* M' C^-1 is Z*.
    let z = cond.chol.solve(&cond.td);
    let mean = z.ad_mul(values);
    let dg = &cond.d;
    let f = dg.len();
    let cov_diag = DVector::from_fn(f, |k, _| {
        let dot: f64 = z
            .column(k)
            .iter()
            .zip(cond.td.column(k).iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        (dg[k] - dot).max(0.0)
    });
    let cov_full = need_full_cov.then(|| {
        let mut s = -z.ad_mul(&cond.td);
        for k in 0..f {
            s[(k, k)] += dg[k];
        }
        s
    });
    Ok(PosteriorFrame {
        mean,
        cov_diag,
        cov_full,
    })
}

/// Posterior power `|mean|^2 + diag(cov)`.
pub fn posterior_power_tf(post: &PosteriorFrame) -> DVector<f64> {
    DVector::from_fn(post.mean.len(), |k, _| {
        post.mean[k].norm_sqr() + post.cov_diag[k]
    })
}

/// Map a posterior through `A T`: mean `A T s`, covariance `A T S (A T)*`.
pub fn transport_posterior(pair: &TransformPair, post: &PosteriorFrame) -> Result<PosteriorFrame> {
    let cov = post.cov_full.as_ref().ok_or_else(|| {
        InpaintError::ContractViolation("transport requires the full posterior covariance".into())
    })?;
    let p = pair.projection();
    let mean = p * &post.mean;
    let cov_full = p * cov * p.adjoint();
    let cov_diag = DVector::from_fn(cov_full.nrows(), |k, _| cov_full[(k, k)].re.max(0.0));
    Ok(PosteriorFrame {
        mean,
        cov_diag,
        cov_full: Some(cov_full),
    })
}

/// Conditional-mode update of one frame with missing samples as parameters.
///
/// Returns the completed frame `T s` and the coefficients `s`, with `s` the
/// posterior mean. The observed covariance is solved against the data
/// vector only; no gain matrix is formed.
pub fn am_signal_update(
    pair: &TransformPair,
    d: &FrameCovariance,
    indices: &[usize],
    values: &DVector<C64>,
    relative_ridge: f64,
) -> Result<(DVector<C64>, DVector<C64>)> {
    check_inputs(pair, d, indices, values)?;
    let coefs = if indices.is_empty() {
        DVector::zeros(pair.num_bins())
    } else {
        let cond = condition(pair, d, indices, relative_ridge)?;
        let y = cond.chol.solve(values);
        cond.td.ad_mul(&y)
    };
    let frame = pair.synthesis() * &coefs;
    Ok((frame, coefs))
}
