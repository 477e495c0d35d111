//! Synthesis/analysis operator pairs built from the DFT.
//!
//! The synthesis operator `T` (`W x F`) maps a column of time-frequency
//! coefficients to a windowed time frame; the analysis operator `A` (`F x W`)
//! goes the other way. How `A T` relates to the identity decides whether the
//! two EM variants coincide, so each pair carries a [`TransformCase`] that is
//! verified when the pair is built.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{InpaintError, Result};
use crate::C64;

const STRUCTURE_TOL: f64 = 1e-10;
const PINV_CUTOFF: f64 = 1e-12;

/// How the analysis operator relates to the synthesis operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformCase {
    /// `F = W`, `A = T^-1 = T*`.
    UnitaryInverse,
    /// `F > W`, `A = T*`, `T T* = I`.
    RedundantTight,
    /// `F < W`, `A = T*`, `A T = I`.
    AnalysisTight,
    /// `A = pinv(T)`.
    PinvOfSynthesis,
    /// `T = pinv(A)`.
    PinvOfAnalysis,
}

impl TransformCase {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformCase::UnitaryInverse => "unitary-inverse",
            TransformCase::RedundantTight => "redundant-tight",
            TransformCase::AnalysisTight => "analysis-tight",
            TransformCase::PinvOfSynthesis => "pinv-of-synthesis",
            TransformCase::PinvOfAnalysis => "pinv-of-analysis",
        }
    }
}

impl fmt::Display for TransformCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A synthesis operator `T` and its associated analysis operator `A`.
#[derive(Debug)]
pub struct TransformPair {
    synthesis: DMatrix<C64>,
    analysis: DMatrix<C64>,
    case: TransformCase,
    conjugate_columns: bool,
    projection: OnceLock<DMatrix<C64>>,
}

impl Clone for TransformPair {
    fn clone(&self) -> Self {
        TransformPair {
            synthesis: self.synthesis.clone(),
            analysis: self.analysis.clone(),
            case: self.case,
            conjugate_columns: self.conjugate_columns,
            projection: self.projection.clone(),
        }
    }
}

/// Synthesis rows of a size-`bins` inverse DFT restricted to the first `rows`
/// time positions: `T[t, f] = exp(2 pi i f t / bins) / sqrt(bins)`.
fn inverse_dft_rows(rows: usize, bins: usize) -> DMatrix<C64> {
    let scale = 1.0 / (bins as f64).sqrt();
    DMatrix::from_fn(rows, bins, |t, f| {
        // reduce the phase index first so large sizes keep full accuracy, and
        // build the upper half as exact conjugates of the lower half
        let k = (t * f) % bins;
        if 2 * k == bins {
            C64::new(-scale, 0.0)
        } else if 2 * k > bins {
            C64::from_polar(scale, 2.0 * PI * (bins - k) as f64 / bins as f64).conj()
        } else {
            C64::from_polar(scale, 2.0 * PI * k as f64 / bins as f64)
        }
    })
}

/// Build the DFT pair for `frame_length = W` and `num_bins = F`.
///
/// `F = W` gives the unitary inverse DFT; `F = 2W` gives the tight frame
/// obtained by zero-padding the frame to `2W` samples before the DFT.
pub fn make_dft_pair(frame_length: usize, num_bins: usize) -> Result<TransformPair> {
    if frame_length == 0 {
        return Err(InpaintError::invalid("frame length must be positive"));
    }
    let case = if num_bins == frame_length {
        TransformCase::UnitaryInverse
    } else if num_bins == 2 * frame_length {
        TransformCase::RedundantTight
    } else {
        return Err(InpaintError::UnsupportedConfiguration(format!(
            "number of bins must be W or 2W (W = {frame_length}, F = {num_bins})"
        )));
    };
    let synthesis = inverse_dft_rows(frame_length, num_bins);
    let analysis = synthesis.adjoint();
    TransformPair::new(synthesis, analysis, case)
}

/// `F < W` pair whose synthesis operator is the first `F` columns of the
/// unitary inverse DFT of size `W`, with `A = T*` and `A T = I`.
pub fn make_truncated_dft_pair(frame_length: usize, num_bins: usize) -> Result<TransformPair> {
    if num_bins == 0 || num_bins >= frame_length {
        return Err(InpaintError::UnsupportedConfiguration(format!(
            "truncated pair needs 0 < F < W (W = {frame_length}, F = {num_bins})"
        )));
    }
    let full = inverse_dft_rows(frame_length, frame_length);
    let synthesis = full.columns(0, num_bins).into_owned();
    let analysis = synthesis.adjoint();
    TransformPair::new(synthesis, analysis, TransformCase::AnalysisTight)
}

fn pseudo_inverse(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    svd.pseudo_inverse(PINV_CUTOFF * smax)
        .map_err(|e| InpaintError::invalid(format!("pseudo-inverse failed: {e}")))
}

fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

fn identity_error(m: &DMatrix<C64>) -> f64 {
    max_abs_diff(m, &DMatrix::identity(m.nrows(), m.ncols()))
}

fn projection_error(p: &DMatrix<C64>) -> f64 {
    let idem = max_abs_diff(&(p * p), p);
    let herm = max_abs_diff(&p.adjoint(), p);
    idem.max(herm)
}

impl TransformPair {
    /// Wrap explicit operators, checking the invariants of `case`.
    pub fn new(
        synthesis: DMatrix<C64>,
        analysis: DMatrix<C64>,
        case: TransformCase,
    ) -> Result<Self> {
        let (w, f) = synthesis.shape();
        if analysis.shape() != (f, w) {
            return Err(InpaintError::invalid(format!(
                "analysis operator is {:?}, expected {}x{}",
                analysis.shape(),
                f,
                w
            )));
        }
        let conjugate_columns = has_conjugate_columns(&synthesis);
        let pair = TransformPair {
            synthesis,
            analysis,
            case,
            conjugate_columns,
            projection: OnceLock::new(),
        };
        pair.check_case()?;
        Ok(pair)
    }

    /// `A = pinv(T)` for an arbitrary synthesis operator.
    pub fn pinv_of_synthesis(synthesis: DMatrix<C64>) -> Result<Self> {
        let analysis = pseudo_inverse(&synthesis)?;
        Self::new(synthesis, analysis, TransformCase::PinvOfSynthesis)
    }

    /// `T = pinv(A)` for an arbitrary analysis operator.
    pub fn pinv_of_analysis(analysis: DMatrix<C64>) -> Result<Self> {
        let synthesis = pseudo_inverse(&analysis)?;
        Self::new(synthesis, analysis, TransformCase::PinvOfAnalysis)
    }

    fn check_case(&self) -> Result<()> {
        let (w, f) = self.synthesis.shape();
        let t = &self.synthesis;
        let a = &self.analysis;
        let violation = |what: &str, err: f64| {
            Err(InpaintError::invalid(format!(
                "{} pair violates {what} (error {err:.3e})",
                self.case
            )))
        };
        let adjoint_err = || max_abs_diff(a, &t.adjoint());
        match self.case {
            TransformCase::UnitaryInverse => {
                if w != f {
                    return Err(InpaintError::invalid("unitary pair must be square"));
                }
                let e = identity_error(&(a * t)).max(identity_error(&(t * a)));
                if e > STRUCTURE_TOL {
                    return violation("A T = T A = I", e);
                }
                let e = adjoint_err();
                if e > STRUCTURE_TOL {
                    return violation("A = T*", e);
                }
            }
            TransformCase::RedundantTight => {
                if f <= w {
                    return Err(InpaintError::invalid("redundant tight pair needs F > W"));
                }
                let e = adjoint_err();
                if e > STRUCTURE_TOL {
                    return violation("A = T*", e);
                }
                let e = identity_error(&(t * a));
                if e > STRUCTURE_TOL {
                    return violation("T A = I", e);
                }
            }
            TransformCase::AnalysisTight => {
                if f >= w {
                    return Err(InpaintError::invalid("analysis-tight pair needs F < W"));
                }
                let e = adjoint_err();
                if e > STRUCTURE_TOL {
                    return violation("A = T*", e);
                }
                let e = identity_error(&(a * t));
                if e > STRUCTURE_TOL {
                    return violation("A T = I", e);
                }
            }
            TransformCase::PinvOfSynthesis => {
                let e = projection_error(&(a * t));
                if e > STRUCTURE_TOL {
                    return violation("A T orthogonal projection", e);
                }
            }
            TransformCase::PinvOfAnalysis => {
                let e = projection_error(&(t * a));
                if e > STRUCTURE_TOL {
                    return violation("T A orthogonal projection", e);
                }
            }
        }
        Ok(())
    }

    /// The `W x F` synthesis operator.
    pub fn synthesis(&self) -> &DMatrix<C64> {
        &self.synthesis
    }

    /// The `F x W` analysis operator.
    pub fn analysis(&self) -> &DMatrix<C64> {
        &self.analysis
    }

    pub fn case(&self) -> TransformCase {
        self.case
    }

    pub fn frame_length(&self) -> usize {
        self.synthesis.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.synthesis.ncols()
    }

    /// Whether synthesized frames are real for Hermitian-symmetric
    /// coefficients, exactly: column `F - f` equals the conjugate of
    /// column `f` bit for bit.
    pub fn has_conjugate_columns(&self) -> bool {
        self.conjugate_columns
    }

    /// True when `T` is square and `A` is its inverse.
    pub fn is_invertible(&self) -> bool {
        match self.case {
            TransformCase::UnitaryInverse => true,
            TransformCase::RedundantTight | TransformCase::AnalysisTight => false,
            TransformCase::PinvOfSynthesis | TransformCase::PinvOfAnalysis => {
                self.frame_length() == self.num_bins()
                    && identity_error(self.projection()) <= STRUCTURE_TOL
            }
        }
    }

    /// `T s`.
    pub fn apply_synthesis(&self, coefs: &DVector<C64>) -> Result<DVector<C64>> {
        if coefs.len() != self.num_bins() {
            return Err(InpaintError::invalid(format!(
                "coefficient vector has length {}, expected {}",
                coefs.len(),
                self.num_bins()
            )));
        }
        Ok(&self.synthesis * coefs)
    }

    /// `A x`.
    pub fn apply_analysis(&self, frame: &DVector<C64>) -> Result<DVector<C64>> {
        if frame.len() != self.frame_length() {
            return Err(InpaintError::invalid(format!(
                "frame has length {}, expected {}",
                frame.len(),
                self.frame_length()
            )));
        }
        Ok(&self.analysis * frame)
    }

    /// `A T` (`F x F`), computed on first use.
    pub fn projection(&self) -> &DMatrix<C64> {
        self.projection
            .get_or_init(|| &self.analysis * &self.synthesis)
    }
}

/// Entry-wise Hermitian mirror index `F - f mod F`.
pub fn mirror_bin(f: usize, num_bins: usize) -> usize {
    (num_bins - f) % num_bins
}

/// Column `F - f` is exactly the conjugate of column `f` for every `f`.
fn has_conjugate_columns(t: &DMatrix<C64>) -> bool {
    let f = t.ncols();
    (0..f).all(|k| {
        let m = mirror_bin(k, f);
        t.column(k)
            .iter()
            .zip(t.column(m).iter())
            .all(|(a, b)| *a == b.conj())
    })
}
