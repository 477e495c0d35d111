//! Itakura–Saito nonnegative matrix factorization.
//!
//! The variance of time-frequency coefficient `(f, n)` is `v_fn = (W H)_fn`.
//! Fitting `W` and `H` to a power spectrum `P` under the Itakura–Saito
//! divergence is the M-step shared by every estimator in this crate.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{InpaintError, Result};
use crate::transforms::mirror_bin;

/// Floor applied to every factor entry, variance and power value.
pub const EPS_V: f64 = 1e-10;

/// A nonnegative `F x N` matrix of (posterior) powers.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum(DMatrix<f64>);

impl PowerSpectrum {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(InpaintError::invalid(format!(
                "power spectrum entries must be finite and nonnegative, found {v}"
            )));
        }
        Ok(PowerSpectrum(p))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }
}

/// Nonnegative factors `W` (`F x K`) and `H` (`K x N`).
#[derive(Debug, Clone, PartialEq)]
pub struct NmfModel {
    w: DMatrix<f64>,
    h: DMatrix<f64>,
}

impl NmfModel {
    pub fn new(w: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        if w.ncols() != h.nrows() {
            return Err(InpaintError::invalid(format!(
                "rank mismatch: W is {:?}, H is {:?}",
                w.shape(),
                h.shape()
            )));
        }
        if w.ncols() == 0 || w.nrows() == 0 || h.ncols() == 0 {
            return Err(InpaintError::invalid("factor dimensions must be positive"));
        }
        if w.iter().chain(h.iter()).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(InpaintError::invalid(
                "factors must be finite and nonnegative",
            ));
        }
        let mut m = NmfModel { w, h };
        m.floor();
        Ok(m)
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    pub fn num_bins(&self) -> usize {
        self.w.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.h.ncols()
    }

    /// `V = W H`.
    ///
    /// Strictly positive because the factors are floored at [`EPS_V`]. The
    /// product itself is not floored: the multiplicative rules descend on
    /// `D_IS(P | W H)`, and clamping the product would change the function
    /// they minimize.
    pub fn variances(&self) -> DMatrix<f64> {
        &self.w * &self.h
    }

    /// Multiply every activation by `factor` (scales `V` uniformly).
    pub fn scale_activations(&mut self, factor: f64) {
        self.h *= factor;
        self.floor();
    }

    /// Scale `W` columns to unit Euclidean norm and compensate in `H` rows.
    pub fn normalize(&mut self) {
        for k in 0..self.w.ncols() {
            let norm = self.w.column(k).norm();
            if norm > 0.0 {
                self.w.column_mut(k).unscale_mut(norm);
                self.h.row_mut(k).scale_mut(norm);
            }
        }
    }

    /// Whether row `f` and row `F - f mod F` of `W` agree for every `f`.
    pub fn is_mirror_symmetric(&self) -> bool {
        let f = self.w.nrows();
        (0..f).all(|r| self.w.row(r) == self.w.row(mirror_bin(r, f)))
    }

    fn floor(&mut self) {
        self.w.apply(|x| *x = x.max(EPS_V));
        self.h.apply(|x| *x = x.max(EPS_V));
    }
}

/// Draw a model with entries `|N(0, 1)| + 0.1` from a seeded stream, then
/// normalize. With `symmetric`, row `F - f` of `W` copies row `f`.
pub fn init_model(
    num_bins: usize,
    rank: usize,
    num_frames: usize,
    seed: u64,
    symmetric: bool,
) -> Result<NmfModel> {
    if num_bins == 0 || rank == 0 || num_frames == 0 {
        return Err(InpaintError::invalid("F, K and N must all be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let z: f64 = StandardNormal.sample(&mut rng);
        z.abs() + 0.1
    };
    let mut w = DMatrix::zeros(num_bins, rank);
    for f in 0..num_bins {
        for k in 0..rank {
            w[(f, k)] = draw();
        }
    }
    let mut h = DMatrix::zeros(rank, num_frames);
    for k in 0..rank {
        for n in 0..num_frames {
            h[(k, n)] = draw();
        }
    }
    if symmetric {
        for f in (num_bins / 2 + 1)..num_bins {
            let src = w.row(mirror_bin(f, num_bins)).into_owned();
            w.row_mut(f).copy_from(&src);
        }
    }
    let mut model = NmfModel::new(w, h)?;
    model.normalize();
    model.floor();
    Ok(model)
}

/// Neumaier-compensated accumulator.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `D_IS(P | V) = sum p/v - log(p/v) - 1`, with powers clamped to [`EPS_V`].
/// `V` must be strictly positive.
pub fn is_divergence(p: &PowerSpectrum, v: &DMatrix<f64>) -> Result<f64> {
    if p.shape() != v.shape() {
        return Err(InpaintError::invalid(format!(
            "shape mismatch: P is {:?}, V is {:?}",
            p.shape(),
            v.shape()
        )));
    }
    if v.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(InpaintError::invalid(
            "variances must be finite and positive",
        ));
    }
    let mut acc = CompensatedSum::default();
    for (&pp, &vv) in p.matrix().iter().zip(v.iter()) {
        let r = pp.max(EPS_V) / vv;
        acc.add(r - r.ln() - 1.0);
    }
    Ok(acc.value())
}

/// Run `inner_iters` rounds of the IS multiplicative rules on `model`.
///
/// Each round updates `W`, then `H` using the new `W`, then normalizes the
/// columns of `W`. Power entries below [`EPS_V`] are clamped first.
pub fn multiplicative_update(
    model: &NmfModel,
    p: &PowerSpectrum,
    inner_iters: usize,
) -> Result<NmfModel> {
    if inner_iters == 0 {
        return Err(InpaintError::invalid("inner_iters must be at least 1"));
    }
    if p.shape() != (model.num_bins(), model.num_frames()) {
        return Err(InpaintError::invalid(format!(
            "power spectrum is {:?}, model expects {}x{}",
            p.shape(),
            model.num_bins(),
            model.num_frames()
        )));
    }
    let p = p.matrix().map(|x| x.max(EPS_V));
    let mut m = model.clone();
    for _ in 0..inner_iters {
        // W step
        let v = m.variances();
        let v_inv = v.map(|x| 1.0 / x);
        let weighted = p.component_mul(&v_inv.component_mul(&v_inv));
        let ht = m.h.transpose();
        let num = &weighted * &ht;
        let den = &v_inv * &ht;
        m.w.zip_zip_apply(&num, &den, |w, a, b| *w = (*w * a / b).max(EPS_V));

        // H step with the updated W
        let v = m.variances();
        let v_inv = v.map(|x| 1.0 / x);
        let weighted = p.component_mul(&v_inv.component_mul(&v_inv));
        let num = m.w.tr_mul(&weighted);
        let den = m.w.tr_mul(&v_inv);
        m.h.zip_zip_apply(&num, &den, |h, a, b| *h = (*h * a / b).max(EPS_V));

        m.normalize();
        m.floor();
    }
    Ok(m)
}
