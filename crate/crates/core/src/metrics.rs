//! Reconstruction quality and convergence measures.

use crate::error::{InpaintError, Result};

/// Value returned by [`snr`] when the estimate matches the reference exactly.
pub const SNR_CAP_DB: f64 = 300.0;

/// One row of quality/convergence measurements.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricRecord {
    pub snr_db: Option<f64>,
    pub snr_gap_db: Option<f64>,
    pub rel_solution_change: Option<f64>,
    pub rel_objective_change: Option<f64>,
}

/// `10 log10(|y_R|^2 / |y_R - yhat_R|^2)` over the index set `R`
/// (every sample when `restrict` is `None`), capped at [`SNR_CAP_DB`].
pub fn snr(reference: &[f64], estimate: &[f64], restrict: Option<&[usize]>) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(InpaintError::invalid(format!(
            "length mismatch: reference {}, estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    let (signal, error) = match restrict {
        Some(idx) => {
            if let Some(&bad) = idx.iter().find(|&&i| i >= reference.len()) {
                return Err(InpaintError::invalid(format!("index {bad} out of range")));
            }
            energies(idx.iter().map(|&i| (reference[i], estimate[i])))
        }
        None => energies(reference.iter().copied().zip(estimate.iter().copied())),
    };
    if signal == 0.0 {
        return Err(InpaintError::UndefinedMetric(
            "reference has zero energy on the evaluated samples".into(),
        ));
    }
    if error == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / error).log10()).min(SNR_CAP_DB))
}

fn energies(pairs: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    pairs.fold((0.0, 0.0), |(s, e), (y, yh)| {
        (s + y * y, e + (y - yh) * (y - yh))
    })
}

/// `|next - prev| / |prev|` in the Euclidean norm.
pub fn relative_change(prev: &[f64], next: &[f64]) -> Result<f64> {
    if prev.len() != next.len() {
        return Err(InpaintError::invalid(format!(
            "length mismatch: {} vs {}",
            prev.len(),
            next.len()
        )));
    }
    let denom = prev.iter().map(|x| x * x).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(InpaintError::UndefinedMetric(
            "previous iterate has zero norm".into(),
        ));
    }
    let num = prev
        .iter()
        .zip(next)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// `|next - prev| / |prev|` for scalar objectives.
pub fn relative_objective_change(prev: f64, next: f64) -> Option<f64> {
    (prev != 0.0 && prev.is_finite() && next.is_finite()).then(|| (next - prev).abs() / prev.abs())
}
