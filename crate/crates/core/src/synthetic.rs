//! Signals drawn from the generative model itself.
//!
//! Useful as ground truth: the variances that produced the signal are known,
//! so an estimator's output can be compared against what the true model
//! would predict.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{InpaintError, Result};
use crate::framing::{make_sine_window, FrameGeometry, Signal};
use crate::isnmf::NmfModel;
use crate::transforms::{make_dft_pair, mirror_bin};
use crate::C64;

/// Shape of a synthetic problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub frame_length: usize,
    pub rank: usize,
    pub num_frames: usize,
    pub sample_rate: u32,
    pub seed: u64,
}

/// A signal together with the model it was drawn from.
#[derive(Debug, Clone)]
pub struct SyntheticSignal {
    pub signal: Signal,
    pub model: NmfModel,
}

/// Line-spectrum dictionary: column `k` peaks at its own random bin with a
/// little leakage into the neighbours over a small floor, mirrored so that
/// `w[f] = w[F - f]`.
///
/// One line per component keeps the model predictive enough that missing
/// samples can be recovered from a minority of observed ones.
fn line_dictionary(bins: usize, rank: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let half = bins / 2;
    if rank > half.saturating_sub(2) {
        return Err(InpaintError::invalid(format!(
            "rank {rank} too large for {bins} bins in a line dictionary"
        )));
    }
    let peaks = rand::seq::index::sample(rng, half - 2, rank);
    let mut w = DMatrix::from_element(bins, rank, 1e-4);
    for (k, p) in peaks.into_iter().enumerate() {
        let f = p + 1;
        w[(f, k)] += 1.0;
        w[(f - 1, k)] += 0.05;
        w[(f + 1, k)] += 0.05;
    }
    for f in (half + 1)..bins {
        let src = w.row(mirror_bin(f, bins)).into_owned();
        w.row_mut(f).copy_from(&src);
    }
    Ok(w)
}

/// Draw `s_n ~ CN(0, diag(v_n))` with Hermitian symmetry, synthesize
/// `x_n = T s_n` with the unitary DFT and overlap-add the windowed frames.
pub fn model_signal(spec: SyntheticSpec) -> Result<SyntheticSignal> {
    let SyntheticSpec {
        frame_length,
        rank,
        num_frames,
        sample_rate,
        seed,
    } = spec;
    if frame_length < 8 || rank == 0 || num_frames == 0 {
        return Err(InpaintError::invalid(
            "synthetic problem needs W >= 8, K >= 1, N >= 1",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bins = frame_length;
    let w = line_dictionary(bins, rank, &mut rng)?;
    let h = DMatrix::from_fn(rank, num_frames, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        0.05 * (z.abs() + 0.2)
    });
    let model = NmfModel::new(w, h)?;
    let v = model.variances();

    let pair = make_dft_pair(frame_length, bins)?;
    let mut coefs = DMatrix::<C64>::zeros(bins, num_frames);
    for n in 0..num_frames {
        let mut s = DVector::<C64>::zeros(bins);
        for f in 0..=bins / 2 {
            let m = mirror_bin(f, bins);
            let sd = v[(f, n)].sqrt();
            let a: f64 = StandardNormal.sample(&mut rng);
            if m == f {
                s[f] = C64::new(sd * a, 0.0);
            } else {
                let b: f64 = StandardNormal.sample(&mut rng);
                let c = C64::new(a, b) * (sd / std::f64::consts::SQRT_2);
                s[f] = c;
                s[m] = c.conj();
            }
        }
        coefs.set_column(n, &s);
    }
    let frames = pair.synthesis() * coefs;
    let len = (num_frames + 1) * frame_length / 2;
    let geometry = FrameGeometry::new(
        len,
        sample_rate,
        frame_length,
        frame_length / 2,
        make_sine_window(frame_length)?,
    )?;
    let (re, _) = geometry.overlap_add_parts(&frames)?;
    Ok(SyntheticSignal {
        signal: Signal::new(re, sample_rate)?,
        model,
    })
}
