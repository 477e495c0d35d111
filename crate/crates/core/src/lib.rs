//! Audio inpainting by maximum-likelihood estimation under a low-rank
//! Gaussian time-frequency model.
//!
//! A signal with missing samples is cut into windowed frames. Each frame is
//! modelled as `x_n = T s_n`, where the coefficients `s_n` are independent
//! zero-mean complex Gaussians whose variances follow a nonnegative low-rank
//! factorization `V = W H`. The factors are estimated from the observed
//! samples and the gaps are filled with the conditional mean.
//!
//! Three estimators are provided (see [`estimators`]):
//!
//! - **EM-tf**, an EM algorithm whose complete data are the coefficients,
//! - **EM-t**, an EM algorithm whose complete data are the time frames,
//! - **AM**, alternating minimization treating missing samples as parameters,
//!
//! plus `am-to-em-tf`, which warms EM-tf up with a few AM iterations.
//!
//! ```
//! use nmf_inpaint::{
//!     make_dft_pair, run_estimator, Algorithm, EstimatorConfig, FrameConfig, GapMask, Signal,
//! };
//!
//! let samples: Vec<f64> = (0..512).map(|i| (i as f64 * 0.2).sin()).collect();
//! let signal = Signal::new(samples, 16_000).unwrap();
//! let mask = GapMask::new((200..210).collect(), signal.len()).unwrap();
//!
//! let pair = make_dft_pair(64, 64).unwrap();
//! let cfg = EstimatorConfig { algorithm: Algorithm::EmTf, rank: 4, outer_iters: 10, ..Default::default() };
//! let out = run_estimator(&signal, &mask, FrameConfig::half_overlap(64), &pair, &cfg, Some(&signal)).unwrap();
//!
//! assert_eq!(out.trace.len(), 10);
//! assert!(out.trace.records[9].snr_gap_db.unwrap() > 10.0);
//! ```

pub mod error;
pub mod estimators;
pub mod framing;
pub mod isnmf;
pub mod metrics;
pub mod synthetic;
pub mod transforms;

/// Version of this library.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Complex double used throughout.
pub type C64 = num_complex::Complex<f64>;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/framing.md")]
mod book_framing {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/transforms.md")]
mod book_transforms {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/isnmf.md")]
mod book_isnmf {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/estimators.md")]
mod book_estimators {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/metrics.md")]
mod book_metrics {}

pub use error::{InpaintError, Result};
pub use estimators::{
    run_estimator, Algorithm, EstimatorConfig, FrameConfig, Inpainter, IterationRecord, Phase,
    RunOutput, RunTrace,
};
pub use framing::{
    frame_signal, make_sine_window, overlap_add, FrameGeometry, FrameSet, GapMask, Signal,
};
pub use isnmf::{init_model, is_divergence, multiplicative_update, NmfModel, PowerSpectrum, EPS_V};
pub use metrics::{relative_change, snr, MetricRecord, SNR_CAP_DB};
pub use transforms::{make_dft_pair, make_truncated_dft_pair, TransformCase, TransformPair};
