//! Windowed framing of a signal and overlap-add resynthesis.
//!
//! A signal of length `L` is cut into `N` frames of length `W` with hop
//! `W / 2`. The sine window is applied both when framing and when folding the
//! frames back together, so that the squared windows of two overlapping
//! frames sum to one on every interior sample.
//!
//! The gap mask is global (indexed by signal position) and is projected onto
//! each frame. Positions past the end of the signal are zero-padded and count
//! as observed zeros.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{InpaintError, Result};
use crate::C64;

/// Relative tolerance on imaginary parts accepted by [`overlap_add`].
pub const IMAG_TOLERANCE: f64 = 1e-6;

/// A real, finite, mono signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(InpaintError::invalid(
                "signal must contain at least one sample",
            ));
        }
        if sample_rate == 0 {
            return Err(InpaintError::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(InpaintError::invalid(format!("sample {i} is not finite")));
        }
        Ok(Signal {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// The set of missing sample positions of a signal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapMask {
    missing: Vec<usize>,
    is_missing: Vec<bool>,
}

impl GapMask {
    /// Build a mask from strictly increasing missing indices.
    pub fn new(missing: Vec<usize>, signal_len: usize) -> Result<Self> {
        if missing.windows(2).any(|w| w[0] >= w[1]) {
            return Err(InpaintError::invalid(
                "missing indices must be strictly increasing",
            ));
        }
        if let Some(&last) = missing.last() {
            if last >= signal_len {
                return Err(InpaintError::invalid(format!(
                    "missing index {last} out of range for signal of length {signal_len}"
                )));
            }
        }
        if missing.len() >= signal_len {
            return Err(InpaintError::invalid(
                "at least one sample must be observed",
            ));
        }
        let mut is_missing = vec![false; signal_len];
        for &i in &missing {
            is_missing[i] = true;
        }
        Ok(GapMask {
            missing,
            is_missing,
        })
    }

    /// Build a mask from indices in any order; duplicates are merged.
    pub fn from_unsorted(mut missing: Vec<usize>, signal_len: usize) -> Result<Self> {
        missing.sort_unstable();
        missing.dedup();
        Self::new(missing, signal_len)
    }

    /// A mask with nothing missing.
    pub fn none(signal_len: usize) -> Result<Self> {
        Self::new(Vec::new(), signal_len)
    }

    /// Parse the newline-delimited mask file format (0-based missing indices).
    /// Blank lines are ignored.
    pub fn parse(text: &str, signal_len: usize) -> Result<Self> {
        let mut indices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let idx = line
                .parse::<usize>()
                .map_err(|e| InpaintError::invalid(format!("mask line {}: {e}", lineno + 1)))?;
            indices.push(idx);
        }
        Self::from_unsorted(indices, signal_len)
    }

    /// Serialize to the mask file format, one index per line, LF-terminated.
    pub fn to_file_string(&self) -> String {
        let mut out = String::with_capacity(self.missing.len() * 8);
        for i in &self.missing {
            writeln!(out, "{i}").unwrap();
        }
        out
    }

    pub fn missing(&self) -> &[usize] {
        &self.missing
    }

    pub fn observed(&self) -> Vec<usize> {
        (0..self.is_missing.len())
            .filter(|&i| !self.is_missing[i])
            .collect()
    }

    pub fn is_missing(&self, index: usize) -> bool {
        self.is_missing.get(index).copied().unwrap_or(false)
    }

    pub fn signal_len(&self) -> usize {
        self.is_missing.len()
    }

    pub fn num_missing(&self) -> usize {
        self.missing.len()
    }
}

/// Sine window `w[t] = sin(pi (t + 0.5) / len)`.
pub fn make_sine_window(length: usize) -> Result<Vec<f64>> {
    if length < 2 || !length.is_multiple_of(2) {
        return Err(InpaintError::invalid(format!(
            "window length must be even and at least 2, got {length}"
        )));
    }
    let mut w: Vec<f64> = (0..length)
        .map(|t| (PI * (t as f64 + 0.5) / length as f64).sin())
        .collect();
    // exact symmetry
    for t in length / 2..length {
        w[t] = w[length - 1 - t];
    }
    Ok(w)
}

/// Frame length, hop, window and the length of the framed signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGeometry {
    frame_length: usize,
    hop: usize,
    window: Vec<f64>,
    signal_len: usize,
    num_frames: usize,
    sample_rate: u32,
}

impl FrameGeometry {
    pub fn new(
        signal_len: usize,
        sample_rate: u32,
        frame_length: usize,
        hop: usize,
        window: Vec<f64>,
    ) -> Result<Self> {
        if frame_length < 2 || !frame_length.is_multiple_of(2) {
            return Err(InpaintError::invalid(
                "frame length must be even and at least 2",
            ));
        }
        if hop * 2 != frame_length {
            return Err(InpaintError::invalid(format!(
                "only hop = frame_length / 2 is supported (frame length {frame_length}, hop {hop})"
            )));
        }
        if window.len() != frame_length {
            return Err(InpaintError::invalid(
                "window length must equal the frame length",
            ));
        }
        if window.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(InpaintError::invalid("window values must lie in [0, 1]"));
        }
        if frame_length > signal_len {
            return Err(InpaintError::invalid(format!(
                "frame length {frame_length} exceeds signal length {signal_len}"
            )));
        }
        let num_frames = (signal_len - frame_length).div_ceil(hop) + 1;
        Ok(FrameGeometry {
            frame_length,
            hop,
            window,
            signal_len,
            num_frames,
            sample_rate,
        })
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Signal positions covered by two frames, where the window-squared sum is one.
    pub fn interior(&self) -> std::ops::Range<usize> {
        self.hop..(self.num_frames * self.hop).min(self.signal_len)
    }

    /// Fold `W x N` frames back into a real signal.
    ///
    /// Fails with [`InpaintError::SymmetryViolation`] if the imaginary part of
    /// the folded signal exceeds `1e-6` of its real peak.
    pub fn overlap_add(&self, frames: &DMatrix<C64>) -> Result<Signal> {
        let (re, im) = self.overlap_add_parts(frames)?;
        let max_re = re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_im = im.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_im > IMAG_TOLERANCE * max_re {
            return Err(InpaintError::SymmetryViolation {
                imag: max_im,
                real: max_re,
            });
        }
        Signal::new(re, self.sample_rate)
    }

    /// Fold frames without the realness check, returning real and imaginary parts.
    pub fn overlap_add_parts(&self, frames: &DMatrix<C64>) -> Result<(Vec<f64>, Vec<f64>)> {
        if frames.nrows() != self.frame_length || frames.ncols() != self.num_frames {
            return Err(InpaintError::invalid(format!(
                "frame matrix is {}x{}, expected {}x{}",
                frames.nrows(),
                frames.ncols(),
                self.frame_length,
                self.num_frames
            )));
        }
        let mut re = vec![0.0; self.signal_len];
        let mut im = vec![0.0; self.signal_len];
        for (n, col) in frames.column_iter().enumerate() {
            let start = n * self.hop;
            for (t, (x, w)) in col.iter().zip(&self.window).enumerate() {
                let i = start + t;
                if i >= self.signal_len {
                    break;
                }
                re[i] += w * x.re;
                im[i] += w * x.im;
            }
        }
        Ok((re, im))
    }
}

/// Windowed frames of a signal together with the per-frame observed positions.
#[derive(Debug, Clone)]
pub struct FrameSet {
    geometry: FrameGeometry,
    frames: DMatrix<C64>,
    frame_masks: Vec<Vec<usize>>,
}

impl FrameSet {
    pub fn geometry(&self) -> &FrameGeometry {
        &self.geometry
    }

    /// The `W x N` matrix of windowed frames; missing positions hold zero.
    pub fn frames(&self) -> &DMatrix<C64> {
        &self.frames
    }

    pub fn frame_masks(&self) -> &[Vec<usize>] {
        &self.frame_masks
    }

    pub fn num_frames(&self) -> usize {
        self.geometry.num_frames
    }

    pub fn frame_length(&self) -> usize {
        self.geometry.frame_length
    }

    /// Observed positions of frame `n` and the windowed values there.
    pub fn observed(&self, n: usize) -> (&[usize], DVector<C64>) {
        let idx = &self.frame_masks[n];
        let values = DVector::from_iterator(idx.len(), idx.iter().map(|&t| self.frames[(t, n)]));
        (idx, values)
    }

    pub fn overlap_add(&self) -> Result<Signal> {
        self.geometry.overlap_add(&self.frames)
    }
}

/// Fold a frame set back into a signal (see [`FrameGeometry::overlap_add`]).
pub fn overlap_add(frames: &FrameSet) -> Result<Signal> {
    frames.overlap_add()
}

/// Cut `signal` into windowed frames and project `mask` onto each frame.
pub fn frame_signal(
    signal: &Signal,
    mask: &GapMask,
    frame_length: usize,
    hop: usize,
    window: &[f64],
) -> Result<FrameSet> {
    if mask.signal_len() != signal.len() {
        return Err(InpaintError::invalid(format!(
            "mask covers {} samples but the signal has {}",
            mask.signal_len(),
            signal.len()
        )));
    }
    let geometry = FrameGeometry::new(
        signal.len(),
        signal.sample_rate(),
        frame_length,
        hop,
        window.to_vec(),
    )?;
    let n_frames = geometry.num_frames;
    let samples = signal.samples();
    let mut frames = DMatrix::<C64>::zeros(frame_length, n_frames);
    let mut frame_masks = Vec::with_capacity(n_frames);
    for n in 0..n_frames {
        let start = n * hop;
        let mut observed = Vec::with_capacity(frame_length);
        for t in 0..frame_length {
            let i = start + t;
            if i >= samples.len() {
                // padding: observed zero
                observed.push(t);
            } else if !mask.is_missing(i) {
                frames[(t, n)] = C64::new(window[t] * samples[i], 0.0);
                observed.push(t);
            }
        }
        frame_masks.push(observed);
    }
    Ok(FrameSet {
        geometry,
        frames,
        frame_masks,
    })
}
