//! WAV input and output.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use log::warn;
use nmf_inpaint::Signal;

use crate::error::{CliError, Result};

/// Read a WAV file as a mono signal in `[-1, 1]`.
///
/// Integer PCM is scaled by `2^(bits - 1)`; 32-bit float is taken as is.
/// Multichannel files are downmixed to the mean of their channels.
pub fn read_wav(path: &Path) -> Result<Signal> {
    let mut reader = WavReader::open(path).map_err(|e| CliError::io(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(CliError::InvalidSpec(format!(
            "{}: no channels",
            path.display()
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CliError::io(path, e))?,
        (SampleFormat::Int, bits @ 1..=32) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| CliError::io(path, e))?
        }
        (format, bits) => {
            return Err(CliError::InvalidSpec(format!(
                "{}: unsupported sample format {format:?} with {bits} bits",
                path.display()
            )))
        }
    };
    let samples = if channels == 1 {
        interleaved
    } else {
        warn!("{}: downmixing {channels} channels to mono", path.display());
        interleaved
            .chunks_exact(channels)
            .map(|c| c.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    Signal::new(samples, spec.sample_rate)
        .map_err(|e| CliError::InvalidSpec(format!("{}: {e}", path.display())))
}

/// Write `signal` as mono 32-bit float.
pub fn write_wav(path: &Path, signal: &Signal) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| CliError::io(path, e))?;
    for &s in signal.samples() {
        writer
            .write_sample(s as f32)
            .map_err(|e| CliError::io(path, e))?;
    }
    writer.finalize().map_err(|e| CliError::io(path, e))
}
