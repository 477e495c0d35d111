use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser};
use nmf_inpaint::{Algorithm, EstimatorConfig};
use nmf_inpaint_cli::{run_experiment, CliError, Degradation, ExperimentSpec};

/// Restore missing samples of a WAV file with a low-rank Gaussian model.
#[derive(Debug, Parser)]
#[command(version, about)]
#[command(group(ArgGroup::new("degradation").required(true).args(["drop_fraction", "gaps", "mask"])))]
struct Args {
    /// Input WAV file (mono; other channel counts are downmixed).
    input: PathBuf,

    /// em-tf, em-t, am or am-to-em-tf.
    #[arg(long, default_value = "em-tf")]
    algorithm: Algorithm,

    /// NMF rank K.
    #[arg(long, default_value_t = 20)]
    rank: usize,

    /// Frame length W in samples.
    #[arg(long, default_value_t = 4096)]
    frame_length: usize,

    /// Hop in samples; must be half the frame length. Defaults to W/2.
    #[arg(long)]
    hop: Option<usize>,

    /// Number of frequency bins F (W or 2W). Defaults to W.
    #[arg(long)]
    bins: Option<usize>,

    #[arg(long, default_value_t = 100)]
    outer_iters: usize,

    /// Multiplicative-update rounds per outer iteration.
    #[arg(long, default_value_t = 10)]
    nmf_iters: usize,

    /// AM iterations before switching (am-to-em-tf).
    #[arg(long, default_value_t = 5)]
    switch_after: usize,

    /// Seed for initialization and generated degradations.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Drop this fraction of samples at random.
    #[arg(long)]
    drop_fraction: Option<f64>,

    /// Cut this many compact gaps (requires --gap-ms).
    #[arg(long, requires = "gap_ms")]
    gaps: Option<usize>,

    /// Length of each gap in milliseconds.
    #[arg(long, requires = "gaps")]
    gap_ms: Option<f64>,

    /// Minimum observed context around each gap in milliseconds. Defaults to the gap length.
    #[arg(long, requires = "gaps")]
    min_context_ms: Option<f64>,

    /// File of newline-separated 0-based missing indices; the input is taken as degraded.
    #[arg(long)]
    mask: Option<PathBuf>,

    /// Ground-truth WAV for SNR columns.
    #[arg(long)]
    reference: Option<PathBuf>,

    /// Evaluate the objective after every iteration.
    #[arg(long)]
    track_objective: bool,

    /// Allow AM with a non-invertible synthesis operator.
    #[arg(long)]
    allow_heuristic: bool,

    /// Diagonal loading of the observed covariance, relative to its mean diagonal.
    #[arg(long, default_value_t = 1e-8)]
    ridge: f64,

    /// Record wall-clock milliseconds per iteration in the trace (output is then not reproducible).
    #[arg(long)]
    record_time: bool,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Args {
    fn into_spec(self) -> ExperimentSpec {
        let degradation = if let Some(fraction) = self.drop_fraction {
            Degradation::Random {
                fraction,
                seed: self.seed,
            }
        } else if let (Some(count), Some(gap_ms)) = (self.gaps, self.gap_ms) {
            Degradation::Gaps {
                count,
                gap_ms,
                min_context_ms: self.min_context_ms.unwrap_or(gap_ms),
                seed: self.seed,
            }
        } else {
            // clap guarantees one of the three
            Degradation::MaskFile(self.mask.expect("degradation group is required"))
        };
        ExperimentSpec {
            input: self.input,
            degradation,
            reference: self.reference,
            estimator: EstimatorConfig {
                algorithm: self.algorithm,
                rank: self.rank,
                outer_iters: self.outer_iters,
                nmf_inner_iters: self.nmf_iters,
                switch_after: self.switch_after,
                seed: self.seed,
                relative_ridge: self.ridge,
                track_objective: self.track_objective,
                allow_heuristic: self.allow_heuristic,
                ..Default::default()
            },
            frame_length: self.frame_length,
            hop: self.hop.unwrap_or(self.frame_length / 2),
            bins: self.bins.unwrap_or(self.frame_length),
            out: self.out,
            record_time: self.record_time,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let spec = Args::parse().into_spec();
    match run_experiment(&spec) {
        Ok(summary) => {
            let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.2} dB"));
            println!(
                "{} iterations; gap SNR {} (peak {} at iteration {})",
                summary.iterations,
                fmt(summary.final_snr_gap_db),
                fmt(summary.peak_snr_gap_db),
                summary
                    .peak_iteration
                    .map_or("n/a".to_string(), |i| i.to_string()),
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &CliError) -> u8 {
    err.exit_code() as u8
}
