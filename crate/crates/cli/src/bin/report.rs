use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nmf_inpaint_cli::report::{gap_table, write_gap_table};

/// Average gap SNR over signals from many summary.json files, per algorithm
/// and gap length, and print the table as CSV.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// summary.json files from compact-gap runs with a reference.
    #[arg(required = true)]
    summaries: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match gap_table(&args.summaries)
        .and_then(|rows| write_gap_table(&rows, std::io::stdout().lock()))
    {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
