//! `ecm`: model predictions, scaling curves, host benchmarks, model
//! validation and accuracy tables.

mod commands;
mod render;
mod resolve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ecm_core::bench::DEFAULT_SEED;
use ecm_core::kernels::Precision;

#[derive(Parser)]
#[command(name = "ecm", version, about = "Execution-Cache-Memory model and dot-product harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Input tuple, prediction, per-level performance and saturation.
    Predict {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_enum, default_value_t = Format::Shorthand)]
        format: Format,
    },
    /// Chip-level performance against active cores, as CSV.
    Scale {
        #[command(flatten)]
        target: Target,
        /// Defaults to the machine's core count.
        #[arg(long)]
        max_cores: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Working-set sweep of a reference kernel on this host, as CSV.
    Bench {
        /// Model machine for clock and cache-line size.
        #[arg(short, long, default_value = "hsw")]
        machine: String,
        #[command(flatten)]
        sweep: SweepArgs,
        /// Thread counts, e.g. `1,2,4`; several give a thread-scaling sweep.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        threads: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measured cycles per cache line against the prediction, level by level.
    Validate {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        sweep: SweepArgs,
        /// Compare these samples instead of running a sweep.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Exit with status 1 if any level is flagged or has no samples.
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Also write the measured samples as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Naive and compensated relative errors against the exact dot.
    Accuracy {
        /// Target condition numbers.
        #[arg(long, value_delimiter = ',', default_value = "1e4,1e8,1e12")]
        cond: Vec<f64>,
        /// Vector lengths.
        #[arg(long, value_delimiter = ',', default_value = "4096")]
        n: Vec<usize>,
        #[arg(long, value_enum, default_value_t = PrecisionArg::F64)]
        precision: PrecisionArg,
        #[arg(long, default_value_t = 1)]
        lanes: usize,
        #[arg(long, default_value_t = 1)]
        unroll: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Built-in machines and kernels.
    List {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Args)]
struct Target {
    /// Built-in machine name or path to a machine file.
    #[arg(short, long)]
    machine: String,
    /// Built-in kernel name or path to a kernel file.
    #[arg(short, long)]
    kernel: String,
}

#[derive(Args)]
struct SweepArgs {
    /// Reference kernel, `naive-l<L>` or `kahan-l<L>u<U>`.
    #[arg(long)]
    variant: Option<String>,
    /// Working sets in bytes: a list such as `16K,1M,64M` or a range
    /// `4K..64M` with four points per doubling. Defaults to points inside
    /// every level window of the host.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long, default_value_t = ecm_core::bench::DEFAULT_REPETITIONS)]
    reps: usize,
    /// Pin workers round-robin over the host's memory domains.
    #[arg(long)]
    pin: bool,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F64)]
    precision: PrecisionArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Clock in GHz for cycle conversion; defaults to the machine's.
    #[arg(long)]
    frequency: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Shorthand,
    Table,
    JsonLines,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        }
    }
}

/// Failures that end the process with a non-zero status.
#[derive(Debug)]
enum Failure {
    /// Bad flags, unresolvable references, unreadable files.
    Usage(String),
    /// Flagged rows under `--strict`.
    Validation(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Predict { target, format } => commands::predict(&target, format),
        Command::Scale { target, max_cores, out } => commands::scale(&target, max_cores, out.as_deref()),
        Command::Bench { machine, sweep, threads, out } => commands::bench(&machine, &sweep, &threads, out.as_deref()),
        Command::Validate { target, sweep, samples, strict, format, out } => {
            commands::validate(&target, &sweep, samples.as_deref(), strict, format, out.as_deref())
        }
        Command::Accuracy { cond, n, precision, lanes, unroll, seed, format } => {
            commands::accuracy(&cond, &n, precision.into(), lanes, unroll, seed, format)
        }
        Command::List { format } => commands::list(format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("ecm: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("ecm: {msg}");
            ExitCode::from(2)
        }
    }
}
