//! Command-line front end: runs benchmark studies and verification batteries
//! and post-processes trajectory CSVs.

pub mod bench;
pub mod error;
pub mod output;
pub mod smooth;
pub mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::{CliError, Outcome};

pub const OUT_DIR_ENV: &str = "LAPROP_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "laprop", version, about = "LaProp benchmark and verification runner")]
pub struct Cli {
    /// Worker threads for independent runs (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "laprop-out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a benchmark study described by a TOML config.
    Bench {
        #[arg(value_enum)]
        study: BenchKind,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
        /// Replace the configured seed list with 0..N.
        #[arg(long)]
        seeds: Option<u64>,
        /// MNIST IDX images file (overrides the configured dataset).
        #[arg(long, requires = "mnist_labels")]
        mnist_images: Option<PathBuf>,
        /// MNIST IDX labels file.
        #[arg(long, requires = "mnist_images")]
        mnist_labels: Option<PathBuf>,
    },
    /// Re-run the benchmark recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run verification batteries with built-in defaults.
    Verify {
        #[arg(value_enum)]
        battery: Battery,
        #[command(flatten)]
        out: OutArgs,
        /// Seeds for the heavy-tail battery.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Smooth the numeric columns of a CSV.
    Smooth {
        #[arg(long)]
        input: PathBuf,
        /// Centered moving-average window.
        #[arg(long, conflicts_with = "gaussian", required_unless_present = "gaussian")]
        window: Option<usize>,
        /// Gaussian kernel standard deviation, in rows.
        #[arg(long)]
        gaussian: Option<f64>,
        /// Output file (default: `<input stem>.smoothed.csv` next to the input).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Columns to smooth (default: every fully numeric column except `step`).
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchKind {
    Rosenbrock,
    Deepfc,
    Regret,
    Grid,
    Spike,
}

impl BenchKind {
    pub fn name(self) -> &'static str {
        match self {
            BenchKind::Rosenbrock => "rosenbrock",
            BenchKind::Deepfc => "deepfc",
            BenchKind::Regret => "regret",
            BenchKind::Grid => "grid",
            BenchKind::Spike => "spike",
        }
    }

    pub fn from_name(name: &str) -> Option<BenchKind> {
        BenchKind::value_variants().iter().copied().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Battery {
    Bounds,
    Heavytail,
    Equivalence,
    Gradcheck,
    All,
}

/// Executes a parsed command line and returns the process exit code:
/// 0 on success, 1 on configuration or I/O errors, 2 when a verification
/// battery fails.
pub fn run(cli: Cli) -> u8 {
    let result = execute(cli);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    error::exit_code(&result)
}

pub fn execute(cli: Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure {n} threads: {e}")))?;
    }
    match cli.command {
        Command::Bench { study, config, out, seeds, mnist_images, mnist_labels } => {
            let overrides = bench::Overrides { seeds, mnist: mnist_images.zip(mnist_labels) };
            bench::bench_from_file(study, &config, &out.out, &overrides)?;
            Ok(Outcome::Success)
        }
        Command::Replay { manifest, out } => {
            bench::replay(&manifest, &out.out)?;
            Ok(Outcome::Success)
        }
        Command::Verify { battery, out, seeds } => verify::cmd_verify(battery, &out.out, seeds),
        Command::Smooth { input, window, gaussian, output, columns } => {
            let kernel = match (window, gaussian) {
                (Some(w), _) => smooth::Kernel::Window(w),
                (None, Some(s)) => smooth::Kernel::Gaussian(s),
                (None, None) => return Err(CliError::Config("pass --window or --gaussian".into())),
            };
            let output = output.unwrap_or_else(|| smooth::default_output(&input));
            smooth::smooth_file(&input, &output, kernel, &columns)?;
            Ok(Outcome::Success)
        }
    }
}
