use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod commands;

/// Region-based PolSAR classification by minimum stochastic-distance tests.
#[derive(Parser, Debug)]
#[command(name = "polsar", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Simulate a mosaic of Wishart tiles, its ground truth and training prototypes.
    Simulate(SimulateArgs),
    /// Classify the segments of a covariance raster against prototypes.
    Classify(ClassifyArgs),
    /// Accuracy, kappa and non-rejection rate of a classification, or a kappa comparison.
    Assess(AssessArgs),
    /// Write the built-in class covariances as a prototype file.
    ExportPresets(ExportArgs),
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Built-in layout; `paper` is the 3×3 mosaic of the nine classes.
    #[arg(long, conflicts_with = "layout")]
    preset: Option<String>,
    /// Class grid: rows separated by `;`, classes by `,`.
    #[arg(long)]
    layout: Option<String>,
    /// Tile side in pixels.
    #[arg(long, default_value_t = 150)]
    tile: usize,
    /// Number of looks (an integer for simulation).
    #[arg(long, default_value_t = 4)]
    looks: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pixels per training prototype; 0 skips the prototypes.
    #[arg(long, default_value_t = 900)]
    prototypes: usize,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ClassifyArgs {
    #[arg(long)]
    raster: PathBuf,
    #[arg(long)]
    prototypes: PathBuf,
    /// Regular grid segmentation with this tile size.
    #[arg(long, conflicts_with = "segments", required_unless_present = "segments")]
    grid: Option<usize>,
    /// Segment label raster.
    #[arg(long)]
    segments: Option<PathBuf>,
    /// kl, bhattacharyya, hellinger, renyi, chi2, gauss-bhattacharyya or all; repeatable.
    #[arg(long = "stat", default_value = "bhattacharyya")]
    stats: Vec<String>,
    /// Order of the Rényi statistic.
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    /// Significance level of the p-value map.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Override the number of looks recorded in the raster and prototypes.
    #[arg(long)]
    looks: Option<f64>,
    /// Add the majority vote over the requested statistics.
    #[arg(long)]
    fuse: bool,
    /// Also list every class whose p-value reaches this threshold.
    #[arg(long)]
    fuzzy_threshold: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct AssessArgs {
    /// Predicted label raster written by `classify`.
    #[arg(long, required_unless_present = "compare")]
    predicted: Option<PathBuf>,
    /// Ground-truth label raster.
    #[arg(long, required_unless_present = "compare")]
    truth: Option<PathBuf>,
    /// Pixels labelled −1 here are left out.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Assignment table, for the non-rejection rate.
    #[arg(long)]
    assignments: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Test two reports for equal kappa.
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with_all = ["predicted", "truth"])]
    compare: Option<Vec<PathBuf>>,
    /// Write the report as JSON here.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ExportArgs {
    /// Nominal sample size stored with each class.
    #[arg(long, default_value_t = 900)]
    sample_size: usize,
    #[arg(long, default_value_t = 4.0)]
    looks: f64,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e
                .downcast_ref::<polsar::Error>()
                .map_or(false, polsar::Error::is_validation);
            ExitCode::from(if validation { 1 } else { 2 })
        }
    }
}
