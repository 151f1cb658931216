//! Batch pipeline driver: simulate → ingest → associate → enrich →
//! fingerprint → distmatrix → register → report.
//!
//! Every stage reads and writes the beam store or plain files, never
//! process memory, so a pipeline can stop and resume at any stage. Each
//! subcommand prints its resolved effective configuration before touching
//! anything, succeeds with exit code 0, and otherwise writes a single
//! machine-parsable line to stderr and exits with a code describing the
//! failure class:
//!
//! | code | meaning                                  |
//! |------|------------------------------------------|
//! | 0    | success                                  |
//! | 1    | unexpected failure (I/O and similar)     |
//! | 2    | invalid configuration or flags           |
//! | 3    | missing input (file, store, or stage)    |
//! | 4    | coverage failure (not enough data)       |
//! | 5    | store is locked by another process       |
//! | 6    | malformed data in an input or the store  |

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("coverage: {0}")]
    Coverage(String),
    #[error("store busy: {0}")]
    Busy(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::Coverage(_) => 4,
            CliError::Busy(_) => 5,
            CliError::Data(_) => 6,
        }
    }
}

impl From<beamlink::store::StoreError> for CliError {
    fn from(e: beamlink::store::StoreError) -> Self {
        use beamlink::store::StoreError::*;
        let text = config::flat(&e.to_string());
        match e {
            Busy(_) | ReadOnly => CliError::Busy(text),
            NotAStore(_) => CliError::MissingInput(text),
            InvalidParams(_) => CliError::Config(text),
            NotEmpty(_) | UnknownPlatform(_) | UnknownSensor(_) | UnknownCampaign(_)
            | UnknownSurface(_) | UnknownPackage(_) | UnknownBeam(_) | DuplicateEntity(_)
            | DuplicateBeam(_) | InvalidBeam { .. } | Corrupt { .. } => CliError::Data(text),
            Io(io) => {
                if io.kind() == std::io::ErrorKind::NotFound {
                    CliError::MissingInput(config::flat(&io.to_string()))
                } else {
                    CliError::Other(config::flat(&io.to_string()))
                }
            }
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "beamlink",
    about = "Links LiDAR beams to semantic surfaces and fingerprints their reflectance",
    version
)]
struct Cli {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for the parallel stages; 0 or absent means all cores.
    /// Outputs are identical for every value.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulates a scan and writes a beam table plus ground truth.
    Simulate(SimulateArgs),
    /// Loads a beam table into a store, registering entities as needed.
    Ingest(IngestArgs),
    /// Links stored beams to the surfaces of a scene and persists the links.
    Associate(AssociateArgs),
    /// Exports linked beams and per-object statistics from a store.
    Enrich(EnrichArgs),
    /// Builds per-object radiometric fingerprints from a store.
    Fingerprint(FingerprintArgs),
    /// Emits pairwise and grouped fingerprint distance matrices.
    Distmatrix(DistmatrixArgs),
    /// Aligns two point clouds with point-to-point ICP.
    Register(RegisterArgs),
    /// Renders the association, fingerprint and distance summaries.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Output directory; created, and must be empty if it exists.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Scene file to scan (mutually exclusive with --preset).
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    scene: Option<PathBuf>,
    /// Built-in scene preset: `panel` (four-strip calibration panel).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Random seed for the noise streams.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Campaign id stamped on the simulated beams.
    #[arg(long, value_name = "ID")]
    campaign: Option<String>,
    /// Sensor id stamped on the simulated beams.
    #[arg(long, value_name = "ID")]
    sensor: Option<String>,
    /// Added to every simulated beam id, for joining runs in one store.
    #[arg(long, value_name = "N")]
    beam_id_offset: Option<u64>,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Store directory; created when missing.
    #[arg(long, value_name = "DIR")]
    store: PathBuf,
    /// Beam table (CSV) to load.
    #[arg(long, value_name = "FILE")]
    beams: PathBuf,
    /// Beams per binary package.
    #[arg(long, value_name = "N")]
    package_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct AssociateArgs {
    /// Store directory holding the beams.
    #[arg(long, value_name = "DIR")]
    store: PathBuf,
    /// Scene file with the candidate surfaces.
    #[arg(long, value_name = "FILE")]
    scene: PathBuf,
    /// Uncertainty segment length in metres.
    #[arg(long, value_name = "M")]
    segment_length: Option<f64>,
    /// Capture radius around the segment in metres.
    #[arg(long, value_name = "M")]
    assoc_radius: Option<f64>,
    /// Most links kept per beam.
    #[arg(long, value_name = "N")]
    max_associations: Option<usize>,
    /// Candidate ranking: `min-signed` or `max-signed`.
    #[arg(long, value_name = "RULE")]
    ordering: Option<String>,
}

#[derive(Args, Debug)]
pub struct EnrichArgs {
    /// Store directory holding associated beams.
    #[arg(long, value_name = "DIR")]
    store: PathBuf,
    /// Output directory for enriched.csv and objects.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FingerprintArgs {
    /// Store directory holding associated beams.
    #[arg(long, value_name = "DIR")]
    store: PathBuf,
    /// Output CSV of fingerprint cells.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Scene file, for object function tags.
    #[arg(long, value_name = "FILE")]
    scene: Option<PathBuf>,
    /// Zenith bin edges in degrees, e.g. `0,20,40,60,90`.
    #[arg(long, value_name = "DEG,..", value_delimiter = ',')]
    zenith_bins: Option<Vec<f64>>,
    /// Range bin edges in metres, e.g. `0,15`.
    #[arg(long, value_name = "M,..", value_delimiter = ',')]
    range_edges: Option<Vec<f64>>,
    /// Beams required before a cell counts as covered.
    #[arg(long, value_name = "N")]
    min_cell_count: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DistmatrixArgs {
    /// Store directory holding associated beams.
    #[arg(long, value_name = "DIR")]
    store: PathBuf,
    /// Output directory for the matrix files.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Scene file, for function-grouped matrices.
    #[arg(long, value_name = "FILE")]
    scene: Option<PathBuf>,
    /// Zenith bin edges in degrees.
    #[arg(long, value_name = "DEG,..", value_delimiter = ',')]
    zenith_bins: Option<Vec<f64>>,
    /// Range bin edges in metres.
    #[arg(long, value_name = "M,..", value_delimiter = ',')]
    range_edges: Option<Vec<f64>>,
    /// Range bin whose Q3 profiles are compared.
    #[arg(long, value_name = "N")]
    range_bin: Option<usize>,
    /// Beams required before a cell counts as covered.
    #[arg(long, value_name = "N")]
    min_cell_count: Option<usize>,
}

#[derive(Args, Debug)]
pub struct RegisterArgs {
    /// Source cloud (whitespace-separated `x y z` lines).
    #[arg(long, value_name = "FILE")]
    source: PathBuf,
    /// Target cloud the source is aligned onto.
    #[arg(long, value_name = "FILE")]
    target: PathBuf,
    /// Output file for the recovered transform and quality metrics.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Correspondences farther apart than this are discarded, metres.
    #[arg(long, value_name = "M")]
    inlier_threshold: Option<f64>,
    /// Iteration cap.
    #[arg(long, value_name = "N")]
    max_iterations: Option<usize>,
    /// Stop once the rmse improves by less than this.
    #[arg(long, value_name = "X")]
    convergence_tol: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Store directory to summarise.
    #[arg(long, value_name = "DIR")]
    store: PathBuf,
    /// Output directory for the report files.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Scene file, for function tags.
    #[arg(long, value_name = "FILE")]
    scene: Option<PathBuf>,
    /// Zenith bin edges in degrees.
    #[arg(long, value_name = "DEG,..", value_delimiter = ',')]
    zenith_bins: Option<Vec<f64>>,
    /// Range bin edges in metres.
    #[arg(long, value_name = "M,..", value_delimiter = ',')]
    range_edges: Option<Vec<f64>>,
    /// Range bin rendered in the Q3 profiles and matrices.
    #[arg(long, value_name = "N")]
    range_bin: Option<usize>,
    /// Beams required before a cell counts as covered.
    #[arg(long, value_name = "N")]
    min_cell_count: Option<usize>,
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let file = config::ConfigFile::load(cli.config.as_deref())?;

    let workers = config::pick(cli.workers, file.workers, 0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Other(format!("building the worker pool: {e}")))?;

    match cli.command {
        Command::Simulate(args) => commands::simulate::run(args, &file),
        Command::Ingest(args) => commands::ingest::run(args, &file),
        Command::Associate(args) => commands::associate::run(args, &file),
        Command::Enrich(args) => commands::enrich::run(args, &file),
        Command::Fingerprint(args) => commands::fingerprint::run(args, &file),
        Command::Distmatrix(args) => commands::distmatrix::run(args, &file),
        Command::Register(args) => commands::register::run(args, &file),
        Command::Report(args) => commands::report::run(args, &file),
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {}", config::flat(&e.to_string()));
        std::process::exit(e.exit_code());
    }
}
