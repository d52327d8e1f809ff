//! `meshpref` command-line front end.

mod commands;
mod exit;
mod load;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meshpref::mask::DEFAULT_TAU;
use meshpref::mesh::DEFAULT_BINS;
use meshpref::metrics::DEFAULT_SAMPLES;
use meshpref::quad::DEFAULT_DIHEDRAL_TOLERANCE_DEG;

#[derive(Parser, Debug)]
#[command(name = "meshpref", version, about = "Mesh quality scoring and preference-dataset tools")]
struct Cli {
    /// Increase log detail (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct SamplingArgs {
    /// Surface samples per mesh for distance metrics.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest dihedral angle, in degrees, at which two triangles may merge.
    #[arg(long = "dihedral-tol", default_value_t = DEFAULT_DIHEDRAL_TOLERANCE_DEG)]
    pub dihedral_tol: f64,
}

#[derive(Args, Debug, Clone)]
pub struct MaskArgs {
    /// Quad quality threshold for a good face.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Quantization levels per axis.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: u32,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute BER, TS and, given a point cloud, HD and CD for one mesh.
    Score {
        mesh: PathBuf,
        /// Reference point cloud (OBJ with `v` records, or a mesh to sample).
        #[arg(long)]
        pc: Option<PathBuf>,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label faces good or bad and expand the labels to a token mask.
    Mask {
        mesh: PathBuf,
        #[command(flatten)]
        mask: MaskArgs,
        #[arg(long = "dihedral-tol", default_value_t = DEFAULT_DIHEDRAL_TOLERANCE_DEG)]
        dihedral_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank a directory of candidate meshes against one point cloud.
    Rank {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        pointcloud: PathBuf,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a JSONL preference dataset from a directory of candidate sets.
    /// Each subdirectory holds `pointcloud.obj` and candidate `.obj` files.
    BuildDataset {
        #[arg(long)]
        sets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[command(flatten)]
        mask: MaskArgs,
        /// Write the run summary here instead of stderr.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Train the tabular policy on a preference dataset.
    TrainToy {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV with columns step, loss, margin, grad_norm.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the trained table as JSON.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Form::L1Ratio)]
        form: Form,
        /// Ignore the masks and use every token on both sides.
        #[arg(long)]
        global: bool,
    },
    /// Summarise a directory of score reports as mean and median per metric.
    Report {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write synthetic candidate sets made by perturbing a subdivided cube.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        sets: usize,
        #[arg(long, default_value_t = 8)]
        candidates: usize,
        /// Subdivisions per cube edge.
        #[arg(long, default_value_t = 2)]
        subdivisions: usize,
        #[arg(long = "cloud-samples", default_value_t = 2048)]
        cloud_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Quantize and serialize a mesh as one token per line.
    Tokenize {
        mesh: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge triangle pairs and write the quad-dominant mesh as OBJ.
    Quads {
        mesh: PathBuf,
        #[arg(long = "dihedral-tol", default_value_t = DEFAULT_DIHEDRAL_TOLERANCE_DEG)]
        dihedral_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Form {
    L1Ratio,
    SumLogRatio,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

fn run(cli: Cli) -> exit::CliResult<()> {
    use commands as c;
    match cli.command {
        Command::Score { mesh, pc, sampling, out } => c::score(&mesh, pc.as_deref(), &sampling, out.as_deref()),
        Command::Mask {
            mesh,
            mask,
            dihedral_tol,
            out,
        } => c::mask(&mesh, &mask, dihedral_tol, out.as_deref()),
        Command::Rank {
            candidates,
            pointcloud,
            sampling,
            out,
        } => c::rank(&candidates, &pointcloud, &sampling, out.as_deref()),
        Command::BuildDataset {
            sets,
            out,
            sampling,
            mask,
            summary,
        } => c::build_dataset(&sets, &out, &sampling, &mask, summary.as_deref()),
        Command::TrainToy {
            dataset,
            beta,
            lr,
            steps,
            seed,
            trace,
            checkpoint,
            form,
            global,
        } => c::train_toy(c::TrainArgs {
            dataset: &dataset,
            beta,
            lr,
            steps,
            seed,
            trace: trace.as_deref(),
            checkpoint: checkpoint.as_deref(),
            form,
            global,
        }),
        Command::Report { dir, format, out } => c::report(&dir, format, out.as_deref()),
        Command::Synth {
            out,
            sets,
            candidates,
            subdivisions,
            cloud_samples,
            seed,
        } => c::synth(&out, sets, candidates, subdivisions, cloud_samples, seed),
        Command::Tokenize { mesh, bins, out } => c::tokenize(&mesh, bins, out.as_deref()),
        Command::Quads {
            mesh,
            dihedral_tol,
            out,
        } => c::quads(&mesh, dihedral_tol, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.kind.code()
        }
    }
}
