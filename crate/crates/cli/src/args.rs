use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lbnet", version, about = "Laplace-Beltrami spectra: FEM reference solves and a GCN predictor")]
pub struct Cli {
    /// TOML config file; command-line flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for every random choice (splits, rotations, shuffling, init)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; 0 uses every logical core, 1 runs fully serial
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// More log output on stderr (repeat for trace)
    #[arg(short, long, global = true, action = clap::ArgAction::Count, conflicts_with = "quiet")]
    pub verbose: u8,

    /// Only log errors
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the topology report of a mesh as JSON
    Inspect(InspectArgs),
    /// Write the per-vertex feature table as CSV
    Features(FeaturesArgs),
    /// Solve for the first k eigenvalues and print a JSON spectrum record
    Spectrum(SpectrumArgs),
    /// Build or resume a dataset manifest from a directory of meshes
    Curate(CurateArgs),
    /// Generate labelled synthetic primitives
    Synth(SynthArgs),
    /// Train a predictor on a manifest or a synthetic dataset
    Train(TrainArgs),
    /// Predict spectra of meshes with a trained checkpoint
    Predict(PredictArgs),
    /// Score a checkpoint on a dataset split
    Eval(EvalArgs),
    /// Time FEM solves against GCN inference
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Auto,
    Off,
    Obj,
    Ply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MassArg {
    Consistent,
    Lumped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Mesh file (OFF, OBJ or ASCII PLY)
    pub mesh: PathBuf,
    /// Input format
    #[arg(long, value_enum, default_value = "auto")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Mesh file
    pub mesh: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: FormatArg,
    /// Scale into the unit cube first, as training and prediction do
    #[arg(long)]
    pub normalize: bool,
    /// Write here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Mesh file
    pub mesh: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: FormatArg,
    /// Number of eigenvalues, zero mode included (capped at vertices - 1)
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Solve on the unit-cube copy; the record then carries its scale factor
    #[arg(long)]
    pub normalize: bool,
    /// Mass matrix
    #[arg(long, value_enum)]
    pub mass: Option<MassArg>,
    /// Spectral shift for the factorization
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<f64>,
    /// Write here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Corpus directory
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    /// Manifest path (JSON lines); artifacts go next to it
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Fewest vertices after remeshing
    #[arg(long)]
    pub min_vertices: Option<usize>,
    /// Most vertices after remeshing
    #[arg(long)]
    pub max_vertices: Option<usize>,
    /// Eigenvalues per spectrum
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Largest genus accepted
    #[arg(long)]
    pub max_genus: Option<u32>,
    /// Rotated copies per accepted mesh
    #[arg(long)]
    pub rotations: Option<usize>,
    /// Spectra closer than this count as duplicates
    #[arg(long)]
    pub dedupe_threshold: Option<f64>,
    /// How the dedupe threshold is read: absolute or relative
    #[arg(long)]
    pub dedupe_mode: Option<String>,
    /// Keep meshes as read instead of remeshing
    #[arg(long)]
    pub no_remesh: bool,
    /// Remeshing attempts before giving up on a mesh
    #[arg(long)]
    pub remesh_iterations: Option<usize>,
    /// Accept meshes with several components
    #[arg(long)]
    pub allow_multi_component: bool,
    /// Accept meshes with boundary
    #[arg(long)]
    pub allow_open: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (meshes/ and labels.jsonl)
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Comma-separated shape classes; all ten when omitted
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<String>,
    /// Parts per class
    #[arg(long, default_value_t = 10)]
    pub per_class: usize,
    /// Eigenvalues per label, zero mode excluded
    #[arg(short, long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Manifest file or synthetic dataset directory
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Output directory for model.json, history.csv and checkpoints
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Learning-rate stages as EPOCHS:LR, comma separated (e.g. 500:1e-4,500:1e-5)
    #[arg(long)]
    pub schedule: Option<String>,
    /// adam or sgd
    #[arg(long)]
    pub optimizer: Option<String>,
    /// rpd, l1 or l2
    #[arg(long)]
    pub loss: Option<String>,
    /// desk or full
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Write a checkpoint every N epochs
    #[arg(long, value_name = "N")]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint written by `train`
    pub checkpoint: PathBuf,
    /// Meshes to predict
    #[arg(required = true)]
    pub meshes: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train`
    pub checkpoint: PathBuf,
    /// Manifest file or synthetic dataset directory
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Which split to score
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Directory for samples.csv, summary.json and histogram.csv
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Histogram bin width in dB
    #[arg(long, default_value_t = 5.0)]
    pub bin_width: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Checkpoint written by `train`
    pub checkpoint: PathBuf,
    /// Mesh files or directories of meshes
    #[arg(required = true)]
    pub meshes: Vec<PathBuf>,
    /// Eigenvalues per FEM solve
    #[arg(short, long, default_value_t = 50)]
    pub k: usize,
    /// Timed runs per mesh, after one warm-up
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Write the timing report here instead of stdout
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
