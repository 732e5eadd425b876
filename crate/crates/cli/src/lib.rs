//! `lbnet` command-line front end.

pub mod args;
pub mod config;
pub mod data;
pub mod error;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser};
use lbnet_core::curation::{build_manifest, synth_dataset, ShapeClass, Split, SHAPE_CLASSES};
use lbnet_core::eval::{bench_timing, psnr_histogram, write_histogram_csv, EvalReport};
use lbnet_core::features::{assemble_features, write_feature_csv};
use lbnet_core::fem::{denormalize_values, lb_spectrum_with, MassKind, SolverOptions};
use lbnet_core::mesh::{load_mesh, normalize_unit_cube, save_mesh, validate, MeshFormat, TriMesh};
use lbnet_core::nn::{write_history_csv, Checkpoint, TrainConfig};
use serde::Serialize;

pub use args::Cli;
use args::*;
use config::{parse_schedule, FileConfig};
use data::{load_dataset, SynthLabel, LABELS_FILE};
pub use error::CliError;
use error::*;

/// The clap command tree, for help rendering and introspection.
pub fn command() -> clap::Command {
    Cli::command()
}

/// Parses `argv` (program name first), runs it and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(&cli);
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Info,
            1 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    let _ = env_logger::Builder::new().filter_level(level).target(env_logger::Target::Stderr).try_init();
}

/// Global settings after merging the config file and flags.
#[derive(Debug, Serialize)]
struct Resolved {
    seed: u64,
    /// Seed from the flag or the top level of the config file, if any.
    #[serde(skip)]
    explicit_seed: Option<u64>,
    threads: usize,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let explicit_seed = cli.seed.or(file.seed);
    let global =
        Resolved { seed: explicit_seed.unwrap_or(0), explicit_seed, threads: cli.threads.or(file.threads).unwrap_or(0) };
    log_config("global", &global);
    // a pool may already exist when run() is called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(global.threads).build_global();
    match cli.command {
        Command::Inspect(a) => inspect(a),
        Command::Features(a) => features(a),
        Command::Spectrum(a) => spectrum(a, &file),
        Command::Curate(a) => curate(a, &file, &global),
        Command::Synth(a) => synth(a, &global),
        Command::Train(a) => train(a, &file, &global),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a, &global),
        Command::Bench(a) => bench(a),
    }
}

fn log_config<T: Serialize>(what: &str, value: &T) {
    log::info!("{what} config: {}", serde_json::to_string(value).unwrap_or_default());
}

fn format_of(f: FormatArg) -> MeshFormat {
    match f {
        FormatArg::Auto => MeshFormat::Auto,
        FormatArg::Off => MeshFormat::Off,
        FormatArg::Obj => MeshFormat::Obj,
        FormatArg::Ply => MeshFormat::Ply,
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "mesh".into())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn inspect(a: InspectArgs) -> Result<(), CliError> {
    let mesh = load_mesh(&a.mesh, format_of(a.format))?;
    emit(None, &json(&validate(&mesh)))
}

fn features(a: FeaturesArgs) -> Result<(), CliError> {
    let mut mesh = load_mesh(&a.mesh, format_of(a.format))?;
    if a.normalize {
        mesh = normalize_unit_cube(&mesh)?.0;
    }
    let f = assemble_features(&mesh)?;
    if !f.curvature_failures.is_empty() {
        log::warn!("quadric fit failed at {} vertices; curvature set to 0 there", f.curvature_failures.len());
    }
    let mut buf = Vec::new();
    write_feature_csv(&f, &stem(&a.mesh), &mut buf).expect("writing to memory");
    emit(a.out.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))
}

#[derive(Debug, Serialize)]
struct SpectrumSettings {
    k: usize,
    shift: f64,
    mass: MassKind,
    normalize: bool,
}

fn spectrum(a: SpectrumArgs, file: &FileConfig) -> Result<(), CliError> {
    let mesh = load_mesh(&a.mesh, format_of(a.format))?;
    let mut opts = SolverOptions::default();
    if let Some(s) = a.shift.or(file.spectrum.shift) {
        opts.shift = s;
    }
    opts.mass = match a.mass {
        Some(MassArg::Lumped) => MassKind::Lumped,
        Some(MassArg::Consistent) => MassKind::Consistent,
        None => file.spectrum.mass.unwrap_or_default(),
    };
    let requested = a.k.or(file.spectrum.k).unwrap_or(50);
    if requested == 0 {
        return Err(CliError::Usage("k must be positive".into()));
    }
    let n = mesh.vertex_count();
    let k = requested.min(n.saturating_sub(1)).max(1);
    if k < requested {
        log::warn!("mesh has {n} vertices; computing {k} eigenvalues instead of {requested}");
    }
    log_config("spectrum", &SpectrumSettings { k, shift: opts.shift, mass: opts.mass, normalize: a.normalize });
    let record = if a.normalize {
        let (normalized, scale) = normalize_unit_cube(&mesh)?;
        let mut s = lb_spectrum_with(&normalized, k, &opts)?;
        s.scale = Some(scale);
        s.record(stem(&a.mesh))
    } else {
        lb_spectrum_with(&mesh, k, &opts)?.record(stem(&a.mesh))
    };
    emit(a.out.as_deref(), &json(&record))
}

fn curate(a: CurateArgs, file: &FileConfig, global: &Resolved) -> Result<(), CliError> {
    let mut policy = file.curate.clone();
    policy.rng_seed = global.explicit_seed.unwrap_or(policy.rng_seed);
    let (lo, hi) = policy.target_vertex_range;
    policy.target_vertex_range = (a.min_vertices.unwrap_or(lo), a.max_vertices.unwrap_or(hi));
    if let Some(k) = a.k {
        policy.k = k;
    }
    if let Some(g) = a.max_genus {
        policy.max_genus = g;
    }
    if let Some(r) = a.rotations {
        policy.rotations_per_mesh = r;
    }
    if let Some(t) = a.dedupe_threshold {
        policy.dedupe_threshold = t;
    }
    if let Some(m) = &a.dedupe_mode {
        policy.dedupe_mode = m.parse().map_err(CliError::Usage)?;
    }
    if a.no_remesh {
        policy.remesh = false;
    }
    if let Some(i) = a.remesh_iterations {
        policy.remesh_max_iterations = i;
    }
    if a.allow_multi_component {
        policy.require_single_component = false;
    }
    if a.allow_open {
        policy.require_closed = false;
    }
    policy.validate()?;
    log_config("curation", &policy);
    if !a.input.is_dir() {
        return Err(CliError::Input(format!("{} is not a directory", a.input.display())));
    }
    let summary = build_manifest(&a.input, &a.out, &policy)?;
    emit(None, &json(&summary))
}

fn synth(a: SynthArgs, global: &Resolved) -> Result<(), CliError> {
    let classes: Vec<ShapeClass> = if a.classes.is_empty() {
        SHAPE_CLASSES.to_vec()
    } else {
        a.classes.iter().map(|c| c.parse().map_err(CliError::Usage)).collect::<Result<_, _>>()?
    };
    log_config("synth", &serde_json::json!({"classes": classes, "per_class": a.per_class, "k": a.k, "seed": global.seed}));
    let samples = synth_dataset(&classes, a.per_class, global.seed, a.k)?;
    create_dir(&a.out.join("meshes"))?;
    let mut lines = String::new();
    for s in &samples {
        let mesh_file = format!("meshes/{}.off", s.id);
        save_mesh(&s.mesh, a.out.join(&mesh_file), MeshFormat::Off)?;
        let label = SynthLabel {
            id: s.id.clone(),
            class: s.class,
            dims: s.dims,
            rotation: s.rotation,
            scale_factor: s.scale.scale_factor,
            mesh_file,
            eigenvalues: s.eigenvalues.clone(),
        };
        lines.push_str(&serde_json::to_string(&label).expect("serializable"));
        lines.push('\n');
    }
    let labels = a.out.join(LABELS_FILE);
    fs::write(&labels, lines).map_err(|e| CliError::io(&labels, e))?;
    emit(None, &json(&serde_json::json!({"samples": samples.len(), "labels": labels})))
}

fn train_config(a: &TrainArgs, file: &FileConfig, global: &Resolved) -> Result<TrainConfig, CliError> {
    let t = &file.train;
    let mut c = TrainConfig { seed: global.seed, ..TrainConfig::default() };
    c.schedule = match &a.schedule {
        Some(s) => parse_schedule(s)?,
        None => t.schedule.clone().unwrap_or(c.schedule),
    };
    c.optimizer = match &a.optimizer {
        Some(s) => s.parse().map_err(CliError::Usage)?,
        None => t.optimizer.unwrap_or(c.optimizer),
    };
    c.loss = match &a.loss {
        Some(s) => s.parse().map_err(CliError::Usage)?,
        None => t.loss.unwrap_or(c.loss),
    };
    c.preset = match &a.preset {
        Some(s) => s.parse().map_err(CliError::Usage)?,
        None => t.preset.unwrap_or(c.preset),
    };
    c.batch_size = a.batch_size.or(t.batch_size).unwrap_or(c.batch_size);
    c.weight_decay = a.weight_decay.or(t.weight_decay).unwrap_or(c.weight_decay);
    c.checkpoint_every = a.checkpoint_every.or(t.checkpoint_every);
    if c.checkpoint_every.is_some() {
        c.checkpoint_dir = Some(a.out.join("checkpoints"));
    }
    c.validate()?;
    Ok(c)
}

pub const MODEL_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.csv";

fn train(a: TrainArgs, file: &FileConfig, global: &Resolved) -> Result<(), CliError> {
    let config = train_config(&a, file, global)?;
    log_config("train", &config);
    let data = load_dataset(&a.data, global.seed)?;
    create_dir(&a.out)?;
    if let Some(dir) = &config.checkpoint_dir {
        create_dir(dir)?;
    }
    let outcome = lbnet_core::nn::train(&data.train, &data.val, &config)?;
    let model = a.out.join(MODEL_FILE);
    Checkpoint::from_predictor(&outcome.predictor, config.seed, config.epochs(), config.loss).save(&model)?;
    let history = a.out.join(HISTORY_FILE);
    let mut buf = Vec::new();
    write_history_csv(&outcome.history, &mut buf).expect("writing to memory");
    fs::write(&history, buf).map_err(|e| CliError::io(&history, e))?;
    let last = outcome.history.last().expect("at least one epoch");
    emit(
        None,
        &json(&serde_json::json!({
            "epochs": last.epoch,
            "train_loss": last.train_loss,
            "val_loss": last.val_loss,
            "model": model,
            "history": history,
        })),
    )
}

fn load_predictor(path: &Path) -> Result<lbnet_core::nn::Predictor, CliError> {
    Ok(Checkpoint::load(path)?.to_predictor()?)
}

#[derive(Debug, Serialize)]
struct Prediction {
    id: String,
    /// Predicted eigenvalues of the unit-cube copy.
    eigenvalues: Vec<f64>,
    scale_factor: f64,
    /// Eigenvalues at the mesh's own size.
    restored: Vec<f64>,
}

fn predict(a: PredictArgs) -> Result<(), CliError> {
    let predictor = load_predictor(&a.checkpoint)?;
    let mut out = String::new();
    for path in &a.meshes {
        let (mesh, scale) = normalize_unit_cube(&load_mesh(path, format_of(a.format))?)?;
        let f = assemble_features(&mesh)?;
        let eigenvalues = predictor.predict(&[&f])?.remove(0);
        let restored = denormalize_values(&eigenvalues, scale.scale_factor);
        let p = Prediction { id: stem(path), eigenvalues, scale_factor: scale.scale_factor, restored };
        out.push_str(&serde_json::to_string(&p).expect("serializable"));
        out.push('\n');
    }
    emit(None, &out)
}

fn eval(a: EvalArgs, global: &Resolved) -> Result<(), CliError> {
    if !(a.bin_width > 0.0) {
        return Err(CliError::Usage(format!("bin width {} must be positive", a.bin_width)));
    }
    let predictor = load_predictor(&a.checkpoint)?;
    let data = load_dataset(&a.data, global.seed)?;
    let samples: Vec<&lbnet_core::nn::Sample> = match a.split {
        SplitArg::Train => data.split(Split::Train).iter().collect(),
        SplitArg::Val => data.split(Split::Val).iter().collect(),
        SplitArg::Test => data.split(Split::Test).iter().collect(),
        SplitArg::All => data.train.iter().chain(&data.val).chain(&data.test).collect(),
    };
    if samples.is_empty() {
        return Err(CliError::Input(format!("split {:?} is empty", a.split)));
    }
    let mut preds = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(32) {
        preds.extend(predictor.predict(&chunk.iter().map(|s| &s.features).collect::<Vec<_>>())?);
    }
    let report =
        EvalReport::build(samples.iter().zip(&preds).map(|(s, p)| (s.id.as_str(), s.target.as_slice(), p.as_slice())))?;
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let mut buf = Vec::new();
        report.write_samples_csv(&mut buf).expect("writing to memory");
        write_file(&dir.join("samples.csv"), &buf)?;
        write_file(&dir.join("summary.json"), report.summary_json().as_bytes())?;
        let mut buf = Vec::new();
        write_histogram_csv(&psnr_histogram(&report.samples, a.bin_width), &mut buf).expect("writing to memory");
        write_file(&dir.join("histogram.csv"), &buf)?;
    }
    emit(None, &(report.summary_json() + "\n"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn mesh_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| MeshFormat::from_extension(f).is_some())
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(CliError::Input("no meshes given".into()));
    }
    Ok(out)
}

fn bench(a: BenchArgs) -> Result<(), CliError> {
    if a.repeats == 0 {
        return Err(CliError::Usage("repeats must be positive".into()));
    }
    let predictor = load_predictor(&a.checkpoint)?;
    let meshes: Vec<(String, TriMesh)> = mesh_paths(&a.meshes)?
        .iter()
        .map(|p| Ok((stem(p), normalize_unit_cube(&load_mesh(p, MeshFormat::Auto)?)?.0)))
        .collect::<Result<_, CliError>>()?;
    log_config("bench", &serde_json::json!({"meshes": meshes.len(), "k": a.k, "repeats": a.repeats}));
    let report = bench_timing(&meshes, &predictor, a.k, a.repeats)?;
    emit(a.out.as_deref(), &json(&report))
}
