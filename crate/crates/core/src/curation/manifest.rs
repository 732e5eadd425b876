//! Corpus pipeline: filter, remesh, spectrum, dedupe, normalize, augment, split.
//!
//! The manifest is a JSON-lines file with one [`ManifestRecord`] per input
//! mesh, sorted by id. Artifacts go next to it under `spectra/` and `meshes/`.
//! Per-mesh work is skipped for ids already in the manifest, so a re-run over
//! a finished corpus rewrites the same bytes.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{augment, dedupe, edge_length_cv, filter, isotropic_remesh, remesh_violations, NEAR_UNIFORM_CV, CurationPolicy, FilterDecision, RejectReason};
use crate::error::CurationError;
use crate::fem::lb_spectrum;
use crate::mesh::{load_mesh, normalize_unit_cube, save_mesh, validate, MeshFormat, MeshReport, ScaleRecord, TriMesh};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
const CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub schema_version: u32,
    pub id: String,
    pub source: String,
    pub status: RecordStatus,
    /// Exactly one for rejected records.
    pub reason: Option<RejectReason>,
    pub duplicate_of: Option<String>,
    pub detail: Option<String>,
    /// Report of the mesh as read.
    pub report: Option<MeshReport>,
    pub remesh_iterations: Option<usize>,
    pub vertex_count: Option<usize>,
    pub scale: Option<ScaleRecord>,
    /// Relative to the manifest directory.
    pub spectrum_file: Option<String>,
    pub mesh_file: Option<String>,
    pub augmentation_ids: Vec<String>,
    pub split: Option<Split>,
    pub split_seed: Option<u64>,
}

impl ManifestRecord {
    fn new(id: &str, source: &Path) -> Self {
        ManifestRecord {
            schema_version: MANIFEST_SCHEMA_VERSION,
            id: id.to_string(),
            source: source.display().to_string(),
            status: RecordStatus::Rejected,
            reason: None,
            duplicate_of: None,
            detail: None,
            report: None,
            remesh_iterations: None,
            vertex_count: None,
            scale: None,
            spectrum_file: None,
            mesh_file: None,
            augmentation_ids: Vec::new(),
            split: None,
            split_seed: None,
        }
    }

    fn reject(mut self, reason: RejectReason, detail: impl Into<String>) -> Self {
        self.status = RecordStatus::Rejected;
        self.reason = Some(reason);
        self.detail = Some(detail.into());
        self
    }
}

/// Spectrum artifact of one accepted mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFile {
    pub id: String,
    pub k: usize,
    /// Eigenvalues of the mesh as remeshed, before normalization.
    pub raw_eigenvalues: Vec<f64>,
    /// Eigenvalues of the unit-cube normalized mesh.
    pub eigenvalues: Vec<f64>,
    pub scale: ScaleRecord,
}

impl SpectrumFile {
    pub fn load(path: &Path) -> Result<Self, CurationError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| CurationError::Manifest(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub total: usize,
    /// Meshes processed in this run.
    pub processed: usize,
    /// Meshes whose records were already complete.
    pub skipped: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<String, usize>,
    pub duplicate_groups: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> CurationError {
    CurationError::Io { path: path.to_path_buf(), source }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, CurationError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: ManifestRecord =
                serde_json::from_str(l).map_err(|e| CurationError::Manifest(format!("{}:{}: {e}", path.display(), i + 1)))?;
            if r.schema_version != MANIFEST_SCHEMA_VERSION {
                return Err(CurationError::Manifest(format!("unsupported schema version {}", r.schema_version)));
            }
            Ok(r)
        })
        .collect()
}

fn write_manifest(path: &Path, records: &BTreeMap<String, ManifestRecord>) -> Result<(), CurationError> {
    let tmp = path.with_extension("jsonl.tmp");
    let mut out = std::io::BufWriter::new(fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?);
    for r in records.values() {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(out, "{line}").map_err(|e| io_err(&tmp, e))?;
    }
    out.flush().map_err(|e| io_err(&tmp, e))?;
    drop(out);
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Mesh files in `dir` keyed by id (the file stem; the full file name when stems collide).
fn list_corpus(dir: &Path) -> Result<BTreeMap<String, PathBuf>, CurationError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && MeshFormat::from_extension(p).is_some())
        .collect();
    files.sort();
    let mut stems: HashMap<String, usize> = HashMap::new();
    for p in &files {
        *stems.entry(p.file_stem().unwrap().to_string_lossy().into_owned()).or_default() += 1;
    }
    Ok(files
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            let id = if stems[&stem] > 1 { p.file_name().unwrap().to_string_lossy().into_owned() } else { stem };
            (id, p)
        })
        .collect())
}

fn stable_hash(s: &str) -> u64 {
    // FNV-1a
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Filter, remesh, solve, normalize and augment one mesh.
fn process(id: &str, path: &Path, policy: &CurationPolicy, out_dir: &Path) -> ManifestRecord {
    let rec = ManifestRecord::new(id, path);
    let mesh = match load_mesh(path, MeshFormat::Auto) {
        Ok(m) => m,
        Err(e) => return rec.reject(RejectReason::ParseError, e.to_string()),
    };
    let report = validate(&mesh);
    let mut rec = ManifestRecord { report: Some(report.clone()), ..rec };
    if let FilterDecision::Reject(reason) = filter(&report, policy) {
        let detail = format!(
            "components {}, closed {}, manifold {}, genus {:?}",
            report.component_count, report.is_closed, report.is_manifold, report.genus
        );
        return rec.reject(reason, detail);
    }

    let mesh: TriMesh = if policy.remesh {
        match isotropic_remesh(&mesh, policy.target_vertex_range, policy.remesh_max_iterations) {
            Ok(out) => {
                let remeshed = out.mesh.expect("successful remesh carries a mesh");
                let problems = if out.iterations > 0 {
                    remesh_violations(&mesh, &remeshed, policy.target_vertex_range, edge_length_cv(&mesh) > NEAR_UNIFORM_CV)
                } else {
                    Vec::new()
                };
                if !problems.is_empty() {
                    return rec.reject(RejectReason::RemeshFailure, problems.join("; "));
                }
                rec.remesh_iterations = Some(out.iterations);
                remeshed
            }
            Err(e) => return rec.reject(RejectReason::RemeshFailure, e.to_string()),
        }
    } else {
        mesh
    };
    rec.vertex_count = Some(mesh.vertex_count());

    let spectrum = match lb_spectrum(&mesh, policy.k) {
        Ok(s) => s,
        Err(e) => return rec.reject(RejectReason::SpectrumFailure, e.to_string()),
    };
    let (normalized, scale) = match normalize_unit_cube(&mesh) {
        Ok(p) => p,
        Err(e) => return rec.reject(RejectReason::SpectrumFailure, e.to_string()),
    };
    // lambda(s * M) = lambda(M) / s^2
    let s2 = scale.scale_factor * scale.scale_factor;
    let file = SpectrumFile {
        id: id.to_string(),
        k: policy.k,
        eigenvalues: spectrum.eigenvalues.iter().map(|l| l / s2).collect(),
        raw_eigenvalues: spectrum.eigenvalues,
        scale,
    };
    let spectrum_rel = format!("spectra/{id}.json");
    let mesh_rel = format!("meshes/{id}.off");
    let written = (|| -> Result<(), String> {
        let text = serde_json::to_string(&file).map_err(|e| e.to_string())?;
        fs::write(out_dir.join(&spectrum_rel), text).map_err(|e| e.to_string())?;
        save_mesh(&normalized, out_dir.join(&mesh_rel), MeshFormat::Off).map_err(|e| e.to_string())?;
        Ok(())
    })();
    if let Err(e) = written {
        return rec.reject(RejectReason::ParseError, format!("writing artifacts: {e}"));
    }
    rec.status = RecordStatus::Accepted;
    rec.scale = Some(scale);
    rec.spectrum_file = Some(spectrum_rel);
    rec.mesh_file = Some(mesh_rel);
    rec
}

/// Writes rotated copies of every accepted representative; copies share the source's spectrum file.
fn write_augmentations(rec: &mut ManifestRecord, policy: &CurationPolicy, out_dir: &Path) -> Result<(), CurationError> {
    rec.augmentation_ids.clear();
    if policy.rotations_per_mesh == 0 {
        return Ok(());
    }
    let src = out_dir.join(rec.mesh_file.as_ref().expect("accepted records have a mesh"));
    let mesh = load_mesh(&src, MeshFormat::Off).map_err(|e| CurationError::Manifest(e.to_string()))?;
    for (j, (_, rotated)) in augment(&mesh, policy.rotations_per_mesh, policy.rng_seed ^ stable_hash(&rec.id)).iter().enumerate() {
        let aug_id = format!("{}_rot{j}", rec.id);
        let path = out_dir.join(format!("meshes/{aug_id}.off"));
        if !path.exists() {
            save_mesh(rotated, &path, MeshFormat::Off).map_err(|e| CurationError::Manifest(e.to_string()))?;
        }
        rec.augmentation_ids.push(aug_id);
    }
    Ok(())
}

/// Deterministic 80:10:10 assignment of the given ids.
pub fn assign_splits(ids: &[String], seed: u64) -> BTreeMap<String, Split> {
    let mut sorted = ids.to_vec();
    sorted.sort();
    sorted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = sorted.len();
    let n_train = (0.8 * n as f64).round() as usize;
    let n_val = ((0.1 * n as f64).round() as usize).min(n - n_train);
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let s = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            (id, s)
        })
        .collect()
}

/// Runs the pipeline over every mesh file in `corpus` and writes `manifest`.
pub fn build_manifest(corpus: &Path, manifest: &Path, policy: &CurationPolicy) -> Result<BuildSummary, CurationError> {
    policy.validate()?;
    let out_dir = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let out_dir = if out_dir.as_os_str().is_empty() { PathBuf::from(".") } else { out_dir };
    for sub in ["spectra", "meshes"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| io_err(&d, e))?;
    }
    let files = list_corpus(corpus)?;
    let mut records: BTreeMap<String, ManifestRecord> = if manifest.exists() {
        read_manifest(manifest)?.into_iter().map(|r| (r.id.clone(), r)).collect()
    } else {
        BTreeMap::new()
    };
    records.retain(|id, _| files.contains_key(id));
    // an accepted record is complete only while its artifacts exist
    records.retain(|_, r| r.spectrum_file.as_ref().is_none_or(|f| out_dir.join(f).exists()));

    let pending: Vec<(&String, &PathBuf)> = files.iter().filter(|(id, _)| !records.contains_key(*id)).collect();
    let mut summary = BuildSummary { total: files.len(), processed: pending.len(), skipped: files.len() - pending.len(), ..Default::default() };
    for chunk in pending.chunks(CHUNK) {
        let done: Vec<ManifestRecord> = chunk.par_iter().map(|(id, path)| process(id, path, policy, &out_dir)).collect();
        for r in done {
            log::info!("{}: {:?} {:?}", r.id, r.status, r.reason);
            records.insert(r.id.clone(), r);
        }
        write_manifest(manifest, &records)?;
    }

    // dedupe over every record that reached the spectrum stage
    let mut spectra = Vec::new();
    for r in records.values_mut() {
        if r.reason == Some(RejectReason::DuplicateOf) {
            r.status = RecordStatus::Accepted;
            r.reason = None;
            r.duplicate_of = None;
            r.detail = None;
        }
        if r.status == RecordStatus::Accepted {
            let file = SpectrumFile::load(&out_dir.join(r.spectrum_file.as_ref().unwrap()))?;
            spectra.push((r.id.clone(), file.raw_eigenvalues));
        }
    }
    let groups = dedupe(&spectra, policy.dedupe_threshold, policy.dedupe_mode)?;
    summary.duplicate_groups = groups.len();
    for g in &groups {
        for m in g.members.iter().filter(|m| **m != g.representative) {
            let r = records.get_mut(m).unwrap();
            r.status = RecordStatus::Rejected;
            r.reason = Some(RejectReason::DuplicateOf);
            r.duplicate_of = Some(g.representative.clone());
            r.detail = Some(format!("spectrum matches {} within {:e}", g.representative, policy.dedupe_threshold));
            r.augmentation_ids.clear();
        }
    }

    let accepted: Vec<String> =
        records.values().filter(|r| r.status == RecordStatus::Accepted).map(|r| r.id.clone()).collect();
    let splits = assign_splits(&accepted, policy.rng_seed);
    for r in records.values_mut() {
        r.split = splits.get(&r.id).copied();
        r.split_seed = r.split.map(|_| policy.rng_seed);
        if r.status == RecordStatus::Accepted {
            write_augmentations(r, policy, &out_dir)?;
        }
    }
    write_manifest(manifest, &records)?;

    summary.accepted = accepted.len();
    for r in records.values().filter(|r| r.status == RecordStatus::Rejected) {
        *summary.rejected.entry(r.reason.map(|x| x.to_string()).unwrap_or_default()).or_default() += 1;
    }
    Ok(summary)
}
