//! Loading labelled datasets: a curation manifest or a `synth` output directory.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use lbnet_core::curation::{assign_splits, read_manifest, RecordStatus, ShapeClass, Split, SpectrumFile};
use lbnet_core::features::assemble_features;
use lbnet_core::mesh::{load_mesh, MeshFormat, Rotation};
use lbnet_core::nn::Sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const LABELS_FILE: &str = "labels.jsonl";

/// One line of `labels.jsonl` written by `synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthLabel {
    pub id: String,
    pub class: ShapeClass,
    pub dims: [f64; 3],
    pub rotation: Rotation,
    pub scale_factor: f64,
    /// Relative to the dataset directory; already unit-cube normalized.
    pub mesh_file: String,
    /// Eigenvalues after the zero mode.
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    pub fn split(&self, s: Split) -> &[Sample] {
        match s {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

struct Pending {
    id: String,
    mesh: PathBuf,
    target: Vec<f64>,
    split: Split,
}

/// Reads a dataset and extracts features for every mesh. Synthetic
/// directories are split by `seed`; manifests carry their own splits.
/// Rotated copies from a manifest join the training split only.
pub fn load_dataset(path: &Path, seed: u64) -> Result<Dataset, CliError> {
    let pending = if path.is_dir() { synth_entries(path, seed)? } else { manifest_entries(path)? };
    let samples: Vec<(Split, Sample)> = pending
        .into_par_iter()
        .map(|p| {
            let mesh = load_mesh(&p.mesh, MeshFormat::Auto)?;
            let features = assemble_features(&mesh)?;
            Ok((p.split, Sample { id: p.id, features, target: p.target }))
        })
        .collect::<Result<_, CliError>>()?;
    let mut out = Dataset::default();
    for (split, s) in samples {
        match split {
            Split::Train => out.train.push(s),
            Split::Val => out.val.push(s),
            Split::Test => out.test.push(s),
        }
    }
    log::info!("dataset {}: {} train, {} val, {} test", path.display(), out.train.len(), out.val.len(), out.test.len());
    Ok(out)
}

fn synth_entries(dir: &Path, seed: u64) -> Result<Vec<Pending>, CliError> {
    let path = dir.join(LABELS_FILE);
    let file = std::fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let mut labels = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let label: SynthLabel =
            serde_json::from_str(&line).map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        labels.push(label);
    }
    let ids: Vec<String> = labels.iter().map(|l| l.id.clone()).collect();
    let splits = assign_splits(&ids, seed);
    Ok(labels
        .into_iter()
        .map(|l| Pending { split: splits[&l.id], mesh: dir.join(&l.mesh_file), id: l.id, target: l.eigenvalues })
        .collect())
}

fn manifest_entries(path: &Path) -> Result<Vec<Pending>, CliError> {
    let root = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for r in read_manifest(path)?.into_iter().filter(|r| r.status == RecordStatus::Accepted) {
        let (Some(spec), Some(mesh), Some(split)) = (&r.spectrum_file, &r.mesh_file, r.split) else {
            return Err(CliError::Input(format!("accepted record '{}' lacks spectrum, mesh or split", r.id)));
        };
        let spectrum = SpectrumFile::load(&root.join(spec))?;
        // drop the zero mode
        let target = spectrum.eigenvalues.get(1..).unwrap_or_default().to_vec();
        if split == Split::Train {
            for aug in &r.augmentation_ids {
                out.push(Pending { id: aug.clone(), mesh: root.join(format!("meshes/{aug}.off")), target: target.clone(), split });
            }
        }
        out.push(Pending { id: r.id.clone(), mesh: root.join(mesh), target, split });
    }
    let widths: BTreeMap<usize, usize> = out.iter().fold(BTreeMap::new(), |mut m, p| {
        *m.entry(p.target.len()).or_default() += 1;
        m
    });
    if widths.len() > 1 {
        return Err(CliError::Input(format!("manifest mixes spectrum lengths {:?}", widths.keys().collect::<Vec<_>>())));
    }
    Ok(out)
}
