//! Dataset curation: topology filter, remeshing, spectral dedupe,
//! rotation augmentation, synthetic shapes and the JSON-lines manifest.

mod dedupe;
mod manifest;
mod remesh;
mod synth;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CurationError;
use crate::mesh::{random_rotation, rotate, MeshReport, Rotation, TriMesh};

pub use dedupe::{dedupe, DedupeMode, DuplicateGroup};
pub use manifest::{
    assign_splits, build_manifest, read_manifest, BuildSummary, ManifestRecord, RecordStatus, SpectrumFile, Split,
    MANIFEST_SCHEMA_VERSION,
};
pub use remesh::{edge_length_cv, isotropic_remesh, remesh_violations, RemeshOutcome, NEAR_UNIFORM_CV};
pub use synth::{synth_dataset, synth_mesh, ShapeClass, SynthSample, SHAPE_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationPolicy {
    pub require_single_component: bool,
    pub require_closed: bool,
    pub max_genus: u32,
    pub target_vertex_range: (usize, usize),
    pub dedupe_threshold: f64,
    pub dedupe_mode: DedupeMode,
    pub rotations_per_mesh: usize,
    pub rng_seed: u64,
    /// Eigenvalues per spectrum.
    pub k: usize,
    pub remesh: bool,
    pub remesh_max_iterations: usize,
}

impl Default for CurationPolicy {
    fn default() -> Self {
        CurationPolicy {
            require_single_component: true,
            require_closed: true,
            max_genus: 2,
            target_vertex_range: (1750, 2250),
            dedupe_threshold: 1e-8,
            dedupe_mode: DedupeMode::Absolute,
            rotations_per_mesh: 5,
            rng_seed: 0,
            k: 50,
            remesh: true,
            remesh_max_iterations: 12,
        }
    }
}

impl CurationPolicy {
    pub fn validate(&self) -> Result<(), CurationError> {
        let (lo, hi) = self.target_vertex_range;
        if lo > hi {
            return Err(CurationError::InvalidParameter(format!("empty vertex range [{lo}, {hi}]")));
        }
        if !(self.dedupe_threshold > 0.0) {
            return Err(CurationError::InvalidParameter(format!("dedupe threshold {} must be positive", self.dedupe_threshold)));
        }
        if self.k == 0 {
            return Err(CurationError::InvalidParameter("k must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    MultiComponent,
    Boundary,
    NonManifold,
    GenusExceeded,
    ParseError,
    RemeshFailure,
    SpectrumFailure,
    DuplicateOf,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Accept,
    Reject(RejectReason),
}

/// Topology gate. Depends only on the report; the first failing check wins.
pub fn filter(report: &MeshReport, policy: &CurationPolicy) -> FilterDecision {
    use FilterDecision::*;
    if policy.require_single_component && report.component_count != 1 {
        return Reject(RejectReason::MultiComponent);
    }
    if policy.require_closed && !report.is_closed {
        return Reject(RejectReason::Boundary);
    }
    if !report.is_manifold || !report.is_consistently_oriented {
        return Reject(RejectReason::NonManifold);
    }
    match report.genus {
        Some(g) if g <= policy.max_genus => Accept,
        Some(_) => Reject(RejectReason::GenusExceeded),
        // closed and manifold but no genus: several components allowed by the policy
        None if !policy.require_single_component => Accept,
        None => Reject(RejectReason::NonManifold),
    }
}

/// `n` seeded random rotations of `mesh`, uniform over the rotation group.
pub fn augment(mesh: &TriMesh, n: usize, seed: u64) -> Vec<(Rotation, TriMesh)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = random_rotation(&mut rng);
            let m = rotate(mesh, &r).expect("random rotations are unit quaternions");
            (r, m)
        })
        .collect()
}
