//! Laplace-Beltrami spectra by linear finite elements.
//!
//! [`lb_spectrum`] assembles the cotangent stiffness matrix `K` and the mass
//! matrix `M` and returns the smallest eigenvalues of `K u = lambda M u`,
//! computed by shift-invert Lanczos on a sparse Cholesky factor of
//! `K - sigma M`.

mod assembly;
mod cholesky;
mod lanczos;
mod sparse;
mod tridiag;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::FemError;
use crate::mesh::{ScaleRecord, TriMesh};

pub use assembly::{assemble_mass, assemble_stiffness, MassKind};
pub use cholesky::{minimum_degree_order, NotPositiveDefinite, SparseCholesky};
pub use lanczos::{shift_invert_lanczos, EigenPair, LanczosOptions, LanczosResult, NotConverged};
pub use sparse::CsrMatrix;
pub use tridiag::tridiagonal_eigen;

pub const DEFAULT_SHIFT: f64 = -0.01;
/// Added to the shift after a failed factorization.
pub const SHIFT_STEP: f64 = -0.1;
pub const SHIFT_RETRIES: usize = 3;

/// Stiffness and mass matrices of one mesh.
#[derive(Debug, Clone)]
pub struct SparseOperatorPair {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
}

impl SparseOperatorPair {
    pub fn assemble(mesh: &TriMesh, mass: MassKind) -> Result<Self, FemError> {
        Ok(SparseOperatorPair { stiffness: assemble_stiffness(mesh)?, mass: assemble_mass(mesh, mass)? })
    }

    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub shift: f64,
    pub mass: MassKind,
    pub lanczos: LanczosOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { shift: DEFAULT_SHIFT, mass: MassKind::Consistent, lanczos: LanczosOptions::default() }
    }
}

/// Ascending generalized eigenvalues with solver metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Normalization the mesh went through before solving, if any.
    pub scale: Option<ScaleRecord>,
    /// Shift that was actually factorized.
    pub shift: f64,
    pub iterations: usize,
    /// Residual `|K u - lambda M u| / (|M u| max(lambda, 1))` per eigenvalue.
    pub residuals: Vec<f64>,
    /// Wall-clock milliseconds; assembly included when produced by [`lb_spectrum`].
    pub solve_ms: f64,
}

impl Spectrum {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn record(&self, id: impl Into<String>) -> SpectrumRecord {
        SpectrumRecord {
            id: id.into(),
            k: self.k(),
            eigenvalues: self.eigenvalues.clone(),
            scale_factor: self.scale.map_or(1.0, |s| s.scale_factor),
            solve_ms: self.solve_ms,
        }
    }
}

/// Exported label format, one JSON object per mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub id: String,
    pub k: usize,
    pub eigenvalues: Vec<f64>,
    pub scale_factor: f64,
    pub solve_ms: f64,
}

impl SpectrumRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spectrum record serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// The `k` smallest eigenvalues of the pair, factorizing `K - shift M`.
///
/// A failed factorization is retried with the shift lowered by 0.1, at most
/// three times.
pub fn solve_spectrum(ops: &SparseOperatorPair, k: usize, shift: f64) -> Result<Spectrum, FemError> {
    solve_with(ops, k, shift, &LanczosOptions::default())
}

pub fn solve_with(ops: &SparseOperatorPair, k: usize, shift: f64, opts: &LanczosOptions) -> Result<Spectrum, FemError> {
    let n = ops.dim();
    if ops.mass.dim() != n {
        return Err(FemError::Dimension(format!("K is {n}x{n}, M is {0}x{0}", ops.mass.dim())));
    }
    if k == 0 || k >= n {
        return Err(FemError::TooManyEigenvalues { k, n });
    }
    let start = Instant::now();
    let mut sigma = shift;
    let mut attempt = 0;
    let chol = loop {
        let shifted = ops.stiffness.linear_combination(1.0, &ops.mass, -sigma);
        match SparseCholesky::factor(&shifted) {
            Ok(c) => break c,
            Err(NotPositiveDefinite(pivot)) if attempt == SHIFT_RETRIES => {
                return Err(FemError::Factorization { shift: sigma, pivot });
            }
            Err(NotPositiveDefinite(pivot)) => {
                log::warn!("factorization failed at shift {sigma} (pivot {pivot}), retrying");
                sigma += SHIFT_STEP;
                attempt += 1;
            }
        }
    };
    let result = shift_invert_lanczos(&ops.stiffness, &ops.mass, &chol, sigma, k, opts).map_err(|e| {
        let worst = e.residuals.iter().copied().fold(0.0, f64::max);
        FemError::NoConvergence { iterations: e.iterations, worst_residual: worst, residuals: e.residuals }
    })?;
    log::debug!(
        "n={n} k={k} shift={sigma} factor nnz={} steps={} sequences={}",
        chol.factor_nnz(),
        result.iterations,
        result.sequences
    );
    Ok(Spectrum {
        eigenvalues: result.pairs.iter().map(|p| p.value).collect(),
        scale: None,
        shift: sigma,
        iterations: result.iterations,
        residuals: result.pairs.iter().map(|p| p.residual).collect(),
        solve_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Assembles and solves with default options (consistent mass, shift -0.01).
pub fn lb_spectrum(mesh: &TriMesh, k: usize) -> Result<Spectrum, FemError> {
    lb_spectrum_with(mesh, k, &SolverOptions::default())
}

pub fn lb_spectrum_with(mesh: &TriMesh, k: usize, opts: &SolverOptions) -> Result<Spectrum, FemError> {
    let start = Instant::now();
    let ops = SparseOperatorPair::assemble(mesh, opts.mass)?;
    let mut spec = solve_with(&ops, k, opts.shift, &opts.lanczos)?;
    spec.solve_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(spec)
}

/// Eigenvalues of the mesh before normalization: each value times `s^2`.
///
/// Normalization multiplied coordinates by `s`, which divides eigenvalues by `s^2`.
pub fn denormalize_spectrum(spec: &Spectrum, record: &ScaleRecord) -> Spectrum {
    let s2 = record.scale_factor * record.scale_factor;
    Spectrum {
        eigenvalues: spec.eigenvalues.iter().map(|l| l * s2).collect(),
        scale: Some(*record),
        ..spec.clone()
    }
}

/// [`denormalize_spectrum`] for bare values.
pub fn denormalize_values(values: &[f64], scale_factor: f64) -> Vec<f64> {
    values.iter().map(|l| l * scale_factor * scale_factor).collect()
}
