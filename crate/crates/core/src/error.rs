use std::path::PathBuf;

/// Errors raised by mesh loading, validation and transforms.
#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("non-triangular face at index {0}")]
    NonTriangularFace(usize),
    #[error("empty mesh")]
    Empty,
    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face {0} repeats a vertex index")]
    DegenerateFace(usize),
    #[error("all vertices coincide; the mesh has zero extent")]
    ZeroExtent,
    #[error("quaternion norm {0} is not 1")]
    NonUnitQuaternion(f64),
    #[error("rotation axis has zero length")]
    ZeroAxis,
}

/// Errors raised while extracting geometric features.
#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("edge {edge} ({a}, {b}) has zero length")]
    ZeroLengthEdge { edge: usize, a: usize, b: usize },
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("edge ({0}, {1}) is a boundary edge; a closed mesh is required")]
    BoundaryEdge(usize, usize),
    #[error("edge ({0}, {1}) has more than two incident faces")]
    NonManifoldEdge(usize, usize),
    #[error("mesh has no edges")]
    NoEdges,
}

/// Errors raised by operator assembly and the eigensolver.
#[derive(Debug, thiserror::Error)]
pub enum FemError {
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("requested {k} eigenvalues but the operator has dimension {n}")]
    TooManyEigenvalues { k: usize, n: usize },
    #[error("Cholesky factorization of K - sigma*M failed at shift {shift} (pivot {pivot})")]
    Factorization { shift: f64, pivot: usize },
    #[error("eigensolver did not converge after {iterations} iterations; worst residual {worst_residual:e}")]
    NoConvergence { iterations: usize, worst_residual: f64, residuals: Vec<f64> },
    #[error("matrix dimensions do not match: {0}")]
    Dimension(String),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
}

/// Errors raised by the tensor engine, model and training loop.
#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("backward called before a forward pass recorded a loss")]
    NoForward,
    #[error("learning rate must be positive, got {0}")]
    InvalidLearningRate(f64),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {value}")]
    NonFiniteLoss { epoch: usize, batch: usize, value: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Errors raised by the dataset pipeline.
#[derive(Debug, thiserror::Error)]
pub enum CurationError {
    #[error("spectra have mixed lengths ({0} vs {1})")]
    MixedK(usize, usize),
    #[error("remeshing failed after {iterations} attempts (last vertex count {vertices})")]
    RemeshFailure { iterations: usize, vertices: usize },
    #[error("remeshing requires a closed manifold mesh")]
    NotClosedManifold,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
}

/// Evaluation metric errors.
#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("target vector is constant; PSNR is undefined")]
    ConstantTarget,
    #[error("vectors differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("no samples to aggregate")]
    Empty,
}

/// Crate-level error wrapping every module error.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Curation(#[from] CurationError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    /// Module-qualified error code, e.g. `fem.factorization`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Mesh(e) => match e {
                MeshError::Io { .. } => "mesh.io",
                MeshError::Parse { .. } => "mesh.parse",
                MeshError::UnsupportedFormat(_) => "mesh.format",
                MeshError::NonTriangularFace(_) => "mesh.non_triangular",
                MeshError::Empty => "mesh.empty",
                MeshError::IndexOutOfRange { .. } => "mesh.index",
                MeshError::DegenerateFace(_) => "mesh.degenerate_face",
                MeshError::ZeroExtent => "mesh.zero_extent",
                MeshError::NonUnitQuaternion(_) | MeshError::ZeroAxis => "mesh.rotation",
            },
            Error::Feature(_) => "features.geometry",
            Error::Fem(e) => match e {
                FemError::Factorization { .. } => "fem.factorization",
                FemError::NoConvergence { .. } => "fem.convergence",
                FemError::Mesh(_) => "fem.mesh",
                _ => "fem.input",
            },
            Error::Nn(e) => match e {
                NnError::NonFiniteLoss { .. } => "nn.non_finite",
                NnError::Checkpoint(_) => "nn.checkpoint",
                _ => "nn.input",
            },
            Error::Curation(e) => match e {
                CurationError::Io { .. } => "curation.io",
                CurationError::RemeshFailure { .. } => "curation.remesh",
                _ => "curation.input",
            },
            Error::Eval(_) => "eval.input",
        }
    }

    /// Coarse class used by the CLI to pick an exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Mesh(MeshError::Io { .. }) | Error::Curation(CurationError::Io { .. }) => ErrorKind::Io,
            Error::Mesh(_) | Error::Nn(NnError::Checkpoint(_)) => ErrorKind::Input,
            Error::Fem(FemError::Mesh(MeshError::Io { .. })) => ErrorKind::Io,
            Error::Fem(FemError::Factorization { .. })
            | Error::Fem(FemError::NoConvergence { .. })
            | Error::Nn(NnError::NonFiniteLoss { .. })
            | Error::Feature(_)
            | Error::Curation(CurationError::RemeshFailure { .. }) => ErrorKind::Numerical,
            _ => ErrorKind::Input,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
    Io,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
