//! Laplace-Beltrami spectra of closed triangle meshes.
//!
//! The crate computes reference spectra with linear finite elements
//! ([`fem`]), extracts per-vertex geometric features ([`features`]), trains a
//! graph convolutional network that predicts the spectrum from those features
//! ([`nn`]), builds curated datasets ([`curation`]) and scores predictions
//! ([`eval`]).

pub mod curation;
pub mod eval;
pub mod error;
pub mod features;
pub mod fem;
pub mod mesh;
pub mod nn;
pub mod numeric;

pub use error::{Error, ErrorKind, Result};
pub use mesh::{MeshReport, Rotation, ScaleRecord, TriMesh};
