//! Shared fixtures for the benchmarks.

use lbnet_core::features::assemble_features;
use lbnet_core::mesh::{normalize_unit_cube, shapes, TriMesh};
use lbnet_core::nn::{ModelSpec, Predictor, Sample, WidthPreset, SPECTRUM_OUTPUTS};

/// Unit-cube sphere with 2562 vertices, the size the pipeline remeshes to.
pub fn pipeline_sphere() -> TriMesh {
    normalize_unit_cube(&shapes::icosphere(1.0, 4)).expect("sphere has extent").0
}

/// Untrained desk-width predictor with a 49-value head; inference cost does not depend on the weights.
pub fn desk_predictor(mesh: &TriMesh) -> Predictor {
    let features = assemble_features(mesh).expect("clean mesh");
    let sample = Sample { id: "fixture".into(), features, target: vec![1.0; SPECTRUM_OUTPUTS] };
    Predictor::initialize(ModelSpec::new(WidthPreset::Desk, SPECTRUM_OUTPUTS), &[sample], 0)
}
