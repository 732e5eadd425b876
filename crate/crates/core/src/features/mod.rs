//! Per-vertex and per-edge geometric features used as model input.
//!
//! Node features are eight columns in a fixed order, see [`FEATURE_COLUMNS`].
//! Edge features are edge lengths divided by the longest edge of the mesh.

mod geometry;
mod quadric;

use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::error::FeatureError;
use crate::mesh::TriMesh;

pub use geometry::{
    cotangent_edge_weights, mixed_voronoi_areas, unweighted_gaussian_curvature, unweighted_mean_curvature,
    weighted_gaussian_curvature, weighted_mean_curvature,
};
pub(crate) use geometry::DEGENERACY;
pub use quadric::{principal_curvatures, vertex_normal, PrincipalCurvatures};

/// Column order of [`FeatureSet::node_features`].
pub const FEATURE_COLUMNS: [&str; 8] = ["x", "y", "z", "area", "gauss", "mean", "kappa1", "kappa2"];
pub const FEATURE_DIM: usize = FEATURE_COLUMNS.len();

/// Model input for one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    /// `N x 8`, columns as in [`FEATURE_COLUMNS`].
    pub node_features: Array2<f64>,
    /// Directed `(source, target)` pairs; both directions of every mesh edge.
    pub edge_index: Vec<[usize; 2]>,
    /// Normalized length of each directed edge, in `(0, 1]`.
    pub edge_weights: Vec<f64>,
    /// Vertices where the quadric fit failed and curvature was set to zero.
    pub curvature_failures: Vec<usize>,
}

impl FeatureSet {
    pub fn node_count(&self) -> usize {
        self.node_features.nrows()
    }

    pub fn undirected_edge_count(&self) -> usize {
        self.edge_index.len() / 2
    }
}

/// Edge length over the maximum edge length, one value per undirected edge.
pub fn normalized_edge_lengths(mesh: &TriMesh) -> Result<Vec<f64>, FeatureError> {
    if mesh.edge_count() == 0 {
        return Err(FeatureError::NoEdges);
    }
    let lengths: Vec<f64> = (0..mesh.edge_count()).map(|e| mesh.edge_length(e)).collect();
    if let Some(e) = lengths.iter().position(|&l| l <= 0.0) {
        let [a, b] = mesh.edges()[e];
        return Err(FeatureError::ZeroLengthEdge { edge: e, a, b });
    }
    let max = lengths.iter().copied().fold(0.0, f64::max);
    Ok(lengths.into_iter().map(|l| l / max).collect())
}

pub fn assemble_features(mesh: &TriMesh) -> Result<FeatureSet, FeatureError> {
    let weights = normalized_edge_lengths(mesh)?;
    let area = mixed_voronoi_areas(mesh)?;
    let gauss = unweighted_gaussian_curvature(mesh)?;
    let mean = unweighted_mean_curvature(mesh)?;
    let principal = principal_curvatures(mesh);

    let n = mesh.vertex_count();
    let mut node_features = Array2::<f64>::zeros((n, FEATURE_DIM));
    for (i, mut row) in node_features.rows_mut().into_iter().enumerate() {
        let p = mesh.vertex(i);
        let vals = [p.x, p.y, p.z, area[i], gauss[i], mean[i], principal.kappa1[i], principal.kappa2[i]];
        for (slot, v) in row.iter_mut().zip(vals) {
            *slot = v;
        }
    }

    let mut edge_index = Vec::with_capacity(2 * mesh.edge_count());
    let mut edge_weights = Vec::with_capacity(2 * mesh.edge_count());
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        edge_index.push([a, b]);
        edge_index.push([b, a]);
        edge_weights.push(weights[e]);
        edge_weights.push(weights[e]);
    }
    Ok(FeatureSet { node_features, edge_index, edge_weights, curvature_failures: principal.failed })
}

/// Writes the node table as CSV preceded by a `# mesh_id=.. n=.. edges=..` line.
pub fn write_feature_csv<W: Write>(features: &FeatureSet, mesh_id: &str, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# mesh_id={} n={} edges={}", mesh_id, features.node_count(), features.undirected_edge_count())?;
    writeln!(out, "{}", FEATURE_COLUMNS.join(","))?;
    for row in features.node_features.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Parsed feature dump: mesh id, undirected edge count and the node table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDump {
    pub mesh_id: String,
    pub edge_count: usize,
    pub node_features: Array2<f64>,
}

pub fn read_feature_csv<R: BufRead>(input: R) -> Result<FeatureDump, String> {
    let mut lines = input.lines();
    let header = lines.next().ok_or("missing header")?.map_err(|e| e.to_string())?;
    let mut mesh_id = None;
    let mut n = None;
    let mut edges = None;
    for tok in header.trim_start_matches('#').split_whitespace() {
        match tok.split_once('=') {
            Some(("mesh_id", v)) => mesh_id = Some(v.to_string()),
            Some(("n", v)) => n = v.parse::<usize>().ok(),
            Some(("edges", v)) => edges = v.parse::<usize>().ok(),
            _ => {}
        }
    }
    let (mesh_id, n, edge_count) = (mesh_id.ok_or("no mesh_id")?, n.ok_or("no n")?, edges.ok_or("no edges")?);
    let columns = lines.next().ok_or("missing column row")?.map_err(|e| e.to_string())?;
    if columns.trim() != FEATURE_COLUMNS.join(",") {
        return Err(format!("unexpected columns '{columns}'"));
    }
    let mut data = Vec::with_capacity(n * FEATURE_DIM);
    for line in lines {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        for tok in line.split(',') {
            data.push(tok.trim().parse::<f64>().map_err(|e| format!("{tok}: {e}"))?);
        }
    }
    let node_features = Array2::from_shape_vec((n, FEATURE_DIM), data).map_err(|e| e.to_string())?;
    Ok(FeatureDump { mesh_id, edge_count, node_features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{rotate, scale, shapes, Rotation};

    #[test]
    fn equilateral_weights_are_one() {
        for w in normalized_edge_lengths(&shapes::tetrahedron(2.0)).unwrap() {
            assert_eq!(w, 1.0);
        }
    }

    #[test]
    fn two_edge_lengths() {
        let v = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
        let m = TriMesh::from_arrays(&v, &[[0, 1, 2]]).unwrap();
        let w = normalized_edge_lengths(&m).unwrap();
        // edges sorted: (0,1) len 1, (0,2) len 2, (1,2) len sqrt 5
        let max = 5f64.sqrt();
        assert_eq!(w, vec![1.0 / max, 2.0 / max, 1.0]);
    }

    #[test]
    fn zero_length_edge_named() {
        let v = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let m = TriMesh::from_arrays(&v, &[[0, 1, 2]]).unwrap();
        assert!(matches!(normalized_edge_lengths(&m), Err(FeatureError::ZeroLengthEdge { a: 0, b: 1, .. })));
    }

    #[test]
    fn weights_are_scale_invariant() {
        let m = shapes::torus(1.0, 0.3, 10, 7);
        let a = normalized_edge_lengths(&m).unwrap();
        let b = normalized_edge_lengths(&scale(&m, 7.3)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn tetrahedron_feature_shapes() {
        let f = assemble_features(&shapes::tetrahedron(1.0)).unwrap();
        assert_eq!(f.node_features.dim(), (4, 8));
        assert_eq!(f.edge_index.len(), 12);
        assert!(f.edge_weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn directed_edges_are_symmetric() {
        let f = assemble_features(&shapes::icosphere(1.0, 2)).unwrap();
        let map: std::collections::HashMap<[usize; 2], f64> =
            f.edge_index.iter().copied().zip(f.edge_weights.iter().copied()).collect();
        for (&[a, b], w) in &map {
            assert_eq!(map[&[b, a]], *w);
        }
        assert_eq!(f.edge_weights.iter().copied().fold(0.0, f64::max), 1.0);
        for row in f.node_features.rows() {
            assert!(row[6] >= row[7]);
        }
    }

    #[test]
    fn rotation_leaves_intrinsic_columns() {
        let m = shapes::capsule(0.5, 1.0, 16, 4, 4);
        let rot = Rotation::AxisAngle { axis: [1.0, 2.0, -0.5], angle: 0.7 };
        let a = assemble_features(&m).unwrap();
        let b = assemble_features(&rotate(&m, &rot).unwrap()).unwrap();
        for (ra, rb) in a.node_features.rows().into_iter().zip(b.node_features.rows()) {
            for c in 3..8 {
                assert!((ra[c] - rb[c]).abs() < 1e-9, "column {c}: {} vs {}", ra[c], rb[c]);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let f = assemble_features(&shapes::icosphere(1.0, 1)).unwrap();
        let mut buf = Vec::new();
        write_feature_csv(&f, "ico1", &mut buf).unwrap();
        let dump = read_feature_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(dump.mesh_id, "ico1");
        assert_eq!(dump.edge_count, 120);
        assert_eq!(dump.node_features, f.node_features);
    }
}
