use std::f64::consts::TAU;

use nalgebra::Point3;

use crate::error::FeatureError;
use crate::mesh::TriMesh;

/// Relative cross-product threshold below which a triangle counts as degenerate.
pub(crate) const DEGENERACY: f64 = 1e-14;

/// `cot` of the angle at `o` in triangle (o, a, b), computed as `u.v / |u x v|`.
pub(crate) fn cot_at(o: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> (f64, f64) {
    let (u, v) = (a - o, b - o);
    (u.dot(&v), u.cross(&v).norm())
}

/// Interior angle at `o` in triangle (o, a, b).
pub(crate) fn angle_at(o: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let (u, v) = (a - o, b - o);
    u.cross(&v).norm().atan2(u.dot(&v))
}

fn scale_sq(mesh: &TriMesh) -> f64 {
    let (lo, hi) = mesh.bounding_box();
    (hi - lo).norm_squared()
}

/// Sum of cotangents of the angles opposite each edge (one term per incident face).
///
/// Errors if an edge has fewer or more than two faces or a triangle is degenerate.
pub fn cotangent_edge_weights(mesh: &TriMesh) -> Result<Vec<f64>, FeatureError> {
    let guard = DEGENERACY * scale_sq(mesh);
    let mut weights = Vec::with_capacity(mesh.edge_count());
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let faces = mesh.edge_faces(e);
        match faces.len() {
            2 => {}
            1 => return Err(FeatureError::BoundaryEdge(a, b)),
            _ => return Err(FeatureError::NonManifoldEdge(a, b)),
        }
        let mut w = 0.0;
        for &f in faces {
            let o = mesh.opposite_vertex(f, e);
            let (dot, cross) = cot_at(mesh.vertex(o), mesh.vertex(a), mesh.vertex(b));
            if cross < guard {
                return Err(FeatureError::DegenerateTriangle(f));
            }
            w += dot / cross;
        }
        weights.push(w);
    }
    Ok(weights)
}

/// Mixed Voronoi area per vertex.
///
/// Non-obtuse triangles contribute their circumcentric Voronoi pieces; an
/// obtuse triangle gives half its area to the obtuse corner and a quarter to
/// each other corner. The per-vertex areas partition the total area.
pub fn mixed_voronoi_areas(mesh: &TriMesh) -> Result<Vec<f64>, FeatureError> {
    let total = crate::mesh::total_area(mesh);
    let mut areas = vec![0.0; mesh.vertex_count()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let p = [mesh.vertex(f[0]), mesh.vertex(f[1]), mesh.vertex(f[2])];
        let area = mesh.face_area(fi);
        if area < DEGENERACY * total {
            return Err(FeatureError::DegenerateTriangle(fi));
        }
        let dots: [f64; 3] = std::array::from_fn(|k| (p[(k + 1) % 3] - p[k]).dot(&(p[(k + 2) % 3] - p[k])));
        if let Some(obtuse) = (0..3).find(|&k| dots[k] < 0.0) {
            for k in 0..3 {
                areas[f[k]] += if k == obtuse { area / 2.0 } else { area / 4.0 };
            }
        } else {
            // cot at corner k = dots[k] / (2 * area)
            for k in 0..3 {
                let (j, l) = ((k + 1) % 3, (k + 2) % 3);
                let cot_j = dots[j] / (2.0 * area);
                let cot_l = dots[l] / (2.0 * area);
                let len_kj = (p[j] - p[k]).norm_squared();
                let len_kl = (p[l] - p[k]).norm_squared();
                areas[f[k]] += (len_kj * cot_l + len_kl * cot_j) / 8.0;
            }
        }
    }
    Ok(areas)
}

/// Angle deficit `2*pi - sum of incident angles` per vertex, not divided by area.
pub fn unweighted_gaussian_curvature(mesh: &TriMesh) -> Result<Vec<f64>, FeatureError> {
    let guard = DEGENERACY * scale_sq(mesh);
    let mut sums = vec![0.0; mesh.vertex_count()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        if mesh.face_cross(fi).norm() < guard {
            return Err(FeatureError::DegenerateTriangle(fi));
        }
        for k in 0..3 {
            sums[f[k]] += angle_at(mesh.vertex(f[k]), mesh.vertex(f[(k + 1) % 3]), mesh.vertex(f[(k + 2) % 3]));
        }
    }
    Ok(sums.into_iter().map(|s| TAU - s).collect())
}

/// `sum_j (cot a_ij + cot b_ij) * |v_i - v_j|` per vertex, not divided by area.
pub fn unweighted_mean_curvature(mesh: &TriMesh) -> Result<Vec<f64>, FeatureError> {
    let weights = cotangent_edge_weights(mesh)?;
    let mut h = vec![0.0; mesh.vertex_count()];
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let term = weights[e] * mesh.edge_length(e);
        h[a] += term;
        h[b] += term;
    }
    Ok(h)
}

/// Angle deficit divided by the mixed area. Not part of the model input.
pub fn weighted_gaussian_curvature(mesh: &TriMesh) -> Result<Vec<f64>, FeatureError> {
    let k = unweighted_gaussian_curvature(mesh)?;
    let a = mixed_voronoi_areas(mesh)?;
    Ok(k.iter().zip(&a).map(|(k, a)| k / a).collect())
}

/// Unweighted mean curvature divided by twice the mixed area. Not part of the model input.
pub fn weighted_mean_curvature(mesh: &TriMesh) -> Result<Vec<f64>, FeatureError> {
    let h = unweighted_mean_curvature(mesh)?;
    let a = mixed_voronoi_areas(mesh)?;
    Ok(h.iter().zip(&a).map(|(h, a)| h / (2.0 * a)).collect())
}
