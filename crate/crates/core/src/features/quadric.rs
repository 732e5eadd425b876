//! Principal curvatures from a local quadric fit.
//!
//! Around each vertex the neighborhood (2-ring, grown until it has at least
//! six points) is expressed in a tangent frame whose third axis is the
//! area-weighted vertex normal, and `z = a x^2 + b xy + c y^2 + d x + e y` is
//! fitted by least squares. The principal curvatures are the eigenvalues of
//! the fitted surface's shape operator at the origin, signed so that convex
//! regions of an outward-oriented surface are positive.

use nalgebra::{DMatrix, DVector, Matrix2, Vector3};
use rayon::prelude::*;

use crate::mesh::TriMesh;

const MIN_POINTS: usize = 6;
const START_RING: usize = 2;
const MAX_RING: usize = 5;
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct PrincipalCurvatures {
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
    /// Vertices whose fit stayed rank deficient; they carry (0, 0).
    pub failed: Vec<usize>,
}

pub fn vertex_normal(mesh: &TriMesh, v: usize) -> Vector3<f64> {
    let n: Vector3<f64> = mesh.vertex_faces(v).iter().map(|&f| mesh.face_cross(f)).sum();
    n.normalize()
}

/// Vertices within `rings` edge hops of `v`, excluding `v`, in BFS order.
fn k_ring(mesh: &TriMesh, v: usize, rings: usize, seen: &mut Vec<usize>) {
    seen.clear();
    seen.push(v);
    let mut start = 0;
    for _ in 0..rings {
        let end = seen.len();
        for idx in start..end {
            for &w in mesh.neighbors(seen[idx]) {
                if !seen.contains(&w) {
                    seen.push(w);
                }
            }
        }
        start = end;
    }
    seen.remove(0);
}

fn tangent_frame(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = (helper - n * n.dot(&helper)).normalize();
    (t1, n.cross(&t1))
}

/// Fits the quadric; `None` when the design matrix is rank deficient.
fn fit(mesh: &TriMesh, v: usize, ring: &[usize], n: &Vector3<f64>) -> Option<(f64, f64)> {
    let (t1, t2) = tangent_frame(n);
    let o = mesh.vertex(v);
    let local: Vec<Vector3<f64>> = ring
        .iter()
        .map(|&w| {
            let d = mesh.vertex(w) - o;
            Vector3::new(d.dot(&t1), d.dot(&t2), d.dot(n))
        })
        .collect();
    let scale = (local.iter().map(|p| p.x * p.x + p.y * p.y).sum::<f64>() / local.len() as f64).sqrt();
    if !(scale > 0.0) {
        return None;
    }
    let m = local.len();
    let mut design = DMatrix::<f64>::zeros(m, 5);
    let mut rhs = DVector::<f64>::zeros(m);
    for (r, p) in local.iter().enumerate() {
        let (x, y, z) = (p.x / scale, p.y / scale, p.z / scale);
        design[(r, 0)] = x * x;
        design[(r, 1)] = x * y;
        design[(r, 2)] = y * y;
        design[(r, 3)] = x;
        design[(r, 4)] = y;
        rhs[r] = z;
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.iter().any(|&s| s <= RANK_TOLERANCE * smax) {
        return None;
    }
    let coef = svd.solve(&rhs, 0.0).ok()?;
    // Undo the scaling: quadratic terms pick up 1/scale, linear terms are unchanged.
    let (a, b, c) = (coef[0] / scale, coef[1] / scale, coef[2] / scale);
    let (d, e) = (coef[3], coef[4]);

    // First and second fundamental forms at the origin.
    let first = Matrix2::new(1.0 + d * d, d * e, d * e, 1.0 + e * e);
    let w = (1.0 + d * d + e * e).sqrt();
    let second = Matrix2::new(2.0 * a / w, b / w, b / w, 2.0 * c / w);
    // Symmetric form of the shape operator, L^-1 II L^-T with I = L L^T. The
    // discriminant as a hypot keeps near-umbilic points from cancelling.
    let l = first.cholesky()?.l();
    let l_inv = l.try_inverse()?;
    let s = l_inv * second * l_inv.transpose();
    let mean = 0.5 * (s[(0, 0)] + s[(1, 1)]);
    let disc = (0.5 * (s[(0, 0)] - s[(1, 1)])).hypot(0.5 * (s[(0, 1)] + s[(1, 0)]));
    // Eigenvalues of the shape operator for the +normal side; negate so convex is positive.
    let (s1, s2) = (-(mean - disc), -(mean + disc));
    Some((s1.max(s2), s1.min(s2)))
}

pub fn principal_curvatures(mesh: &TriMesh) -> PrincipalCurvatures {
    let results: Vec<Option<(f64, f64)>> = (0..mesh.vertex_count())
        .into_par_iter()
        .map_init(Vec::new, |ring, v| {
            let n = vertex_normal(mesh, v);
            if !n.iter().all(|x| x.is_finite()) {
                return None;
            }
            let mut rings = START_RING;
            loop {
                k_ring(mesh, v, rings, ring);
                if ring.len() >= MIN_POINTS {
                    if let Some(k) = fit(mesh, v, ring, &n) {
                        return Some(k);
                    }
                }
                if rings >= MAX_RING {
                    return None;
                }
                rings += 1;
            }
        })
        .collect();
    let mut out = PrincipalCurvatures::default();
    for (v, r) in results.into_iter().enumerate() {
        let (k1, k2) = r.unwrap_or_else(|| {
            out.failed.push(v);
            (0.0, 0.0)
        });
        out.kappa1.push(k1);
        out.kappa2.push(k2);
    }
    if !out.failed.is_empty() {
        log::warn!("quadric fit rank deficient at {} vertices (first: {})", out.failed.len(), out.failed[0]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn planar_grid_is_flat() {
        let m = shapes::planar_grid(8, 0.25);
        let k = principal_curvatures(&m);
        for i in 2..7 {
            for j in 2..7 {
                let v = i * 9 + j;
                assert!(k.kappa1[v].abs() < 1e-8 && k.kappa2[v].abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sphere_radius_two() {
        let m = shapes::icosphere(2.0, 4);
        let k = principal_curvatures(&m);
        assert!(k.failed.is_empty());
        let n = m.vertex_count() as f64;
        let err: f64 = k.kappa1.iter().chain(&k.kappa2).map(|x| (x - 0.5).abs() / 0.5).sum::<f64>() / (2.0 * n);
        assert!(err < 0.05, "mean relative error {err}");
        for (a, b) in k.kappa1.iter().zip(&k.kappa2) {
            assert!(a >= b);
            assert!(a - b < 0.05);
        }
    }

    #[test]
    fn cylinder_side() {
        let r = 0.8;
        let m = shapes::cylinder(r, 4.0, 64, 40, 4);
        let k = principal_curvatures(&m);
        let mut count = 0;
        for (v, p) in m.vertices().iter().enumerate() {
            let rho = (p.x * p.x + p.y * p.y).sqrt();
            if (rho - r).abs() < 1e-9 && p.z.abs() < 1.0 {
                assert!((k.kappa1[v] - 1.0 / r).abs() < 0.05 / r, "k1 {}", k.kappa1[v]);
                assert!(k.kappa2[v].abs() < 0.05, "k2 {}", k.kappa2[v]);
                count += 1;
            }
        }
        assert!(count > 100);
    }

    #[test]
    fn curvature_scales_inversely() {
        let m = shapes::torus(1.0, 0.35, 24, 12);
        let c = 2.5;
        let k0 = principal_curvatures(&m);
        let k1 = principal_curvatures(&crate::mesh::scale(&m, c));
        for (a, b) in k0.kappa1.iter().zip(&k1.kappa1) {
            assert!((a / c - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }
}
