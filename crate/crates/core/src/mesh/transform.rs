use nalgebra::{Matrix3, Point3, Quaternion, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TriMesh;
use crate::error::MeshError;
use crate::numeric::compensated_sum;

const UNIT_TOLERANCE: f64 = 1e-9;

/// Record of the translation and scale applied by [`normalize_unit_cube`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    /// Bounding-box center of the original mesh.
    pub original_centroid: [f64; 3],
    /// Factor that multiplied the centered coordinates.
    pub scale_factor: f64,
}

impl ScaleRecord {
    pub fn identity() -> Self {
        ScaleRecord { original_centroid: [0.0; 3], scale_factor: 1.0 }
    }
}

/// A proper rotation, given as a quaternion `(w, x, y, z)` or an axis and angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rotation {
    Quaternion([f64; 4]),
    AxisAngle { axis: [f64; 3], angle: f64 },
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation::Quaternion([1.0, 0.0, 0.0, 0.0])
    }

    pub fn to_unit_quaternion(&self) -> Result<UnitQuaternion<f64>, MeshError> {
        match *self {
            Rotation::Quaternion([w, x, y, z]) => {
                let q = Quaternion::new(w, x, y, z);
                let norm = q.norm();
                if (norm - 1.0).abs() > UNIT_TOLERANCE {
                    return Err(MeshError::NonUnitQuaternion(norm));
                }
                Ok(UnitQuaternion::from_quaternion(q))
            }
            Rotation::AxisAngle { axis, angle } => {
                let axis = Vector3::from(axis);
                if axis.norm() == 0.0 {
                    return Err(MeshError::ZeroAxis);
                }
                Ok(UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle))
            }
        }
    }

    pub fn matrix(&self) -> Result<Matrix3<f64>, MeshError> {
        Ok(*self.to_unit_quaternion()?.to_rotation_matrix().matrix())
    }

    pub fn inverse(&self) -> Result<Rotation, MeshError> {
        let q = self.to_unit_quaternion()?.inverse();
        Ok(Rotation::Quaternion([q.w, q.i, q.j, q.k]))
    }
}

/// Uniformly distributed rotation (Shoemake's subgroup algorithm).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = [a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin(), b * (tau * u3).cos()];
    let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    Rotation::Quaternion([q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm])
}

/// Rotates the mesh about the origin.
pub fn rotate(mesh: &TriMesh, rotation: &Rotation) -> Result<TriMesh, MeshError> {
    let r = rotation.matrix()?;
    if (r.determinant() - 1.0).abs() > 1e-12 {
        return Err(MeshError::NonUnitQuaternion(r.determinant()));
    }
    Ok(mesh.with_vertices(mesh.vertices().iter().map(|p| Point3::from(r * p.coords)).collect()))
}

pub fn translate(mesh: &TriMesh, offset: [f64; 3]) -> TriMesh {
    let d = Vector3::from(offset);
    mesh.with_vertices(mesh.vertices().iter().map(|p| p + d).collect())
}

/// Uniform scaling about the origin.
pub fn scale(mesh: &TriMesh, factor: f64) -> TriMesh {
    mesh.with_vertices(mesh.vertices().iter().map(|p| Point3::from(p.coords * factor)).collect())
}

/// Centers the bounding box at the origin and scales its largest extent to 1.
pub fn normalize_unit_cube(mesh: &TriMesh) -> Result<(TriMesh, ScaleRecord), MeshError> {
    let (lo, hi) = mesh.bounding_box();
    let extent = (hi - lo).max();
    if !(extent > 0.0) {
        return Err(MeshError::ZeroExtent);
    }
    let center = nalgebra::center(&lo, &hi);
    let s = 1.0 / extent;
    let vertices = mesh.vertices().iter().map(|p| Point3::from((p - center) * s)).collect();
    let record = ScaleRecord { original_centroid: [center.x, center.y, center.z], scale_factor: s };
    Ok((mesh.with_vertices(vertices), record))
}

/// Sum of triangle areas, compensated.
pub fn total_area(mesh: &TriMesh) -> f64 {
    compensated_sum((0..mesh.face_count()).map(|f| mesh.face_area(f)))
}
