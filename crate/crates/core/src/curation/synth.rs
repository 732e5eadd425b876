use std::str::FromStr;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CurationError, FemError};
use crate::fem::lb_spectrum;
use crate::mesh::{normalize_unit_cube, random_rotation, rotate, shapes, Rotation, ScaleRecord, TriMesh};

/// Parameterized primitive families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Box,
    Sphere,
    Ellipsoid,
    Cylinder,
    Cone,
    Capsule,
    Torus,
    SquarePyramid,
    TriangularPrism,
    HexagonalPrism,
}

pub const SHAPE_CLASSES: [ShapeClass; 10] = [
    ShapeClass::Box,
    ShapeClass::Sphere,
    ShapeClass::Ellipsoid,
    ShapeClass::Cylinder,
    ShapeClass::Cone,
    ShapeClass::Capsule,
    ShapeClass::Torus,
    ShapeClass::SquarePyramid,
    ShapeClass::TriangularPrism,
    ShapeClass::HexagonalPrism,
];

impl ShapeClass {
    pub fn name(self) -> &'static str {
        match self {
            ShapeClass::Box => "box",
            ShapeClass::Sphere => "sphere",
            ShapeClass::Ellipsoid => "ellipsoid",
            ShapeClass::Cylinder => "cylinder",
            ShapeClass::Cone => "cone",
            ShapeClass::Capsule => "capsule",
            ShapeClass::Torus => "torus",
            ShapeClass::SquarePyramid => "square_pyramid",
            ShapeClass::TriangularPrism => "triangular_prism",
            ShapeClass::HexagonalPrism => "hexagonal_prism",
        }
    }
}

impl std::fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SHAPE_CLASSES
            .into_iter()
            .find(|c| c.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown shape class '{s}'"))
    }
}

fn stretch(mesh: &TriMesh, s: [f64; 3]) -> TriMesh {
    mesh.with_vertices(mesh.vertices().iter().map(|p| Point3::new(p.x * s[0], p.y * s[1], p.z * s[2])).collect())
}

/// One primitive with axis dimensions `dims` (each in `[0.5, 2.0]`), before rotation.
///
/// Spheres use `dims[0]` as the radius and ignore the rest.
pub fn synth_mesh(class: ShapeClass, dims: [f64; 3]) -> Result<TriMesh, CurationError> {
    if dims.iter().any(|d| !(0.5..=2.0).contains(d)) {
        return Err(CurationError::InvalidParameter(format!("dimensions {dims:?} outside [0.5, 2.0]")));
    }
    let half = |m: TriMesh| stretch(&m, dims.map(|d| d / 2.0));
    Ok(match class {
        ShapeClass::Box => stretch(&crate::mesh::translate(&shapes::voxel_surface(&[[0, 0, 0]], 4), [-0.5; 3]), dims),
        ShapeClass::Sphere => shapes::geodesic_sphere(dims[0], 7),
        ShapeClass::Ellipsoid => half(shapes::geodesic_sphere(1.0, 7)),
        ShapeClass::Cylinder => half(shapes::cylinder(1.0, 2.0, 14, 4, 2)),
        ShapeClass::Cone => half(shapes::cone(&shapes::circle_section(14), 1.0, 2.0, 5, 2)),
        ShapeClass::Capsule => half(shapes::capsule(0.5, 1.0, 14, 3, 3)),
        ShapeClass::Torus => half(shapes::torus(0.7, 0.3, 16, 8)),
        ShapeClass::SquarePyramid => half(shapes::cone(&shapes::polygon_section(4, 3, 0.0), 1.0, 2.0, 4, 2)),
        ShapeClass::TriangularPrism => half(shapes::prism(&shapes::polygon_section(3, 4, 0.0), 1.0, 2.0, 4, 3)),
        ShapeClass::HexagonalPrism => half(shapes::prism(&shapes::polygon_section(6, 2, 0.0), 1.0, 2.0, 4, 2)),
    })
}

/// A generated part: normalized, rotated mesh with its spectrum label.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub id: String,
    pub class: ShapeClass,
    pub dims: [f64; 3],
    pub rotation: Rotation,
    /// Mapping from the generated (scaled, rotated) mesh to `mesh`.
    pub scale: ScaleRecord,
    /// Unit-cube normalized mesh.
    pub mesh: TriMesh,
    /// `k` eigenvalues of the normalized mesh after the zero mode.
    pub eigenvalues: Vec<f64>,
}

/// `n_per_class` parts of every class, each with random dimensions and a
/// random rotation. Sample `i` of class `c` depends only on `(seed, c, i)`.
pub fn synth_dataset(classes: &[ShapeClass], n_per_class: usize, seed: u64, k: usize) -> Result<Vec<SynthSample>, CurationError> {
    if classes.is_empty() {
        return Err(CurationError::InvalidParameter("no shape classes".into()));
    }
    if k == 0 {
        return Err(CurationError::InvalidParameter("k must be positive".into()));
    }
    let jobs: Vec<(ShapeClass, usize)> = classes.iter().flat_map(|&c| (0..n_per_class).map(move |i| (c, i))).collect();
    jobs.par_iter()
        .map(|&(class, i)| {
            let class_index = SHAPE_CLASSES.iter().position(|&c| c == class).unwrap() as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (class_index << 40) ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let dims: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.5..=2.0));
            let rotation = random_rotation(&mut rng);
            let mesh = rotate(&synth_mesh(class, dims)?, &rotation).expect("unit rotation");
            let (mesh, scale) = normalize_unit_cube(&mesh).expect("primitives have extent");
            let spec = lb_spectrum(&mesh, k + 1).map_err(|e: FemError| CurationError::InvalidParameter(format!("{class} {i}: {e}")))?;
            Ok(SynthSample {
                id: format!("{class}_{i:05}"),
                class,
                dims,
                rotation,
                scale,
                mesh,
                eigenvalues: spec.eigenvalues[1..].to_vec(),
            })
        })
        .collect()
}
