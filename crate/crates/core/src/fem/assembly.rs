use rayon::prelude::*;

use super::sparse::CsrMatrix;
use crate::error::FemError;
use crate::features::DEGENERACY;
use crate::mesh::TriMesh;

/// Faces per parallel work unit. Chunks are merged in index order, so the
/// result does not depend on the thread count.
const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassKind {
    #[default]
    Consistent,
    /// Row-summed diagonal mass, A/3 per corner.
    Lumped,
}

type Triplets = Vec<(usize, usize, f64)>;

fn check_face(mesh: &TriMesh, f: usize) -> Result<f64, FemError> {
    let [a, b, c] = mesh.faces()[f];
    let (pa, pb, pc) = (mesh.vertex(a), mesh.vertex(b), mesh.vertex(c));
    let longest = (pb - pa).norm_squared().max((pc - pb).norm_squared()).max((pa - pc).norm_squared());
    let twice_area = mesh.face_cross(f).norm();
    if !(twice_area > DEGENERACY * longest) {
        return Err(FemError::DegenerateTriangle(f));
    }
    Ok(twice_area)
}

fn assemble<F>(mesh: &TriMesh, per_face: F) -> Result<CsrMatrix, FemError>
where
    F: Fn(usize, &mut Triplets) -> Result<(), FemError> + Sync,
{
    let faces: Vec<usize> = (0..mesh.face_count()).collect();
    let chunks: Vec<Triplets> = faces
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut buf = Vec::with_capacity(chunk.len() * 9);
            for &f in chunk {
                per_face(f, &mut buf)?;
            }
            Ok(buf)
        })
        .collect::<Result<_, FemError>>()?;
    Ok(CsrMatrix::from_triplets(mesh.vertex_count(), chunks.concat()))
}

/// Cotangent stiffness matrix, `K_ij = -(cot a + cot b) / 2`, rows summing to zero.
pub fn assemble_stiffness(mesh: &TriMesh) -> Result<CsrMatrix, FemError> {
    assemble(mesh, |f, out| {
        let twice_area = check_face(mesh, f)?;
        let tri = mesh.faces()[f];
        for k in 0..3 {
            let (o, i, j) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let (po, pi, pj) = (mesh.vertex(o), mesh.vertex(i), mesh.vertex(j));
            let half_cot = 0.5 * (pi - po).dot(&(pj - po)) / twice_area;
            out.extend([(i, j, -half_cot), (j, i, -half_cot), (i, i, half_cot), (j, j, half_cot)]);
        }
        Ok(())
    })
}

pub fn assemble_mass(mesh: &TriMesh, kind: MassKind) -> Result<CsrMatrix, FemError> {
    assemble(mesh, |f, out| {
        let area = 0.5 * check_face(mesh, f)?;
        let tri = mesh.faces()[f];
        match kind {
            MassKind::Consistent => {
                for a in 0..3 {
                    for b in 0..3 {
                        out.push((tri[a], tri[b], if a == b { area / 6.0 } else { area / 12.0 }));
                    }
                }
            }
            MassKind::Lumped => out.extend(tri.iter().map(|&v| (v, v, area / 3.0))),
        }
        Ok(())
    })
}
