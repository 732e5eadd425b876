//! Indexed triangle meshes with derived topology.
//!
//! A [`TriMesh`] is immutable once built. Construction derives the unique
//! undirected edge list, sorted one-ring neighbor lists and the faces incident
//! to each edge, so downstream code never rebuilds adjacency.

mod io;
mod report;
pub mod shapes;
mod transform;

use nalgebra::{Point3, Vector3};

use crate::error::MeshError;

pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh, MeshFormat};
pub use report::{validate, MeshReport};
pub use transform::{normalize_unit_cube, random_rotation, rotate, scale, total_area, translate, Rotation, ScaleRecord};

/// Indexed triangle mesh. Faces are counterclockwise vertex triples.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_faces: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
    neighbor_edges: Vec<Vec<usize>>,
    vertex_faces: Vec<Vec<usize>>,
}

impl PartialEq for TriMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.faces == other.faces
    }
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(MeshError::Empty);
        }
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(MeshError::IndexOutOfRange { face: fi, index: v, count: n });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::DegenerateFace(fi));
            }
        }

        let mut pairs: Vec<(usize, usize, usize)> = Vec::with_capacity(faces.len() * 3);
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                pairs.push((a.min(b), a.max(b), fi));
            }
        }
        pairs.sort_unstable();

        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_faces: Vec<Vec<usize>> = Vec::new();
        for (a, b, fi) in pairs {
            match edges.last() {
                Some(&[la, lb]) if la == a && lb == b => edge_faces.last_mut().unwrap().push(fi),
                _ => {
                    edges.push([a, b]);
                    edge_faces.push(vec![fi]);
                }
            }
        }

        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (ei, &[a, b]) in edges.iter().enumerate() {
            adj[a].push((b, ei));
            adj[b].push((a, ei));
        }
        let mut neighbors = Vec::with_capacity(n);
        let mut neighbor_edges = Vec::with_capacity(n);
        for mut list in adj {
            list.sort_unstable();
            neighbors.push(list.iter().map(|p| p.0).collect());
            neighbor_edges.push(list.iter().map(|p| p.1).collect());
        }

        let mut vertex_faces = vec![Vec::new(); n];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[v].push(fi);
            }
        }

        Ok(TriMesh { vertices, faces, edges, edge_faces, neighbors, neighbor_edges, vertex_faces })
    }

    /// Builds a mesh from flat coordinate arrays.
    pub fn from_arrays(coords: &[[f64; 3]], faces: &[[usize; 3]]) -> Result<Self, MeshError> {
        Self::new(coords.iter().map(|c| Point3::new(c[0], c[1], c[2])).collect(), faces.to_vec())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Point3<f64> {
        &self.vertices[i]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Unique undirected edges, each stored as `[a, b]` with `a < b`, sorted.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Faces incident to edge `e`.
    pub fn edge_faces(&self, e: usize) -> &[usize] {
        &self.edge_faces[e]
    }

    /// Sorted one-ring neighbors of vertex `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Edge ids parallel to [`TriMesh::neighbors`].
    pub fn neighbor_edges(&self, i: usize) -> &[usize] {
        &self.neighbor_edges[i]
    }

    pub fn vertex_faces(&self, i: usize) -> &[usize] {
        &self.vertex_faces[i]
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        let list = self.neighbors.get(a)?;
        list.binary_search(&b).ok().map(|pos| self.neighbor_edges[a][pos])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        (self.vertices[a] - self.vertices[b]).norm()
    }

    /// Vertex of face `f` that is not on edge `e`.
    pub fn opposite_vertex(&self, f: usize, e: usize) -> usize {
        let [a, b] = self.edges[e];
        *self.faces[f].iter().find(|&&v| v != a && v != b).expect("face contains the edge")
    }

    /// Unnormalized face normal (twice the area, counterclockwise orientation).
    pub fn face_cross(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[f];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (pb - pa).cross(&(pc - pa))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounding_box(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for p in &self.vertices[1..] {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Same connectivity with new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Point3<f64>>) -> TriMesh {
        assert_eq!(vertices.len(), self.vertices.len(), "vertex count must not change");
        TriMesh { vertices, ..self.clone() }
    }

    /// Mesh with vertices relabeled so that old vertex `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<TriMesh, MeshError> {
        let mut vertices = self.vertices.clone();
        for (old, &new) in perm.iter().enumerate() {
            vertices[new] = self.vertices[old];
        }
        let faces = self.faces.iter().map(|f| [perm[f[0]], perm[f[1]], perm[f[2]]]).collect();
        TriMesh::new(vertices, faces)
    }

    /// Disjoint union of two meshes.
    pub fn disjoint_union(&self, other: &TriMesh) -> TriMesh {
        let offset = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
        TriMesh::new(vertices, faces).expect("union of valid meshes is valid")
    }
}
