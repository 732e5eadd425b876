use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{total_area, TriMesh};

/// Topological and metric summary of a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshReport {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub face_count: usize,
    pub component_count: usize,
    /// No boundary edges.
    pub is_closed: bool,
    /// Every edge has at most two faces and every vertex star is a single fan.
    pub is_manifold: bool,
    /// No directed edge appears twice across faces.
    pub is_consistently_oriented: bool,
    pub euler_characteristic: i64,
    /// Present only for closed, manifold, connected, consistently oriented meshes.
    pub genus: Option<u32>,
    pub total_area: f64,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Number of connected components, counting isolated vertices.
pub(crate) fn component_labels(mesh: &TriMesh) -> (usize, Vec<usize>) {
    let n = mesh.vertex_count();
    let mut ds = DisjointSet::new(n);
    for f in mesh.faces() {
        ds.union(f[0], f[1]);
        ds.union(f[1], f[2]);
    }
    let mut label = vec![usize::MAX; n];
    let mut count = 0;
    let mut out = vec![0; n];
    for (v, slot) in out.iter_mut().enumerate() {
        let r = ds.find(v);
        if label[r] == usize::MAX {
            label[r] = count;
            count += 1;
        }
        *slot = label[r];
    }
    (count, out)
}

fn star_is_single_fan(mesh: &TriMesh, v: usize) -> bool {
    let faces = mesh.vertex_faces(v);
    if faces.is_empty() {
        return true;
    }
    let mut ds = DisjointSet::new(faces.len());
    for &w in mesh.neighbors(v) {
        let e = mesh.find_edge(v, w).expect("neighbor implies edge");
        let incident: Vec<usize> = mesh
            .edge_faces(e)
            .iter()
            .map(|f| faces.iter().position(|g| g == f).expect("edge face contains v"))
            .collect();
        for pair in incident.windows(2) {
            ds.union(pair[0], pair[1]);
        }
    }
    (0..faces.len()).all(|i| ds.find(i) == ds.find(0))
}

pub fn validate(mesh: &TriMesh) -> MeshReport {
    let (component_count, _) = component_labels(mesh);
    let edge_counts = (0..mesh.edge_count()).map(|e| mesh.edge_faces(e).len());
    let is_closed = edge_counts.clone().all(|c| c >= 2);
    let edges_ok = edge_counts.clone().all(|c| c <= 2);
    let is_manifold = edges_ok && (0..mesh.vertex_count()).all(|v| star_is_single_fan(mesh, v));

    let mut directed = HashSet::with_capacity(mesh.face_count() * 3);
    let is_consistently_oriented = mesh
        .faces()
        .iter()
        .all(|f| (0..3).all(|k| directed.insert((f[k], f[(k + 1) % 3]))));

    let euler_characteristic = mesh.vertex_count() as i64 - mesh.edge_count() as i64 + mesh.face_count() as i64;
    let genus = (is_closed && is_manifold && component_count == 1 && is_consistently_oriented)
        .then(|| (2 - euler_characteristic) / 2)
        .filter(|g| *g >= 0)
        .map(|g| g as u32);

    MeshReport {
        vertex_count: mesh.vertex_count(),
        edge_count: mesh.edge_count(),
        face_count: mesh.face_count(),
        component_count,
        is_closed,
        is_manifold,
        is_consistently_oriented,
        euler_characteristic,
        genus,
        total_area: total_area(mesh),
    }
}
