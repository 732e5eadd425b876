//! Isotropic remeshing: split long edges, collapse short ones, flip toward
//! valence 6, relax tangentially and project back onto the input surface.
//!
//! Every pass rebuilds a [`TriMesh`] and applies an independent set of local
//! operations, so no operation sees stale adjacency.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::CurationError;
use crate::mesh::{total_area, validate, TriMesh};

/// Faces meeting at a dihedral whose normals' dot is below this form a crease.
const CREASE_COS: f64 = 0.7;
const INNER_ITERATIONS: usize = 6;
/// Input in the vertex window with edge-length variation below this is kept as is.
pub const NEAR_UNIFORM_CV: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemeshOutcome {
    #[serde(skip)]
    pub mesh: Option<TriMesh>,
    /// Target-length attempts; 0 when the input was returned untouched.
    pub iterations: usize,
    pub target_edge_length: f64,
    pub vertex_count: usize,
    pub cv_before: f64,
    pub cv_after: f64,
    pub area_before: f64,
    pub area_after: f64,
}

/// Coefficient of variation of the edge lengths.
pub fn edge_length_cv(mesh: &TriMesh) -> f64 {
    let n = mesh.edge_count() as f64;
    let lengths: Vec<f64> = (0..mesh.edge_count()).map(|e| mesh.edge_length(e)).collect();
    let mean = lengths.iter().sum::<f64>() / n;
    let var = lengths.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Post-condition violations of a remesh of `input` into `output`.
///
/// With `require_cv_drop` the edge-length variation must strictly drop; callers
/// skip that for inputs already below [`NEAR_UNIFORM_CV`], which a resampling
/// cannot make more uniform (an equilateral tetrahedron has zero variation).
pub fn remesh_violations(input: &TriMesh, output: &TriMesh, range: (usize, usize), require_cv_drop: bool) -> Vec<String> {
    let mut out = Vec::new();
    let (ri, ro) = (validate(input), validate(output));
    if !(ro.is_closed && ro.is_manifold && ro.is_consistently_oriented) {
        out.push("output is not a closed oriented manifold".into());
    }
    if ri.genus != ro.genus || ri.component_count != ro.component_count {
        out.push(format!("topology changed: genus {:?} -> {:?}", ri.genus, ro.genus));
    }
    if !(range.0..=range.1).contains(&ro.vertex_count) {
        out.push(format!("{} vertices outside [{}, {}]", ro.vertex_count, range.0, range.1));
    }
    let rel = (ro.total_area - ri.total_area).abs() / ri.total_area;
    if rel > 0.02 {
        out.push(format!("area changed by {:.2}%", 100.0 * rel));
    }
    if require_cv_drop {
        let (a, b) = (edge_length_cv(input), edge_length_cv(output));
        if b >= a {
            out.push(format!("edge-length variation did not drop ({a:.4} -> {b:.4})"));
        }
    }
    out
}

/// Remeshes a closed manifold mesh until its vertex count lands in `range`,
/// adjusting the target edge length by bisection for at most `max_iterations` attempts.
pub fn isotropic_remesh(mesh: &TriMesh, range: (usize, usize), max_iterations: usize) -> Result<RemeshOutcome, CurationError> {
    if range.0 > range.1 || range.0 < 4 {
        return Err(CurationError::InvalidParameter(format!("vertex range [{}, {}]", range.0, range.1)));
    }
    let report = validate(mesh);
    if !(report.is_closed && report.is_manifold && report.is_consistently_oriented) {
        return Err(CurationError::NotClosedManifold);
    }
    let area = report.total_area;
    let cv_before = edge_length_cv(mesh);
    let target = (range.0 + range.1) as f64 / 2.0;
    let mut length = (2.0 * area / (3f64.sqrt() * target)).sqrt();
    let mut outcome = RemeshOutcome {
        mesh: None,
        iterations: 0,
        target_edge_length: length,
        vertex_count: mesh.vertex_count(),
        cv_before,
        cv_after: cv_before,
        area_before: area,
        area_after: area,
    };
    if (range.0..=range.1).contains(&mesh.vertex_count()) && cv_before <= NEAR_UNIFORM_CV {
        outcome.mesh = Some(mesh.clone());
        return Ok(outcome);
    }

    let reference = Reference::new(mesh);
    let (mut too_short, mut too_long): (Option<f64>, Option<f64>) = (None, None);
    let mut current = mesh.clone();
    for attempt in 1..=max_iterations {
        current = remesh_at(&current, &reference, length);
        let v = current.vertex_count();
        log::debug!("remesh attempt {attempt}: length {length:.5} -> {v} vertices");
        outcome.iterations = attempt;
        outcome.target_edge_length = length;
        outcome.vertex_count = v;
        if (range.0..=range.1).contains(&v) {
            outcome.cv_after = edge_length_cv(&current);
            outcome.area_after = total_area(&current);
            outcome.mesh = Some(current);
            return Ok(outcome);
        }
        if v > range.1 {
            too_short = Some(length);
        } else {
            too_long = Some(length);
        }
        length = match (too_short, too_long) {
            (Some(a), Some(b)) => (a * b).sqrt(),
            _ => length * (v as f64 / target).sqrt(),
        };
    }
    Err(CurationError::RemeshFailure { iterations: max_iterations, vertices: outcome.vertex_count })
}

fn remesh_at(mesh: &TriMesh, reference: &Reference, length: f64) -> TriMesh {
    let (low, high) = (0.8 * length, 4.0 / 3.0 * length);
    let mut m = mesh.clone();
    for _ in 0..INNER_ITERATIONS {
        for _ in 0..16 {
            match split_long(&m, high) {
                Some(next) => m = next,
                None => break,
            }
        }
        for _ in 0..64 {
            match collapse_short(&m, low, high) {
                Some(next) => m = next,
                None => break,
            }
        }
        for _ in 0..4 {
            match flip_valence(&m) {
                Some(next) => m = next,
                None => break,
            }
        }
        m = relax(&m, reference);
    }
    for _ in 0..4 {
        m = relax(&m, reference);
    }
    m
}

fn unit_normal(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Vector3<f64> {
    (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_else(Vector3::zeros)
}

fn face_normal(m: &TriMesh, f: usize) -> Vector3<f64> {
    let [a, b, c] = m.faces()[f];
    unit_normal(m.vertex(a), m.vertex(b), m.vertex(c))
}

fn is_crease(m: &TriMesh, e: usize) -> bool {
    match m.edge_faces(e) {
        [f, g] => face_normal(m, *f).dot(&face_normal(m, *g)) < CREASE_COS,
        _ => true,
    }
}

/// Number of crease edges at every vertex.
fn crease_degree(m: &TriMesh) -> Vec<usize> {
    let mut deg = vec![0; m.vertex_count()];
    for e in 0..m.edge_count() {
        if is_crease(m, e) {
            let [a, b] = m.edges()[e];
            deg[a] += 1;
            deg[b] += 1;
        }
    }
    deg
}

fn split_long(m: &TriMesh, high: f64) -> Option<TriMesh> {
    let mut verts = m.vertices().to_vec();
    let mut mid: HashMap<[usize; 2], usize> = HashMap::new();
    for (e, &[a, b]) in m.edges().iter().enumerate() {
        if m.edge_length(e) > high {
            mid.insert([a, b], verts.len());
            verts.push(nalgebra::center(m.vertex(a), m.vertex(b)));
        }
    }
    if mid.is_empty() {
        return None;
    }
    let key = |a: usize, b: usize| mid.get(&[a.min(b), a.max(b)]).copied();
    let mut faces = Vec::with_capacity(m.face_count() * 2);
    for f in m.faces() {
        let splits: Vec<Option<usize>> = (0..3).map(|k| key(f[k], f[(k + 1) % 3])).collect();
        match splits.iter().filter(|s| s.is_some()).count() {
            0 => faces.push(*f),
            1 => {
                let k = splits.iter().position(|s| s.is_some()).unwrap();
                let (a, b, c) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
                let x = splits[k].unwrap();
                faces.push([a, x, c]);
                faces.push([x, b, c]);
            }
            2 => {
                // rotate so the unsplit edge is (v2, v0)
                let k = (splits.iter().position(|s| s.is_none()).unwrap() + 1) % 3;
                let (v0, v1, v2) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
                let (m01, m12) = (splits[k].unwrap(), splits[(k + 1) % 3].unwrap());
                faces.push([m01, v1, m12]);
                let d1 = (verts[v0] - verts[m12]).norm();
                let d2 = (verts[m01] - verts[v2]).norm();
                if d1 <= d2 {
                    faces.push([v0, m01, m12]);
                    faces.push([v0, m12, v2]);
                } else {
                    faces.push([v0, m01, v2]);
                    faces.push([m01, m12, v2]);
                }
            }
            _ => {
                let (x, y, z) = (splits[0].unwrap(), splits[1].unwrap(), splits[2].unwrap());
                faces.push([f[0], x, z]);
                faces.push([x, f[1], y]);
                faces.push([z, y, f[2]]);
                faces.push([x, y, z]);
            }
        }
    }
    TriMesh::new(verts, faces).ok()
}

fn collapse_short(m: &TriMesh, low: f64, high: f64) -> Option<TriMesh> {
    let n = m.vertex_count();
    if n <= 4 {
        return None;
    }
    let crease = crease_degree(m);
    let mut order: Vec<(f64, usize)> = (0..m.edge_count()).map(|e| (m.edge_length(e), e)).filter(|p| p.0 < low).collect();
    if order.is_empty() {
        return None;
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut locked = vec![false; n];
    let mut valence_loss = vec![0usize; n];
    let mut target: Vec<usize> = (0..n).collect();
    let mut pos = m.vertices().to_vec();
    let mut removed = 0;

    for (_, e) in order {
        let [a0, b0] = m.edges()[e];
        if locked[a0] || locked[b0] || n - removed <= 4 {
            continue;
        }
        let ef = m.edge_faces(e);
        if ef.len() != 2 {
            continue;
        }
        let (c, d) = (m.opposite_vertex(ef[0], e), m.opposite_vertex(ef[1], e));
        let common = m.neighbors(a0).iter().filter(|w| m.neighbors(b0).binary_search(w).is_ok()).count();
        if common != 2 {
            continue;
        }
        // keep is the surviving vertex, gone is merged into it
        let kind = |v: usize| match crease[v] {
            0 => 0,
            2 => 1,
            _ => 2,
        };
        let edge_crease = is_crease(m, e);
        let (keep, gone, p) = match (kind(a0), kind(b0)) {
            (0, 0) => (a0, b0, nalgebra::center(m.vertex(a0), m.vertex(b0))),
            (_, 0) => (a0, b0, *m.vertex(a0)),
            (0, _) => (b0, a0, *m.vertex(b0)),
            (1, 1) if edge_crease => (a0, b0, nalgebra::center(m.vertex(a0), m.vertex(b0))),
            (2, 1) if edge_crease => (a0, b0, *m.vertex(a0)),
            (1, 2) if edge_crease => (b0, a0, *m.vertex(b0)),
            _ => continue,
        };
        let deg = |v: usize| m.neighbors(v).len() - valence_loss[v];
        if deg(a0) + deg(b0) < 7 || deg(c) < 4 || deg(d) < 4 {
            continue;
        }
        let ring = m.neighbors(a0).iter().chain(m.neighbors(b0)).filter(|&&w| w != a0 && w != b0);
        if ring.clone().any(|&w| (m.vertex(w) - p).norm() >= high) {
            continue;
        }
        let flips = m.vertex_faces(a0).iter().chain(m.vertex_faces(b0)).any(|&f| {
            let tri = m.faces()[f];
            if tri.contains(&a0) && tri.contains(&b0) {
                return false;
            }
            let q: Vec<Point3<f64>> = tri.iter().map(|&v| if v == a0 || v == b0 { p } else { *m.vertex(v) }).collect();
            let nn = (q[1] - q[0]).cross(&(q[2] - q[0]));
            nn.norm() <= 1e-12 * high * high || nn.normalize().dot(&face_normal(m, f)) < 0.5
        });
        if flips {
            continue;
        }
        target[gone] = keep;
        pos[keep] = p;
        valence_loss[c] += 1;
        valence_loss[d] += 1;
        locked[a0] = true;
        locked[b0] = true;
        for &w in m.neighbors(a0).iter().chain(m.neighbors(b0)) {
            locked[w] = true;
        }
        removed += 1;
    }
    if removed == 0 {
        return None;
    }
    let faces: Vec<[usize; 3]> = m
        .faces()
        .iter()
        .map(|f| [target[f[0]], target[f[1]], target[f[2]]])
        .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
        .collect();
    compact(pos, faces)
}

/// Drops unreferenced vertices and renumbers in order.
fn compact(pos: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Option<TriMesh> {
    let mut used = vec![false; pos.len()];
    for f in &faces {
        for &v in f {
            used[v] = true;
        }
    }
    let mut map = vec![usize::MAX; pos.len()];
    let mut verts = Vec::with_capacity(pos.len());
    for (i, p) in pos.into_iter().enumerate() {
        if used[i] {
            map[i] = verts.len();
            verts.push(p);
        }
    }
    let faces = faces.into_iter().map(|f| [map[f[0]], map[f[1]], map[f[2]]]).collect();
    TriMesh::new(verts, faces).ok()
}

fn flip_valence(m: &TriMesh) -> Option<TriMesh> {
    let mut locked = vec![false; m.vertex_count()];
    let mut faces = m.faces().to_vec();
    let mut flipped = 0;
    let dev = |v: usize, delta: i64| {
        let d = m.neighbors(v).len() as i64 + delta - 6;
        d * d
    };
    for (e, &[a, b]) in m.edges().iter().enumerate() {
        let ef = m.edge_faces(e);
        if ef.len() != 2 {
            continue;
        }
        let (c, d) = (m.opposite_vertex(ef[0], e), m.opposite_vertex(ef[1], e));
        if [a, b, c, d].iter().any(|&v| locked[v]) || m.find_edge(c, d).is_some() {
            continue;
        }
        if m.neighbors(a).len() <= 3 || m.neighbors(b).len() <= 3 {
            continue;
        }
        let before = dev(a, 0) + dev(b, 0) + dev(c, 0) + dev(d, 0);
        let after = dev(a, -1) + dev(b, -1) + dev(c, 1) + dev(d, 1);
        if after >= before {
            continue;
        }
        let (n0, n1) = (face_normal(m, ef[0]), face_normal(m, ef[1]));
        if n0.dot(&n1) < CREASE_COS {
            continue;
        }
        // orient the new pair like the face that runs a -> b
        let (f0, f1) = (ef[0], ef[1]);
        let forward = |f: usize| (0..3).any(|k| m.faces()[f][k] == a && m.faces()[f][(k + 1) % 3] == b);
        let (c, d) = if forward(f0) { (c, d) } else { (d, c) };
        let t0 = [c, a, d];
        let t1 = [d, b, c];
        let avg = (n0 + n1).normalize();
        let ok = [t0, t1].iter().all(|t| {
            let nn = (m.vertex(t[1]) - m.vertex(t[0])).cross(&(m.vertex(t[2]) - m.vertex(t[0])));
            let len = nn.norm();
            len > 1e-14 * m.edge_length(e).powi(2) && nn.dot(&avg) / len > CREASE_COS
        });
        if !ok {
            continue;
        }
        faces[f0] = t0;
        faces[f1] = t1;
        for v in [a, b, c, d] {
            locked[v] = true;
        }
        flipped += 1;
    }
    if flipped == 0 {
        return None;
    }
    TriMesh::new(m.vertices().to_vec(), faces).ok()
}

/// Tangential smoothing of non-crease vertices followed by projection onto the reference.
fn relax(m: &TriMesh, reference: &Reference) -> TriMesh {
    let crease = crease_degree(m);
    let mut normals = vec![Vector3::zeros(); m.vertex_count()];
    for f in 0..m.face_count() {
        let nn = m.face_cross(f);
        for &v in &m.faces()[f] {
            normals[v] += nn;
        }
    }
    let mut verts: Vec<Point3<f64>> = (0..m.vertex_count())
        .map(|v| {
            let p = *m.vertex(v);
            if crease[v] > 0 {
                return p;
            }
            let nbrs = m.neighbors(v);
            let q = nbrs.iter().fold(Vector3::zeros(), |s, &w| s + m.vertex(w).coords) / nbrs.len() as f64;
            let Some(n) = normals[v].try_normalize(0.0) else { return p };
            let d = q - p.coords;
            let moved = p + (d - n * n.dot(&d));
            reference.project(&moved)
        })
        .collect();
    // pin the corners of any face the step would flip, until none flips
    loop {
        let mut pinned = false;
        for f in 0..m.face_count() {
            let [a, b, c] = m.faces()[f];
            if unit_normal(&verts[a], &verts[b], &verts[c]).dot(&face_normal(m, f)) < 0.0 {
                for v in [a, b, c] {
                    if verts[v] != *m.vertex(v) {
                        verts[v] = *m.vertex(v);
                        pinned = true;
                    }
                }
            }
        }
        if !pinned {
            break;
        }
    }
    m.with_vertices(verts)
}

/// Input surface with a uniform grid over its triangles for closest-point queries.
struct Reference {
    tris: Vec<[Point3<f64>; 3]>,
    origin: Point3<f64>,
    cell: f64,
    dims: [usize; 3],
    grid: HashMap<[usize; 3], Vec<usize>>,
}

impl Reference {
    fn new(mesh: &TriMesh) -> Self {
        let tris: Vec<[Point3<f64>; 3]> =
            mesh.faces().iter().map(|f| [*mesh.vertex(f[0]), *mesh.vertex(f[1]), *mesh.vertex(f[2])]).collect();
        let (lo, hi) = mesh.bounding_box();
        let mean_edge = (0..mesh.edge_count()).map(|e| mesh.edge_length(e)).sum::<f64>() / mesh.edge_count() as f64;
        let extent = (hi - lo).max().max(1e-12);
        let cell = mean_edge.max(extent / 64.0);
        let dims = [0, 1, 2].map(|k| (((hi[k] - lo[k]) / cell).floor() as usize) + 1);
        let mut grid: HashMap<[usize; 3], Vec<usize>> = HashMap::new();
        for (t, tri) in tris.iter().enumerate() {
            let mut a = [usize::MAX; 3];
            let mut b = [0; 3];
            for p in tri {
                for k in 0..3 {
                    let c = (((p[k] - lo[k]) / cell).floor() as usize).min(dims[k] - 1);
                    a[k] = a[k].min(c);
                    b[k] = b[k].max(c);
                }
            }
            for x in a[0]..=b[0] {
                for y in a[1]..=b[1] {
                    for z in a[2]..=b[2] {
                        grid.entry([x, y, z]).or_default().push(t);
                    }
                }
            }
        }
        Reference { tris, origin: lo, cell, dims, grid }
    }

    fn project(&self, p: &Point3<f64>) -> Point3<f64> {
        let c = [0, 1, 2].map(|k| (((p[k] - self.origin[k]) / self.cell).floor().max(0.0) as usize).min(self.dims[k] - 1));
        let mut best: Option<(f64, Point3<f64>)> = None;
        let max_ring = self.dims.iter().copied().max().unwrap();
        for ring in 1..=max_ring {
            let r = ring as i64;
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        let key = [c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz];
                        if key.iter().any(|&k| k < 0) {
                            continue;
                        }
                        let key = key.map(|k| k as usize);
                        for &t in self.grid.get(&key).map(Vec::as_slice).unwrap_or(&[]) {
                            let [a, b, cc] = &self.tris[t];
                            let q = closest_point_on_triangle(p, a, b, cc);
                            let d = (q - p).norm_squared();
                            if best.is_none_or(|(bd, _)| d < bd) {
                                best = Some((d, q));
                            }
                        }
                    }
                }
            }
            // every cell at ring distance r is at least (r - 1) cells away
            if let Some((d, _)) = best {
                if d.sqrt() <= (ring as f64) * self.cell {
                    break;
                }
            }
        }
        best.map_or(*p, |(_, q)| q)
    }
}

/// Closest point on triangle `abc` to `p`, by Voronoi region of the triangle.
fn closest_point_on_triangle(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Point3<f64> {
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0));
        let q = closest_point_on_triangle(&Point3::new(0.2, 0.2, 3.0), &a, &b, &c);
        assert!((q - Point3::new(0.2, 0.2, 0.0)).norm() < 1e-15);
        assert_eq!(closest_point_on_triangle(&Point3::new(-1.0, -1.0, 0.0), &a, &b, &c), a);
        let q = closest_point_on_triangle(&Point3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((q - Point3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cv_of_equal_edges_is_zero() {
        assert!(edge_length_cv(&shapes::tetrahedron(1.0)) < 1e-12);
    }

    #[test]
    fn rejects_open_input() {
        assert!(matches!(
            isotropic_remesh(&shapes::disk(1.0, 12, 3), (50, 80), 5),
            Err(CurationError::NotClosedManifold)
        ));
    }
}
