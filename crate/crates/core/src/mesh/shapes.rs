//! Procedural closed (and a few open) triangle meshes.
//!
//! Most solids are built by [`sweep`]: a closed cross-section polygon is
//! scaled by a radial profile and stacked along z. A profile that starts or
//! ends on the axis closes with a fan around a pole.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::TriMesh;

pub fn tetrahedron(side: f64) -> TriMesh {
    let s = side / (2.0 * 2f64.sqrt());
    TriMesh::from_arrays(
        &[[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]],
        &[[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
    .expect("valid tetrahedron")
}

/// Axis-aligned cube centered at the origin, 8 vertices and 12 triangles.
pub fn cube(side: f64) -> TriMesh {
    let h = side / 2.0;
    let v: Vec<[f64; 3]> = (0..8)
        .map(|i| [if i & 1 == 0 { -h } else { h }, if i & 2 == 0 { -h } else { h }, if i & 4 == 0 { -h } else { h }])
        .collect();
    let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
    let faces: Vec<[usize; 3]> = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    TriMesh::from_arrays(&v, &faces).expect("valid cube")
}

pub fn icosahedron(radius: f64) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let norm = (1.0 + t * t).sqrt();
    let v: Vec<[f64; 3]> = raw.iter().map(|p| [p[0] / norm * radius, p[1] / norm * radius, p[2] / norm * radius]).collect();
    let f = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    TriMesh::from_arrays(&v, &f).expect("valid icosahedron")
}

fn octahedron(radius: f64) -> TriMesh {
    let r = radius;
    TriMesh::from_arrays(
        &[[r, 0.0, 0.0], [-r, 0.0, 0.0], [0.0, r, 0.0], [0.0, -r, 0.0], [0.0, 0.0, r], [0.0, 0.0, -r]],
        &[[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]],
    )
    .expect("valid octahedron")
}

/// Midpoint subdivision, each new vertex projected onto the sphere of `radius`.
fn subdivide_to_sphere(mut mesh: TriMesh, radius: f64, levels: usize) -> TriMesh {
    for _ in 0..levels {
        let mut verts = mesh.vertices().to_vec();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces = Vec::with_capacity(mesh.face_count() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Point3<f64>>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let p = nalgebra::center(&verts[a], &verts[b]);
                verts.push(Point3::from(p.coords.normalize() * radius));
                verts.len() - 1
            })
        };
        for f in mesh.faces() {
            let ab = midpoint(f[0], f[1], &mut verts);
            let bc = midpoint(f[1], f[2], &mut verts);
            let ca = midpoint(f[2], f[0], &mut verts);
            faces.extend([[f[0], ab, ca], [f[1], bc, ab], [f[2], ca, bc], [ab, bc, ca]]);
        }
        mesh = TriMesh::new(verts, faces).expect("subdivision preserves validity");
    }
    mesh
}

/// Subdivided icosahedron: `10 * 4^level + 2` vertices on a sphere.
pub fn icosphere(radius: f64, level: usize) -> TriMesh {
    subdivide_to_sphere(icosahedron(radius), radius, level)
}

/// Icosahedron with every face cut into `frequency^2` triangles, projected
/// onto the sphere: `10 * frequency^2 + 2` vertices. `frequency >= 1`.
pub fn geodesic_sphere(radius: f64, frequency: usize) -> TriMesh {
    assert!(frequency >= 1, "frequency must be at least 1");
    let ico = icosahedron(1.0);
    let n = frequency;
    let mut verts: Vec<Point3<f64>> = Vec::new();
    // a grid point is keyed by its integer weights on the icosahedron corners
    let mut index: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
    let mut faces = Vec::with_capacity(20 * n * n);
    for f in ico.faces() {
        let mut id = |i: usize, j: usize| -> usize {
            let w = [(f[0], n - i - j), (f[1], i), (f[2], j)];
            let mut key: Vec<(usize, usize)> = w.iter().copied().filter(|&(_, x)| x > 0).collect();
            key.sort();
            *index.entry(key).or_insert_with(|| {
                let p = w.iter().fold(Vector3::zeros(), |s, &(v, x)| s + ico.vertex(v).coords * x as f64);
                verts.push(Point3::from(p.normalize() * radius));
                verts.len() - 1
            })
        };
        for i in 0..n {
            for j in 0..n - i {
                faces.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                if i + j + 1 < n {
                    faces.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
        }
    }
    TriMesh::new(verts, faces).expect("geodesic subdivision is valid")
}

/// Subdivided octahedron on a sphere; its bounding box is exactly `2 * radius` wide.
pub fn icosphere_octa(radius: f64, level: usize) -> TriMesh {
    subdivide_to_sphere(octahedron(radius), radius, level)
}

/// Regular polygon on the unit circle with `sides` corners, each side sampled
/// `per_side` times. `sides >= 3`.
pub fn polygon_section(sides: usize, per_side: usize, phase: f64) -> Vec<[f64; 2]> {
    let corner = |i: usize| {
        let a = phase + std::f64::consts::TAU * i as f64 / sides as f64;
        [a.cos(), a.sin()]
    };
    let mut out = Vec::with_capacity(sides * per_side);
    for i in 0..sides {
        let (p, q) = (corner(i), corner(i + 1));
        for s in 0..per_side {
            let t = s as f64 / per_side as f64;
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Circular section with `n` samples.
pub fn circle_section(n: usize) -> Vec<[f64; 2]> {
    polygon_section(n, 1, 0.0)
}

/// Stacks scaled copies of a counterclockwise cross-section along z.
///
/// Each profile entry is `(radius, z)`. Entries with zero radius are allowed
/// only at the two ends of an open profile, where they become poles. With
/// `closed_profile` the last row connects back to the first (torus-like).
/// The profile must run from bottom to top along the outside of the solid
/// for the faces to point outward.
pub fn sweep(section: &[[f64; 2]], profile: &[(f64, f64)], closed_profile: bool) -> TriMesh {
    assert!(section.len() >= 3 && profile.len() >= 2);
    let n = section.len();
    let mut verts: Vec<Point3<f64>> = Vec::new();
    // Row vertex ids; a pole row is a single id.
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(profile.len());
    for (i, &(rho, z)) in profile.iter().enumerate() {
        if rho == 0.0 {
            assert!(!closed_profile && (i == 0 || i + 1 == profile.len()), "poles only at profile ends");
            verts.push(Point3::new(0.0, 0.0, z));
            rows.push(vec![verts.len() - 1]);
        } else {
            let start = verts.len();
            verts.extend(section.iter().map(|s| Point3::new(rho * s[0], rho * s[1], z)));
            rows.push((start..start + n).collect());
        }
    }
    let mut faces = Vec::new();
    let pairs = if closed_profile { profile.len() } else { profile.len() - 1 };
    for r in 0..pairs {
        let (lo, hi) = (&rows[r], &rows[(r + 1) % rows.len()]);
        for j in 0..n {
            let k = (j + 1) % n;
            match (lo.len(), hi.len()) {
                (1, _) => faces.push([lo[0], hi[k], hi[j]]),
                (_, 1) => faces.push([lo[j], lo[k], hi[0]]),
                _ => {
                    faces.push([lo[j], lo[k], hi[k]]);
                    faces.push([lo[j], hi[k], hi[j]]);
                }
            }
        }
    }
    let mesh = TriMesh::new(verts, faces).expect("sweep produces a valid mesh");
    // The profile direction decides orientation; flip if it came out inward.
    if signed_volume(&mesh) < 0.0 {
        let flipped = mesh.faces().iter().map(|f| [f[0], f[2], f[1]]).collect();
        TriMesh::new(mesh.vertices().to_vec(), flipped).expect("flip keeps validity")
    } else {
        mesh
    }
}

pub fn signed_volume(mesh: &TriMesh) -> f64 {
    mesh.faces()
        .iter()
        .map(|f| {
            let (a, b, c) = (mesh.vertex(f[0]).coords, mesh.vertex(f[1]).coords, mesh.vertex(f[2]).coords);
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}

/// Profile rows for a flat cap of radius `radius` at height `z`, from the
/// rim inward (`rings` rows including the center pole).
fn cap_rows(radius: f64, z: f64, rings: usize, from_center: bool) -> Vec<(f64, f64)> {
    let mut rows: Vec<(f64, f64)> = (0..rings).map(|k| (radius * k as f64 / rings as f64, z)).collect();
    if !from_center {
        rows.reverse();
    }
    rows
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |i| a + (b - a) * i as f64 / n as f64)
}

/// Closed cylinder (or prism, depending on `section`) of the given radius and height.
pub fn prism(section: &[[f64; 2]], radius: f64, height: f64, height_segments: usize, cap_rings: usize) -> TriMesh {
    let h = height / 2.0;
    let mut profile = cap_rows(radius, -h, cap_rings, true);
    profile.extend(linspace(-h, h, height_segments).map(|z| (radius, z)));
    profile.extend(cap_rows(radius, h, cap_rings, false));
    sweep(section, &profile, false)
}

pub fn cylinder(radius: f64, height: f64, around: usize, height_segments: usize, cap_rings: usize) -> TriMesh {
    prism(&circle_section(around), radius, height, height_segments, cap_rings)
}

/// Closed cone (or pyramid) with its base at `-height/2` and apex at `+height/2`.
pub fn cone(section: &[[f64; 2]], radius: f64, height: f64, side_segments: usize, cap_rings: usize) -> TriMesh {
    let h = height / 2.0;
    let mut profile = cap_rows(radius, -h, cap_rings, true);
    profile.extend((0..side_segments).map(|i| {
        let t = i as f64 / side_segments as f64;
        (radius * (1.0 - t), -h + t * height)
    }));
    profile.push((0.0, h));
    sweep(section, &profile, false)
}

/// UV sphere with poles on the z axis.
pub fn uv_sphere(radius: f64, around: usize, rings: usize) -> TriMesh {
    let profile: Vec<(f64, f64)> = (0..=rings)
        .map(|i| {
            let phi = std::f64::consts::PI * i as f64 / rings as f64;
            let rho = if i == 0 || i == rings { 0.0 } else { radius * phi.sin() };
            (rho, -radius * phi.cos())
        })
        .collect();
    sweep(&circle_section(around), &profile, false)
}

/// Cylinder of `length` capped by hemispheres of `radius`.
pub fn capsule(radius: f64, length: f64, around: usize, arc_rings: usize, height_segments: usize) -> TriMesh {
    let h = length / 2.0;
    let quarter = std::f64::consts::FRAC_PI_2;
    let mut profile: Vec<(f64, f64)> = (0..arc_rings)
        .map(|i| {
            let phi = quarter * i as f64 / arc_rings as f64;
            (if i == 0 { 0.0 } else { radius * phi.sin() }, -h - radius * phi.cos())
        })
        .collect();
    profile.extend(linspace(-h, h, height_segments).map(|z| (radius, z)));
    profile.extend((0..arc_rings).rev().map(|i| {
        let phi = quarter * i as f64 / arc_rings as f64;
        (if i == 0 { 0.0 } else { radius * phi.sin() }, h + radius * phi.cos())
    }));
    sweep(&circle_section(around), &profile, false)
}

/// Torus around the z axis with tube radius `minor`.
pub fn torus(major: f64, minor: f64, around: usize, tube: usize) -> TriMesh {
    let profile: Vec<(f64, f64)> = (0..tube)
        .map(|i| {
            let phi = std::f64::consts::TAU * i as f64 / tube as f64;
            (major + minor * phi.cos(), minor * phi.sin())
        })
        .collect();
    sweep(&circle_section(around), &profile, true)
}

/// Open flat disk in the z = 0 plane.
pub fn disk(radius: f64, around: usize, rings: usize) -> TriMesh {
    let mut verts = vec![Point3::origin()];
    for r in 1..=rings {
        let rho = radius * r as f64 / rings as f64;
        verts.extend(circle_section(around).iter().map(|s| Point3::new(rho * s[0], rho * s[1], 0.0)));
    }
    let ring = |r: usize, j: usize| 1 + (r - 1) * around + j % around;
    let mut faces = Vec::new();
    for j in 0..around {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for r in 1..rings {
        for j in 0..around {
            faces.push([ring(r, j), ring(r + 1, j), ring(r + 1, j + 1)]);
            faces.push([ring(r, j), ring(r + 1, j + 1), ring(r, j + 1)]);
        }
    }
    TriMesh::new(verts, faces).expect("valid disk")
}

/// Open planar grid of `n x n` squares of side `spacing`, each split along the
/// same diagonal, in the z = 0 plane.
pub fn planar_grid(n: usize, spacing: f64) -> TriMesh {
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    let mut verts = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        for j in 0..=n {
            verts.push(Point3::new(j as f64 * spacing, i as f64 * spacing, 0.0));
        }
    }
    let mut faces = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            faces.push([idx(i, j), idx(i, j + 1), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i + 1, j)]);
        }
    }
    TriMesh::new(verts, faces).expect("valid grid")
}

/// Boundary surface of a set of unit voxels, each voxel face split into
/// `subdiv x subdiv` quads. Voxels touching only along an edge or a corner
/// produce a non-manifold surface.
pub fn voxel_surface(voxels: &[[i64; 3]], subdiv: usize) -> TriMesh {
    let set: std::collections::HashSet<[i64; 3]> = voxels.iter().copied().collect();
    let s = subdiv as i64;
    let mut ids: HashMap<[i64; 3], usize> = HashMap::new();
    let mut verts: Vec<Point3<f64>> = Vec::new();
    let mut faces = Vec::new();
    let mut vid = |p: [i64; 3], verts: &mut Vec<Point3<f64>>| {
        *ids.entry(p).or_insert_with(|| {
            verts.push(Point3::new(p[0] as f64 / s as f64, p[1] as f64 / s as f64, p[2] as f64 / s as f64));
            verts.len() - 1
        })
    };
    let mut sorted: Vec<[i64; 3]> = set.iter().copied().collect();
    sorted.sort_unstable();
    for v in sorted {
        for axis in 0..3 {
            for dir in [-1i64, 1] {
                let mut nb = v;
                nb[axis] += dir;
                if set.contains(&nb) {
                    continue;
                }
                let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
                let plane = (v[axis] + i64::from(dir > 0)) * s;
                for a in 0..s {
                    for b in 0..s {
                        let corner = |da: i64, db: i64| {
                            let mut p = [0i64; 3];
                            p[axis] = plane;
                            p[u] = v[u] * s + a + da;
                            p[w] = v[w] * s + b + db;
                            p
                        };
                        let q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                        let q: Vec<usize> = q.iter().map(|&p| vid(p, &mut verts)).collect();
                        // (u, w, axis) is right-handed, so (0,0)->(1,0)->(1,1) faces +axis.
                        if dir > 0 {
                            faces.push([q[0], q[1], q[2]]);
                            faces.push([q[0], q[2], q[3]]);
                        } else {
                            faces.push([q[0], q[2], q[1]]);
                            faces.push([q[0], q[3], q[2]]);
                        }
                    }
                }
            }
        }
    }
    TriMesh::new(verts, faces).expect("valid voxel surface")
}

/// Closed slab with `genus` square holes: a `3 x (2g+1) x 1` block of voxels
/// with every other interior column removed.
pub fn holed_slab(genus: usize, subdiv: usize) -> TriMesh {
    let len = 2 * genus as i64 + 1;
    let voxels: Vec<[i64; 3]> = (0..3)
        .flat_map(|x| (0..len).map(move |y| [x, y, 0]))
        .filter(|&[x, y, _]| !(x == 1 && y % 2 == 1))
        .collect();
    voxel_surface(&voxels, subdiv)
}

/// Closed square pyramid: base square with corners on the axes at distance 1, apex at (0, 0, 1).
pub fn square_pyramid_5() -> TriMesh {
    TriMesh::from_arrays(
        &[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]],
        &[[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1], [1, 4, 3], [1, 3, 2]],
    )
    .expect("valid pyramid")
}
