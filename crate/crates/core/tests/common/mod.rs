#![allow(dead_code)]

use lbnet_core::fem::CsrMatrix;
use lbnet_core::mesh::shapes;
use lbnet_core::TriMesh;
use nalgebra::{DMatrix, Point3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `|a - b| <= tol * max(|b|, 1)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Worst `|a - b| / max(|b|, 1)` over paired entries.
pub fn worst_relative(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

fn to_dense(a: &CsrMatrix) -> DMatrix<f64> {
    let n = a.dim();
    let mut d = DMatrix::zeros(n, n);
    for (i, j, v) in a.triplets() {
        d[(i, j)] = v;
    }
    d
}

/// All eigenvalues of `K u = lambda M u`, ascending, via a dense Cholesky of `M`
/// and a dense symmetric eigensolve of `L^-1 K L^-T`.
pub fn dense_generalized_eigenvalues(k: &CsrMatrix, m: &CsrMatrix) -> Vec<f64> {
    let kd = to_dense(k);
    let chol = to_dense(m).cholesky().expect("mass matrix is SPD");
    let l = chol.l();
    let y = l.solve_lower_triangular(&kd).unwrap();
    let c = l.solve_lower_triangular(&y.transpose()).unwrap();
    let c = (&c + c.transpose()) * 0.5;
    let mut vals: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

fn jitter(mesh: &TriMesh, amount: f64, rng: &mut ChaCha8Rng) -> TriMesh {
    let h = (0..mesh.edge_count()).map(|e| mesh.edge_length(e)).fold(f64::INFINITY, f64::min);
    let pts: Vec<Point3<f64>> = mesh
        .vertices()
        .iter()
        .map(|p| {
            let d: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0) * amount * h);
            Point3::new(p.x + d[0], p.y + d[1], p.z + d[2])
        })
        .collect();
    mesh.with_vertices(pts)
}

fn stretch(mesh: &TriMesh, s: [f64; 3]) -> TriMesh {
    mesh.with_vertices(mesh.vertices().iter().map(|p| Point3::new(p.x * s[0], p.y * s[1], p.z * s[2])).collect())
}

/// Ten closed meshes with 60..300 vertices, randomly sized and perturbed.
pub fn small_fixtures(seed: u64) -> Vec<(String, TriMesh)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let base = vec![
        ("icosphere", shapes::icosphere(r(0.5, 2.0), 2)),
        ("torus", shapes::torus(r(0.8, 1.2), r(0.2, 0.4), 14, 8)),
        ("capsule", shapes::capsule(r(0.3, 0.6), r(0.5, 1.5), 12, 3, 3)),
        ("cylinder", shapes::cylinder(r(0.3, 0.8), r(0.5, 2.0), 12, 4, 2)),
        ("cone", shapes::cone(&shapes::circle_section(14), r(0.5, 1.0), r(0.5, 2.0), 4, 2)),
        ("hex_prism", shapes::prism(&shapes::polygon_section(6, 2, 0.0), r(0.5, 1.0), r(0.5, 2.0), 4, 2)),
        ("uv_sphere", shapes::uv_sphere(r(0.5, 1.5), 14, 8)),
        ("box", shapes::voxel_surface(&[[0, 0, 0], [1, 0, 0]], 3)),
        ("ellipsoid", stretch(&shapes::icosphere(1.0, 2), [r(0.5, 2.0), r(0.5, 2.0), r(0.5, 2.0)])),
        ("genus2", shapes::holed_slab(2, 2)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    base.into_iter().map(|(name, m)| (name.to_string(), jitter(&m, 0.05, &mut rng))).collect()
}

/// Meshes with a few hundred to a couple thousand vertices for invariance checks.
pub fn medium_fixtures() -> Vec<(String, TriMesh)> {
    vec![
        ("icosphere".into(), shapes::icosphere(1.0, 3)),
        ("torus".into(), shapes::torus(1.0, 0.35, 32, 14)),
        ("capsule".into(), shapes::capsule(0.4, 1.0, 24, 5, 6)),
        ("cone".into(), shapes::cone(&shapes::circle_section(24), 0.7, 1.3, 6, 3)),
        ("genus3".into(), shapes::holed_slab(3, 2)),
    ]
}

/// Random permutation of vertex indices.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

/// Random connected graph: a ring plus chords, every edge in both directions
/// with its own weight in (0, 1].
pub fn random_graph(n: usize, seed: u64) -> lbnet_core::nn::GraphInput<f64> {
    use lbnet_core::features::FEATURE_DIM;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = ndarray::Array2::from_shape_simple_fn((n, FEATURE_DIM), || rng.random_range(-1.0..1.0));
    let mut pairs: Vec<[usize; 2]> = (0..n).map(|i| [i, (i + 1) % n]).collect();
    for _ in 0..n / 2 {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            pairs.push([a, b]);
        }
    }
    let mut edge_index = Vec::new();
    let mut edge_weights = Vec::new();
    for [a, b] in pairs {
        for e in [[a, b], [b, a]] {
            edge_index.push(e);
            edge_weights.push(1.0 - rng.random_range(0.0..1.0));
        }
    }
    lbnet_core::nn::GraphInput { node_features: x, edge_index, edge_weights }
}

/// Outcome of comparing an analytic derivative with a central difference.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub analytic: f64,
    pub numeric: f64,
}

impl GradCheck {
    pub fn abs_err(&self) -> f64 {
        (self.analytic - self.numeric).abs()
    }

    pub fn rel_err(&self) -> f64 {
        self.abs_err() / self.analytic.abs().max(self.numeric.abs()).max(f64::MIN_POSITIVE)
    }

    /// Relative error below 1e-4 or absolute error below 1e-7.
    pub fn passes(&self) -> bool {
        self.rel_err() < 1e-4 || self.abs_err() < 1e-7
    }
}

/// Central differences with step `h` for the chosen `(param, (row, col))`
/// entries of the scalar function `f`, against the tape gradient.
pub fn finite_difference_check(
    params: &[ndarray::Array2<f64>],
    f: impl Fn(&mut lbnet_core::nn::Tape<f64>, &[ndarray::Array2<f64>]) -> lbnet_core::nn::Var,
    picks: &[(usize, (usize, usize))],
    h: f64,
) -> Vec<GradCheck> {
    use lbnet_core::nn::Tape;
    let mut tape = Tape::new();
    let loss = f(&mut tape, params);
    let mut grads: Vec<_> = params.iter().map(|p| ndarray::Array2::zeros(p.raw_dim())).collect();
    tape.backward(loss, &mut grads).unwrap();
    let eval = |ps: &[ndarray::Array2<f64>]| {
        let mut t = Tape::new();
        let l = f(&mut t, ps);
        t.value(l)[(0, 0)]
    };
    picks
        .iter()
        .map(|&(p, idx)| {
            let mut up = params.to_vec();
            up[p][idx] += h;
            let mut dn = params.to_vec();
            dn[p][idx] -= h;
            GradCheck { analytic: grads[p][idx], numeric: (eval(&up) - eval(&dn)) / (2.0 * h) }
        })
        .collect()
}

pub fn rand_array(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ndarray::Array2<f64> {
    ndarray::Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn all_entries(params: &[ndarray::Array2<f64>]) -> Vec<(usize, (usize, usize))> {
    params
        .iter()
        .enumerate()
        .flat_map(|(p, a)| (0..a.nrows()).flat_map(move |r| (0..a.ncols()).map(move |c| (p, (r, c)))))
        .collect()
}

/// Every entry of every parameter, one op (or one loss) at a time.
pub fn layer_gradient_checks() -> Vec<(String, Vec<GradCheck>)> {
    use lbnet_core::nn::{graph_conv, GraphBatch, LossKind, LEAKY_SLOPE, RPD_EPS};
    use std::sync::Arc;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = rand_array(5, 3, &mut rng);
    let target = rand_array(5, 4, &mut rng);
    let g = random_graph(5, 2);
    let batch = GraphBatch::from_graphs(&[&g]).unwrap();
    let adj = Arc::new(batch.adjacency());
    let x8 = batch.node_features.clone();
    let t8 = rand_array(5, 4, &mut rng);
    let mut out = Vec::new();

    let params = vec![rand_array(3, 4, &mut rng)];
    let checks = finite_difference_check(
        &params,
        |t, p| {
            let a = t.input(x.clone());
            let w = t.param(0, &p[0]);
            let y = t.matmul(a, w).unwrap();
            t.loss(y, target.clone(), LossKind::L2, 0.0).unwrap()
        },
        &all_entries(&params),
        1e-4,
    );
    out.push(("matmul".to_string(), checks));

    let params = vec![rand_array(5, 4, &mut rng), rand_array(1, 4, &mut rng)];
    let checks = finite_difference_check(
        &params,
        |t, p| {
            let a = t.param(0, &p[0]);
            let b = t.param(1, &p[1]);
            let c = t.add(a, a).unwrap();
            let y = t.add_bias(c, b).unwrap();
            t.loss(y, target.clone(), LossKind::L2, 0.0).unwrap()
        },
        &all_entries(&params),
        1e-4,
    );
    out.push(("add/bias".to_string(), checks));

    // entries kept away from the kink
    let mut p0 = rand_array(5, 4, &mut rng);
    p0.mapv_inplace(|v| if v.abs() < 0.05 { 0.3 } else { v });
    let params = vec![p0];
    let checks = finite_difference_check(
        &params,
        |t, p| {
            let a = t.param(0, &p[0]);
            let y = t.leaky_relu(a, LEAKY_SLOPE);
            t.loss(y, target.clone(), LossKind::L2, 0.0).unwrap()
        },
        &all_entries(&params),
        1e-4,
    );
    out.push(("leaky_relu".to_string(), checks));

    let params = vec![rand_array(5, 4, &mut rng)];
    let checks = finite_difference_check(
        &params,
        |t, p| {
            let a = t.param(0, &p[0]);
            let y = t.spmm(&adj, a).unwrap();
            t.loss(y, target.clone(), LossKind::L2, 0.0).unwrap()
        },
        &all_entries(&params),
        1e-4,
    );
    out.push(("spmm".to_string(), checks));

    // weights and input
    let params = vec![rand_array(8, 4, &mut rng), rand_array(8, 4, &mut rng), rand_array(1, 4, &mut rng), x8];
    let checks = finite_difference_check(
        &params,
        |t, p| {
            let w1 = t.param(0, &p[0]);
            let w2 = t.param(1, &p[1]);
            let b = t.param(2, &p[2]);
            let h = t.param(3, &p[3]);
            let y = graph_conv(t, h, &adj, w1, w2, b).unwrap();
            t.loss(y, t8.clone(), LossKind::L2, 0.0).unwrap()
        },
        &all_entries(&params),
        1e-4,
    );
    out.push(("graph_conv".to_string(), checks));

    for kind in [LossKind::Rpd, LossKind::L1, LossKind::L2] {
        let params = vec![rand_array(3, 4, &mut rng)];
        let tgt = rand_array(3, 4, &mut rng);
        let checks = finite_difference_check(
            &params,
            |t, p| {
                let a = t.param(0, &p[0]);
                t.loss(a, tgt.clone(), kind, RPD_EPS).unwrap()
            },
            &all_entries(&params),
            1e-4,
        );
        out.push((format!("loss {kind}"), checks));
    }
    out
}

/// Two random entries from every parameter array of a desk-preset model,
/// under the RPD and L2 losses.
pub fn desk_model_gradient_checks() -> Vec<(String, Vec<GradCheck>)> {
    use lbnet_core::nn::{GcnModel, GraphBatch, LossKind, ModelSpec, WidthPreset, RPD_EPS, SYNTHETIC_OUTPUTS};

    let spec = ModelSpec::new(WidthPreset::Desk, SYNTHETIC_OUTPUTS);
    let model = GcnModel::<f64>::new(spec, 5);
    let (g1, g2) = (random_graph(9, 1), random_graph(7, 2));
    let batch = GraphBatch::from_graphs(&[&g1, &g2]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let target = ndarray::Array2::from_shape_simple_fn((2, SYNTHETIC_OUTPUTS), || rng.random_range(0.5..3.0));
    let picks: Vec<_> = model
        .params
        .iter()
        .enumerate()
        .flat_map(|(p, a)| {
            (0..2).map(|_| (p, (rng.random_range(0..a.nrows()), rng.random_range(0..a.ncols())))).collect::<Vec<_>>()
        })
        .collect();
    [LossKind::Rpd, LossKind::L2]
        .into_iter()
        .map(|kind| {
            let checks = finite_difference_check(
                &model.params,
                |t, p| {
                    let m = GcnModel { spec, params: p.to_vec() };
                    let y = m.forward(t, &batch).unwrap();
                    t.loss(y, target.clone(), kind, RPD_EPS).unwrap()
                },
                &picks,
                1e-4,
            );
            (format!("desk model {kind}"), checks)
        })
        .collect()
}
