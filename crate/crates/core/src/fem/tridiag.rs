//! Symmetric tridiagonal eigenproblem by implicit QL with Wilkinson-like shifts.

/// Eigen decomposition of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` (`off[i]` couples `i` and `i + 1`).
///
/// Returns eigenvalues ascending and eigenvectors stored column-major:
/// component `r` of vector `c` is `vectors[c * n + r]`.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    assert!(n == 0 || off.len() + 1 == n, "off-diagonal length must be n - 1");
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(off);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                assert!(sweeps < 200, "tridiagonal QL failed to converge");
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = v.split_at_mut((i + 1) * n);
                    let col_i = &mut lo[i * n..];
                    let col_i1 = &mut hi[..n];
                    for k in 0..n {
                        let h = col_i1[k];
                        col_i1[k] = s * col_i[k] + c * h;
                        col_i[k] = c * col_i[k] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        vectors.extend_from_slice(&v[i * n..(i + 1) * n]);
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_difference_matrix() {
        // tridiag(-1, 2, -1) has eigenvalues 2 - 2 cos(j pi / (n + 1)).
        let n = 40;
        let (vals, vecs) = tridiagonal_eigen(&vec![2.0; n], &vec![-1.0; n - 1]);
        for (j, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12);
        }
        // T x = lambda x for every pair.
        for c in 0..n {
            let x = &vecs[c * n..(c + 1) * n];
            for r in 0..n {
                let mut tx = 2.0 * x[r];
                if r > 0 {
                    tx -= x[r - 1];
                }
                if r + 1 < n {
                    tx -= x[r + 1];
                }
                assert!((tx - vals[c] * x[r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decoupled_blocks_and_trivial_sizes() {
        let (vals, _) = tridiagonal_eigen(&[3.0, 1.0, 2.0], &[0.0, 0.0]);
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        let (vals, vecs) = tridiagonal_eigen(&[5.0], &[]);
        assert_eq!((vals, vecs), (vec![5.0], vec![1.0]));
    }
}
