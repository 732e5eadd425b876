//! Sparse Cholesky factorization `P A P^T = L L^T` for symmetric positive
//! definite matrices.
//!
//! The permutation comes from a minimum-degree ordering on the explicit
//! elimination graph. The factor is computed with the up-looking algorithm:
//! row `k` of `L` is found by walking the elimination tree from the nonzeros
//! of column `k` of the permuted upper triangle.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::sparse::CsrMatrix;

const NONE: usize = usize::MAX;

/// Returns `perm` with `perm[new] = old`.
pub fn minimum_degree_order(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let mut adj: Vec<Vec<usize>> = (0..n).map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect()).collect();
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut order = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &u in &nbrs {
            // adj[u] <- (adj[u] ∪ nbrs) \ {u, v}
            merged.clear();
            let (mut p, mut q) = (0, 0);
            let old = &adj[u];
            while p < old.len() || q < nbrs.len() {
                let next = match (old.get(p), nbrs.get(q)) {
                    (Some(&x), Some(&y)) if x == y => {
                        p += 1;
                        q += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        p += 1;
                        x
                    }
                    (Some(_), Some(&y)) => {
                        q += 1;
                        y
                    }
                    (Some(&x), None) => {
                        p += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        q += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != u && next != v {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    order
}

#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Failure with the (permuted) column where a non-positive pivot appeared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite(pub usize);

/// Upper triangle of `P A P^T` in compressed column form.
struct UpperCsc {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

fn permuted_upper(a: &CsrMatrix, pinv: &[usize]) -> UpperCsc {
    let n = a.dim();
    let mut entries: Vec<(usize, usize, f64)> = a
        .triplets()
        .filter_map(|(i, j, v)| {
            let (pi, pj) = (pinv[i], pinv[j]);
            (pi <= pj).then_some((pj, pi, v))
        })
        .collect();
    entries.sort_by_key(|&(c, r, _)| (c, r));
    let mut col_ptr = vec![0; n + 1];
    for &(c, _, _) in &entries {
        col_ptr[c + 1] += 1;
    }
    for c in 0..n {
        col_ptr[c + 1] += col_ptr[c];
    }
    UpperCsc { col_ptr, row_idx: entries.iter().map(|e| e.1).collect(), values: entries.iter().map(|e| e.2).collect() }
}

fn elimination_tree(c: &UpperCsc, n: usize) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for p in c.col_ptr[k]..c.col_ptr[k + 1] {
            let mut i = c.row_idx[p];
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal) in topological
/// order, written to `stack[top..]`; returns `top`.
fn row_pattern(c: &UpperCsc, k: usize, parent: &[usize], stack: &mut [usize], mark: &mut [usize]) -> usize {
    let n = stack.len();
    let mut top = n;
    mark[k] = k;
    for p in c.col_ptr[k]..c.col_ptr[k + 1] {
        let mut i = c.row_idx[p];
        if i > k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

impl SparseCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self, NotPositiveDefinite> {
        let perm = minimum_degree_order(a);
        Self::factor_with_order(a, perm)
    }

    pub fn factor_with_order(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self, NotPositiveDefinite> {
        let n = a.dim();
        let mut pinv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }
        let c = permuted_upper(a, &pinv);
        let parent = elimination_tree(&c, n);

        let mut stack = vec![0usize; n];
        let mut mark = vec![NONE; n];
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = row_pattern(&c, k, &parent, &mut stack, &mut mark);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            col_ptr[k + 1] = col_ptr[k] + counts[k];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0f64; nnz];
        let mut next = col_ptr[..n].to_vec();
        let mut x = vec![0.0f64; n];
        mark.fill(NONE);

        for k in 0..n {
            let top = row_pattern(&c, k, &parent, &mut stack, &mut mark);
            x[k] = 0.0;
            for p in c.col_ptr[k]..c.col_ptr[k + 1] {
                let i = c.row_idx[p];
                if i <= k {
                    x[i] = c.values[p];
                }
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for q in col_ptr[i] + 1..next[i] {
                    x[row_idx[q]] -= values[q] * lki;
                }
                d -= lki * lki;
                row_idx[next[i]] = k;
                values[next[i]] = lki;
                next[i] += 1;
            }
            if !(d > 0.0) {
                return Err(NotPositiveDefinite(k));
            }
            row_idx[next[k]] = k;
            values[next[k]] = d.sqrt();
            next[k] += 1;
        }
        Ok(SparseCholesky { n, perm, col_ptr, row_idx, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries of `L`, diagonal included.
    pub fn factor_nnz(&self) -> usize {
        self.values.len()
    }

    /// Solves `A x = b`, overwriting `b` with `x`. `work` must have length `n`.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64], work: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            work[i] = b[self.perm[i]];
        }
        // L y = b
        for j in 0..n {
            let start = self.col_ptr[j];
            let yj = work[j] / self.values[start];
            work[j] = yj;
            for p in start + 1..self.col_ptr[j + 1] {
                work[self.row_idx[p]] -= self.values[p] * yj;
            }
        }
        // L^T x = y
        for j in (0..n).rev() {
            let start = self.col_ptr[j];
            let mut acc = work[j];
            for p in start + 1..self.col_ptr[j + 1] {
                acc -= self.values[p] * work[self.row_idx[p]];
            }
            work[j] = acc / self.values[start];
        }
        for i in 0..n {
            x[self.perm[i]] = work[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        let mut work = vec![0.0; self.n];
        self.solve_into(b, &mut x, &mut work);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_spd(n: usize, density: f64, seed: u64) -> CsrMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..i {
                if rng.random::<f64>() < density {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    trip.push((i, j, v));
                    trip.push((j, i, v));
                }
            }
        }
        // Diagonal dominance makes it SPD.
        let mut rowsum = vec![0.0; n];
        for &(i, _, v) in &trip {
            rowsum[i] += f64::abs(v);
        }
        for (i, s) in rowsum.iter().enumerate() {
            trip.push((i, i, s + 1.0));
        }
        CsrMatrix::from_triplets(n, trip)
    }

    #[test]
    fn solves_random_spd_systems() {
        for seed in 0..5 {
            let a = random_spd(60, 0.08, seed);
            let chol = SparseCholesky::factor(&a).unwrap();
            let x_true: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
            let b = a.mul_vec(&x_true);
            let x = chol.solve(&b);
            for (u, v) in x.iter().zip(&x_true) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ordering_is_a_permutation() {
        let a = random_spd(40, 0.1, 9);
        let mut p = minimum_degree_order(&a);
        p.sort_unstable();
        assert_eq!(p, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn minimum_degree_beats_natural_order_on_arrow() {
        // Arrow matrix: dense first row/column. Natural order fills completely.
        let n = 30;
        let mut trip = vec![(0, 0, n as f64)];
        for i in 1..n {
            trip.extend([(i, i, 2.0), (0, i, 1.0), (i, 0, 1.0)]);
        }
        let a = CsrMatrix::from_triplets(n, trip);
        let natural = SparseCholesky::factor_with_order(&a, (0..n).collect()).unwrap();
        let md = SparseCholesky::factor(&a).unwrap();
        assert_eq!(natural.factor_nnz(), n * (n + 1) / 2);
        assert_eq!(md.factor_nnz(), 2 * n - 1);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(SparseCholesky::factor(&a).is_err());
    }
}
