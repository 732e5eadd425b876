//! Shift-invert Lanczos for `K u = lambda M u` with `K - sigma M` positive definite.
//!
//! The operator `(K - sigma M)^-1 M` is self-adjoint in the `M` inner product;
//! its largest eigenvalues `theta = 1 / (lambda - sigma)` belong to the
//! smallest `lambda`. Lanczos vectors are fully reorthogonalized (twice).
//!
//! A single Krylov sequence sees only one direction of an exactly repeated
//! eigenvalue, and symmetric meshes produce many of those. So after the first
//! sequence converges, converged vectors are locked and a fresh sequence is
//! started in their `M`-orthogonal complement. This repeats until a sequence
//! finds nothing below the current k-th eigenvalue.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cholesky::SparseCholesky;
use super::sparse::CsrMatrix;
use super::tridiag::tridiagonal_eigen;

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Ritz estimate threshold, relative to `theta`.
    pub tol: f64,
    /// Bound on `|K u - lambda M u| / (|M u| max(lambda, 1))` for accepted pairs.
    pub residual_tol: f64,
    /// Lanczos steps per sequence; `None` means `10 k + 100`.
    pub max_steps: Option<usize>,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: 1e-10, residual_tol: 1e-8, max_steps: None, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    /// Ascending, at least `k` entries on success.
    pub pairs: Vec<EigenPair>,
    pub iterations: usize,
    pub sequences: usize,
}

/// Failure: total steps taken and the residuals of what had converged, or the
/// unmet estimates.
#[derive(Debug, Clone)]
pub struct NotConverged {
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

struct Locked {
    value: f64,
    u: Vec<f64>,
    mu: Vec<f64>,
    residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

struct Problem<'a> {
    k: &'a CsrMatrix,
    m: &'a CsrMatrix,
    chol: &'a SparseCholesky,
    sigma: f64,
}

impl Problem<'_> {
    fn true_residual(&self, value: f64, u: &[f64], mu: &[f64]) -> f64 {
        let ku = self.k.mul_vec(u);
        let r: f64 = ku.iter().zip(mu).map(|(a, b)| (a - value * b).powi(2)).sum::<f64>().sqrt();
        r / (dot(mu, mu).sqrt() * value.abs().max(1.0))
    }
}

enum Goal {
    /// First sequence: the `k` largest Ritz values.
    Count(usize),
    /// Later sequences: everything below `bound`, and at least the top value.
    Below(f64),
}

/// Runs one Lanczos sequence in the complement of `locked`, returning newly converged pairs.
fn sequence(
    p: &Problem,
    locked: &[Locked],
    goal: &Goal,
    max_steps: usize,
    opts: &LanczosOptions,
    rng: &mut ChaCha8Rng,
    iterations: &mut usize,
) -> Result<Vec<Locked>, Vec<f64>> {
    let n = p.k.dim();
    let room = n - locked.len();
    let max_steps = max_steps.min(room);
    let deflate = |w: &mut Vec<f64>, q: &[Vec<f64>], mq: &[Vec<f64>]| {
        for _ in 0..2 {
            for l in locked {
                let c = dot(&l.mu, w);
                axpy(-c, &l.u, w);
            }
            for (qi, mqi) in q.iter().zip(mq) {
                let c = dot(mqi, w);
                axpy(-c, qi, w);
            }
        }
    };

    let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    deflate(&mut w, &[], &[]);
    let mut mw = p.m.mul_vec(&w);
    let norm = dot(&w, &mw).sqrt();
    w.iter_mut().for_each(|x| *x /= norm);
    mw.iter_mut().for_each(|x| *x /= norm);

    let mut q: Vec<Vec<f64>> = vec![w];
    let mut mq: Vec<Vec<f64>> = vec![mw];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut work = vec![0.0; n];
    let mut next_check = match goal {
        Goal::Count(k) => *k,
        Goal::Below(_) => 5,
    };
    let mut last_estimates: Vec<f64>;

    loop {
        let j = q.len() - 1;
        let mut w = vec![0.0; n];
        p.chol.solve_into(&mq[j], &mut w, &mut work);
        *iterations += 1;
        let a = dot(&mq[j], &w);
        axpy(-a, &q[j], &mut w);
        if j > 0 {
            axpy(-beta[j - 1], &q[j - 1], &mut w);
        }
        deflate(&mut w, &q, &mq);
        let mw = p.m.mul_vec(&w);
        let b = dot(&w, &mw).max(0.0).sqrt();
        alpha.push(a);
        let steps = alpha.len();
        let scale = alpha.iter().map(|x| x.abs()).fold(0.0, f64::max);
        // An invariant subspace makes every Ritz pair exact.
        let invariant = b <= 1e-13 * scale || steps == room;
        let exhausted = invariant || steps >= max_steps;

        if exhausted || steps >= next_check {
            next_check = steps + (steps / 10).max(5);
            let (theta, s) = tridiagonal_eigen(&alpha, &beta);
            let estimate = |c: usize| if invariant { 0.0 } else { (b * s[c * steps + steps - 1]).abs() };
            // Indices of wanted Ritz values, largest theta first.
            let wanted: Vec<usize> = match goal {
                Goal::Count(k) => (0..steps).rev().take(*k).collect(),
                Goal::Below(bound) => {
                    let mut v: Vec<usize> =
                        (0..steps).rev().filter(|&c| p.sigma + 1.0 / theta[c] < *bound).collect();
                    if v.is_empty() {
                        v.push(steps - 1);
                    }
                    v
                }
            };
            let enough = match goal {
                Goal::Count(k) => wanted.len() >= *k || invariant,
                Goal::Below(_) => true,
            };
            last_estimates = wanted.iter().map(|&c| estimate(c) / theta[c].abs()).collect();
            if enough && last_estimates.iter().all(|&e| e <= opts.tol) {
                let mut out = Vec::with_capacity(wanted.len());
                let mut all_ok = true;
                for &c in &wanted {
                    let mut u = vec![0.0; n];
                    let mut mu = vec![0.0; n];
                    for (i, (qi, mqi)) in q.iter().zip(&mq).enumerate() {
                        let coef = s[c * steps + i];
                        axpy(coef, qi, &mut u);
                        axpy(coef, mqi, &mut mu);
                    }
                    let value = p.sigma + 1.0 / theta[c];
                    let residual = p.true_residual(value, &u, &mu);
                    if residual > opts.residual_tol {
                        all_ok = false;
                        break;
                    }
                    out.push(Locked { value, u, mu, residual });
                }
                if all_ok {
                    return Ok(out);
                }
                next_check = steps + 1;
            }
            if exhausted {
                return Err(last_estimates);
            }
        }

        beta.push(b);
        q.push(w.iter().map(|x| x / b).collect());
        mq.push(mw.iter().map(|x| x / b).collect());
    }
}

/// Smallest `k` eigenpairs of `K u = lambda M u`, given a factorization of `K - sigma M`.
pub fn shift_invert_lanczos(
    k_mat: &CsrMatrix,
    m_mat: &CsrMatrix,
    chol: &SparseCholesky,
    sigma: f64,
    k: usize,
    opts: &LanczosOptions,
) -> Result<LanczosResult, NotConverged> {
    let n = k_mat.dim();
    assert!(k < n && k > 0);
    let p = Problem { k: k_mat, m: m_mat, chol, sigma };
    let max_steps = opts.max_steps.unwrap_or(10 * k + 100);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut iterations = 0;
    let mut locked: Vec<Locked> = Vec::new();
    let mut sequences = 0;
    let fail = |iterations, locked: &[Locked], estimates: Vec<f64>| NotConverged {
        iterations,
        residuals: if estimates.is_empty() { locked.iter().map(|l| l.residual).collect() } else { estimates },
    };

    loop {
        sequences += 1;
        let goal = if locked.len() < k { Goal::Count(k - locked.len()) } else {
            let mut values: Vec<f64> = locked.iter().map(|l| l.value).collect();
            values.sort_by(f64::total_cmp);
            let bound = values[k - 1];
            Goal::Below(bound - 1e-9 * bound.abs().max(1.0))
        };
        let found =
            sequence(&p, &locked, &goal, max_steps, opts, &mut rng, &mut iterations).map_err(|e| fail(iterations, &locked, e))?;
        let improved = match goal {
            Goal::Count(_) => true,
            Goal::Below(bound) => found.iter().any(|l| l.value < bound),
        };
        locked.extend(found);
        if !improved || locked.len() >= n {
            break;
        }
        if sequences > 2 * k + 2 {
            return Err(fail(iterations, &locked, Vec::new()));
        }
    }

    locked.sort_by(|a, b| a.value.total_cmp(&b.value));
    locked.truncate(k);
    let pairs = locked.into_iter().map(|l| EigenPair { value: l.value, vector: l.u, residual: l.residual }).collect();
    Ok(LanczosResult { pairs, iterations, sequences })
}
