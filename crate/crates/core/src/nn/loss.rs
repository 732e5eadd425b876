use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::Scalar;

pub const RPD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Sum over entries of `|y - p| / (|y| + |p| + eps)`.
    Rpd,
    /// Mean absolute error over entries.
    L1,
    /// Mean squared error over entries.
    L2,
}

impl FromStr for LossKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rpd" => Ok(LossKind::Rpd),
            "l1" => Ok(LossKind::L1),
            "l2" => Ok(LossKind::L2),
            _ => Err(format!("unknown loss '{s}' (expected rpd, l1 or l2)")),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Rpd => "rpd",
            LossKind::L1 => "l1",
            LossKind::L2 => "l2",
        })
    }
}

fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

impl LossKind {
    /// Loss of one sample.
    pub fn sample<T: Scalar>(self, pred: &[T], target: &[T], eps: T) -> T {
        assert_eq!(pred.len(), target.len());
        let d = T::from(pred.len()).unwrap();
        let terms = pred.iter().zip(target);
        match self {
            LossKind::Rpd => terms.map(|(&p, &y)| (y - p).abs() / (y.abs() + p.abs() + eps)).fold(T::zero(), |a, b| a + b),
            LossKind::L1 => terms.map(|(&p, &y)| (y - p).abs()).fold(T::zero(), |a, b| a + b) / d,
            LossKind::L2 => terms.map(|(&p, &y)| (y - p) * (y - p)).fold(T::zero(), |a, b| a + b) / d,
        }
    }

    /// Mean of [`LossKind::sample`] over rows.
    pub fn batch_value<T: Scalar>(self, pred: &ArrayView2<T>, target: &ArrayView2<T>, eps: T) -> T {
        let b = T::from(pred.nrows()).unwrap();
        let total = pred
            .rows()
            .into_iter()
            .zip(target.rows())
            .map(|(p, y)| self.sample(&p.to_vec(), &y.to_vec(), eps))
            .fold(T::zero(), |a, x| a + x);
        total / b
    }

    /// Derivative of [`LossKind::batch_value`] with respect to `pred`.
    pub fn batch_gradient<T: Scalar>(self, pred: &ArrayView2<T>, target: &ArrayView2<T>, eps: T) -> Array2<T> {
        let b = T::from(pred.nrows()).unwrap();
        let d = T::from(pred.ncols()).unwrap();
        let mut g = Array2::zeros(pred.raw_dim());
        Zip::from(&mut g).and(pred).and(target).for_each(|g, &p, &y| {
            *g = match self {
                LossKind::Rpd => {
                    let den = y.abs() + p.abs() + eps;
                    let diff = p - y;
                    sign(diff) / den - diff.abs() * sign(p) / (den * den)
                }
                LossKind::L1 => sign(p - y) / d,
                LossKind::L2 => (p - y) * T::from(2.0).unwrap() / d,
            } / b;
        });
        g
    }
}

pub fn loss_rpd(target: &[f64], pred: &[f64], eps: f64) -> f64 {
    LossKind::Rpd.sample(pred, target, eps)
}

pub fn loss_l1(target: &[f64], pred: &[f64]) -> f64 {
    LossKind::L1.sample(pred, target, 0.0)
}

pub fn loss_l2(target: &[f64], pred: &[f64]) -> f64 {
    LossKind::L2.sample(pred, target, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hand_values() {
        assert_eq!(loss_rpd(&[1.0, 2.0], &[1.0, 2.0], RPD_EPS), 0.0);
        assert!((loss_rpd(&[1.0, 1.0], &[3.0, 1.0], RPD_EPS) - 0.5).abs() < 1e-8);
        assert_eq!(loss_l1(&[0.0, 0.0], &[3.0, 4.0]), 3.5);
        assert_eq!(loss_l2(&[0.0, 0.0], &[3.0, 4.0]), 12.5);
        assert_eq!(loss_l1(&[5.0], &[5.0]), 0.0);
    }

    #[test]
    fn rpd_terms_below_one_and_scale_free() {
        let y = [1.0, -2.0, 3.0, 0.5];
        let p = [-1.0, 2.5, 0.0, 0.7];
        let l = loss_rpd(&y, &p, RPD_EPS);
        assert!(l < y.len() as f64);
        let c = 37.0;
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let ps: Vec<f64> = p.iter().map(|v| v * c).collect();
        assert!((loss_rpd(&ys, &ps, RPD_EPS) - l).abs() < 1e-7);
    }

    #[test]
    fn batch_is_mean_of_samples() {
        let p = array![[1.0, 2.0], [0.5, -1.0], [3.0, 3.0]];
        let y = array![[1.5, 2.0], [0.0, 1.0], [2.0, 4.0]];
        for kind in [LossKind::Rpd, LossKind::L1, LossKind::L2] {
            let mean: f64 = (0..3)
                .map(|i| kind.sample(&p.row(i).to_vec(), &y.row(i).to_vec(), RPD_EPS))
                .sum::<f64>()
                / 3.0;
            assert!((kind.batch_value(&p.view(), &y.view(), RPD_EPS) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let p = array![[1.0, 2.0, -0.3], [0.5, -1.0, 0.8]];
        let y = array![[1.5, 2.2, 0.4], [0.1, 1.0, 0.9]];
        for kind in [LossKind::Rpd, LossKind::L1, LossKind::L2] {
            let g = kind.batch_gradient(&p.view(), &y.view(), RPD_EPS);
            for idx in [(0, 0), (0, 2), (1, 1), (1, 2)] {
                let h = 1e-6;
                let (mut up, mut dn) = (p.clone(), p.clone());
                up[idx] += h;
                dn[idx] -= h;
                let fd = (kind.batch_value(&up.view(), &y.view(), RPD_EPS) - kind.batch_value(&dn.view(), &y.view(), RPD_EPS))
                    / (2.0 * h);
                assert!((fd - g[idx]).abs() < 1e-7, "{kind} {idx:?}: {fd} vs {}", g[idx]);
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("RPD".parse::<LossKind>().unwrap(), LossKind::Rpd);
        assert!("polar".parse::<LossKind>().is_err());
    }
}
