use std::str::FromStr;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::Scalar;
use crate::error::NnError;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(format!("unknown optimizer '{s}' (expected adam or sgd)")),
        }
    }
}

/// Optimizer state. Weight decay is added to the gradient (`g + d * p`)
/// before any moment update.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    pub kind: OptimizerKind,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, weight_decay: f64, params: &[Array2<T>]) -> Self {
        let zeros = |on: bool| if on { params.iter().map(|p| Array2::zeros(p.raw_dim())).collect() } else { Vec::new() };
        let adam = kind == OptimizerKind::Adam;
        Optimizer { kind, weight_decay, step: 0, m: zeros(adam), v: zeros(adam) }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// A learning rate of zero leaves parameters untouched; negative or
    /// non-finite rates are rejected.
    pub fn step(&mut self, params: &mut [Array2<T>], grads: &[Array2<T>], lr: f64) -> Result<(), NnError> {
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(NnError::InvalidLearningRate(lr));
        }
        if params.len() != grads.len() {
            return Err(NnError::Shape(format!("{} parameters but {} gradients", params.len(), grads.len())));
        }
        self.step += 1;
        let decay = T::from(self.weight_decay).unwrap();
        let lr_t = T::from(lr).unwrap();
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    Zip::from(p).and(g).for_each(|p, &g| *p = *p - lr_t * (g + decay * *p));
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (T::from(ADAM_BETA1).unwrap(), T::from(ADAM_BETA2).unwrap());
                let one = T::one();
                let t = self.step as i32;
                let c1 = one - b1.powi(t);
                let c2 = one - b2.powi(t);
                let eps = T::from(ADAM_EPS).unwrap();
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                        let g = g + decay * *p;
                        *m = b1 * *m + (one - b1) * g;
                        *v = b2 * *v + (one - b2) * g * g;
                        let mhat = *m / c1;
                        let vhat = *v / c2;
                        *p = *p - lr_t * mhat / (vhat.sqrt() + eps);
                    });
                }
            }
        }
        Ok(())
    }
}
