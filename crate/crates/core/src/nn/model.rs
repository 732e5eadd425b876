use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::GraphBatch;
use super::tape::{SpMat, Tape, Var};
use super::Scalar;
use crate::error::NnError;
use crate::features::FEATURE_DIM;

pub const GCN_WIDTHS: [usize; 3] = [64, 128, 256];
pub const LEAKY_SLOPE: f64 = 0.01;
pub const SPECTRUM_OUTPUTS: usize = 49;
pub const SYNTHETIC_OUTPUTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidthPreset {
    /// MLP 256, 128, 64, 32, out.
    Desk,
    /// MLP 8192, 4096, 2048, 1024, out.
    Full,
}

impl WidthPreset {
    pub fn hidden(self) -> [usize; 4] {
        match self {
            WidthPreset::Desk => [256, 128, 64, 32],
            WidthPreset::Full => [8192, 4096, 2048, 1024],
        }
    }
}

impl FromStr for WidthPreset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(WidthPreset::Desk),
            "full" => Ok(WidthPreset::Full),
            _ => Err(format!("unknown width preset '{s}' (expected desk or full)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub preset: WidthPreset,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl ModelSpec {
    pub fn new(preset: WidthPreset, output_dim: usize) -> Self {
        ModelSpec { preset, input_dim: FEATURE_DIM, output_dim }
    }

    /// Names and shapes of all parameters, in storage order.
    ///
    /// Per block: `w1`, `w2` (`in x out`), `bias` (`1 x out`), then the
    /// block's linear layer `linear.weight` (`out x out`) and `linear.bias`.
    /// Then each MLP layer's `weight` (`in x out`) and `bias`.
    pub fn parameter_layout(&self) -> Vec<(String, (usize, usize))> {
        let mut out = Vec::new();
        let mut width = self.input_dim;
        for (b, &w) in GCN_WIDTHS.iter().enumerate() {
            out.push((format!("block{b}.w1"), (width, w)));
            out.push((format!("block{b}.w2"), (width, w)));
            out.push((format!("block{b}.bias"), (1, w)));
            out.push((format!("block{b}.linear.weight"), (w, w)));
            out.push((format!("block{b}.linear.bias"), (1, w)));
            width = w;
        }
        let widths = self.preset.hidden().into_iter().chain([self.output_dim]);
        for (l, w) in widths.enumerate() {
            out.push((format!("mlp{l}.weight"), (width, w)));
            out.push((format!("mlp{l}.bias"), (1, w)));
            width = w;
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_layout().iter().map(|(_, (r, c))| r * c).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel<T> {
    pub spec: ModelSpec,
    pub params: Vec<Array2<T>>,
}

/// `x'_i = W1 x_i + W2 sum_j e_{j,i} x_j + b`, rows of `x` being nodes.
pub fn graph_conv<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    adjacency: &Arc<SpMat<T>>,
    w1: Var,
    w2: Var,
    bias: Var,
) -> Result<Var, NnError> {
    let agg = tape.spmm(adjacency, x)?;
    let own = tape.matmul(x, w1)?;
    let nbr = tape.matmul(agg, w2)?;
    let sum = tape.add(own, nbr)?;
    tape.add_bias(sum, bias)
}

impl<T: Scalar> GcnModel<T> {
    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn new(spec: ModelSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Biases follow their weight matrices in the layout and share their fan-in.
        let mut fan_in = spec.input_dim;
        let params = spec
            .parameter_layout()
            .into_iter()
            .map(|(name, (r, c))| {
                if !name.ends_with("bias") {
                    fan_in = r;
                }
                let bound = 1.0 / (fan_in as f64).sqrt();
                Array2::from_shape_simple_fn((r, c), || T::from(rng.random_range(-bound..bound)).unwrap())
            })
            .collect();
        GcnModel { spec, params }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    pub fn zero_grads(&self) -> Vec<Array2<T>> {
        self.params.iter().map(|p| Array2::zeros(p.raw_dim())).collect()
    }

    /// Records the forward pass; returns the `B x output_dim` prediction node.
    pub fn forward(&self, tape: &mut Tape<T>, batch: &GraphBatch<T>) -> Result<Var, NnError> {
        if batch.node_features.ncols() != self.spec.input_dim {
            return Err(NnError::Shape(format!(
                "batch has {} feature columns, model expects {}",
                batch.node_features.ncols(),
                self.spec.input_dim
            )));
        }
        let slope = T::from(LEAKY_SLOPE).unwrap();
        let adjacency = Arc::new(batch.adjacency());
        let pooling = Arc::new(batch.pooling());
        let p: Vec<Var> = self.params.iter().enumerate().map(|(i, w)| tape.param(i, w)).collect();

        let mut h = tape.input(batch.node_features.clone());
        for b in 0..GCN_WIDTHS.len() {
            let q = &p[5 * b..5 * b + 5];
            let conv = graph_conv(tape, h, &adjacency, q[0], q[1], q[2])?;
            let act = tape.leaky_relu(conv, slope);
            let lin = tape.matmul(act, q[3])?;
            h = tape.add_bias(lin, q[4])?;
        }
        let mut z = tape.spmm(&pooling, h)?;
        let mlp = &p[5 * GCN_WIDTHS.len()..];
        let layers = mlp.len() / 2;
        for l in 0..layers {
            let lin = tape.matmul(z, mlp[2 * l])?;
            z = tape.add_bias(lin, mlp[2 * l + 1])?;
            if l + 1 < layers {
                z = tape.leaky_relu(z, slope);
            }
        }
        Ok(z)
    }

    pub fn predict(&self, batch: &GraphBatch<T>) -> Result<Array2<T>, NnError> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, batch)?;
        Ok(tape.value(out).clone())
    }

    pub fn cast<U: Scalar>(&self) -> GcnModel<U> {
        GcnModel { spec: self.spec, params: self.params.iter().map(|p| p.mapv(|v| U::from(v).unwrap())).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_parameter_count() {
        let blocks = (8 * 64 * 2 + 64 + 64 * 64 + 64) + (64 * 128 * 2 + 128 + 128 * 128 + 128)
            + (128 * 256 * 2 + 256 + 256 * 256 + 256);
        let mlp = (256 * 256 + 256) + (256 * 128 + 128) + (128 * 64 + 64) + (64 * 32 + 32) + (32 * 49 + 49);
        assert_eq!(ModelSpec::new(WidthPreset::Desk, 49).parameter_count(), blocks + mlp);
        assert_eq!(blocks + mlp, 280_497);
        let m = GcnModel::<f32>::new(ModelSpec::new(WidthPreset::Desk, 10), 1);
        assert_eq!(m.parameter_count(), blocks + mlp - 39 * 33);
    }

    #[test]
    fn full_parameter_count() {
        let spec = ModelSpec::new(WidthPreset::Full, 49);
        let blocks = 169_856;
        let mlp = (256 * 8192 + 8192) + (8192 * 4096 + 4096) + (4096 * 2048 + 2048) + (2048 * 1024 + 1024) + (1024 * 49 + 49);
        assert_eq!(spec.parameter_count(), blocks + mlp);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let spec = ModelSpec::new(WidthPreset::Desk, 10);
        let a = GcnModel::<f64>::new(spec, 3);
        assert_eq!(a, GcnModel::<f64>::new(spec, 3));
        assert_ne!(a, GcnModel::<f64>::new(spec, 4));
        for ((name, (r, _)), p) in spec.parameter_layout().iter().zip(&a.params) {
            if name.ends_with("w1") || name.ends_with("weight") {
                let bound = 1.0 / (*r as f64).sqrt();
                assert!(p.iter().all(|v| v.abs() <= bound), "{name}");
            }
        }
        // graph-conv bias of block 1 uses fan-in 64
        let b = &a.params[7];
        assert!(b.iter().all(|v| v.abs() <= 0.125));
    }
}
