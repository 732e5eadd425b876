use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::tape::SpMat;
use super::Scalar;
use crate::error::NnError;
use crate::features::{FeatureSet, FEATURE_DIM};

/// Per-column affine map applied to node features before they reach the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNormalizer {
    pub fn identity(dim: usize) -> Self {
        FeatureNormalizer { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Mean and standard deviation of every column over all nodes of all sets.
    pub fn fit<'a>(sets: impl IntoIterator<Item = &'a FeatureSet>) -> Self {
        let mut count = 0usize;
        let mut sum = vec![0.0; FEATURE_DIM];
        let mut sq = vec![0.0; FEATURE_DIM];
        for set in sets {
            for row in set.node_features.rows() {
                count += 1;
                for (c, &v) in row.iter().enumerate() {
                    sum[c] += v;
                    sq[c] += v * v;
                }
            }
        }
        if count == 0 {
            return Self::identity(FEATURE_DIM);
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let s = (q / n - m * m).max(0.0).sqrt();
                if s > 1e-12 { s } else { 1.0 }
            })
            .collect();
        FeatureNormalizer { mean, std }
    }

    pub fn apply<T: Scalar>(&self, set: &FeatureSet) -> GraphInput<T> {
        let x = Array2::from_shape_fn(set.node_features.dim(), |(i, c)| {
            T::from((set.node_features[(i, c)] - self.mean[c]) / self.std[c]).unwrap()
        });
        GraphInput {
            node_features: x,
            edge_index: set.edge_index.clone(),
            edge_weights: set.edge_weights.iter().map(|&w| T::from(w).unwrap()).collect(),
        }
    }
}

/// One graph as the model sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput<T> {
    pub node_features: Array2<T>,
    /// Directed `(source, target)` pairs.
    pub edge_index: Vec<[usize; 2]>,
    pub edge_weights: Vec<T>,
}

impl<T: Scalar> GraphInput<T> {
    pub fn node_count(&self) -> usize {
        self.node_features.nrows()
    }

    /// Same graph with node `i` renamed `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.node_count();
        let mut x = Array2::zeros(self.node_features.raw_dim());
        for i in 0..n {
            x.row_mut(perm[i]).assign(&self.node_features.row(i));
        }
        GraphInput {
            node_features: x,
            edge_index: self.edge_index.iter().map(|&[a, b]| [perm[a], perm[b]]).collect(),
            edge_weights: self.edge_weights.clone(),
        }
    }
}

/// Several graphs stacked into one disconnected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch<T> {
    pub node_features: Array2<T>,
    pub edge_index: Vec<[usize; 2]>,
    pub edge_weights: Vec<T>,
    /// Graph id of every node.
    pub graph_assignment: Vec<usize>,
    pub batch_size: usize,
}

impl<T: Scalar> GraphBatch<T> {
    pub fn from_graphs(graphs: &[&GraphInput<T>]) -> Result<Self, NnError> {
        if graphs.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        let dim = graphs[0].node_features.ncols();
        let mut offset = 0;
        let mut edge_index = Vec::new();
        let mut edge_weights = Vec::new();
        let mut graph_assignment = Vec::new();
        for (g, graph) in graphs.iter().enumerate() {
            let n = graph.node_count();
            if n == 0 {
                return Err(NnError::Shape(format!("graph {g} has no nodes")));
            }
            if graph.node_features.ncols() != dim {
                return Err(NnError::Shape(format!("graph {g} has {} feature columns, expected {dim}", graph.node_features.ncols())));
            }
            if graph.edge_index.len() != graph.edge_weights.len() {
                return Err(NnError::Shape(format!("graph {g}: edge and weight counts differ")));
            }
            for &[a, b] in &graph.edge_index {
                if a >= n || b >= n {
                    return Err(NnError::Shape(format!("graph {g}: edge ({a}, {b}) outside {n} nodes")));
                }
                edge_index.push([a + offset, b + offset]);
            }
            edge_weights.extend_from_slice(&graph.edge_weights);
            graph_assignment.extend(std::iter::repeat_n(g, n));
            offset += n;
        }
        let views: Vec<_> = graphs.iter().map(|g| g.node_features.view()).collect();
        let node_features = concatenate(Axis(0), &views).expect("column counts checked");
        Ok(GraphBatch { node_features, edge_index, edge_weights, graph_assignment, batch_size: graphs.len() })
    }

    pub fn node_count(&self) -> usize {
        self.node_features.nrows()
    }

    /// `A[i][j] = e_{j,i}`: row `i` sums weighted features of the sources pointing at `i`.
    pub fn adjacency(&self) -> SpMat<T> {
        let n = self.node_count();
        let entries = self.edge_index.iter().zip(&self.edge_weights).map(|(&[src, dst], &w)| (dst, src, w)).collect();
        SpMat::from_triplets(n, n, entries)
    }

    /// `B x N` matrix averaging the nodes of each graph.
    pub fn pooling(&self) -> SpMat<T> {
        let mut counts = vec![0usize; self.batch_size];
        for &g in &self.graph_assignment {
            counts[g] += 1;
        }
        let entries = self
            .graph_assignment
            .iter()
            .enumerate()
            .map(|(i, &g)| (g, i, T::one() / T::from(counts[g]).unwrap()))
            .collect();
        SpMat::from_triplets(self.batch_size, self.node_count(), entries)
    }
}
