//! Reverse-mode differentiation over 2-D arrays.
//!
//! A [`Tape`] records every operation of one forward pass. Nodes are
//! addressed by [`Var`]. Leaves are either constant inputs or model
//! parameters; [`Tape::backward`] accumulates gradients into a buffer
//! indexed like the parameter list.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis, Zip};

use super::loss::LossKind;
use super::Scalar;
use crate::error::NnError;

/// Constant sparse matrix in CSR layout, used for neighbor aggregation and pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct SpMat<T> {
    pub rows: usize,
    pub cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> SpMat<T> {
    /// Duplicates are kept as separate entries, which sums them in products.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, T)>) -> Self {
        entries.sort_by_key(|e| (e.0, e.1));
        let mut indptr = vec![0; rows + 1];
        for e in &entries {
            assert!(e.0 < rows && e.1 < cols, "entry ({}, {}) outside {rows}x{cols}", e.0, e.1);
            indptr[e.0 + 1] += 1;
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        SpMat { rows, cols, indptr, indices: entries.iter().map(|e| e.1).collect(), data: entries.iter().map(|e| e.2).collect() }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// `self * x`.
    pub fn mul(&self, x: &ArrayView2<T>) -> Array2<T> {
        assert_eq!(x.nrows(), self.cols);
        let mut out = Array2::zeros((self.rows, x.ncols()));
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            for p in self.indptr[i]..self.indptr[i + 1] {
                row.scaled_add(self.data[p], &x.row(self.indices[p]));
            }
        }
        out
    }

    /// `self^T * g`.
    pub fn mul_transpose(&self, g: &ArrayView2<T>) -> Array2<T> {
        assert_eq!(g.nrows(), self.rows);
        let mut out = Array2::zeros((self.cols, g.ncols()));
        for i in 0..self.rows {
            let gi = g.row(i);
            for p in self.indptr[i]..self.indptr[i + 1] {
                out.row_mut(self.indices[p]).scaled_add(self.data[p], &gi);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<T> {
    Input,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    /// Row vector broadcast over all rows.
    AddBias(Var, Var),
    LeakyRelu(Var, T),
    SpMM(Arc<SpMat<T>>, Var),
    Loss { pred: Var, target: Array2<T>, kind: LossKind, eps: T },
}

struct Node<T> {
    value: Array2<T>,
    op: Op<T>,
    /// Some parameter lies upstream.
    needs_grad: bool,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Tape::new()
    }
}

fn shape_err(what: &str, a: &[usize], b: &[usize]) -> NnError {
    NnError::Shape(format!("{what}: {a:?} vs {b:?}"))
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>) -> Var {
        let needs = |v: &Var| self.nodes[v.0].needs_grad;
        let needs_grad = match &op {
            Op::Input => false,
            Op::Param(_) => true,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddBias(a, b) => needs(a) || needs(b),
            Op::LeakyRelu(a, _) | Op::SpMM(_, a) => needs(a),
            Op::Loss { pred, .. } => needs(pred),
        };
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    pub fn input(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Input)
    }

    /// Leaf for parameter number `index`; its gradient lands in `grads[index]`.
    pub fn param(&mut self, index: usize, value: &Array2<T>) -> Var {
        self.push(value.clone(), Op::Param(index))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.nrows() {
            return Err(shape_err("matmul", va.shape(), vb.shape()));
        }
        let out = va.dot(vb);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.dim() != vb.dim() {
            return Err(shape_err("add", va.shape(), vb.shape()));
        }
        let out = va + vb;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(bias));
        if vb.nrows() != 1 || vb.ncols() != va.ncols() {
            return Err(shape_err("add_bias", va.shape(), vb.shape()));
        }
        let out = va + vb;
        Ok(self.push(out, Op::AddBias(a, bias)))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        let out = self.value(a).mapv(|x| if x > T::zero() { x } else { slope * x });
        self.push(out, Op::LeakyRelu(a, slope))
    }

    pub fn spmm(&mut self, s: &Arc<SpMat<T>>, a: Var) -> Result<Var, NnError> {
        let va = self.value(a);
        if va.nrows() != s.cols {
            return Err(shape_err("spmm", &[s.rows, s.cols], va.shape()));
        }
        let out = s.mul(&va.view());
        Ok(self.push(out, Op::SpMM(Arc::clone(s), a)))
    }

    /// Batch-mean loss of `pred` against `target`, both `B x d`; a `1 x 1` node.
    pub fn loss(&mut self, pred: Var, target: Array2<T>, kind: LossKind, eps: T) -> Result<Var, NnError> {
        let vp = self.value(pred);
        if vp.dim() != target.dim() {
            return Err(shape_err("loss", vp.shape(), target.shape()));
        }
        let value = kind.batch_value(&vp.view(), &target.view(), eps);
        Ok(self.push(Array2::from_elem((1, 1), value), Op::Loss { pred, target, kind, eps }))
    }

    /// Accumulates `d loss / d param` into `grads` (which must match the parameter shapes).
    pub fn backward(&self, loss: Var, grads: &mut [Array2<T>]) -> Result<(), NnError> {
        if loss.0 >= self.nodes.len() || !matches!(self.nodes[loss.0].op, Op::Loss { .. }) {
            return Err(NnError::NoForward);
        }
        let mut adj: Vec<Option<Array2<T>>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(Array2::from_elem((1, 1), T::one()));

        fn acc<T: Scalar>(slot: &mut Option<Array2<T>>, g: Array2<T>) {
            match slot {
                Some(s) => *s += &g,
                None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    let slot = grads.get_mut(*p).ok_or_else(|| NnError::Shape(format!("no gradient slot {p}")))?;
                    if slot.dim() != g.dim() {
                        return Err(shape_err("gradient slot", slot.shape(), g.shape()));
                    }
                    *slot += &g;
                }
                Op::MatMul(a, b) => {
                    if self.nodes[a.0].needs_grad {
                        acc(&mut adj[a.0], g.dot(&self.value(*b).t()));
                    }
                    if self.nodes[b.0].needs_grad {
                        acc(&mut adj[b.0], self.value(*a).t().dot(&g));
                    }
                }
                Op::Add(a, b) => {
                    if self.nodes[b.0].needs_grad {
                        acc(&mut adj[b.0], g.clone());
                    }
                    acc(&mut adj[a.0], g);
                }
                Op::AddBias(a, b) => {
                    if self.nodes[b.0].needs_grad {
                        acc(&mut adj[b.0], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    acc(&mut adj[a.0], g);
                }
                Op::LeakyRelu(a, slope) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(self.value(*a)).for_each(|gi, &x| {
                        if x <= T::zero() {
                            *gi *= *slope;
                        }
                    });
                    acc(&mut adj[a.0], ga);
                }
                Op::SpMM(s, a) => {
                    let ga = s.mul_transpose(&g.view());
                    acc(&mut adj[a.0], ga);
                }
                Op::Loss { pred, target, kind, eps } => {
                    let mut gp = kind.batch_gradient(&self.value(*pred).view(), &target.view(), *eps);
                    gp *= g[(0, 0)];
                    acc(&mut adj[pred.0], gp);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sparse_products() {
        let s = SpMat::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0), (0, 2, 1.0)]);
        let x = array![[1.0, 0.0], [2.0, 1.0], [3.0, -1.0]];
        assert_eq!(s.mul(&x.view()), array![[10.0, -3.0], [-2.0, -1.0]]);
        let g = array![[1.0], [1.0]];
        assert_eq!(s.mul_transpose(&g.view()), array![[1.0], [-1.0], [3.0]]);
    }

    #[test]
    fn linear_l2_closed_form() {
        // y = W x with L2 loss: dL/dW = 2 (W x - t) x^T / dim. Rows are samples,
        // so the model is evaluated as x^T W^T.
        let w = array![[0.3, -0.2, 0.5], [1.1, 0.4, -0.7]];
        let x = array![[0.5], [-1.5], [2.0]];
        let t = array![[0.1], [0.2]];
        let mut tape = Tape::<f64>::new();
        let xr = tape.input(x.t().to_owned());
        let wt = tape.param(0, &w.t().to_owned());
        let y = tape.matmul(xr, wt).unwrap();
        let loss = tape.loss(y, t.t().to_owned(), LossKind::L2, 0.0).unwrap();
        let mut grads = vec![Array2::zeros((3, 2))];
        tape.backward(loss, &mut grads).unwrap();
        let expect = ((w.dot(&x) - &t).dot(&x.t()) * (2.0 / 2.0)).t().to_owned();
        for (a, b) in grads[0].iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn backward_requires_a_loss() {
        let mut tape = Tape::<f64>::new();
        let a = tape.input(array![[1.0]]);
        assert!(matches!(tape.backward(a, &mut []), Err(NnError::NoForward)));
        assert!(matches!(Tape::<f64>::new().backward(Var(0), &mut []), Err(NnError::NoForward)));
    }

    #[test]
    fn shape_errors() {
        let mut tape = Tape::<f64>::new();
        let a = tape.input(Array2::zeros((2, 3)));
        let b = tape.input(Array2::zeros((2, 3)));
        assert!(tape.matmul(a, b).is_err());
        let bias = tape.input(Array2::zeros((1, 2)));
        assert!(tape.add_bias(a, bias).is_err());
    }
}
