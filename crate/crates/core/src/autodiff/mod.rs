//! Reverse-mode automatic differentiation over dense 2-D tensors.
//!
//! A [`Graph`] records every primitive applied during a forward pass. Calling
//! [`Graph::backward`] consumes the graph and returns a gradient for each leaf
//! that was registered with [`Graph::param`].
//!
//! There is no broadcasting: every elementwise primitive requires identical
//! shapes. Reductions (`mean`, `variance`, `covariance`) treat a tensor as a
//! flat series and use population normalization (divide by `N`).
//!
//! ```compile_fail
//! use rjcma::autodiff::Graph;
//! use rjcma::Tensor;
//! let mut g = Graph::new();
//! let w = g.param(Tensor::ones(2, 2));
//! let loss = g.sum(w);
//! let _first = g.backward(loss);
//! let _second = g.backward(loss); // the graph was consumed by the first call
//! ```

mod gradcheck;

#[doc(hidden)]
pub use gradcheck::grad_check_with_fault;
pub use gradcheck::{grad_check, relative_error, GradCheckReport, ParamCheck};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Deliberately wrong backward rules, used as a negative control for the
/// gradient checker.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    Tanh,
    Relu,
    MatMul,
}

impl std::str::FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Fault::Tanh),
            "relu" => Ok(Fault::Relu),
            "matmul" => Ok(Fault::MatMul),
            other => Err(Error::Config(format!("unknown fault `{other}`"))),
        }
    }
}

const FAULT_FACTOR: f64 = 1.05;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    ConcatRows(Vec<Var>),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Relu(Var),
    ShiftCols(Var, usize),
    SelectCols(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
    Variance(Var),
    Covariance(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    leaf_param: bool,
}

/// A recording of one forward pass. Nodes are appended in evaluation order,
/// so every node's inputs precede it.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    fault: Option<Fault>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    #[doc(hidden)]
    pub fn with_fault(fault: Option<Fault>) -> Self {
        Self { nodes: Vec::new(), fault }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad, leaf_param: false });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Registers a trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: true, leaf_param: true });
        Var(self.nodes.len() - 1)
    }

    /// Registers a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let rg = self.needs(&[a]);
        self.push(value, Op::Transpose(a), rg)
    }

    /// Stacks the parts vertically in argument order.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::EmptyInput("concat_rows"))?;
        let cols = self.value(first).cols();
        let mut rows = 0;
        for &p in parts {
            let shape = self.shape(p);
            if shape.1 != cols {
                return Err(Error::shape("concat_rows", self.shape(first), shape));
            }
            rows += shape.0;
        }
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let rg = self.needs(parts);
        Ok(self.push(Tensor::from_raw(rows, cols, data), Op::ConcatRows(parts.to_vec()), rg))
    }

    fn elementwise(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(name, sa, sb));
        }
        let value = self.value(a).zip_map(self.value(b), f);
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|x| x * s);
        let rg = self.needs(&[a]);
        self.push(value, Op::Scale(a, s), rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        let rg = self.needs(&[a]);
        self.push(value, Op::AddScalar(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let rg = self.needs(&[a]);
        self.push(value, Op::Tanh(a), rg)
    }

    /// Smallest |input| seen by any ReLU so far, or infinity if there is none.
    /// A finite-difference step larger than this can straddle the kink.
    pub fn kink_margin(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(a) => Some(self.value(a).data().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()))),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.needs(&[a]);
        self.push(value, Op::Relu(a), rg)
    }

    /// Shifts columns right by `shift`, filling the first `shift` columns
    /// with zeros: `out[:, t] = a[:, t - shift]`.
    pub fn shift_cols(&mut self, a: Var, shift: usize) -> Var {
        let src = self.value(a);
        let (rows, cols) = src.shape();
        let mut data = vec![0.0; rows * cols];
        if shift < cols {
            for i in 0..rows {
                let row = src.row_slice(i);
                data[i * cols + shift..(i + 1) * cols].copy_from_slice(&row[..cols - shift]);
            }
        }
        let rg = self.needs(&[a]);
        self.push(Tensor::from_raw(rows, cols, data), Op::ShiftCols(a, shift), rg)
    }

    /// Gathers the listed columns, in order.
    pub fn select_cols(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let src = self.value(a);
        let (rows, cols) = src.shape();
        if let Some(&bad) = indices.iter().find(|&&j| j >= cols) {
            return Err(Error::Contract(format!("select_cols: column {bad} out of range for {cols} columns")));
        }
        let mut data = Vec::with_capacity(rows * indices.len());
        for i in 0..rows {
            let row = src.row_slice(i);
            data.extend(indices.iter().map(|&j| row[j]));
        }
        let rg = self.needs(&[a]);
        Ok(self.push(Tensor::from_raw(rows, indices.len(), data), Op::SelectCols(a, indices.to_vec()), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.needs(&[a]);
        self.push(value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::EmptyInput("mean"));
        }
        let value = Tensor::scalar(series_mean(x.data()));
        let rg = self.needs(&[a]);
        Ok(self.push(value, Op::Mean(a), rg))
    }

    /// Population variance of all elements.
    pub fn variance(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::EmptyInput("variance"));
        }
        let value = Tensor::scalar(series_covariance(x.data(), x.data()));
        let rg = self.needs(&[a]);
        Ok(self.push(value, Op::Variance(a), rg))
    }

    /// Population covariance of two equally long series (at least 2 elements).
    pub fn covariance(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.is_empty() || y.is_empty() {
            return Err(Error::EmptyInput("covariance"));
        }
        if x.len() != y.len() {
            return Err(Error::shape("covariance", x.shape(), y.shape()));
        }
        if x.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: x.len() });
        }
        let value = Tensor::scalar(series_covariance(x.data(), y.data()));
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Covariance(a, b), rg))
    }

    /// Runs the reverse sweep from a scalar `loss`, consuming the graph.
    ///
    /// Every leaf registered with [`Graph::param`] receives a gradient of its
    /// own shape; leaves the loss does not depend on get zeros.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let Graph { mut nodes, fault } = self;
        let shape = nodes[loss.0].value.shape();
        if shape != (1, 1) {
            return Err(Error::Contract(format!("backward needs a 1x1 loss, got {}x{}", shape.0, shape.1)));
        }
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            if !nodes[i].requires_grad || matches!(nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let op = std::mem::replace(&mut nodes[i].op, Op::Leaf);
            propagate(&nodes, i, &op, &g, fault, &mut grads)?;
            // Intermediate values are no longer needed once propagated.
            nodes[i].value = Tensor::zeros(0, 0);
        }

        let grads = nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| {
                if node.leaf_param {
                    Some(g.unwrap_or_else(|| Tensor::zeros(node.value.rows(), node.value.cols())))
                } else {
                    None
                }
            })
            .collect();
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], nodes: &[Node], v: Var, g: Tensor) {
    if !nodes[v.0].requires_grad {
        return;
    }
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn propagate(
    nodes: &[Node],
    index: usize,
    op: &Op,
    g: &Tensor,
    fault: Option<Fault>,
    grads: &mut [Option<Tensor>],
) -> Result<()> {
    let val = |v: Var| &nodes[v.0].value;
    let out = &nodes[index].value;
    match *op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let mut da = g.matmul_nt(val(b))?;
            if fault == Some(Fault::MatMul) {
                da.scale_in_place(FAULT_FACTOR);
            }
            let db = val(a).matmul_tn(g)?;
            accumulate(grads, nodes, a, da);
            accumulate(grads, nodes, b, db);
        }
        Op::Transpose(a) => accumulate(grads, nodes, a, g.transpose()),
        Op::ConcatRows(ref parts) => {
            let cols = g.cols();
            let mut offset = 0;
            for &p in parts {
                let rows = val(p).rows();
                let slice = g.data()[offset * cols..(offset + rows) * cols].to_vec();
                accumulate(grads, nodes, p, Tensor::from_raw(rows, cols, slice));
                offset += rows;
            }
        }
        Op::Add(a, b) => {
            accumulate(grads, nodes, a, g.clone());
            accumulate(grads, nodes, b, g.clone());
        }
        Op::Sub(a, b) => {
            accumulate(grads, nodes, a, g.clone());
            accumulate(grads, nodes, b, g.map(|x| -x));
        }
        Op::Mul(a, b) => {
            accumulate(grads, nodes, a, g.zip_map(val(b), |gi, bi| gi * bi));
            accumulate(grads, nodes, b, g.zip_map(val(a), |gi, ai| gi * ai));
        }
        Op::Div(a, b) => {
            let (x, y) = (val(a), val(b));
            accumulate(grads, nodes, a, g.zip_map(y, |gi, yi| gi / yi));
            let db = Tensor::from_raw(
                y.rows(),
                y.cols(),
                g.data().iter().zip(x.data()).zip(y.data()).map(|((&gi, &xi), &yi)| -gi * xi / (yi * yi)).collect(),
            );
            accumulate(grads, nodes, b, db);
        }
        Op::Scale(a, s) => accumulate(grads, nodes, a, g.map(|x| x * s)),
        Op::AddScalar(a) => accumulate(grads, nodes, a, g.clone()),
        Op::Tanh(a) => {
            let factor = if fault == Some(Fault::Tanh) { FAULT_FACTOR } else { 1.0 };
            accumulate(grads, nodes, a, g.zip_map(out, |gi, y| gi * (1.0 - y * y) * factor));
        }
        Op::Relu(a) => {
            let factor = if fault == Some(Fault::Relu) { FAULT_FACTOR } else { 1.0 };
            accumulate(grads, nodes, a, g.zip_map(val(a), |gi, x| if x > 0.0 { gi * factor } else { 0.0 }));
        }
        Op::ShiftCols(a, shift) => {
            let (rows, cols) = g.shape();
            let mut data = vec![0.0; rows * cols];
            if shift < cols {
                for i in 0..rows {
                    let row = g.row_slice(i);
                    data[i * cols..i * cols + cols - shift].copy_from_slice(&row[shift..]);
                }
            }
            accumulate(grads, nodes, a, Tensor::from_raw(rows, cols, data));
        }
        Op::SelectCols(a, ref indices) => {
            let (rows, cols) = val(a).shape();
            let mut data = vec![0.0; rows * cols];
            for i in 0..rows {
                for (k, &j) in indices.iter().enumerate() {
                    data[i * cols + j] += g.get(i, k);
                }
            }
            accumulate(grads, nodes, a, Tensor::from_raw(rows, cols, data));
        }
        Op::Sum(a) => {
            let (r, c) = val(a).shape();
            accumulate(grads, nodes, a, Tensor::full(r, c, g.get(0, 0)));
        }
        Op::Mean(a) => {
            let x = val(a);
            let n = x.len() as f64;
            accumulate(grads, nodes, a, Tensor::full(x.rows(), x.cols(), g.get(0, 0) / n));
        }
        Op::Variance(a) => {
            let x = val(a);
            let n = x.len() as f64;
            let mu = series_mean(x.data());
            let gs = g.get(0, 0);
            accumulate(grads, nodes, a, x.map(|xi| gs * 2.0 * (xi - mu) / n));
        }
        Op::Covariance(a, b) => {
            let (x, y) = (val(a), val(b));
            let n = x.len() as f64;
            let (mx, my) = (series_mean(x.data()), series_mean(y.data()));
            let gs = g.get(0, 0);
            let da = Tensor::from_raw(x.rows(), x.cols(), y.data().iter().map(|&yi| gs * (yi - my) / n).collect());
            let db = Tensor::from_raw(y.rows(), y.cols(), x.data().iter().map(|&xi| gs * (xi - mx) / n).collect());
            accumulate(grads, nodes, a, da);
            accumulate(grads, nodes, b, db);
        }
    }
    Ok(())
}

pub(crate) fn series_mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population covariance; `series_covariance(x, x)` is the variance.
pub(crate) fn series_covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (series_mean(x), series_mean(y));
    x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64
}

/// Gradients produced by one backward sweep, indexed by the leaf [`Var`]s
/// they belong to.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a parameter leaf; `None` for constants and intermediates.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
