//! The recording tape and its reverse pass.
//!
//! Nodes are appended in evaluation order, so reverse index order is a
//! reverse topological order.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use crate::optim::ParamStore;
use crate::tensor::Tensor;
use crate::{AutodiffError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Id(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(String),
    MatMul(Id, Id),
    Add(Id, Id),
    Sub(Id, Id),
    Mul(Id, Id),
    AddRow(Id, Id),
    Scale(Id, f64),
    Relu(Id),
    Sigmoid(Id),
    Square(Id),
    ConcatCols(Vec<Id>),
    SumAll(Id),
    MeanAll(Id),
    SegmentMax { x: Id, argmax: Vec<usize> },
    GatherRows { x: Id, idx: Rc<[usize]> },
    ScatterAddRows { x: Id, idx: Rc<[usize]> },
    NeighborMean { x: Id, lists: Rc<[Vec<usize>]> },
    BceWithLogits { logits: Id, labels: Rc<[f64]> },
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, Id>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sum that does not depend on the order of `xs`.
fn order_free_sum(xs: &mut [f64]) -> f64 {
    if xs.len() > 2 {
        xs.sort_unstable_by(f64::total_cmp);
    }
    xs.iter().fold(0.0, |acc, x| acc + x)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: Id) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Id {
        self.nodes.push(Node { value, op });
        Id(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Id {
        self.push(value, Op::Leaf)
    }

    /// Records a parameter from `store`; repeated requests return the same node.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Id> {
        if let Some(&id) = self.params.get(name) {
            return Ok(id);
        }
        let value = store.value(name)?.clone();
        let id = self.push(value, Op::Param(name.to_string()));
        self.params.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn matmul(&mut self, a: Id, b: Id) -> Result<Id> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    fn zip(&mut self, op: &'static str, a: Id, b: Id, f: impl Fn(f64, f64) -> f64, rec: Op) -> Result<Id> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch(op, x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        let v = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(v, rec))
    }

    pub fn add(&mut self, a: Id, b: Id) -> Result<Id> {
        self.zip("add", a, b, |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Id, b: Id) -> Result<Id> {
        self.zip("sub", a, b, |p, q| p - q, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Id, b: Id) -> Result<Id> {
        self.zip("mul", a, b, |p, q| p * q, Op::Mul(a, b))
    }

    /// Adds a `1 × c` row to every row of `a`.
    pub fn add_row(&mut self, a: Id, row: Id) -> Result<Id> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(mismatch("add_row", x, r));
        }
        let c = x.cols();
        let data = x.data().iter().enumerate().map(|(i, &p)| p + r.data()[i % c]).collect();
        let v = Tensor::matrix(x.rows(), c, data)?;
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    pub fn scale(&mut self, a: Id, s: f64) -> Id {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Id) -> Id {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(v, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Id) -> Id {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn square(&mut self, a: Id) -> Id {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn concat_cols(&mut self, parts: &[Id]) -> Result<Id> {
        let first = self.value(parts[0]);
        let rows = first.rows();
        for &p in &parts[1..] {
            if self.value(p).rows() != rows {
                return Err(mismatch("concat_cols", first, self.value(p)));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let v = Tensor::matrix(rows, cols, data)?;
        Ok(self.push(v, Op::ConcatCols(parts.to_vec())))
    }

    pub fn sum_all(&mut self, a: Id) -> Id {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Id) -> Id {
        let x = self.value(a);
        let v = Tensor::scalar(x.sum() / x.len() as f64);
        self.push(v, Op::MeanAll(a))
    }

    /// Column-wise maximum over consecutive row segments.
    /// `offsets` has one more entry than there are segments; every segment
    /// must be nonempty. Gradients route to the first maximal row.
    pub fn segment_max(&mut self, a: Id, offsets: &[usize]) -> Result<Id> {
        let x = self.value(a);
        let c = x.cols();
        let nseg = offsets.len().saturating_sub(1);
        if offsets.first() != Some(&0) || offsets.last() != Some(&x.rows()) || offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AutodiffError::ShapeMismatch {
                op: "segment_max",
                left: x.shape().to_vec(),
                right: offsets.to_vec(),
            });
        }
        let mut data = vec![0.0; nseg * c];
        let mut argmax = vec![0usize; nseg * c];
        for s in 0..nseg {
            for j in 0..c {
                let mut best = offsets[s];
                for r in offsets[s] + 1..offsets[s + 1] {
                    if x.get(r, j) > x.get(best, j) {
                        best = r;
                    }
                }
                data[s * c + j] = x.get(best, j);
                argmax[s * c + j] = best;
            }
        }
        let v = Tensor::matrix(nseg, c, data)?;
        Ok(self.push(v, Op::SegmentMax { x: a, argmax }))
    }

    /// Output row `i` is row `idx[i]` of `a`.
    pub fn gather_rows(&mut self, a: Id, idx: Rc<[usize]>) -> Result<Id> {
        let x = self.value(a);
        let c = x.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx.iter() {
            if i >= x.rows() {
                return Err(AutodiffError::IndexOutOfRange {
                    op: "gather_rows",
                    index: i,
                    len: x.rows(),
                });
            }
            data.extend_from_slice(x.row_slice(i));
        }
        let v = Tensor::matrix(idx.len(), c, data)?;
        Ok(self.push(v, Op::GatherRows { x: a, idx }))
    }

    /// `n × c` result whose row `j` sums the rows `i` of `a` with `idx[i] = j`.
    pub fn scatter_add_rows(&mut self, a: Id, idx: Rc<[usize]>, n: usize) -> Result<Id> {
        let lists = self.inverse_lists("scatter_add_rows", a, &idx, n)?;
        let v = self.summed_lists(a, &lists, false);
        Ok(self.push(v, Op::ScatterAddRows { x: a, idx }))
    }

    fn inverse_lists(&self, op: &'static str, a: Id, idx: &[usize], n: usize) -> Result<Vec<Vec<usize>>> {
        let x = self.value(a);
        if idx.len() != x.rows() {
            return Err(AutodiffError::ShapeMismatch {
                op,
                left: x.shape().to_vec(),
                right: vec![idx.len()],
            });
        }
        let mut lists = vec![Vec::new(); n];
        for (i, &j) in idx.iter().enumerate() {
            if j >= n {
                return Err(AutodiffError::IndexOutOfRange { op, index: j, len: n });
            }
            lists[j].push(i);
        }
        Ok(lists)
    }

    fn summed_lists(&self, a: Id, lists: &[Vec<usize>], mean: bool) -> Tensor {
        let x = self.value(a);
        let c = x.cols();
        let mut data = vec![0.0; lists.len() * c];
        let mut buf = Vec::new();
        for (i, list) in lists.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            for j in 0..c {
                buf.clear();
                buf.extend(list.iter().map(|&r| x.get(r, j)));
                let s = order_free_sum(&mut buf);
                data[i * c + j] = if mean { s / list.len() as f64 } else { s };
            }
        }
        Tensor::matrix(lists.len(), c, data).expect("shape is consistent")
    }

    /// Row `i` of the result is the mean of the rows `lists[i]` of `a`, or
    /// zero for an empty list. The sum is independent of list order.
    pub fn neighbor_mean(&mut self, a: Id, lists: Rc<[Vec<usize>]>) -> Result<Id> {
        let rows = self.value(a).rows();
        if let Some(&bad) = lists.iter().flatten().find(|&&r| r >= rows) {
            return Err(AutodiffError::IndexOutOfRange {
                op: "neighbor_mean",
                index: bad,
                len: rows,
            });
        }
        let v = self.summed_lists(a, &lists, true);
        Ok(self.push(v, Op::NeighborMean { x: a, lists }))
    }

    /// Mean binary cross-entropy of `sigmoid(logits)` against `labels`.
    pub fn bce_with_logits(&mut self, logits: Id, labels: Rc<[f64]>) -> Result<Id> {
        let z = self.value(logits);
        if z.len() != labels.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "bce_with_logits",
                left: z.shape().to_vec(),
                right: vec![labels.len()],
            });
        }
        let total: f64 = z
            .data()
            .iter()
            .zip(labels.iter())
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .sum();
        let v = Tensor::scalar(total / labels.len() as f64);
        Ok(self.push(v, Op::BceWithLogits { logits, labels }))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Id) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(AutodiffError::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::new(lv.shape().to_vec(), vec![1.0])?);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        let mut params = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(name), Some(g)) = (&node.op, &grads[i]) {
                params.insert(name.clone(), g.clone());
            }
        }
        Ok(Gradients { nodes: grads, params })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut acc = |id: Id, t: Tensor| match &mut grads[id.0] {
            Some(e) => e.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                acc(*a, g.matmul(&y.transpose())?);
                acc(*b, x.transpose().matmul(g)?);
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                acc(*a, zip_with(g, y, |p, q| p * q));
                acc(*b, zip_with(g, x, |p, q| p * q));
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                let c = g.cols();
                let mut r = vec![0.0; c];
                for (k, v) in g.data().iter().enumerate() {
                    r[k % c] += v;
                }
                acc(*row, Tensor::new(self.value(*row).shape().to_vec(), r)?);
            }
            Op::Scale(a, s) => acc(*a, g.map(|x| x * s)),
            Op::Relu(a) => {
                let x = self.value(*a);
                acc(*a, zip_with(g, x, |p, q| if q > 0.0 { p } else { 0.0 }));
            }
            Op::Sigmoid(a) => {
                acc(*a, zip_with(g, &node.value, |p, s| p * s * (1.0 - s)));
            }
            Op::Square(a) => {
                let x = self.value(*a);
                acc(*a, zip_with(g, x, |p, q| 2.0 * p * q));
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let pc = self.value(p).cols();
                    let mut data = Vec::with_capacity(g.rows() * pc);
                    for r in 0..g.rows() {
                        data.extend_from_slice(&g.row_slice(r)[off..off + pc]);
                    }
                    acc(p, Tensor::new(self.value(p).shape().to_vec(), data)?);
                    off += pc;
                }
            }
            Op::SumAll(a) => {
                let x = self.value(*a);
                acc(*a, Tensor::new(x.shape().to_vec(), vec![g.data()[0]; x.len()])?);
            }
            Op::MeanAll(a) => {
                let x = self.value(*a);
                let v = g.data()[0] / x.len() as f64;
                acc(*a, Tensor::new(x.shape().to_vec(), vec![v; x.len()])?);
            }
            Op::SegmentMax { x, argmax } => {
                let xv = self.value(*x);
                let c = xv.cols();
                let mut out = Tensor::zeros(xv.shape());
                for (k, &r) in argmax.iter().enumerate() {
                    out.data_mut()[r * c + k % c] += g.data()[k];
                }
                acc(*x, out);
            }
            Op::GatherRows { x, idx } => {
                let xv = self.value(*x);
                let c = xv.cols();
                let mut out = Tensor::zeros(xv.shape());
                for (k, &r) in idx.iter().enumerate() {
                    for j in 0..c {
                        out.data_mut()[r * c + j] += g.get(k, j);
                    }
                }
                acc(*x, out);
            }
            Op::ScatterAddRows { x, idx } => {
                let xv = self.value(*x);
                let c = xv.cols();
                let mut data = Vec::with_capacity(xv.len());
                for &j in idx.iter() {
                    data.extend_from_slice(&g.data()[j * c..(j + 1) * c]);
                }
                acc(*x, Tensor::new(xv.shape().to_vec(), data)?);
            }
            Op::NeighborMean { x, lists } => {
                let xv = self.value(*x);
                let c = xv.cols();
                let mut out = Tensor::zeros(xv.shape());
                for (i, list) in lists.iter().enumerate() {
                    let n = list.len() as f64;
                    for &r in list {
                        for j in 0..c {
                            out.data_mut()[r * c + j] += g.get(i, j) / n;
                        }
                    }
                }
                acc(*x, out);
            }
            Op::BceWithLogits { logits, labels } => {
                let z = self.value(*logits);
                let n = labels.len() as f64;
                let scale = g.data()[0] / n;
                let data = z
                    .data()
                    .iter()
                    .zip(labels.iter())
                    .map(|(&z, &y)| scale * (sigmoid(z) - y))
                    .collect();
                acc(*logits, Tensor::new(z.shape().to_vec(), data)?);
            }
        }
        Ok(())
    }
}

fn zip_with(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&p, &q)| f(p, q)).collect();
    Tensor::new(b.shape().to_vec(), data).expect("same length")
}

/// Result of a reverse pass.
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: BTreeMap<String, Tensor>,
}

impl Gradients {
    /// Gradient with respect to a recorded node, `None` when unreachable.
    pub fn wrt(&self, id: Id) -> Option<&Tensor> {
        self.nodes.get(id.0).and_then(Option::as_ref)
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    /// Gradient of a parameter, all zeros when it did not reach the loss.
    pub fn param_or_zero(&self, store: &ParamStore, name: &str) -> Result<Tensor> {
        match self.params.get(name) {
            Some(g) => Ok(g.clone()),
            None => Ok(Tensor::zeros(store.value(name)?.shape())),
        }
    }

    pub fn params(&self) -> &BTreeMap<String, Tensor> {
        &self.params
    }
}
