//! Per-sentence computation graphs with reverse-mode differentiation.
//!
//! A `Graph` is an append-only tape: every operation records a node whose
//! inputs strictly precede it, evaluates eagerly, and caches its value.
//! Backward walks the tape in reverse, accumulating gradients (never
//! overwriting, so shared subexpressions and re-used parameters sum their
//! contributions) and flushes parameter gradients into the `ParameterStore`.
//! Graphs are built per sentence and thrown away after the update.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::params::{ParamId, ParameterStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nonlinearity {
    Tanh,
    Sigmoid,
    Relu,
}

impl Nonlinearity {
    fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Nonlinearity::Relu => x.max(0.0),
        }
    }
}

enum Op {
    Constant,
    Param(ParamId),
    /// W x + b for matrix W, vectors x and b.
    Affine { w: NodeId, x: NodeId, b: NodeId },
    /// W x for matrix W, vector x.
    MatVec { w: NodeId, x: NodeId },
    Add { a: NodeId, b: NodeId },
    Hadamard { a: NodeId, b: NodeId },
    Pointwise { kind: Nonlinearity, x: NodeId },
    Concat { parts: Vec<NodeId> },
    /// One row of a matrix, as a vector. Gradient flows into that row only.
    LookupRow { table: NodeId, row: usize },
    /// Log softmax over the `allowed` index set; all other entries carry a
    /// minus-infinity sentinel. The mask, not the stored value, drives the
    /// backward rule, so no gradient ever touches a masked entry.
    RestrictedLogSoftmax { scores: NodeId, allowed: Vec<usize> },
    /// One entry of a vector, as a scalar.
    Pick { x: NodeId, index: usize },
    /// Sum of all entries, as a scalar.
    Sum { x: NodeId },
    Neg { x: NodeId },
}

enum Value {
    Owned(Tensor),
    Shared(Arc<Tensor>),
}

impl Value {
    fn tensor(&self) -> &Tensor {
        match self {
            Value::Owned(t) => t,
            Value::Shared(t) => t,
        }
    }
}

struct Node {
    op: Op,
    value: Value,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        self.nodes[id.0].value.tensor()
    }

    /// True when every input of every node precedes the node on the tape.
    /// Construction guarantees this; exposed so tests can assert it.
    pub fn is_topologically_ordered(&self) -> bool {
        self.nodes.iter().enumerate().all(|(i, node)| {
            let mut ok = true;
            visit_inputs(&node.op, |input| ok &= input.0 < i);
            ok
        })
    }

    fn push_node(&mut self, op: Op, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op,
            value: Value::Owned(value),
        });
        id
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push_node(Op::Constant, value)
    }

    /// Leaf referencing a stored parameter. Repeated requests for the same
    /// parameter return the same node, so its gradient contributions from
    /// every use site accumulate in one place.
    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_nodes.get(&id) {
            return node;
        }
        let node = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op: Op::Param(id),
            value: Value::Shared(store.shared_value(id)),
        });
        self.param_nodes.insert(id, node);
        node
    }

    pub fn affine(&mut self, w: NodeId, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (wv, xv, bv) = (self.value(w), self.value(x), self.value(b));
        if !wv.is_matrix() || !xv.is_vector() || !bv.is_vector() {
            return Err(Error::shape(
                "affine",
                format!("want matrix, vector, vector; got {:?}, {:?}, {:?}", wv.shape(), xv.shape(), bv.shape()),
            ));
        }
        if wv.cols() != xv.numel() || wv.rows() != bv.numel() {
            return Err(Error::shape(
                "affine",
                format!("W is {:?}, x has {}, b has {}", wv.shape(), xv.numel(), bv.numel()),
            ));
        }
        let mut out = bv.data().to_vec();
        mat_vec_into(wv, xv.data(), &mut out);
        Ok(self.push_node(Op::Affine { w, x, b }, Tensor::vector(out)))
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (wv, xv) = (self.value(w), self.value(x));
        if !wv.is_matrix() || !xv.is_vector() || wv.cols() != xv.numel() {
            return Err(Error::shape(
                "matvec",
                format!("W is {:?}, x is {:?}", wv.shape(), xv.shape()),
            ));
        }
        let mut out = vec![0.0; wv.rows()];
        mat_vec_into(wv, xv.data(), &mut out);
        Ok(self.push_node(Op::MatVec { w, x }, Tensor::vector(out)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::shape(
                "add",
                format!("{:?} vs {:?}", av.shape(), bv.shape()),
            ));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let shape = av.shape().to_vec();
        Ok(self.push_node(Op::Add { a, b }, Tensor::from_vec(&shape, data)))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::shape(
                "hadamard",
                format!("{:?} vs {:?}", av.shape(), bv.shape()),
            ));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let shape = av.shape().to_vec();
        Ok(self.push_node(Op::Hadamard { a, b }, Tensor::from_vec(&shape, data)))
    }

    pub fn pointwise(&mut self, kind: Nonlinearity, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let data = xv.data().iter().map(|&v| kind.apply(v)).collect();
        let shape = xv.shape().to_vec();
        self.push_node(Op::Pointwise { kind, x }, Tensor::from_vec(&shape, data))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.pointwise(Nonlinearity::Tanh, x)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.pointwise(Nonlinearity::Sigmoid, x)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.pointwise(Nonlinearity::Relu, x)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::invalid("concat of zero vectors"));
        }
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if !v.is_vector() {
                return Err(Error::shape("concat", format!("non-vector input {:?}", v.shape())));
            }
            data.extend_from_slice(v.data());
        }
        Ok(self.push_node(Op::Concat { parts: parts.to_vec() }, Tensor::vector(data)))
    }

    pub fn lookup_row(&mut self, table: NodeId, row: usize) -> Result<NodeId> {
        let t = self.value(table);
        if !t.is_matrix() {
            return Err(Error::shape("lookup_row", format!("table is {:?}", t.shape())));
        }
        if row >= t.rows() {
            return Err(Error::invalid(format!(
                "row {row} out of range for table with {} rows",
                t.rows()
            )));
        }
        let data = t.row(row).to_vec();
        Ok(self.push_node(Op::LookupRow { table, row }, Tensor::vector(data)))
    }

    /// Log softmax computed over the `allowed` index set only. Entries outside
    /// the set are minus infinity (the sentinel is carried as an explicit mask;
    /// backward never multiplies through it, which keeps gradients NaN-free).
    pub fn restricted_log_softmax(&mut self, scores: NodeId, allowed: &[usize]) -> Result<NodeId> {
        let sv = self.value(scores);
        if !sv.is_vector() {
            return Err(Error::shape(
                "restricted_log_softmax",
                format!("scores are {:?}", sv.shape()),
            ));
        }
        if allowed.is_empty() {
            return Err(Error::invalid("restricted_log_softmax with empty allowed set"));
        }
        let mut allowed = allowed.to_vec();
        allowed.sort_unstable();
        allowed.dedup();
        if *allowed.last().unwrap() >= sv.numel() {
            return Err(Error::invalid(format!(
                "allowed index {} out of range for {} scores",
                allowed.last().unwrap(),
                sv.numel()
            )));
        }
        let max = allowed
            .iter()
            .map(|&i| sv[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let log_z = allowed
            .iter()
            .map(|&i| (sv[i] - max).exp())
            .sum::<f64>()
            .ln()
            + max;
        let mut out = vec![f64::NEG_INFINITY; sv.numel()];
        for &i in &allowed {
            out[i] = sv[i] - log_z;
        }
        Ok(self.push_node(
            Op::RestrictedLogSoftmax { scores, allowed },
            Tensor::vector(out),
        ))
    }

    pub fn pick(&mut self, x: NodeId, index: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if !xv.is_vector() || index >= xv.numel() {
            return Err(Error::invalid(format!(
                "pick index {index} out of range for {:?}",
                xv.shape()
            )));
        }
        let v = xv[index];
        Ok(self.push_node(Op::Pick { x, index }, Tensor::scalar(v)))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total = self.value(x).data().iter().sum();
        self.push_node(Op::Sum { x }, Tensor::scalar(total))
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let data = xv.data().iter().map(|v| -v).collect();
        let shape = xv.shape().to_vec();
        self.push_node(Op::Neg { x }, Tensor::from_vec(&shape, data))
    }

    /// Reverse-mode sweep from a scalar loss. Gradients of graph-internal
    /// nodes accumulate on the tape; gradients of parameter leaves accumulate
    /// into the store. Nodes not on a path to the loss are skipped entirely.
    pub fn backward(&self, loss: NodeId, store: &mut ParameterStore) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Constant => {}
                Op::Param(pid) => store.accumulate_grad(*pid, &g),
                Op::Affine { w, x, b } => {
                    self.accum_matvec_grads(&mut grads, &g, *w, *x);
                    add_grad(&mut grads, *b, g);
                }
                Op::MatVec { w, x } => {
                    self.accum_matvec_grads(&mut grads, &g, *w, *x);
                }
                Op::Add { a, b } => {
                    add_grad(&mut grads, *a, g.clone());
                    add_grad(&mut grads, *b, g);
                }
                Op::Hadamard { a, b } => {
                    let bv = self.value(*b);
                    let mut ga = g.clone();
                    for (gi, bi) in ga.data_mut().iter_mut().zip(bv.data()) {
                        *gi *= bi;
                    }
                    add_grad(&mut grads, *a, ga);
                    let av = self.value(*a);
                    let mut gb = g;
                    for (gi, ai) in gb.data_mut().iter_mut().zip(av.data()) {
                        *gi *= ai;
                    }
                    add_grad(&mut grads, *b, gb);
                }
                Op::Pointwise { kind, x } => {
                    let y = self.nodes[id].value.tensor();
                    let xv = self.value(*x);
                    let mut gx = g;
                    match kind {
                        Nonlinearity::Tanh => {
                            for (gi, yi) in gx.data_mut().iter_mut().zip(y.data()) {
                                *gi *= 1.0 - yi * yi;
                            }
                        }
                        Nonlinearity::Sigmoid => {
                            for (gi, yi) in gx.data_mut().iter_mut().zip(y.data()) {
                                *gi *= yi * (1.0 - yi);
                            }
                        }
                        Nonlinearity::Relu => {
                            for (gi, xi) in gx.data_mut().iter_mut().zip(xv.data()) {
                                if *xi <= 0.0 {
                                    *gi = 0.0;
                                }
                            }
                        }
                    }
                    add_grad(&mut grads, *x, gx);
                }
                Op::Concat { parts } => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).numel();
                        let slice = Tensor::vector(g.data()[offset..offset + len].to_vec());
                        add_grad(&mut grads, p, slice);
                        offset += len;
                    }
                }
                Op::LookupRow { table, row } => {
                    let t = self.value(*table);
                    let mut gt = Tensor::zeros(t.shape());
                    let cols = t.cols();
                    gt.data_mut()[row * cols..(row + 1) * cols].copy_from_slice(g.data());
                    add_grad(&mut grads, *table, gt);
                }
                Op::RestrictedLogSoftmax { scores, allowed } => {
                    // d s_j = g_j - p_j * sum_i g_i over the allowed set only.
                    let out = self.nodes[id].value.tensor();
                    let total: f64 = allowed.iter().map(|&i| g[i]).sum();
                    let mut gs = Tensor::zeros(&[g.numel()]);
                    for &i in allowed {
                        gs[i] = g[i] - out[i].exp() * total;
                    }
                    add_grad(&mut grads, *scores, gs);
                }
                Op::Pick { x, index } => {
                    let mut gx = Tensor::zeros(&[self.value(*x).numel()]);
                    gx[*index] = g[0];
                    add_grad(&mut grads, *x, gx);
                }
                Op::Sum { x } => {
                    let xv = self.value(*x);
                    let shape = xv.shape().to_vec();
                    let gx = Tensor::from_vec(&shape, vec![g[0]; xv.numel()]);
                    add_grad(&mut grads, *x, gx);
                }
                Op::Neg { x } => {
                    let mut gx = g;
                    gx.scale(-1.0);
                    add_grad(&mut grads, *x, gx);
                }
            }
        }
        Ok(())
    }

    /// Shared backward rule for `W x` terms: dW += g x^T, dx += W^T g.
    fn accum_matvec_grads(
        &self,
        grads: &mut [Option<Tensor>],
        g: &Tensor,
        w: NodeId,
        x: NodeId,
    ) {
        let wv = self.value(w);
        let xv = self.value(x);
        let (rows, cols) = (wv.rows(), wv.cols());
        let mut gw = Tensor::zeros(&[rows, cols]);
        for r in 0..rows {
            let gr = g[r];
            let out = &mut gw.data_mut()[r * cols..(r + 1) * cols];
            for (o, xi) in out.iter_mut().zip(xv.data()) {
                *o = gr * xi;
            }
        }
        add_grad_slice(grads, w, gw);
        let mut gx = Tensor::zeros(&[cols]);
        for r in 0..rows {
            let gr = g[r];
            let wr = wv.row(r);
            for (o, wi) in gx.data_mut().iter_mut().zip(wr) {
                *o += gr * wi;
            }
        }
        add_grad_slice(grads, x, gx);
    }
}

fn add_grad(grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
    add_grad_slice(grads, id, delta);
}

fn add_grad_slice(grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
    match &mut grads[id.0] {
        Some(t) => t.add_assign(&delta),
        slot @ None => *slot = Some(delta),
    }
}

/// out += W x.
fn mat_vec_into(w: &Tensor, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.cols(), x.len());
    debug_assert_eq!(w.rows(), out.len());
    for (r, o) in out.iter_mut().enumerate() {
        let row = w.row(r);
        let mut acc = 0.0;
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        *o += acc;
    }
}

fn visit_inputs(op: &Op, mut f: impl FnMut(NodeId)) {
    match op {
        Op::Constant | Op::Param(_) => {}
        Op::Affine { w, x, b } => {
            f(*w);
            f(*x);
            f(*b);
        }
        Op::MatVec { w, x } => {
            f(*w);
            f(*x);
        }
        Op::Add { a, b } | Op::Hadamard { a, b } => {
            f(*a);
            f(*b);
        }
        Op::Pointwise { x, .. }
        | Op::LookupRow { table: x, .. }
        | Op::Pick { x, .. }
        | Op::Sum { x }
        | Op::Neg { x } => f(*x),
        Op::Concat { parts } => {
            for p in parts {
                f(*p);
            }
        }
        Op::RestrictedLogSoftmax { scores, .. } => f(*scores),
    }
}
