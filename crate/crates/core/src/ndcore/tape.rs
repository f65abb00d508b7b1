//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! Every operation appends a node holding its computed value, so node inputs
//! always refer to earlier nodes. [`Tape::backward`] walks the nodes once in
//! reverse and returns the gradient of a scalar loss with respect to every
//! parameter node.

use std::collections::BTreeMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on one [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Exp(NodeId),
    Log(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Sum(NodeId),
    Neg(NodeId),
    Reciprocal(NodeId),
    Abs(NodeId),
    Transpose(NodeId),
    RowSums(NodeId),
    GatherCols(NodeId, Vec<usize>),
    ConcatCols(NodeId, NodeId),
    SliceCols(NodeId, usize, usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::MatMul(..) => "matmul",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Sum(_) => "sum",
            Op::Neg(_) => "neg",
            Op::Reciprocal(_) => "reciprocal",
            Op::Abs(_) => "abs",
            Op::Transpose(_) => "transpose",
            Op::RowSums(_) => "row_sums",
            Op::GatherCols(..) => "gather_cols",
            Op::ConcatCols(..) => "concat_cols",
            Op::SliceCols(..) => "slice_cols",
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Append-only record of a computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients keyed by parameter node, in node order.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    by_param: BTreeMap<NodeId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.by_param.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Tensor)> {
        self.by_param.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.by_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }
}

/// Sums `g` down to `shape` when the forward op broadcast a scalar.
fn unbroadcast(g: Tensor, shape: &[usize]) -> Result<Tensor> {
    if g.shape() == shape {
        Ok(g)
    } else if shape.is_empty() {
        g.sum()
    } else {
        Err(Error::shape("unbroadcast", g.shape(), shape))
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id.0).ok_or(Error::UnknownNode(id.0))
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Param, value, true)
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value, false)
    }

    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.constant(Tensor::scalar(value))
    }

    pub fn value(&self, id: NodeId) -> Result<&Tensor> {
        Ok(&self.node(id)?.value)
    }

    pub fn is_param(&self, id: NodeId) -> bool {
        matches!(self.nodes.get(id.0), Some(Node { op: Op::Param, .. }))
    }

    fn unary(
        &mut self,
        a: NodeId,
        f: impl FnOnce(&Tensor) -> Result<Tensor>,
        op: Op,
    ) -> Result<NodeId> {
        let na = self.node(a)?;
        let value = f(&na.value)?;
        let ng = na.needs_grad;
        Ok(self.push(op, value, ng))
    }

    fn binary(
        &mut self,
        a: NodeId,
        b: NodeId,
        f: impl FnOnce(&Tensor, &Tensor) -> Result<Tensor>,
        op: Op,
    ) -> Result<NodeId> {
        let na = self.node(a)?;
        let nb = self.node(b)?;
        let value = f(&na.value, &nb.value)?;
        let ng = na.needs_grad || nb.needs_grad;
        Ok(self.push(op, value, ng))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Tensor::add, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Tensor::sub, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Tensor::mul, Op::Mul(a, b))
    }

    /// `a * k` for a constant `k`.
    pub fn scale(&mut self, a: NodeId, k: f64) -> Result<NodeId> {
        let k = self.scalar(k);
        self.mul(a, k)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Tensor::matmul, Op::MatMul(a, b))
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Tensor::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Tensor::log, Op::Log(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Tensor::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Tensor::relu, Op::Relu(a))
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Tensor::sum, Op::Sum(a))
    }

    pub fn neg(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Tensor::neg, Op::Neg(a))
    }

    pub fn reciprocal(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Tensor::reciprocal, Op::Reciprocal(a))
    }

    pub fn abs(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Tensor::abs, Op::Abs(a))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Tensor::transpose, Op::Transpose(a))
    }

    pub fn row_sums(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Tensor::row_sums, Op::RowSums(a))
    }

    pub fn gather_cols(&mut self, a: NodeId, idx: &[usize]) -> Result<NodeId> {
        self.unary(a, |t| t.gather_cols(idx), Op::GatherCols(a, idx.to_vec()))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Tensor::concat_cols, Op::ConcatCols(a, b))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        self.unary(
            a,
            |t| t.slice_cols(start, end),
            Op::SliceCols(a, start, end),
        )
    }

    /// Gradient of the scalar `loss` with respect to every parameter node.
    ///
    /// Parameters that do not influence the loss get a zero gradient.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let root = self.node(loss)?;
        if root.value.len() != 1 {
            return Err(Error::NonScalarLoss(root.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(root.value.shape(), 1.0));

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad || matches!(node.op, Op::Param | Op::Constant) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            for (input, contribution) in self.local_grads(node, g)? {
                if !self.nodes[input.0].needs_grad {
                    continue;
                }
                let slot = &mut grads[input.0];
                *slot = Some(match slot.take() {
                    None => contribution,
                    Some(acc) => acc.add(&contribution)?,
                });
            }
        }

        let mut by_param = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Param) {
                let g = grads
                    .get_mut(i)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Tensor::zeros(node.value.shape()));
                by_param.insert(NodeId(i), g);
            }
        }
        Ok(Gradients { by_param })
    }

    /// Vector-Jacobian products of one node, paired with the input they flow to.
    fn local_grads(&self, node: &Node, g: Tensor) -> Result<Vec<(NodeId, Tensor)>> {
        let val = |id: NodeId| &self.nodes[id.0].value;
        let wants = |id: NodeId| self.nodes[id.0].needs_grad;
        let y = &node.value;
        let out = match &node.op {
            Op::Constant | Op::Param => return Err(Error::NoGradient(node.op.name())),
            Op::Add(a, b) => {
                let ga = unbroadcast(g.clone(), val(*a).shape())?;
                let gb = unbroadcast(g, val(*b).shape())?;
                vec![(*a, ga), (*b, gb)]
            }
            Op::Sub(a, b) => {
                let gb = unbroadcast(g.neg()?, val(*b).shape())?;
                let ga = unbroadcast(g, val(*a).shape())?;
                vec![(*a, ga), (*b, gb)]
            }
            Op::Mul(a, b) => {
                let mut v = Vec::with_capacity(2);
                if wants(*a) {
                    v.push((*a, unbroadcast(g.mul(val(*b))?, val(*a).shape())?));
                }
                if wants(*b) {
                    v.push((*b, unbroadcast(g.mul(val(*a))?, val(*b).shape())?));
                }
                v
            }
            Op::MatMul(a, b) => {
                let av = val(*a);
                let bv = val(*b);
                let vector_rhs = bv.shape().len() == 1;
                let (b2, g2) = if vector_rhs {
                    (
                        bv.clone().reshape(vec![bv.len(), 1])?,
                        g.reshape(vec![av.rows(), 1])?,
                    )
                } else {
                    (bv.clone(), g)
                };
                let mut v = Vec::with_capacity(2);
                if wants(*a) {
                    v.push((*a, g2.matmul(&b2.transpose()?)?));
                }
                if wants(*b) {
                    let gb = av.transpose()?.matmul(&g2)?;
                    let gb = if vector_rhs {
                        gb.reshape(bv.shape().to_vec())?
                    } else {
                        gb
                    };
                    v.push((*b, gb));
                }
                v
            }
            Op::Exp(a) => vec![(*a, g.mul(y)?)],
            Op::Log(a) => vec![(*a, g.mul(&val(*a).reciprocal()?)?)],
            Op::Tanh(a) => {
                let d: Vec<f64> = y.data().iter().map(|t| 1.0 - t * t).collect();
                vec![(*a, g.mul(&Tensor::new(y.shape().to_vec(), d)?)?)]
            }
            Op::Relu(a) => {
                let d: Vec<f64> = val(*a)
                    .data()
                    .iter()
                    .map(|&x| if x > 0.0 { 1.0 } else { 0.0 })
                    .collect();
                vec![(*a, g.mul(&Tensor::new(y.shape().to_vec(), d)?)?)]
            }
            Op::Sum(a) => {
                let gv = g.item()?;
                vec![(*a, Tensor::full(val(*a).shape(), gv))]
            }
            Op::Neg(a) => vec![(*a, g.neg()?)],
            Op::Reciprocal(a) => {
                let y2 = y.mul(y)?;
                vec![(*a, g.mul(&y2)?.neg()?)]
            }
            Op::Abs(a) => {
                let d: Vec<f64> = val(*a)
                    .data()
                    .iter()
                    .map(|&x| {
                        if x > 0.0 {
                            1.0
                        } else if x < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                vec![(*a, g.mul(&Tensor::new(y.shape().to_vec(), d)?)?)]
            }
            Op::Transpose(a) => vec![(*a, g.transpose()?)],
            Op::RowSums(a) => {
                let av = val(*a);
                let (r, c) = (av.rows(), av.cols());
                let mut d = Vec::with_capacity(r * c);
                for i in 0..r {
                    d.extend(std::iter::repeat_n(g.data()[i], c));
                }
                vec![(*a, Tensor::new(av.shape().to_vec(), d)?)]
            }
            Op::GatherCols(a, idx) => {
                let width = val(*a).cols();
                vec![(*a, g.scatter_cols(idx, width)?)]
            }
            Op::ConcatCols(a, b) => {
                let ca = val(*a).cols();
                let cb = val(*b).cols();
                vec![(*a, g.slice_cols(0, ca)?), (*b, g.slice_cols(ca, ca + cb)?)]
            }
            Op::SliceCols(a, start, end) => {
                let width = val(*a).cols();
                let idx: Vec<usize> = (*start..*end).collect();
                vec![(*a, g.scatter_cols(&idx, width)?)]
            }
        };
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(3.0));
        let y = t.mul(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item().unwrap(), 6.0);
    }

    #[test]
    fn log_gradient() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(2.0));
        let y = t.log(x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item().unwrap(), 0.5);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let x = t.param(Tensor::zeros(&[2]));
        let y = t.exp(x).unwrap();
        assert!(matches!(t.backward(y), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn kink_conventions() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![0.0, 0.0]).unwrap());
        let r = t.relu(x).unwrap();
        let a = t.abs(x).unwrap();
        let s = t.add(r, a).unwrap();
        let l = t.sum(s).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn unused_param_gets_zero() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(1.0));
        let unused = t.param(Tensor::zeros(&[3]));
        let l = t.exp(x).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(unused).unwrap().data(), &[0.0; 3]);
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn foreign_node_rejected() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(1.0));
        let mut other = Tape::new();
        assert!(matches!(other.exp(x), Err(Error::UnknownNode(0))));
    }
}
