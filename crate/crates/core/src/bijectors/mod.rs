//! Invertible transforms with exact log-determinant accounting.
//!
//! Every bijector maps a batch `[rows, dim]` to a batch of the same shape and
//! reports `ln|det J|` for each row. The forward direction is data → latent.
//! Trainable bijectors record their forward pass on a [`Tape`] so the training
//! loop can differentiate through it; the plain [`Bijector::forward`] replays
//! the same recording with parameters held constant, so both paths produce
//! identical numbers.

mod coupling;
mod elementary;
mod linear;
mod lu;

use serde::{Deserialize, Serialize};

pub use coupling::{alternating_mask, AffineCoupling, LOG_SCALE_BOUND};
pub use elementary::{LogitSquash, NonlinearShear2D, SquareScale1D};
pub use linear::FixedLinear;
pub use lu::LuLinear;

use crate::error::{Error, Result};
use crate::ndcore::{NodeId, Tape, Tensor};

/// Output of a batch transform: transformed rows and per-row `ln|det J|`.
pub type Mapped = (Tensor, Vec<f64>);

pub trait Bijector {
    fn dim(&self) -> usize;

    fn name(&self) -> &'static str;

    /// Trainable tensors, in a fixed order.
    fn params(&self) -> Vec<&Tensor> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        Vec::new()
    }

    /// Records the forward map of `x` (`[rows, dim]`) on `tape`.
    ///
    /// `params` holds one node per entry of [`params`](Self::params). Returns
    /// the output node and a log-det node that is either `[rows, 1]` or a
    /// scalar shared by all rows.
    fn forward_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        params: &[NodeId],
    ) -> Result<(NodeId, NodeId)>;

    fn inverse(&self, y: &Tensor) -> Result<Mapped>;

    fn forward(&self, x: &Tensor) -> Result<Mapped> {
        check_batch(self.name(), x, self.dim())?;
        let mut tape = Tape::new();
        let xn = tape.constant(x.clone());
        let ps: Vec<NodeId> = self
            .params()
            .into_iter()
            .map(|p| tape.constant(p.clone()))
            .collect();
        let (y, ld) = self.forward_tape(&mut tape, xn, &ps)?;
        let rows = x.rows();
        Ok((
            tape.value(y)?.clone(),
            expand_log_det(tape.value(ld)?, rows)?,
        ))
    }

    /// Single-point convenience around [`forward`](Self::forward).
    fn forward_point(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (y, ld) = self.forward(&Tensor::matrix(1, x.len(), x.to_vec())?)?;
        Ok((y.into_data(), ld[0]))
    }

    fn inverse_point(&self, y: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (x, ld) = self.inverse(&Tensor::matrix(1, y.len(), y.to_vec())?)?;
        Ok((x.into_data(), ld[0]))
    }
}

pub(crate) fn check_batch(name: &'static str, x: &Tensor, dim: usize) -> Result<()> {
    if x.shape().len() != 2 || x.shape()[1] != dim {
        return Err(Error::ShapeMismatch {
            op: name,
            lhs: x.shape().to_vec(),
            rhs: vec![x.rows(), dim],
        });
    }
    Ok(())
}

/// Turns a `[rows, 1]` or scalar log-det into one value per row.
pub(crate) fn expand_log_det(ld: &Tensor, rows: usize) -> Result<Vec<f64>> {
    if ld.len() == rows && !ld.is_scalar() {
        Ok(ld.data().to_vec())
    } else if ld.len() == 1 {
        Ok(vec![ld.data()[0]; rows])
    } else {
        Err(Error::shape("log_det", ld.shape(), &[rows, 1]))
    }
}

/// Serializable description of a layer, without its arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Descriptor {
    FixedLinear {
        dim: usize,
    },
    NonlinearShear2d {
        divisor: f64,
    },
    SquareScale1d {
        coefficient: f64,
    },
    AffineCoupling {
        dim: usize,
        mask: Vec<bool>,
        hidden: usize,
    },
    LuLinear {
        dim: usize,
        perm: Vec<usize>,
        sign: Vec<f64>,
    },
    LogitSquash {
        dim: usize,
        eps: f64,
    },
    Inverted {
        inner: Box<Descriptor>,
    },
}

/// One step of a [`Chain`].
#[derive(Clone, Debug)]
pub enum Layer {
    FixedLinear(FixedLinear),
    Shear(NonlinearShear2D),
    SquareScale(SquareScale1D),
    Coupling(AffineCoupling),
    Lu(LuLinear),
    Logit(LogitSquash),
    /// Swaps the forward and inverse directions of the wrapped layer.
    Inverted(Box<Layer>),
}

macro_rules! dispatch {
    ($self:expr, $b:ident => $e:expr) => {
        match $self {
            Layer::FixedLinear($b) => $e,
            Layer::Shear($b) => $e,
            Layer::SquareScale($b) => $e,
            Layer::Coupling($b) => $e,
            Layer::Lu($b) => $e,
            Layer::Logit($b) => $e,
            Layer::Inverted($b) => $e,
        }
    };
}

impl Layer {
    pub fn inverted(self) -> Layer {
        Layer::Inverted(Box::new(self))
    }

    pub fn descriptor(&self) -> Descriptor {
        match self {
            Layer::FixedLinear(b) => Descriptor::FixedLinear { dim: b.dim() },
            Layer::Shear(b) => Descriptor::NonlinearShear2d {
                divisor: b.divisor(),
            },
            Layer::SquareScale(b) => Descriptor::SquareScale1d {
                coefficient: b.coefficient(),
            },
            Layer::Coupling(b) => Descriptor::AffineCoupling {
                dim: b.dim(),
                mask: b.mask().to_vec(),
                hidden: b.hidden(),
            },
            Layer::Lu(b) => Descriptor::LuLinear {
                dim: b.dim(),
                perm: b.perm().to_vec(),
                sign: b.sign().to_vec(),
            },
            Layer::Logit(b) => Descriptor::LogitSquash {
                dim: b.dim(),
                eps: b.eps(),
            },
            Layer::Inverted(inner) => Descriptor::Inverted {
                inner: Box::new(inner.descriptor()),
            },
        }
    }

    /// Every array needed to rebuild the layer: trainable parameters first,
    /// then fixed buffers.
    pub fn arrays(&self) -> Vec<&Tensor> {
        match self {
            Layer::FixedLinear(b) => vec![b.matrix()],
            Layer::Inverted(inner) => inner.arrays(),
            other => other.params(),
        }
    }

    pub fn from_parts(desc: &Descriptor, arrays: Vec<Tensor>) -> Result<Layer> {
        let take = |arrays: Vec<Tensor>, n: usize| -> Result<Vec<Tensor>> {
            if arrays.len() != n {
                return Err(Error::CorruptCheckpoint(format!(
                    "expected {n} arrays, found {}",
                    arrays.len()
                )));
            }
            Ok(arrays)
        };
        Ok(match desc {
            Descriptor::FixedLinear { dim } => {
                let m = take(arrays, 1)?.remove(0);
                if m.shape() != [*dim, *dim] {
                    return Err(Error::CorruptCheckpoint("fixed linear shape".into()));
                }
                Layer::FixedLinear(FixedLinear::new(m)?)
            }
            Descriptor::NonlinearShear2d { divisor } => {
                take(arrays, 0)?;
                Layer::Shear(NonlinearShear2D::new(*divisor)?)
            }
            Descriptor::SquareScale1d { coefficient } => {
                take(arrays, 0)?;
                Layer::SquareScale(SquareScale1D::new(*coefficient)?)
            }
            Descriptor::AffineCoupling { dim, mask, hidden } => {
                if mask.len() != *dim {
                    return Err(Error::CorruptCheckpoint("mask length".into()));
                }
                Layer::Coupling(AffineCoupling::from_params(
                    mask.clone(),
                    *hidden,
                    take(arrays, 8)?,
                )?)
            }
            Descriptor::LuLinear { dim, perm, sign } => Layer::Lu(LuLinear::from_params(
                *dim,
                perm.clone(),
                sign.clone(),
                take(arrays, 3)?,
            )?),
            Descriptor::LogitSquash { dim, eps } => {
                take(arrays, 0)?;
                Layer::Logit(LogitSquash::new(*dim, *eps)?)
            }
            Descriptor::Inverted { inner } => Layer::from_parts(inner, arrays)?.inverted(),
        })
    }
}

impl Bijector for Layer {
    fn dim(&self) -> usize {
        dispatch!(self, b => b.dim())
    }

    fn name(&self) -> &'static str {
        match self {
            Layer::Inverted(_) => "inverted",
            other => dispatch!(other, b => b.name()),
        }
    }

    fn params(&self) -> Vec<&Tensor> {
        dispatch!(self, b => b.params())
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        dispatch!(self, b => b.params_mut())
    }

    fn forward_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        params: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        match self {
            Layer::Inverted(_) => Err(Error::NoGradient("inverted")),
            other => dispatch!(other, b => b.forward_tape(tape, x, params)),
        }
    }

    fn forward(&self, x: &Tensor) -> Result<Mapped> {
        match self {
            Layer::Inverted(inner) => inner.inverse(x),
            other => dispatch!(other, b => b.forward(x)),
        }
    }

    fn inverse(&self, y: &Tensor) -> Result<Mapped> {
        match self {
            Layer::Inverted(inner) => inner.forward(y),
            other => dispatch!(other, b => b.inverse(y)),
        }
    }
}

impl From<FixedLinear> for Layer {
    fn from(b: FixedLinear) -> Self {
        Layer::FixedLinear(b)
    }
}

impl From<NonlinearShear2D> for Layer {
    fn from(b: NonlinearShear2D) -> Self {
        Layer::Shear(b)
    }
}

impl From<SquareScale1D> for Layer {
    fn from(b: SquareScale1D) -> Self {
        Layer::SquareScale(b)
    }
}

impl From<AffineCoupling> for Layer {
    fn from(b: AffineCoupling) -> Self {
        Layer::Coupling(b)
    }
}

impl From<LuLinear> for Layer {
    fn from(b: LuLinear) -> Self {
        Layer::Lu(b)
    }
}

impl From<LogitSquash> for Layer {
    fn from(b: LogitSquash) -> Self {
        Layer::Logit(b)
    }
}

/// Ordered composition. Forward runs the steps in order and sums their
/// log-dets; inverse runs the step inverses in reverse order.
#[derive(Clone, Debug, Default)]
pub struct Chain {
    steps: Vec<Layer>,
    dim: usize,
}

impl Chain {
    pub fn new(steps: Vec<Layer>) -> Result<Self> {
        let dim = steps
            .first()
            .map(|s| s.dim())
            .ok_or_else(|| Error::invalid("chain needs at least one step"))?;
        if let Some(bad) = steps.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Chain { steps, dim })
    }

    /// The empty chain of the given dimension (the identity map).
    pub fn identity(dim: usize) -> Self {
        Chain {
            steps: Vec::new(),
            dim,
        }
    }

    pub fn steps(&self) -> &[Layer] {
        &self.steps
    }

    pub fn steps_mut(&mut self) -> &mut [Layer] {
        &mut self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Registers every step's parameters on `tape` as trainable nodes.
    pub fn register_params(&self, tape: &mut Tape) -> Vec<Vec<NodeId>> {
        self.steps
            .iter()
            .map(|s| {
                s.params()
                    .into_iter()
                    .map(|p| tape.param(p.clone()))
                    .collect()
            })
            .collect()
    }

    /// Tape forward with per-step parameter nodes from [`register_params`](Self::register_params).
    pub fn forward_tape_with(
        &self,
        tape: &mut Tape,
        x: NodeId,
        params: &[Vec<NodeId>],
    ) -> Result<(NodeId, NodeId)> {
        let mut y = x;
        let mut ld: Option<NodeId> = None;
        for (step, ps) in self.steps.iter().zip(params) {
            let (next, step_ld) = step.forward_tape(tape, y, ps)?;
            y = next;
            ld = Some(match ld {
                None => step_ld,
                Some(acc) => tape.add(acc, step_ld)?,
            });
        }
        let ld = match ld {
            Some(ld) => ld,
            None => tape.scalar(0.0),
        };
        Ok((y, ld))
    }
}

impl Chain {
    /// The chain running in the opposite direction: steps reversed, each inverted.
    pub fn inverted(self) -> Chain {
        let dim = self.dim;
        let steps: Vec<Layer> = self
            .steps()
            .iter()
            .rev()
            .cloned()
            .map(|s| match s {
                Layer::Inverted(inner) => *inner,
                other => other.inverted(),
            })
            .collect();
        if steps.is_empty() {
            Chain::identity(dim)
        } else {
            Chain::new(steps).expect("same dimension")
        }
    }
}

impl Bijector for Chain {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &'static str {
        "chain"
    }

    fn params(&self) -> Vec<&Tensor> {
        self.steps.iter().flat_map(|s| s.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.steps.iter_mut().flat_map(|s| s.params_mut()).collect()
    }

    fn forward_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        params: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        let mut grouped = Vec::with_capacity(self.steps.len());
        let mut offset = 0;
        for s in &self.steps {
            let n = s.params().len();
            let group = params
                .get(offset..offset + n)
                .ok_or_else(|| Error::invalid("chain: too few parameter nodes"))?;
            grouped.push(group.to_vec());
            offset += n;
        }
        self.forward_tape_with(tape, x, &grouped)
    }

    fn forward(&self, x: &Tensor) -> Result<Mapped> {
        check_batch("chain", x, self.dim)?;
        let mut y = x.clone();
        let mut ld = vec![0.0; x.rows()];
        for s in &self.steps {
            let (next, step_ld) = s.forward(&y)?;
            y = next;
            for (acc, v) in ld.iter_mut().zip(step_ld) {
                *acc += v;
            }
        }
        Ok((y, ld))
    }

    fn inverse(&self, y: &Tensor) -> Result<Mapped> {
        check_batch("chain", y, self.dim)?;
        let mut x = y.clone();
        let mut ld = vec![0.0; y.rows()];
        for s in self.steps.iter().rev() {
            let (prev, step_ld) = s.inverse(&x)?;
            x = prev;
            for (acc, v) in ld.iter_mut().zip(step_ld) {
                *acc += v;
            }
        }
        Ok((x, ld))
    }
}

/// The generative pipeline: horizontal stretch `diag(10, 1)`, rotation by
/// 75°, then the nonlinear shear with divisor 40. Its forward direction maps
/// standard-normal draws to the curved target distribution.
pub fn stretch_rotate_shear() -> Chain {
    Chain::new(vec![
        FixedLinear::diagonal(&[10.0, 1.0])
            .expect("non-singular")
            .into(),
        FixedLinear::rotation_degrees(75.0).into(),
        NonlinearShear2D::new(40.0)
            .expect("positive divisor")
            .into(),
    ])
    .expect("all steps are 2-D")
}
