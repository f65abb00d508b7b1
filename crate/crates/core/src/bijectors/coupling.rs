//! Affine coupling: the conditioning coordinates pass through unchanged and
//! drive a small dense network that emits a log-scale and a shift for the
//! remaining coordinates.
//!
//! Forward (data → latent): `z = (x − t) / s` with `s = exp(log_s)`, so
//! `ln|det J| = −Σ log_s`. Inverse: `x = z·s + t`. The network only ever sees
//! the pass-through part, which is identical in both directions, so `s` and
//! `t` agree between the two.

use super::{check_batch, Bijector, Mapped};
use crate::error::{Error, Result};
use crate::ndcore::{NodeId, Tape, Tensor};
use crate::rng::CounterRng;

/// Raw log-scales are squashed to `B·tanh(raw / B)`.
pub const LOG_SCALE_BOUND: f64 = 4.0;

/// Conditioning mask for the `layer`-th coupling: even indices condition on
/// even layers, odd indices on odd layers.
pub fn alternating_mask(dim: usize, layer: usize) -> Vec<bool> {
    (0..dim).map(|i| i % 2 == layer % 2).collect()
}

#[derive(Clone, Debug)]
pub struct AffineCoupling {
    mask: Vec<bool>,
    hidden: usize,
    cond_idx: Vec<usize>,
    trans_idx: Vec<usize>,
    /// Output column `j` reads column `order[j]` of `[cond | trans]`.
    order: Vec<usize>,
    /// `w1, b1, w2, b2, w_scale, b_scale, w_shift, b_shift`.
    params: Vec<Tensor>,
}

fn he_normal(rows: usize, cols: usize, rng: &mut CounterRng) -> Tensor {
    let std = (2.0 / rows as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.normal() * std).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}

impl AffineCoupling {
    /// He-normal hidden layers, zero-initialized output layer (identity map).
    pub fn new(mask: Vec<bool>, hidden: usize, rng: &mut CounterRng) -> Result<Self> {
        let (d, m) = Self::split_sizes(&mask)?;
        if hidden == 0 {
            return Err(Error::invalid("coupling hidden width must be positive"));
        }
        let params = vec![
            he_normal(d, hidden, rng),
            Tensor::zeros(&[1, hidden]),
            he_normal(hidden, hidden, rng),
            Tensor::zeros(&[1, hidden]),
            Tensor::zeros(&[hidden, m]),
            Tensor::zeros(&[1, m]),
            Tensor::zeros(&[hidden, m]),
            Tensor::zeros(&[1, m]),
        ];
        Self::from_params(mask, hidden, params)
    }

    pub fn alternating(
        dim: usize,
        layer: usize,
        hidden: usize,
        rng: &mut CounterRng,
    ) -> Result<Self> {
        Self::new(alternating_mask(dim, layer), hidden, rng)
    }

    pub fn from_params(mask: Vec<bool>, hidden: usize, params: Vec<Tensor>) -> Result<Self> {
        let (d, m) = Self::split_sizes(&mask)?;
        let expected: [[usize; 2]; 8] = [
            [d, hidden],
            [1, hidden],
            [hidden, hidden],
            [1, hidden],
            [hidden, m],
            [1, m],
            [hidden, m],
            [1, m],
        ];
        if params.len() != 8 {
            return Err(Error::invalid("coupling expects 8 parameter tensors"));
        }
        for (p, e) in params.iter().zip(expected.iter()) {
            if p.shape() != e {
                return Err(Error::shape("affine_coupling", p.shape(), e));
            }
        }
        let cond_idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        let trans_idx: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
        let mut order = vec![0; mask.len()];
        for (pos, &j) in cond_idx.iter().chain(&trans_idx).enumerate() {
            order[j] = pos;
        }
        Ok(AffineCoupling {
            mask,
            hidden,
            cond_idx,
            trans_idx,
            order,
            params,
        })
    }

    fn split_sizes(mask: &[bool]) -> Result<(usize, usize)> {
        let d = mask.iter().filter(|&&b| b).count();
        let m = mask.len() - d;
        if d == 0 || m == 0 {
            return Err(Error::invalid(
                "coupling mask must select a nonempty proper subset",
            ));
        }
        Ok((d, m))
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn conditioning_indices(&self) -> &[usize] {
        &self.cond_idx
    }

    pub fn transformed_indices(&self) -> &[usize] {
        &self.trans_idx
    }

    /// Fills the output layer with `N(0, std²)` weights and biases.
    pub fn randomize_output(&mut self, std: f64, rng: &mut CounterRng) {
        for p in &mut self.params[4..] {
            for v in p.data_mut() {
                *v = rng.normal() * std;
            }
        }
    }

    /// Zeroes the output weights and sets biases so the conditioner emits the
    /// given `log_s` and `t` for every input. Requires `|log_s| < LOG_SCALE_BOUND`.
    pub fn set_constant_output(&mut self, log_s: &[f64], shift: &[f64]) -> Result<()> {
        let m = self.trans_idx.len();
        if log_s.len() != m || shift.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: log_s.len().min(shift.len()),
            });
        }
        if log_s.iter().any(|v| v.abs() >= LOG_SCALE_BOUND) {
            return Err(Error::invalid("log_s outside the representable range"));
        }
        for i in [4, 6] {
            self.params[i].data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        for (b, &ls) in self.params[5].data_mut().iter_mut().zip(log_s) {
            *b = (ls / LOG_SCALE_BOUND).atanh() * LOG_SCALE_BOUND;
        }
        self.params[7].data_mut().copy_from_slice(shift);
        Ok(())
    }

    fn dense(tape: &mut Tape, ones: NodeId, h: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let hw = tape.matmul(h, w)?;
        let bias = tape.matmul(ones, b)?;
        tape.add(hw, bias)
    }

    /// Records the conditioner on `cond` (`[rows, d]`); returns `(log_s, t)`.
    fn conditioner_tape(
        &self,
        tape: &mut Tape,
        cond: NodeId,
        p: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        if p.len() != 8 {
            return Err(Error::invalid("coupling expects 8 parameter nodes"));
        }
        let rows = tape.value(cond)?.rows();
        let ones = tape.constant(Tensor::full(&[rows, 1], 1.0));
        let h1 = Self::dense(tape, ones, cond, p[0], p[1])?;
        let h1 = tape.relu(h1)?;
        let h2 = Self::dense(tape, ones, h1, p[2], p[3])?;
        let h2 = tape.relu(h2)?;
        let raw = Self::dense(tape, ones, h2, p[4], p[5])?;
        let t = Self::dense(tape, ones, h2, p[6], p[7])?;
        let squashed = tape.scale(raw, 1.0 / LOG_SCALE_BOUND)?;
        let squashed = tape.tanh(squashed)?;
        let log_s = tape.scale(squashed, LOG_SCALE_BOUND)?;
        Ok((log_s, t))
    }

    /// `(log_s, t)` produced for the conditioning part of each row of `x`.
    pub fn conditioner_output(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        check_batch(self.name(), x, self.dim())?;
        let mut tape = Tape::new();
        let cond = tape.constant(x.gather_cols(&self.cond_idx)?);
        let ps: Vec<NodeId> = self
            .params
            .iter()
            .map(|p| tape.constant(p.clone()))
            .collect();
        let (ls, t) = self.conditioner_tape(&mut tape, cond, &ps)?;
        Ok((tape.value(ls)?.clone(), tape.value(t)?.clone()))
    }
}

impl Bijector for AffineCoupling {
    fn dim(&self) -> usize {
        self.mask.len()
    }

    fn name(&self) -> &'static str {
        "affine_coupling"
    }

    fn params(&self) -> Vec<&Tensor> {
        self.params.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.params.iter_mut().collect()
    }

    fn forward_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        params: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        let cond = tape.gather_cols(x, &self.cond_idx)?;
        let trans = tape.gather_cols(x, &self.trans_idx)?;
        let (log_s, t) = self.conditioner_tape(tape, cond, params)?;
        let centered = tape.sub(trans, t)?;
        let neg_ls = tape.neg(log_s)?;
        let inv_s = tape.exp(neg_ls)?;
        let z_trans = tape.mul(centered, inv_s)?;
        let joined = tape.concat_cols(cond, z_trans)?;
        let z = tape.gather_cols(joined, &self.order)?;
        let total = tape.row_sums(log_s)?;
        let ld = tape.neg(total)?;
        Ok((z, ld))
    }

    fn inverse(&self, z: &Tensor) -> Result<Mapped> {
        let (log_s, t) = self.conditioner_output(z)?;
        let z_trans = z.gather_cols(&self.trans_idx)?;
        let x_trans = z_trans.mul(&log_s.exp()?)?.add(&t)?;
        let joined = z.gather_cols(&self.cond_idx)?.concat_cols(&x_trans)?;
        let x = joined.gather_cols(&self.order)?;
        let ld = log_s.row_sums()?.into_data();
        Ok((x, ld))
    }
}
