//! Base distributions and the transformed distribution built on a [`Chain`].
//!
//! `ln p(x) = ln p_base(chain(x)) + ln|det ∂chain/∂x|`. Sampling draws from the
//! base and runs the chain in reverse.

use std::f64::consts::TAU;

use crate::bijectors::{Bijector, Chain};
use crate::error::{Error, Result};
use crate::ndcore::{NodeId, Tape, Tensor};
use crate::par;
use crate::rng::CounterRng;

/// `N(0, I)` in `dim` dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagonalStandardNormal {
    pub dim: usize,
}

impl DiagonalStandardNormal {
    pub fn new(dim: usize) -> Self {
        DiagonalStandardNormal { dim }
    }

    /// `−(n/2)·ln(2π)`, the log-density at the mode.
    pub fn log_normalizer(&self) -> f64 {
        -(self.dim as f64 / 2.0) * TAU.ln()
    }

    /// `−(n/2)·ln(2π) − ½·Σ zᵢ²`, summing left to right.
    pub fn log_prob(&self, z: &[f64]) -> f64 {
        let mut s = 0.0;
        for &v in z {
            s += v * v;
        }
        self.log_normalizer() - s * 0.5
    }
}

/// Uniform on `[lo, hi]`; one-dimensional.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uniform1D {
    pub lo: f64,
    pub hi: f64,
}

impl Uniform1D {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::invalid("uniform needs finite lo < hi"));
        }
        Ok(Uniform1D { lo, hi })
    }

    pub fn log_prob(&self, z: f64) -> f64 {
        if (self.lo..=self.hi).contains(&z) {
            -(self.hi - self.lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Base {
    StandardNormal(DiagonalStandardNormal),
    Uniform(Uniform1D),
}

impl Base {
    pub fn dim(&self) -> usize {
        match self {
            Base::StandardNormal(b) => b.dim,
            Base::Uniform(_) => 1,
        }
    }

    pub fn log_prob(&self, z: &[f64]) -> f64 {
        match self {
            Base::StandardNormal(b) => b.log_prob(z),
            Base::Uniform(u) => u.log_prob(z[0]),
        }
    }

    fn draw(&self, rng: &mut CounterRng) -> Vec<f64> {
        match self {
            Base::StandardNormal(b) => rng.normals(b.dim),
            Base::Uniform(u) => vec![u.lo + (u.hi - u.lo) * rng.uniform()],
        }
    }
}

/// Base distribution plus a data → latent chain.
#[derive(Clone, Debug)]
pub struct FlowModel {
    base: Base,
    chain: Chain,
}

impl FlowModel {
    pub fn new(base: Base, chain: Chain) -> Result<Self> {
        if base.dim() != chain.dim() {
            return Err(Error::DimensionMismatch {
                expected: chain.dim(),
                found: base.dim(),
            });
        }
        Ok(FlowModel { base, chain })
    }

    /// Standard-normal base of the chain's dimension.
    pub fn standard(chain: Chain) -> Self {
        let base = Base::StandardNormal(DiagonalStandardNormal::new(chain.dim()));
        FlowModel { base, chain }
    }

    pub fn dim(&self) -> usize {
        self.chain.dim()
    }

    pub fn base(&self) -> &Base {
        &self.base
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn chain_mut(&mut self) -> &mut Chain {
        &mut self.chain
    }

    /// Per-row `ln p(x)`. Rows outside the chain's domain or the base support
    /// get `−∞`.
    pub fn log_prob_batch(&self, x: &Tensor) -> Result<Vec<f64>> {
        match self.chain.forward(x) {
            Ok((z, ld)) => Ok((0..x.rows())
                .map(|i| self.base.log_prob(z.row(i)) + ld[i])
                .collect()),
            Err(Error::Domain { .. }) => (0..x.rows()).map(|i| self.log_prob(x.row(i))).collect(),
            Err(e) => Err(e),
        }
    }

    pub fn log_prob(&self, x: &[f64]) -> Result<f64> {
        match self.chain.forward_point(x) {
            Ok((z, ld)) => Ok(self.base.log_prob(&z) + ld),
            Err(Error::Domain { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Mean negative log-likelihood, `−(Σ ln p(xᵢ))·(1/n)` summed in row order.
    pub fn mean_nll(&self, x: &Tensor) -> Result<f64> {
        let lp = self.log_prob_batch(x)?;
        let mut total = 0.0;
        for v in &lp {
            total += v;
        }
        Ok(-(total * (1.0 / lp.len() as f64)))
    }

    /// `count` draws: base samples mapped through the chain inverse.
    ///
    /// A base draw whose image falls outside the chain's domain is replaced by
    /// the next draw from the same stream, so output stays a pure function of
    /// `(model, count, seed)`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Tensor> {
        if count == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let mut rng = CounterRng::new(seed);
        let rows: Vec<Vec<f64>> = (0..count).map(|_| self.base.draw(&mut rng)).collect();
        let mut z = Tensor::from_rows(&rows)?;
        for _ in 0..1000 {
            match self.chain.inverse(&z) {
                Ok((x, _)) => return Ok(x),
                Err(Error::Domain { row, .. }) => {
                    let fresh = self.base.draw(&mut rng);
                    let d = self.dim();
                    z.data_mut()[row * d..(row + 1) * d].copy_from_slice(&fresh);
                }
                Err(e) => return Err(e),
            }
        }
        Err(Error::invalid(
            "sampling kept landing outside the chain domain",
        ))
    }

    /// Midpoint-rule integral of `p(x)` over an axis-aligned box, `dim ≤ 2`.
    /// Each axis is split into `round((hi − lo)/step)` equal cells.
    pub fn grid_integral(&self, bounds: &[(f64, f64)], step: f64) -> Result<f64> {
        if step.is_nan() || step <= 0.0 {
            return Err(Error::invalid("step must be positive"));
        }
        if bounds.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: bounds.len(),
            });
        }
        if self.dim() > 2 {
            return Err(Error::invalid(
                "grid integration supports at most 2 dimensions",
            ));
        }
        let axes: Vec<(f64, f64, usize)> = bounds
            .iter()
            .map(|&(lo, hi)| {
                let n = ((hi - lo) / step).round().max(1.0) as usize;
                (lo, (hi - lo) / n as f64, n)
            })
            .collect();
        let mid = |(lo, h, _): (f64, f64, usize), i: usize| lo + (i as f64 + 0.5) * h;
        let cell: f64 = axes.iter().map(|a| a.1).product();
        let outer = axes[0];
        let inner = axes.get(1).copied();
        let partials = par::map_range(outer.2, |i| -> Result<f64> {
            let x0 = mid(outer, i);
            let pts = match inner {
                None => Tensor::matrix(1, 1, vec![x0])?,
                Some(ax) => {
                    let mut d = Vec::with_capacity(ax.2 * 2);
                    for j in 0..ax.2 {
                        d.push(x0);
                        d.push(mid(ax, j));
                    }
                    Tensor::matrix(ax.2, 2, d)?
                }
            };
            let mut acc = 0.0;
            for lp in self.log_prob_batch(&pts)? {
                acc += lp.exp();
            }
            Ok(acc)
        });
        let mut total = 0.0;
        for p in partials {
            total += p?;
        }
        Ok(total * cell)
    }

    /// Records the mean NLL of `batch` on `tape` and returns the loss node.
    ///
    /// `params` comes from [`Chain::register_params`]. `scale_rows` is the
    /// divisor of the summed log-density; pass the full batch size when
    /// `batch` is one chunk of a larger minibatch. Also returns the per-row
    /// log-density node (`[rows, 1]`).
    pub fn nll_on_tape(
        &self,
        tape: &mut Tape,
        batch: &Tensor,
        params: &[Vec<NodeId>],
        scale_rows: usize,
    ) -> Result<(NodeId, NodeId)> {
        let Base::StandardNormal(normal) = self.base else {
            return Err(Error::NoGradient("uniform base"));
        };
        let x = tape.constant(batch.clone());
        let (z, ld) = self.chain.forward_tape_with(tape, x, params)?;
        let sq = tape.mul(z, z)?;
        let s = tape.row_sums(sq)?;
        let half = tape.scale(s, 0.5)?;
        let c = tape.scalar(normal.log_normalizer());
        let base_lp = tape.sub(c, half)?;
        let lp = tape.add(base_lp, ld)?;
        let total = tape.sum(lp)?;
        let mean = tape.scale(total, 1.0 / scale_rows as f64)?;
        let loss = tape.neg(mean)?;
        Ok((loss, lp))
    }
}
