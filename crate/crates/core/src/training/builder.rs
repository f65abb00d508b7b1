use crate::bijectors::{AffineCoupling, Chain, Layer, LogitSquash, LuLinear};
use crate::density::FlowModel;
use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// RealNVP-style architecture: alternating-mask affine couplings, optionally
/// separated by LU mixing layers, optionally behind a logit squash for data
/// in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSpec {
    pub dim: usize,
    pub couplings: usize,
    pub hidden: usize,
    pub lu_mixing: bool,
    pub logit_eps: Option<f64>,
}

impl FlowSpec {
    pub fn new(dim: usize, couplings: usize, hidden: usize) -> Self {
        FlowSpec {
            dim,
            couplings,
            hidden,
            lu_mixing: true,
            logit_eps: None,
        }
    }

    /// Layers in data → latent order. Every layer starts as the identity map.
    pub fn build(&self, seed: u64) -> Result<FlowModel> {
        if self.dim < 2 || self.couplings == 0 || self.hidden == 0 {
            return Err(Error::invalid(
                "need dim >= 2, at least one coupling and a positive hidden width",
            ));
        }
        let mut rng = CounterRng::new(seed);
        let mut steps: Vec<Layer> = Vec::new();
        if let Some(eps) = self.logit_eps {
            steps.push(LogitSquash::new(self.dim, eps)?.into());
        }
        for k in 0..self.couplings {
            steps.push(AffineCoupling::alternating(self.dim, k, self.hidden, &mut rng)?.into());
            if self.lu_mixing && k + 1 < self.couplings {
                steps.push(LuLinear::identity(self.dim).into());
            }
        }
        Ok(FlowModel::standard(Chain::new(steps)?))
    }
}
