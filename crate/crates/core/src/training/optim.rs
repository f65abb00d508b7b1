use super::TrainConfig;
use crate::error::{Error, Result};
use crate::ndcore::Tensor;

fn l2_norm(t: &Tensor) -> f64 {
    let mut s = 0.0;
    for v in t.data() {
        s += v * v;
    }
    s.sqrt()
}

/// Rescales each tensor independently so its L2 norm is at most `max_norm`.
/// Returns the norms before clipping.
pub fn clip_by_norm(grads: &mut [Tensor], max_norm: f64) -> Vec<f64> {
    grads
        .iter_mut()
        .map(|g| {
            let n = l2_norm(g);
            if n > max_norm {
                let k = max_norm / n;
                for v in g.data_mut() {
                    *v *= k;
                }
            }
            n
        })
        .collect()
}

/// First and second moment estimates plus the update count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdamState {
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (k, p) in params.iter_mut().enumerate() {
        let g = grads[k].data();
        if g.len() != p.len() {
            return Err(Error::shape("adam", p.shape(), grads[k].shape()));
        }
        let m = state.m[k].data_mut();
        let v = state.v[k].data_mut();
        for (i, w) in p.data_mut().iter_mut().enumerate() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
    Ok(())
}
