use super::Dataset;
use crate::bijectors::{stretch_rotate_shear, Bijector, Chain};
use crate::error::{Error, Result};
use crate::ndcore::Tensor;
use crate::rng::CounterRng;

/// Pipeline output together with the normal draws that produced it.
#[derive(Clone, Debug)]
pub struct PipelineSample {
    pub dataset: Dataset,
    pub base_draws: Tensor,
    pub chain: Chain,
}

/// `count` standard-normal draws pushed through stretch → rotate → shear.
///
/// Draws that would land outside the shear's half-plane are replaced by the
/// next draw of the same stream (probability about 2·10⁻⁵ per point).
pub fn gen_pipeline_dataset(count: usize, seed: u64) -> Result<PipelineSample> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    let chain = stretch_rotate_shear();
    let mut rng = CounterRng::new(seed);
    let mut z = Tensor::matrix(count, 2, rng.normals(2 * count))?;
    loop {
        match chain.forward(&z) {
            Ok((x, _)) => {
                let dataset =
                    Dataset::new(x, format!("stretch-rotate-shear n={count} seed={seed}"))?;
                return Ok(PipelineSample {
                    dataset,
                    base_draws: z,
                    chain,
                });
            }
            Err(Error::Domain { row, .. }) => {
                let fresh = rng.normals(2);
                z.data_mut()[row * 2..row * 2 + 2].copy_from_slice(&fresh);
            }
            Err(e) => return Err(e),
        }
    }
}
