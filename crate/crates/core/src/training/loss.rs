use crate::bijectors::Bijector;
use crate::density::FlowModel;
use crate::error::{Error, Result};
use crate::ndcore::{NodeId, Tape, Tensor};
use crate::par;

/// Rows per tape when a minibatch is split for gradient evaluation. Fixed so
/// the reduction order, and hence every bit of the result, does not depend
/// on the thread count.
pub const CHUNK_ROWS: usize = 64;

/// Nodes recorded by [`nll_loss`].
#[derive(Clone, Debug)]
pub struct NllNodes {
    pub loss: NodeId,
    /// Per-row `ln p(x)`, shape `[rows, 1]`.
    pub log_probs: NodeId,
    /// Parameter nodes grouped by chain step.
    pub params: Vec<Vec<NodeId>>,
}

fn locate(err: Error, offset: usize) -> Error {
    match err {
        Error::Domain { row, .. } => Error::OutOfSupport {
            index: offset + row,
        },
        other => other,
    }
}

/// Records `−(1/n) Σ ln p(xᵢ)` for the whole batch on `tape`, with the
/// model's parameters registered as trainable nodes.
pub fn nll_loss(model: &FlowModel, tape: &mut Tape, batch: &Tensor) -> Result<NllNodes> {
    let params = model.chain().register_params(tape);
    let (loss, log_probs) = model
        .nll_on_tape(tape, batch, &params, batch.rows())
        .map_err(|e| locate(e, 0))?;
    Ok(NllNodes {
        loss,
        log_probs,
        params,
    })
}

#[derive(Clone, Debug)]
pub struct LossGrads {
    pub loss: f64,
    pub log_probs: Vec<f64>,
    /// One gradient per trainable tensor, in `chain.params()` order.
    pub grads: Vec<Tensor>,
}

fn chunk(
    model: &FlowModel,
    batch: &Tensor,
    start: usize,
    end: usize,
) -> Result<(Vec<f64>, Vec<Tensor>)> {
    let d = batch.cols();
    let sub = Tensor::matrix(end - start, d, batch.data()[start * d..end * d].to_vec())?;
    let mut tape = Tape::new();
    let params = model.chain().register_params(&mut tape);
    let (loss, lp) = model
        .nll_on_tape(&mut tape, &sub, &params, batch.rows())
        .map_err(|e| locate(e, start))?;
    let g = tape.backward(loss)?;
    let grads = params
        .iter()
        .flatten()
        .map(|&id| {
            g.get(id)
                .cloned()
                .ok_or_else(|| Error::invalid("parameter missing from gradients"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((tape.value(lp)?.data().to_vec(), grads))
}

/// Mean NLL of `batch` and its gradient with respect to every trainable
/// tensor. Rows are processed in [`CHUNK_ROWS`]-sized pieces, possibly in
/// parallel, and combined in chunk order.
pub fn loss_and_grads(model: &FlowModel, batch: &Tensor) -> Result<LossGrads> {
    let rows = batch.rows();
    if rows == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if batch.cols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: batch.cols(),
        });
    }
    let n_chunks = rows.div_ceil(CHUNK_ROWS);
    let parts = par::map_range(n_chunks, |c| {
        chunk(
            model,
            batch,
            c * CHUNK_ROWS,
            ((c + 1) * CHUNK_ROWS).min(rows),
        )
    });
    let mut log_probs = Vec::with_capacity(rows);
    let mut grads: Option<Vec<Tensor>> = None;
    for part in parts {
        let (lp, g) = part?;
        log_probs.extend(lp);
        grads = Some(match grads {
            None => g,
            Some(acc) => acc
                .iter()
                .zip(&g)
                .map(|(a, b)| a.add(b))
                .collect::<Result<_>>()?,
        });
    }
    let mut total = 0.0;
    for v in &log_probs {
        total += v;
    }
    let loss = -(total * (1.0 / rows as f64));
    let grads = grads.unwrap_or_else(|| {
        model
            .chain()
            .params()
            .into_iter()
            .map(|p| Tensor::zeros(p.shape()))
            .collect()
    });
    Ok(LossGrads {
        loss,
        log_probs,
        grads,
    })
}
