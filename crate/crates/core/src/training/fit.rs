use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{adam_step, clip_by_norm, loss_and_grads, AdamState, Checkpoint, TrainConfig};
use crate::bijectors::Bijector;
use crate::data::Dataset;
use crate::density::FlowModel;
use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Share of the shuffled dataset held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.1;

const SPLIT_STREAM: u64 = 0x5350_4c49;
const BATCH_STREAM: u64 = 0x4241_5443;

/// One optimizer step: the minibatch NLL at the parameters the step started
/// from, and the held-out NLL at the same parameters when it was evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub train_nll: f64,
    pub val_nll: Option<f64>,
}

/// Stateful fitting loop. Minibatch `k` is drawn with replacement from a
/// stream keyed by `(seed, k)`, so resuming from a checkpoint replays exactly
/// the batches an uninterrupted run would have seen.
#[derive(Clone, Debug)]
pub struct Trainer {
    model: FlowModel,
    cfg: TrainConfig,
    adam: AdamState,
    step: usize,
    train: Dataset,
    val: Option<Dataset>,
    history: Vec<LossRecord>,
    checkpoint_dir: Option<PathBuf>,
}

fn split(data: &Dataset, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
    let n = data.len();
    let n_val = (n as f64 * VALIDATION_FRACTION).floor() as usize;
    if n - n_val == 0 {
        return Err(Error::invalid("dataset too small to train on"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    CounterRng::stream(seed, SPLIT_STREAM).shuffle(&mut idx);
    let prov = data.provenance();
    let train = Dataset::new(data.select(&idx[..n - n_val])?, format!("{prov} [train]"))?;
    let val = if n_val > 0 {
        Some(Dataset::new(
            data.select(&idx[n - n_val..])?,
            format!("{prov} [validation]"),
        )?)
    } else {
        None
    };
    Ok((train, val))
}

impl Trainer {
    pub fn new(model: FlowModel, data: &Dataset, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if data.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: data.dim(),
            });
        }
        let (train, val) = split(data, cfg.seed)?;
        let adam = AdamState::new(&model.chain().params());
        Ok(Trainer {
            model,
            cfg,
            adam,
            step: 0,
            train,
            val,
            history: Vec::new(),
            checkpoint_dir: None,
        })
    }

    /// Continues a run from a checkpoint written by [`Trainer::checkpoint`].
    /// `data` must be the dataset the run started with.
    pub fn resume(ckpt: &Checkpoint, data: &Dataset) -> Result<Self> {
        let cfg = ckpt
            .config
            .clone()
            .ok_or_else(|| Error::CorruptCheckpoint("no training config".into()))?;
        let model = ckpt.model()?;
        let mut t = Trainer::new(model, data, cfg)?;
        if let Some(adam) = ckpt.adam_state(&t.model)? {
            t.adam = adam;
        }
        t.step = ckpt.step as usize;
        Ok(t)
    }

    pub fn with_checkpoint_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.checkpoint_dir = Some(dir.into());
        self
    }

    pub fn model(&self) -> &FlowModel {
        &self.model
    }

    pub fn into_model(self) -> FlowModel {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn history(&self) -> &[LossRecord] {
        &self.history
    }

    pub fn train_set(&self) -> &Dataset {
        &self.train
    }

    pub fn validation_set(&self) -> Option<&Dataset> {
        self.val.as_ref()
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    /// Training-set rows used by step `step`.
    pub fn batch_indices(&self, step: usize) -> Vec<usize> {
        let n = self.train.len();
        if self.cfg.batch_size >= n {
            return (0..n).collect();
        }
        let seed = CounterRng::stream(self.cfg.seed, BATCH_STREAM).next_u64();
        let mut rng = CounterRng::stream(seed, step as u64);
        (0..self.cfg.batch_size).map(|_| rng.below(n)).collect()
    }

    pub fn validation_nll(&self) -> Result<Option<f64>> {
        self.val
            .as_ref()
            .map(|v| self.model.mean_nll(v.points()))
            .transpose()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_model(&self.model).with_training(self.step as u64, &self.cfg, &self.adam)
    }

    fn abort(&self, step: usize) -> Error {
        let checkpoint = self.checkpoint_dir.as_ref().and_then(|dir| {
            let path = dir.join("last_finite.json");
            self.checkpoint().save(&path).ok().map(|_| path)
        });
        Error::NonFiniteLoss { step, checkpoint }
    }

    /// Runs one optimizer step and returns its record.
    pub fn step(&mut self) -> Result<LossRecord> {
        let k = self.step;
        let batch = self.train.select(&self.batch_indices(k))?;
        let lg = match loss_and_grads(&self.model, &batch) {
            Ok(lg) => lg,
            Err(Error::NumericOverflow { .. }) | Err(Error::OpDomain { .. }) => {
                return Err(self.abort(k))
            }
            Err(e) => return Err(e),
        };
        if !lg.loss.is_finite()
            || lg
                .grads
                .iter()
                .any(|g| g.data().iter().any(|v| !v.is_finite()))
        {
            return Err(self.abort(k));
        }
        let val_nll = if self.cfg.eval_every > 0 && k.is_multiple_of(self.cfg.eval_every) {
            self.validation_nll()?
        } else {
            None
        };
        let mut grads = lg.grads;
        clip_by_norm(&mut grads, self.cfg.clip_norm);
        let mut params = self.model.chain_mut().params_mut();
        adam_step(&mut params, &grads, &mut self.adam, &self.cfg)?;
        self.step += 1;
        let rec = LossRecord {
            step: k,
            train_nll: lg.loss,
            val_nll,
        };
        self.history.push(rec);
        if let Some(dir) = &self.checkpoint_dir {
            if self.cfg.checkpoint_every > 0 && self.step.is_multiple_of(self.cfg.checkpoint_every)
            {
                self.checkpoint()
                    .save(dir.join(format!("step_{:06}.json", self.step)))?;
            }
        }
        Ok(rec)
    }

    /// Runs until `max_steps` steps have been completed in total.
    pub fn run(&mut self) -> Result<()> {
        while self.step < self.cfg.max_steps {
            self.step()?;
        }
        Ok(())
    }
}

/// Fits `model` to `data` for `cfg.max_steps` steps.
pub fn fit(
    model: FlowModel,
    data: &Dataset,
    cfg: TrainConfig,
) -> Result<(FlowModel, Vec<LossRecord>)> {
    let mut t = Trainer::new(model, data, cfg)?;
    t.run()?;
    let history = t.history.clone();
    Ok((t.into_model(), history))
}

/// `step,train_nll,val_nll` with an empty field when validation was skipped.
pub fn write_history_csv(history: &[LossRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("step,train_nll,val_nll\n");
    for r in history {
        let val = r.val_nll.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", r.step, r.train_nll, val);
    }
    fs::write(path, out)?;
    Ok(())
}
