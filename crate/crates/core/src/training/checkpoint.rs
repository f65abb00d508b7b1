//! JSON checkpoints. Arrays are stored as explicit shapes plus base64 of
//! their little-endian `f64` bytes, so a load/save cycle is bit-exact.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{AdamState, TrainConfig};
use crate::bijectors::{Bijector, Chain, Descriptor, Layer};
use crate::density::{Base, DiagonalStandardNormal, FlowModel, Uniform1D};
use crate::error::{Error, Result};
use crate::ndcore::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayRecord {
    pub shape: Vec<usize>,
    pub data: String,
}

impl ArrayRecord {
    pub fn from_tensor(t: &Tensor) -> Self {
        let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        ArrayRecord {
            shape: t.shape().to_vec(),
            data: STANDARD.encode(bytes),
        }
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::CorruptCheckpoint(format!("base64: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::CorruptCheckpoint(
                "array byte length not a multiple of 8".into(),
            ));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Tensor::new(self.shape.clone(), data)
            .map_err(|e| Error::CorruptCheckpoint(format!("array: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseRecord {
    StandardNormal { dim: usize },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub descriptor: Descriptor,
    pub arrays: Vec<ArrayRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerRecord {
    pub t: u64,
    pub m: Vec<ArrayRecord>,
    pub v: Vec<ArrayRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub base: BaseRecord,
    pub layers: Vec<LayerRecord>,
    /// Completed optimizer steps.
    pub step: u64,
    pub config: Option<TrainConfig>,
    pub optimizer: Option<OptimizerRecord>,
}

fn records(ts: &[Tensor]) -> Vec<ArrayRecord> {
    ts.iter().map(ArrayRecord::from_tensor).collect()
}

fn tensors(rs: &[ArrayRecord]) -> Result<Vec<Tensor>> {
    rs.iter().map(ArrayRecord::to_tensor).collect()
}

impl Checkpoint {
    /// A model-only checkpoint (no optimizer state, step 0).
    pub fn from_model(model: &FlowModel) -> Self {
        let base = match model.base() {
            Base::StandardNormal(b) => BaseRecord::StandardNormal { dim: b.dim },
            Base::Uniform(u) => BaseRecord::Uniform { lo: u.lo, hi: u.hi },
        };
        let layers = model
            .chain()
            .steps()
            .iter()
            .map(|l| LayerRecord {
                descriptor: l.descriptor(),
                arrays: l
                    .arrays()
                    .into_iter()
                    .map(ArrayRecord::from_tensor)
                    .collect(),
            })
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            base,
            layers,
            step: 0,
            config: None,
            optimizer: None,
        }
    }

    pub fn with_training(mut self, step: u64, config: &TrainConfig, adam: &AdamState) -> Self {
        self.step = step;
        self.config = Some(config.clone());
        self.optimizer = Some(OptimizerRecord {
            t: adam.t,
            m: records(&adam.m),
            v: records(&adam.v),
        });
        self
    }

    pub fn model(&self) -> Result<FlowModel> {
        let base = match self.base {
            BaseRecord::StandardNormal { dim } => {
                Base::StandardNormal(DiagonalStandardNormal::new(dim))
            }
            BaseRecord::Uniform { lo, hi } => Base::Uniform(Uniform1D::new(lo, hi)?),
        };
        let steps = self
            .layers
            .iter()
            .map(|r| Layer::from_parts(&r.descriptor, tensors(&r.arrays)?))
            .collect::<Result<Vec<_>>>()?;
        let chain = if steps.is_empty() {
            Chain::identity(base.dim())
        } else {
            Chain::new(steps)?
        };
        FlowModel::new(base, chain)
    }

    /// Optimizer state, checked against the model's parameter shapes.
    pub fn adam_state(&self, model: &FlowModel) -> Result<Option<AdamState>> {
        let Some(opt) = &self.optimizer else {
            return Ok(None);
        };
        let m = tensors(&opt.m)?;
        let v = tensors(&opt.v)?;
        let params = model.chain().params();
        let fits = |ts: &[Tensor]| {
            ts.len() == params.len() && ts.iter().zip(&params).all(|(a, p)| a.shape() == p.shape())
        };
        if !fits(&m) || !fits(&v) {
            return Err(Error::CorruptCheckpoint(
                "optimizer moments do not match parameters".into(),
            ));
        }
        Ok(Some(AdamState { t: opt.t, m, v }))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::CorruptCheckpoint(format!("json: {e}")))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptCheckpoint("missing format_version".into()))?;
        if version != CHECKPOINT_VERSION as u64 {
            return Err(Error::CheckpointVersion {
                found: version as u32,
                expected: CHECKPOINT_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| Error::CorruptCheckpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Checkpoint::from_json(&fs::read_to_string(path)?)
    }
}
