use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{build_model, Architecture, Model, TrainConfig};
use crate::encode::{EmbeddingMatrix, Vocab};
use crate::error::{Error, Result};
use crate::nn::Param;

pub const CHECKPOINT_FORMAT: &str = "autolabel-model";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to rebuild a trained model: config echo, the frozen
/// embedding, every trainable parameter with its name and shape, and
/// optionally the vocabulary that produced the indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub config: TrainConfig,
    pub embedding: Array2<f64>,
    pub params: Vec<Param>,
    pub vocab: Option<Vocab>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, vocab: Option<&Vocab>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            architecture: model.arch,
            config: model.config.clone(),
            embedding: model.embedding().weight.value.clone(),
            params: model.net.params().into_iter().cloned().collect(),
            vocab: vocab.cloned(),
        }
    }

    /// Rebuilds the model; the optimizer state starts fresh.
    pub fn into_model(self) -> Result<(Model, Option<Vocab>)> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format {} v{} (expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
                self.format, self.version
            )));
        }
        let emb = EmbeddingMatrix {
            weights: self.embedding,
            found: 0,
        };
        let mut model = build_model(self.architecture, &emb, &self.config)?;
        let mut slots = model.net.params_mut();
        if slots.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                slots.len(),
                self.params.len()
            )));
        }
        for (slot, p) in slots.iter_mut().zip(self.params) {
            if slot.name != p.name || slot.value.dim() != p.value.dim() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} {:?} does not match {} {:?}",
                    p.name,
                    p.value.dim(),
                    slot.name,
                    slot.value.dim()
                )));
            }
            slot.value = p.value;
        }
        let vocab = self.vocab.map(|mut v| {
            v.rebuild_index();
            v
        });
        Ok((model, vocab))
    }
}

pub fn save_checkpoint(model: &Model, vocab: Option<&Vocab>, path: &Path) -> Result<()> {
    let json = serde_json::to_string(&Checkpoint::from_model(model, vocab))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, Option<Vocab>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    ckpt.into_model()
}
