//! Single-file JSON checkpoint tagged `cantm-v1`: model config, vocabulary,
//! class labels and every named weight tensor.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CantmModel, ModelConfig};
use crate::corpus::{open, Vocabulary};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "cantm-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorData {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Archive {
    format: String,
    config: ModelConfig,
    vocab: Vocabulary,
    labels: Vec<String>,
    tensors: BTreeMap<String, TensorData>,
}

/// A trained model with what is needed to apply it to new text.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: CantmModel,
    pub vocab: Vocabulary,
    pub labels: Vec<String>,
}

impl ModelBundle {
    pub fn new(model: CantmModel, vocab: Vocabulary, labels: Vec<String>) -> Result<Self> {
        if vocab.len() != model.config.vocab_size {
            return Err(Error::Checkpoint(format!(
                "vocabulary has {} tokens, model expects {}",
                vocab.len(),
                model.config.vocab_size
            )));
        }
        if labels.len() != model.config.n_classes {
            return Err(Error::Checkpoint(format!(
                "{} labels for a {}-class model",
                labels.len(),
                model.config.n_classes
            )));
        }
        Ok(ModelBundle { model, vocab, labels })
    }

    pub fn tensors(&self) -> BTreeMap<String, TensorData> {
        let mut out = BTreeMap::new();
        for (_, name, w, b) in self.model.layers() {
            out.insert(
                format!("{name}.weight"),
                TensorData {
                    shape: w.shape().to_vec(),
                    data: w.iter().copied().collect(),
                },
            );
            out.insert(
                format!("{name}.bias"),
                TensorData {
                    shape: b.shape().to_vec(),
                    data: b.to_vec(),
                },
            );
        }
        out
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let archive = Archive {
            format: CHECKPOINT_FORMAT.to_string(),
            config: self.model.config.clone(),
            vocab: self.vocab.clone(),
            labels: self.labels.clone(),
            tensors: self.tensors(),
        };
        serde_json::to_writer(w, &archive).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let archive: Archive = serde_json::from_reader(r).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if archive.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unsupported format tag {:?}, expected {CHECKPOINT_FORMAT:?}",
                archive.format
            )));
        }
        let mut model = CantmModel::zeros(archive.config)?;
        let mut failure = None;
        let mut seen = 0;
        model.for_each_param_mut(|_, name, dst| {
            match archive.tensors.get(&name) {
                Some(t) if t.data.len() == dst.len() && t.shape.iter().product::<usize>() == dst.len() => {
                    dst.copy_from_slice(&t.data);
                    seen += 1;
                }
                Some(_) => failure = failure.take().or(Some(format!("tensor {name} has the wrong size"))),
                None => failure = failure.take().or(Some(format!("tensor {name} is missing"))),
            }
        });
        if let Some(msg) = failure {
            return Err(Error::Checkpoint(msg));
        }
        if seen != archive.tensors.len() {
            return Err(Error::Checkpoint("checkpoint holds unexpected tensors".into()));
        }
        ModelBundle::new(model, archive.vocab, archive.labels)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::io::BufReader::new(open(path)?))
    }
}
