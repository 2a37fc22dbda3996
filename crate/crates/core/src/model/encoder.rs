//! Precomputed document embeddings (the frozen-encoder route).
//!
//! File layout, JSON-lines:
//!
//! ```text
//! {"dim": 768}
//! {"doc_id": "d1", "vector": [0.12, -0.4, ...]}
//! ```

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Document;
use crate::corpus::open;
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
struct Header {
    dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    doc_id: String,
    vector: Vec<f32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, doc_id: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let doc_id = doc_id.into();
        if vector.len() != self.dim {
            return Err(Error::Validation(format!(
                "embedding {doc_id:?} has dimension {}, table declares {}",
                vector.len(),
                self.dim
            )));
        }
        if self.vectors.insert(doc_id.clone(), vector).is_some() {
            return Err(Error::DuplicateId(doc_id));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn lookup(&self, key: &str) -> Result<&[f32]> {
        self.vectors
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingEmbedding(key.to_string()))
    }

    /// Fill `embedding` on each document from its id.
    pub fn attach(&self, docs: &mut [Document]) -> Result<()> {
        for d in docs {
            d.embedding = Some(self.lookup(&d.id)?.iter().map(|&v| f64::from(v)).collect());
        }
        Ok(())
    }

    pub fn read<R: Read>(reader: R, name: &str) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let locus = format!("{name}:{}", i + 1);
            let line = line.map_err(|e| Error::parse(&locus, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match table.as_mut() {
                None => {
                    let h: Header = serde_json::from_str(&line)
                        .map_err(|e| Error::parse(&locus, format!("expected header {{\"dim\": N}}: {e}")))?;
                    if h.dim == 0 {
                        return Err(Error::parse(&locus, "embedding dimension must be >= 1"));
                    }
                    table = Some(EmbeddingTable::new(h.dim));
                }
                Some(t) => {
                    let row: Row = serde_json::from_str(&line).map_err(|e| Error::parse(&locus, e))?;
                    t.insert(row.doc_id, row.vector).map_err(|e| Error::parse(&locus, e))?;
                }
            }
        }
        table.ok_or_else(|| Error::parse(name, "missing embedding header"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(open(path)?, &path.display().to_string())
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", serde_json::json!({ "dim": self.dim }))?;
        let mut keys: Vec<&String> = self.vectors.keys().collect();
        keys.sort();
        for k in keys {
            let row = Row {
                doc_id: k.clone(),
                vector: self.vectors[k].clone(),
            };
            writeln!(w, "{}", serde_json::to_string(&row)?)?;
        }
        Ok(())
    }
}
