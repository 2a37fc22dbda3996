//! Ranked topic words from the three topic-word matrices.

use std::fmt::Write as _;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::CantmModel;

pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicKind {
    Latent,
    ClassAssociated,
    ClassificationAware,
}

impl TopicKind {
    pub const ALL: [TopicKind; 3] = [TopicKind::Latent, TopicKind::ClassAssociated, TopicKind::ClassificationAware];

    pub fn as_str(self) -> &'static str {
        match self {
            TopicKind::Latent => "latent",
            TopicKind::ClassAssociated => "class_associated",
            TopicKind::ClassificationAware => "classification_aware",
        }
    }
}

impl std::str::FromStr for TopicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TopicKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.replace('-', "_"))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown topic kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub label: String,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicReport {
    pub kind: TopicKind,
    pub topics: Vec<Topic>,
}

/// Indices of the `k` largest entries, ties going to the earlier index.
fn top_indices(row: impl Iterator<Item = f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<(usize, f64)> = row.enumerate().collect();
    idx.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    idx.into_iter().take(k).map(|(i, _)| i).collect()
}

/// Top `k` words of every row. Rows are labelled from `row_labels` when
/// given, otherwise "Topic 1", "Topic 2", ...
pub fn top_words(
    matrix: ArrayView2<f64>,
    vocab: &Vocabulary,
    k: usize,
    kind: TopicKind,
    row_labels: Option<&[String]>,
) -> Result<TopicReport> {
    if matrix.ncols() != vocab.len() {
        return Err(Error::InvalidArgument(format!(
            "topic matrix has {} columns, vocabulary has {} words",
            matrix.ncols(),
            vocab.len()
        )));
    }
    if k == 0 || k > vocab.len() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            vocab.len()
        )));
    }
    if let Some(labels) = row_labels {
        if labels.len() != matrix.nrows() {
            return Err(Error::InvalidArgument(format!(
                "{} row labels for {} topics",
                labels.len(),
                matrix.nrows()
            )));
        }
    }
    let topics = matrix
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| Topic {
            label: row_labels.map_or_else(|| format!("Topic {}", i + 1), |l| l[i].clone()),
            words: top_indices(row.iter().copied(), k)
                .into_iter()
                .map(|w| vocab.token(w).to_string())
                .collect(),
        })
        .collect();
    Ok(TopicReport { kind, topics })
}

/// Report for one of the model's matrices; class-associated rows carry the
/// class names.
pub fn model_topics(
    model: &CantmModel,
    vocab: &Vocabulary,
    labels: &[String],
    kind: TopicKind,
    k: usize,
) -> Result<TopicReport> {
    match kind {
        TopicKind::Latent => top_words(model.m1_decoder.topic_word.view(), vocab, k, kind, None),
        TopicKind::ClassAssociated => {
            top_words(model.class_decoder.topic_word.view(), vocab, k, kind, Some(labels))
        }
        TopicKind::ClassificationAware => top_words(model.m2_decoder.topic_word.view(), vocab, k, kind, None),
    }
}

impl TopicReport {
    /// Two-column text table: label, then the space-separated words.
    pub fn to_text_table(&self) -> String {
        let width = self.topics.iter().map(|t| t.label.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for t in &self.topics {
            let _ = writeln!(out, "{:<width$} | {}", t.label, t.words.join(" "));
        }
        out
    }
}
