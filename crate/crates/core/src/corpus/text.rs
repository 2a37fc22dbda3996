//! Bag-of-words preprocessing: tokenization, stopwords, vocabulary, count vectors.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::records::{open, Category, DebunkRecord};
use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Minimum token length, in characters, kept in the bag-of-words view.
pub const MIN_TOKEN_CHARS: usize = 3;

pub const DEFAULT_VOCAB_SIZE: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The snowball English list.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn empty() -> Self {
        Stopwords(HashSet::new())
    }

    /// One token per line; blank lines ignored.
    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut words = HashSet::new();
        for line in BufReader::new(open(path)?).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let w = line.trim().to_lowercase();
            if !w.is_empty() {
                words.insert(w);
            }
        }
        Ok(Stopwords(words))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::english()
    }
}

/// Whitespace split, surrounding punctuation stripped, lowercased.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase().replace('\u{2019}', "'"))
        .collect()
}

pub fn keep_token(token: &str, stopwords: &Stopwords) -> bool {
    token.chars().count() >= MIN_TOKEN_CHARS
        && !token.chars().any(|c| c.is_numeric())
        && token.chars().any(char::is_alphabetic)
        && !stopwords.contains(token)
}

/// Tokens that survive the bag-of-words filters, in text order.
pub fn bow_tokens(text: &str, stopwords: &Stopwords) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| keep_token(t, stopwords))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

/// Keep the `max_size` most frequent surviving tokens; equal counts order lexicographically.
pub fn build_vocabulary<'a, I>(texts: I, max_size: usize, stopwords: &Stopwords) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a str>,
{
    if max_size == 0 {
        return Err(Error::InvalidArgument("vocabulary max_size must be >= 1".into()));
    }
    let mut freq: HashMap<String, u64> = HashMap::new();
    for text in texts {
        for t in bow_tokens(text, stopwords) {
            *freq.entry(t).or_default() += 1;
        }
    }
    if freq.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut ranked: Vec<(String, u64)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size);
    Vocabulary::from_tokens(ranked.into_iter().map(|(t, _)| t).collect())
}

/// Sparse token counts over a fixed vocabulary, sorted by position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BowVector {
    pub doc_id: String,
    counts: Vec<(usize, u32)>,
}

impl BowVector {
    /// Build from (position, count) pairs; duplicates are summed and zero counts dropped.
    pub fn from_pairs(doc_id: impl Into<String>, pairs: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut map: HashMap<usize, u32> = HashMap::new();
        for (i, c) in pairs {
            *map.entry(i).or_default() += c;
        }
        let mut counts: Vec<_> = map.into_iter().filter(|&(_, c)| c > 0).collect();
        counts.sort_unstable();
        BowVector {
            doc_id: doc_id.into(),
            counts,
        }
    }

    pub fn counts(&self) -> &[(usize, u32)] {
        &self.counts
    }

    /// Total token count N_d.
    pub fn total(&self) -> u32 {
        self.counts.iter().map(|&(_, c)| c).sum()
    }

    /// True when no in-vocabulary token was found.
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, position: usize) -> u32 {
        self.counts
            .binary_search_by_key(&position, |&(i, _)| i)
            .map(|k| self.counts[k].1)
            .unwrap_or(0)
    }

    pub fn max_position(&self) -> Option<usize> {
        self.counts.last().map(|&(i, _)| i)
    }
}

/// Count in-vocabulary tokens of `text`. Out-of-vocabulary tokens are dropped.
pub fn to_bow(doc_id: &str, text: &str, vocab: &Vocabulary) -> BowVector {
    BowVector::from_pairs(
        doc_id,
        tokenize(text).iter().filter_map(|t| vocab.get(t)).map(|i| (i, 1)),
    )
}

/// A record prepared for modelling.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDocument {
    pub record: DebunkRecord,
    pub text: String,
    pub label: Option<Category>,
}

impl LabeledDocument {
    pub fn from_record(record: DebunkRecord) -> Self {
        LabeledDocument {
            text: record.text(),
            label: record.category,
            record,
        }
    }

    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn bow(&self, vocab: &Vocabulary) -> BowVector {
        to_bow(&self.record.id, &self.text, vocab)
    }
}
