//! Annotation cleaning, merging and agreement statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::hash::Hash;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::records::{open, read_jsonl, Category};
use crate::error::{Error, Result};

pub const MAX_CONFIDENCE: u8 = 9;
pub const DEFAULT_CONFIDENCE_THRESHOLD: u8 = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub doc_id: String,
    pub annotator_id: String,
    pub category: Category,
    pub confidence: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub annotations: Vec<Annotation>,
}

impl AnnotationSet {
    pub fn new(annotations: Vec<Annotation>) -> Result<Self> {
        for a in &annotations {
            if a.confidence > MAX_CONFIDENCE {
                return Err(Error::Validation(format!(
                    "annotation of {:?} by {:?} has confidence {} outside 0..=9",
                    a.doc_id, a.annotator_id, a.confidence
                )));
            }
        }
        Ok(AnnotationSet { annotations })
    }

    pub fn read<R: Read>(reader: R, name: &str) -> Result<Self> {
        let rows = read_jsonl::<Annotation, _>(reader, name)?;
        Self::new(rows.into_iter().map(|(_, a)| a).collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(open(path)?, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }

    pub fn annotators(&self) -> BTreeSet<&str> {
        self.annotations.iter().map(|a| a.annotator_id.as_str()).collect()
    }

    pub fn by_document(&self) -> BTreeMap<&str, Vec<&Annotation>> {
        let mut map: BTreeMap<&str, Vec<&Annotation>> = BTreeMap::new();
        for a in &self.annotations {
            map.entry(a.doc_id.as_str()).or_default().push(a);
        }
        map
    }

    /// Single-, double- and multiple-annotated document counts.
    pub fn multiplicity_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for anns in self.by_document().values() {
            match anns.len() {
                1 => counts.0 += 1,
                2 => counts.1 += 1,
                _ => counts.2 += 1,
            }
        }
        counts
    }

    fn without_annotator(&self, annotator: &str) -> AnnotationSet {
        AnnotationSet {
            annotations: self
                .annotations
                .iter()
                .filter(|a| a.annotator_id != annotator)
                .cloned()
                .collect(),
        }
    }
}

/// Every unordered pair of annotations on the same document, ordered so the
/// annotation with the smaller annotator id comes first.
pub fn annotation_pairs(annset: &AnnotationSet) -> Vec<(Category, Category)> {
    let mut pairs = Vec::new();
    for mut anns in annset.by_document().into_values() {
        anns.sort_by(|a, b| a.annotator_id.cmp(&b.annotator_id));
        for i in 0..anns.len() {
            for j in i + 1..anns.len() {
                pairs.push((anns[i].category, anns[j].category));
            }
        }
    }
    pairs
}

/// Fraction of same-document annotation pairs that agree on the category.
pub fn pairwise_agreement(annset: &AnnotationSet) -> Result<f64> {
    let pairs = annotation_pairs(annset);
    if pairs.is_empty() {
        return Err(Error::UndefinedAgreement("no document has two or more annotations"));
    }
    let agree = pairs.iter().filter(|(a, b)| a == b).count();
    Ok(agree as f64 / pairs.len() as f64)
}

/// Cohen's kappa with chance agreement from each side's marginal label frequencies.
pub fn cohen_kappa<L: Eq + Hash>(pairs: &[(L, L)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::UndefinedAgreement("cohen_kappa needs at least one pair"));
    }
    let n = pairs.len() as f64;
    let mut left: HashMap<&L, usize> = HashMap::new();
    let mut right: HashMap<&L, usize> = HashMap::new();
    let mut agree = 0usize;
    for (a, b) in pairs {
        *left.entry(a).or_default() += 1;
        *right.entry(b).or_default() += 1;
        if a == b {
            agree += 1;
        }
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = left
        .iter()
        .map(|(l, &c)| c as f64 / n * right.get(l).copied().unwrap_or(0) as f64 / n)
        .sum();
    if p_e >= 1.0 {
        // Both sides used one identical label throughout.
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Cohen's kappa over all same-document annotation pairs. Each unordered
/// pair is counted in both orientations so the result does not depend on
/// which annotator is treated as the first rater.
pub fn annotation_kappa(annset: &AnnotationSet) -> Result<f64> {
    let pairs: Vec<(Category, Category)> = annotation_pairs(annset)
        .into_iter()
        .flat_map(|(a, b)| [(a, b), (b, a)])
        .collect();
    if pairs.is_empty() {
        return Err(Error::UndefinedAgreement("no document has two or more annotations"));
    }
    cohen_kappa(&pairs)
}

/// Leave-one-out agreement delta per annotator: agreement without the
/// annotator minus overall agreement. Larger values flag lower quality.
/// `None` when the annotator shares no document with anyone else.
pub fn score_annotators(annset: &AnnotationSet) -> Result<BTreeMap<String, Option<f64>>> {
    let annotators = annset.annotators();
    if annotators.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "annotator scoring needs at least 3 annotators, found {}",
            annotators.len()
        )));
    }
    let base = pairwise_agreement(annset)?;
    let mut overlapping: HashSet<&str> = HashSet::new();
    for anns in annset.by_document().values() {
        let ids: BTreeSet<&str> = anns.iter().map(|a| a.annotator_id.as_str()).collect();
        if ids.len() >= 2 {
            overlapping.extend(ids);
        }
    }
    let mut scores = BTreeMap::new();
    for a in annotators {
        let score = if overlapping.contains(a) {
            pairwise_agreement(&annset.without_annotator(a))
                .ok()
                .map(|without| without - base)
        } else {
            None
        };
        scores.insert(a.to_string(), score);
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    #[serde(default)]
    pub thresholds: HashMap<String, u8>,
    #[serde(default = "default_threshold")]
    pub default_threshold: u8,
    #[serde(default)]
    pub excluded: HashSet<String>,
}

fn default_threshold() -> u8 {
    DEFAULT_CONFIDENCE_THRESHOLD
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            thresholds: HashMap::new(),
            default_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            excluded: HashSet::new(),
        }
    }
}

impl FilterPolicy {
    pub fn threshold_for(&self, annotator: &str) -> u8 {
        self.thresholds
            .get(annotator)
            .copied()
            .unwrap_or(self.default_threshold)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self
            .thresholds
            .values()
            .chain(std::iter::once(&self.default_threshold))
            .any(|&t| t > MAX_CONFIDENCE);
        if bad {
            return Err(Error::Validation("confidence thresholds must lie in 0..=9".into()));
        }
        Ok(())
    }
}

/// Drop excluded annotators, then annotations below the annotator's confidence threshold.
pub fn filter_annotations(annset: &AnnotationSet, policy: &FilterPolicy) -> AnnotationSet {
    AnnotationSet {
        annotations: annset
            .annotations
            .iter()
            .filter(|a| !policy.excluded.contains(&a.annotator_id))
            .filter(|a| a.confidence >= policy.threshold_for(&a.annotator_id))
            .cloned()
            .collect(),
    }
}

fn merge_one(anns: &[&Annotation]) -> Category {
    let mut counts: BTreeMap<&str, (usize, Category)> = BTreeMap::new();
    for a in anns {
        counts.entry(a.category.as_str()).or_insert((0, a.category)).0 += 1;
    }
    if let Some((_, &(_, cat))) = counts.iter().find(|(_, &(c, _))| 2 * c > anns.len()) {
        return cat;
    }
    let top = anns.iter().map(|a| a.confidence).max().unwrap_or(0);
    anns.iter()
        .filter(|a| a.confidence == top)
        .map(|a| a.category)
        .min_by(|a, b| a.as_str().cmp(b.as_str()))
        .expect("merge_one called with annotations")
}

/// One label per document: strict majority, else the highest-confidence
/// annotation, else the lexicographically smallest of the tied labels.
pub fn merge_labels(annset: &AnnotationSet) -> BTreeMap<String, Category> {
    annset
        .by_document()
        .into_iter()
        .map(|(doc, anns)| (doc.to_string(), merge_one(&anns)))
        .collect()
}
