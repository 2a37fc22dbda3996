//! Normalization of free-text veracity and platform fields, and media-type
//! assignment by prioritized keyword rules.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::corpus::{tokenize, DebunkRecord, MediaType, RawDebunk, Veracity};
use crate::error::{Error, Result};

const DEFAULT_VERACITY: &str = include_str!("../data/veracity_map.json");
const DEFAULT_PLATFORM: &str = include_str!("../data/platform_map.json");
const DEFAULT_MEDIA_RULES: &str = include_str!("../data/media_rules.json");

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Ordered (standard value, raw word list) pairs. Raw entries may be
/// multi-word phrases; each standard value also matches its own name.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingList {
    values: Vec<String>,
    phrases: HashMap<Vec<String>, usize>,
    longest: usize,
}

impl MappingList {
    pub fn new(entries: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut values: Vec<String> = Vec::with_capacity(entries.len());
        let mut phrases: HashMap<Vec<String>, usize> = HashMap::new();
        for (standard, raws) in entries {
            let idx = values.len();
            let own = tokenize(&standard);
            for raw in raws.iter().map(|r| tokenize(r)).chain(std::iter::once(own)) {
                if raw.is_empty() {
                    return Err(Error::Validation(format!(
                        "empty raw word under standard value {standard:?}"
                    )));
                }
                match phrases.get(&raw) {
                    Some(&prev) if prev != idx => {
                        return Err(Error::MappingConflict {
                            word: raw.join(" "),
                            first: values[prev].clone(),
                            second: standard,
                        });
                    }
                    _ => {
                        phrases.insert(raw, idx);
                    }
                }
            }
            values.push(standard);
        }
        let longest = phrases.keys().map(Vec::len).max().unwrap_or(0);
        Ok(MappingList {
            values,
            phrases,
            longest,
        })
    }

    /// JSON object `{standard_value: [raw words...]}`; key order is kept.
    pub fn from_json(text: &str) -> Result<Self> {
        let obj: Map<String, Value> =
            serde_json::from_str(text).map_err(|e| Error::parse("mapping list", e))?;
        let mut entries = Vec::with_capacity(obj.len());
        for (k, v) in obj {
            let raws: Vec<String> = serde_json::from_value(v)
                .map_err(|e| Error::parse(format!("mapping list entry {k:?}"), e))?;
            entries.push((k, raws));
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }

    pub fn default_veracity() -> Self {
        Self::from_json(DEFAULT_VERACITY).expect("shipped veracity list is valid")
    }

    pub fn default_platform() -> Self {
        Self::from_json(DEFAULT_PLATFORM).expect("shipped platform list is valid")
    }

    pub fn standard_values(&self) -> &[String] {
        &self.values
    }
}

/// Map free text onto standard values: longest raw phrase wins at each
/// position, output in first-occurrence order without duplicates.
pub fn normalize_field(text: &str, mapping: &MappingList) -> Vec<String> {
    let tokens = tokenize(text);
    let mut found: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let max = mapping.longest.min(tokens.len() - i);
        let hit = (1..=max)
            .rev()
            .find_map(|len| mapping.phrases.get(&tokens[i..i + len]).map(|&v| (v, len)));
        match hit {
            Some((v, len)) => {
                if !found.contains(&v) {
                    found.push(v);
                }
                i += len;
            }
            None => i += 1,
        }
    }
    found.into_iter().map(|v| mapping.values[v].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PatternRuleSpec", into = "PatternRuleSpec")]
pub struct PatternRule {
    phrase: Vec<String>,
    pub media_type: MediaType,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PatternRuleSpec {
    pattern: String,
    media_type: MediaType,
}

impl TryFrom<PatternRuleSpec> for PatternRule {
    type Error = Error;

    fn try_from(spec: PatternRuleSpec) -> Result<Self> {
        PatternRule::new(&spec.pattern, spec.media_type)
    }
}

impl From<PatternRule> for PatternRuleSpec {
    fn from(rule: PatternRule) -> Self {
        PatternRuleSpec {
            pattern: rule.phrase.join(" "),
            media_type: rule.media_type,
        }
    }
}

impl PatternRule {
    pub fn new(pattern: &str, media_type: MediaType) -> Result<Self> {
        let phrase = tokenize(pattern);
        if phrase.is_empty() {
            return Err(Error::Validation(format!("empty media pattern {pattern:?}")));
        }
        Ok(PatternRule { phrase, media_type })
    }

    /// Case-insensitive whole-word phrase match.
    pub fn matches(&self, tokens: &[String]) -> bool {
        tokens.windows(self.phrase.len()).any(|w| w == self.phrase.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaRuleSet {
    pub platform_rules: HashMap<String, MediaType>,
    pub claim_patterns: Vec<PatternRule>,
    pub explanation_patterns: Vec<PatternRule>,
    pub sourcepage_patterns: Vec<PatternRule>,
}

impl MediaRuleSet {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("media rules", e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }

    pub fn platform_media(&self, platform: &str) -> Option<MediaType> {
        self.platform_rules
            .iter()
            .find(|(p, _)| p.eq_ignore_ascii_case(platform.trim()))
            .map(|(_, &m)| m)
    }
}

impl Default for MediaRuleSet {
    fn default() -> Self {
        Self::from_json(DEFAULT_MEDIA_RULES).expect("shipped media rules are valid")
    }
}

fn first_pattern(rules: &[PatternRule], text: &str) -> Option<MediaType> {
    let tokens = tokenize(text);
    rules.iter().find(|r| r.matches(&tokens)).map(|r| r.media_type)
}

/// Strict priority: platform rule, then the first matching claim pattern,
/// then explanation, then source page text.
pub fn extract_media_type(
    record: &DebunkRecord,
    source_text: Option<&str>,
    rules: &MediaRuleSet,
) -> Option<MediaType> {
    record
        .platform
        .iter()
        .find_map(|p| rules.platform_media(p))
        .or_else(|| first_pattern(&rules.claim_patterns, &record.claim))
        .or_else(|| first_pattern(&rules.explanation_patterns, &record.explanation))
        .or_else(|| source_text.and_then(|t| first_pattern(&rules.sourcepage_patterns, t)))
}

#[derive(Debug, Clone)]
pub struct Enricher {
    pub veracity: MappingList,
    pub platform: MappingList,
    pub media: MediaRuleSet,
}

impl Default for Enricher {
    fn default() -> Self {
        Enricher {
            veracity: MappingList::default_veracity(),
            platform: MappingList::default_platform(),
            media: MediaRuleSet::default(),
        }
    }
}

impl Enricher {
    /// Turn a raw export row into a record with normalized veracity and
    /// platform and an extracted media type.
    pub fn enrich(&self, raw: RawDebunk, locus: &str, source_text: Option<&str>) -> Result<DebunkRecord> {
        let veracity = raw
            .veracity
            .as_deref()
            .map(|v| normalize_field(v, &self.veracity))
            .and_then(|vals| vals.into_iter().find_map(|v| v.parse::<Veracity>().ok()));
        let platform = raw
            .platform
            .as_ref()
            .map(|p| normalize_field(&p.as_text(), &self.platform))
            .unwrap_or_default();
        let mut record = raw.into_record(locus)?;
        record.veracity = veracity;
        record.platform = platform;
        let extracted = extract_media_type(&record, source_text, &self.media);
        record.media_type = extracted.or(record.media_type);
        Ok(record)
    }
}
