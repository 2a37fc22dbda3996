//! Debunk records and their on-disk formats (JSON-lines and CSV).

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercase and drop everything except ASCII alphanumerics, so that
/// "Partially False", "partially_false" and "PartiallyFalse" compare equal.
fn squash(s: &str) -> String {
    s.chars()
        .filter(char::is_ascii_alphanumeric)
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

macro_rules! labelled_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal $(| $alias:literal)*),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $label),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let key = squash(s);
                $(
                    if key == squash($label) $(|| key == squash($alias))* {
                        return Ok($name::$variant);
                    }
                )+
                Err(Error::Validation(format!(
                    "{:?} is not a valid {}", s, stringify!($name)
                )))
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

labelled_enum! {
    /// Fact-checker verdict after normalization.
    Veracity {
        False => "False",
        PartiallyFalse => "PartiallyFalse" | "Partially False" | "Part. False",
        Misleading => "Misleading",
        NoEvidence => "NoEvidence" | "No Evidence" | "No Evid.",
        Other => "Other",
    }
}

labelled_enum! {
    /// Main carrier of the false content.
    MediaType {
        Text => "Text",
        Image => "Image",
        Video => "Video",
        Audio => "Audio",
        NotClear => "NotClear" | "Not Clear",
    }
}

labelled_enum! {
    /// The ten disinformation categories.
    Category {
        PubAuth => "PubAuth" | "PubAuthAction" | "Public authority" | "Public authority action",
        CommSpread => "CommSpread" | "Community spread" | "Community spread and impact",
        MedAdv => "MedAdv" | "GenMedAdv" | "Medical advice"
            | "Medical advice, self-treatments, and virus effects",
        PromActs => "PromActs" | "Prominent actors",
        Consp => "Consp" | "Conspiracies" | "Conspiracy",
        VirTrans => "VirTrans" | "Virus transmission",
        VirOrgn => "VirOrgn" | "Virus origins" | "Virus origins and properties",
        PubRec => "PubRec" | "PubPrep" | "Public reaction",
        Vacc => "Vacc" | "Vaccines" | "Vaccines, medical treatments, and tests",
        None => "None" | "Other",
    }
}

/// One debunked claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebunkRecord {
    pub id: String,
    pub debunk_date: NaiveDate,
    pub claim: String,
    pub explanation: String,
    pub source_link: String,
    pub veracity: Option<Veracity>,
    pub platform: Vec<String>,
    pub language: Option<String>,
    pub media_type: Option<MediaType>,
    pub category: Option<Category>,
}

impl DebunkRecord {
    /// Claim and explanation joined by a single space.
    pub fn text(&self) -> String {
        format!("{} {}", self.claim, self.explanation)
    }
}

/// Platform column: a list in JSON, or a `;`/`,` separated string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawPlatform {
    List(Vec<String>),
    Text(String),
}

impl RawPlatform {
    pub fn as_text(&self) -> String {
        match self {
            RawPlatform::List(v) => v.join(", "),
            RawPlatform::Text(s) => s.clone(),
        }
    }

    fn split(&self) -> Vec<String> {
        let parts: Vec<&str> = match self {
            RawPlatform::List(v) => v.iter().map(String::as_str).collect(),
            RawPlatform::Text(s) => s.split([';', ',']).collect(),
        };
        parts
            .into_iter()
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::to_string)
            .collect()
    }
}

/// A record as exported, before validation. Every field is free text.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawDebunk {
    pub id: String,
    pub debunk_date: String,
    pub claim: String,
    #[serde(default)]
    pub explanation: String,
    #[serde(default)]
    pub source_link: String,
    #[serde(default)]
    pub veracity: Option<String>,
    #[serde(default)]
    pub platform: Option<RawPlatform>,
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub media_type: Option<String>,
    #[serde(default)]
    pub category: Option<String>,
}

fn nonblank(s: &Option<String>) -> Option<&str> {
    s.as_deref().map(str::trim).filter(|s| !s.is_empty())
}

impl RawDebunk {
    /// Validate required fields; optional fields that fail to parse are left unset.
    pub fn into_record(self, locus: &str) -> Result<DebunkRecord> {
        if self.id.trim().is_empty() {
            return Err(Error::parse(locus, "empty id"));
        }
        if self.claim.trim().is_empty() {
            return Err(Error::parse(locus, format!("record {:?} has an empty claim", self.id)));
        }
        let debunk_date = NaiveDate::parse_from_str(self.debunk_date.trim(), "%Y-%m-%d")
            .map_err(|e| {
                Error::parse(locus, format!("bad debunk_date {:?}: {e}", self.debunk_date))
            })?;
        Ok(DebunkRecord {
            debunk_date,
            veracity: nonblank(&self.veracity).and_then(|s| s.parse().ok()),
            platform: self.platform.as_ref().map(RawPlatform::split).unwrap_or_default(),
            language: nonblank(&self.language).map(str::to_string),
            media_type: nonblank(&self.media_type).and_then(|s| s.parse().ok()),
            category: nonblank(&self.category).and_then(|s| s.parse().ok()),
            id: self.id,
            claim: self.claim,
            explanation: self.explanation,
            source_link: self.source_link,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DebunkFormat {
    JsonLines,
    Csv,
}

impl DebunkFormat {
    /// Guess from the file extension; anything other than `.csv` is JSON-lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DebunkFormat::Csv,
            _ => DebunkFormat::JsonLines,
        }
    }
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Read JSON-lines into `T`, skipping blank lines. Errors carry `name:line`.
pub(crate) fn read_jsonl<T, R>(reader: R, name: &str) -> Result<Vec<(String, T)>>
where
    T: serde::de::DeserializeOwned,
    R: Read,
{
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let locus = format!("{name}:{}", i + 1);
        let line = line.map_err(|e| Error::parse(&locus, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::parse(&locus, e))?;
        out.push((locus, value));
    }
    Ok(out)
}

pub fn read_raw_debunks<R: Read>(
    reader: R,
    format: DebunkFormat,
    name: &str,
) -> Result<Vec<(String, RawDebunk)>> {
    match format {
        DebunkFormat::JsonLines => read_jsonl(reader, name),
        DebunkFormat::Csv => {
            let mut rdr = csv::Reader::from_reader(reader);
            let mut out = Vec::new();
            for (i, row) in rdr.deserialize::<RawDebunk>().enumerate() {
                let locus = format!("{name}:record {}", i + 1);
                let raw = row.map_err(|e| Error::parse(&locus, e))?;
                out.push((locus, raw));
            }
            Ok(out)
        }
    }
}

/// Parse and validate a debunk collection, rejecting duplicate ids.
pub fn read_debunks<R: Read>(reader: R, format: DebunkFormat, name: &str) -> Result<Vec<DebunkRecord>> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (locus, raw) in read_raw_debunks(reader, format, name)? {
        let record = raw.into_record(&locus)?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_debunks(path: &Path, format: DebunkFormat) -> Result<Vec<DebunkRecord>> {
    read_debunks(open(path)?, format, &path.display().to_string())
}
