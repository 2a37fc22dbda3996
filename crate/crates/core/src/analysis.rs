//! Dataset analytics: normalized weekly trends and percentage-stacked
//! breakdowns between record fields.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::corpus::{open, Category, DebunkRecord, MediaType, Veracity};
use crate::error::{Error, Result};

/// The Sunday on or before `date`.
pub fn week_start(date: NaiveDate) -> NaiveDate {
    date - Duration::days(i64::from(date.weekday().num_days_from_sunday()))
}

/// 100·count/max; all zeros when every count is zero.
pub fn normalize_series(counts: &[f64]) -> Vec<f64> {
    let max = counts.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| 100.0 * c / max).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub week_start: Vec<NaiveDate>,
    pub counts: Vec<u64>,
    pub normalized: Vec<f64>,
}

impl TrendSeries {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::InvalidArgument(format!("writing trend csv: {e}"));
        out.write_record(["week_start", "count", "normalized"]).map_err(err)?;
        for ((d, c), n) in self.week_start.iter().zip(&self.counts).zip(&self.normalized) {
            out.write_record([d.to_string(), c.to_string(), format!("{n:.4}")]).map_err(err)?;
        }
        out.flush().map_err(|e| err(e.into()))
    }
}

/// Weekly debunk counts over `[start, end]`, one bucket per Sunday-started
/// week, empty weeks included. Records outside the range are ignored.
pub fn weekly_trend(records: &[DebunkRecord], start: NaiveDate, end: NaiveDate) -> Result<TrendSeries> {
    if end < start {
        return Err(Error::InvalidArgument(format!("empty date range {start} .. {end}")));
    }
    let first = week_start(start);
    let n_weeks = ((week_start(end) - first).num_days() / 7 + 1) as usize;
    let mut counts = vec![0u64; n_weeks];
    for r in records {
        if r.debunk_date < start || r.debunk_date > end {
            continue;
        }
        counts[((week_start(r.debunk_date) - first).num_days() / 7) as usize] += 1;
    }
    let normalized = normalize_series(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
    Ok(TrendSeries {
        week_start: (0..n_weeks).map(|i| first + Duration::weeks(i as i64)).collect(),
        counts,
        normalized,
    })
}

/// Reads a week → value search-interest export. Lines that do not start
/// with an ISO date and a number (titles, headers, blanks) are skipped;
/// values such as "<1" are read as 0.
pub fn read_search_trends<R: Read>(reader: R, name: &str) -> Result<Vec<(NaiveDate, f64)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::parse(format!("{name}:{}", i + 1), e))?;
        let Some((date, value)) = line.split_once(',') else {
            continue;
        };
        let Ok(date) = NaiveDate::parse_from_str(date.trim(), "%Y-%m-%d") else {
            continue;
        };
        let value = value.trim().trim_matches('"');
        let v = if value.starts_with('<') {
            0.0
        } else {
            value
                .parse::<f64>()
                .map_err(|e| Error::parse(format!("{name}:{}", i + 1), e))?
        };
        out.push((date, v));
    }
    if out.is_empty() {
        return Err(Error::parse(name, "no week,value rows found"));
    }
    Ok(out)
}

pub fn load_search_trends(path: &Path) -> Result<Vec<(NaiveDate, f64)>> {
    read_search_trends(open(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Category,
    MediaType,
    Platform,
    Veracity,
    Language,
    Week,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Category,
        Dimension::MediaType,
        Dimension::Platform,
        Dimension::Veracity,
        Dimension::Language,
        Dimension::Week,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Category => "category",
            Dimension::MediaType => "media_type",
            Dimension::Platform => "platform",
            Dimension::Veracity => "veracity",
            Dimension::Language => "language",
            Dimension::Week => "week",
        }
    }

    /// Values a record takes in this dimension; several for multi-platform
    /// records, none when unset.
    pub fn values(self, r: &DebunkRecord) -> Vec<String> {
        match self {
            Dimension::Category => r.category.iter().map(|c| c.to_string()).collect(),
            Dimension::MediaType => r.media_type.iter().map(|m| m.to_string()).collect(),
            Dimension::Veracity => r.veracity.iter().map(|v| v.to_string()).collect(),
            Dimension::Language => r.language.iter().filter(|l| !l.is_empty()).cloned().collect(),
            Dimension::Platform => {
                let set: BTreeSet<&String> = r.platform.iter().filter(|p| !p.is_empty()).collect();
                set.into_iter().cloned().collect()
            }
            Dimension::Week => vec![week_start(r.debunk_date).to_string()],
        }
    }

    /// Declared value order for enumerated fields.
    fn domain(self) -> Option<Vec<String>> {
        fn names<T: ToString>(all: &[T]) -> Option<Vec<String>> {
            Some(all.iter().map(T::to_string).collect())
        }
        match self {
            Dimension::Category => names(Category::ALL),
            Dimension::MediaType => names(MediaType::ALL),
            Dimension::Veracity => names(Veracity::ALL),
            _ => None,
        }
    }
}

impl std::str::FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == key || (key == "media" && *d == Dimension::MediaType))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown dimension {s:?}")))
    }
}

pub const ALL_COLUMN: &str = "All";

/// Percentage-stacked table: each column (a value of `col_dim`, plus a
/// trailing "All") splits 100% across the values of `row_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownTable {
    pub row_dim: Dimension,
    pub col_dim: Dimension,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// rows × columns.
    pub counts: Vec<Vec<u64>>,
    pub percentages: Vec<Vec<f64>>,
    pub row_totals: Vec<u64>,
    /// Records lacking a value in either dimension.
    pub excluded_records: usize,
    /// Declared column values with no records.
    pub omitted_columns: Vec<String>,
}

fn ordered_values(dim: Dimension, seen: &HashMap<String, u64>) -> Vec<String> {
    match dim.domain() {
        Some(d) => d.into_iter().filter(|v| seen.contains_key(v)).collect(),
        None => {
            let mut v: Vec<String> = seen.keys().cloned().collect();
            v.sort();
            v
        }
    }
}

pub fn stacked_breakdown(records: &[DebunkRecord], row_dim: Dimension, col_dim: Dimension) -> Result<BreakdownTable> {
    let mut cells: HashMap<(String, String), u64> = HashMap::new();
    let mut row_seen: HashMap<String, u64> = HashMap::new();
    let mut col_seen: HashMap<String, u64> = HashMap::new();
    let mut excluded = 0;
    for r in records {
        let (rv, cv) = (row_dim.values(r), col_dim.values(r));
        if rv.is_empty() || cv.is_empty() {
            excluded += 1;
            continue;
        }
        for a in &rv {
            for b in &cv {
                *cells.entry((a.clone(), b.clone())).or_default() += 1;
                *row_seen.entry(a.clone()).or_default() += 1;
                *col_seen.entry(b.clone()).or_default() += 1;
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no record has both {} and {} set",
            row_dim.as_str(),
            col_dim.as_str()
        )));
    }
    let rows = ordered_values(row_dim, &row_seen);
    let mut columns = ordered_values(col_dim, &col_seen);
    let omitted_columns = col_dim
        .domain()
        .map(|d| d.into_iter().filter(|v| !col_seen.contains_key(v)).collect())
        .unwrap_or_default();

    let mut counts: Vec<Vec<u64>> = rows
        .iter()
        .map(|r| {
            columns
                .iter()
                .map(|c| cells.get(&(r.clone(), c.clone())).copied().unwrap_or(0))
                .collect()
        })
        .collect();
    let row_totals: Vec<u64> = counts.iter().map(|row| row.iter().sum()).collect();
    for (row, &t) in counts.iter_mut().zip(&row_totals) {
        row.push(t);
    }
    columns.push(ALL_COLUMN.to_string());
    let col_sums: Vec<u64> = (0..columns.len()).map(|j| counts.iter().map(|row| row[j]).sum()).collect();
    let percentages = counts
        .iter()
        .map(|row| row.iter().zip(&col_sums).map(|(&c, &s)| 100.0 * c as f64 / s as f64).collect())
        .collect();
    Ok(BreakdownTable {
        row_dim,
        col_dim,
        rows,
        columns,
        counts,
        percentages,
        row_totals,
        excluded_records: excluded,
        omitted_columns,
    })
}

impl BreakdownTable {
    /// Human-readable notices about excluded records and omitted columns.
    pub fn notices(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.excluded_records > 0 {
            out.push(format!(
                "{} record(s) excluded: {} or {} unset",
                self.excluded_records,
                self.row_dim.as_str(),
                self.col_dim.as_str()
            ));
        }
        for c in &self.omitted_columns {
            out.push(format!("column {c:?} omitted: no records"));
        }
        out
    }

    /// Percentages with the row value in the first column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::InvalidArgument(format!("writing breakdown csv: {e}"));
        let mut header = vec![format!("{}/{}", self.row_dim.as_str(), self.col_dim.as_str())];
        header.extend(self.columns.iter().cloned());
        out.write_record(&header).map_err(err)?;
        for (r, row) in self.rows.iter().zip(&self.percentages) {
            let mut rec = vec![r.clone()];
            rec.extend(row.iter().map(|p| format!("{p:.2}")));
            out.write_record(&rec).map_err(err)?;
        }
        out.flush().map_err(|e| err(e.into()))
    }
}

/// Records per category, in declared category order; unset categories skipped.
pub fn category_totals(records: &[DebunkRecord]) -> Vec<(Category, u64)> {
    let mut counts: BTreeMap<Category, u64> = Category::ALL.iter().map(|&c| (c, 0)).collect();
    for c in records.iter().filter_map(|r| r.category) {
        *counts.entry(c).or_default() += 1;
    }
    Category::ALL.iter().map(|c| (*c, counts[c])).collect()
}
