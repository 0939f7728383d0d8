//! Publication records: parsing, window folding and corpus loading.
//!
//! A [`Corpus`] is immutable once loaded. Every record in it is an article,
//! lies inside its topic's publication window and is absent from the
//! exclusion list.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::country::{self, CountryCode};

/// CSV header, in the only accepted column order.
pub const CSV_HEADER: [&str; 6] = [
    "id",
    "topic",
    "year",
    "countries",
    "citations_total_or_byyear",
    "doc_type",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate id {id:?} (first seen on line {first_line})")]
    DuplicateId {
        id: String,
        line: usize,
        first_line: usize,
    },
    #[error("line {line}: record {id:?} has an empty country set")]
    EmptyCountries { line: usize, id: String },
    #[error("invalid year range {0:?}: expected Y1-Y2 with Y1 <= Y2")]
    InvalidRange(String),
    #[error("aggregate {name:?}: {reason}")]
    InvalidAggregate { name: String, reason: String },
    #[error("duplicate aggregate name {0:?}")]
    DuplicateAggregate(String),
    #[error("topic window override references unknown topic {0:?}")]
    UnknownOverrideTopic(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CorpusError {
    fn from(e: std::io::Error) -> Self {
        CorpusError::Io(e.to_string())
    }
}

/// Inclusive range of years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    start: i32,
    end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Result<Self, CorpusError> {
        if start > end {
            return Err(CorpusError::InvalidRange(format!("{start}-{end}")));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> i32 {
        self.start
    }

    pub fn end(&self) -> i32 {
        self.end
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }
}

impl FromStr for YearRange {
    type Err = CorpusError;

    /// Accepts `2019-2022`, `2019–2022` or a single year `2017`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::InvalidRange(s.to_string());
        let s = s.trim();
        let (a, b) = match s.split_once(['-', '–']) {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s, s),
        };
        let start = a.parse().map_err(|_| bad())?;
        let end = b.parse().map_err(|_| bad())?;
        YearRange::new(start, end).map_err(|_| bad())
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}–{}", self.start, self.end)
    }
}

/// Publication and citation windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowConfig {
    pub publication_years: YearRange,
    pub topic_overrides: BTreeMap<String, YearRange>,
    pub citation_years: YearRange,
}

impl WindowConfig {
    pub fn new(publication_years: YearRange, citation_years: YearRange) -> Self {
        Self {
            publication_years,
            topic_overrides: BTreeMap::new(),
            citation_years,
        }
    }

    pub fn with_override(mut self, topic: impl Into<String>, years: YearRange) -> Self {
        self.topic_overrides.insert(topic.into(), years);
        self
    }

    pub fn publication_years_for(&self, topic: &str) -> YearRange {
        self.topic_overrides
            .get(topic)
            .copied()
            .unwrap_or(self.publication_years)
    }
}

impl Default for WindowConfig {
    /// Publications 2014–2017, citations 2019–2022.
    fn default() -> Self {
        Self::new(
            YearRange {
                start: 2014,
                end: 2017,
            },
            YearRange {
                start: 2019,
                end: 2022,
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocType {
    Article,
    Other,
}

impl DocType {
    pub fn as_str(&self) -> &'static str {
        match self {
            DocType::Article => "article",
            DocType::Other => "other",
        }
    }
}

/// One paper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublicationRecord {
    pub id: String,
    pub topic: String,
    pub year: i32,
    pub countries: BTreeSet<CountryCode>,
    pub citations_by_year: BTreeMap<i32, u64>,
    pub doc_type: DocType,
}

/// Citations received inside the citation window.
pub fn window_citations(record: &PublicationRecord, window: &WindowConfig) -> u64 {
    let years = window.citation_years;
    record
        .citations_by_year
        .range(years.start()..=years.end())
        .map(|(_, c)| *c)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Jsonl,
    Csv,
}

impl FromStr for RecordFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(RecordFormat::Jsonl),
            "csv" => Ok(RecordFormat::Csv),
            other => Err(format!(
                "unknown record format {other:?} (expected jsonl or csv)"
            )),
        }
    }
}

/// Everything a lenient parse found: the good records and every error.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<PublicationRecord>,
    pub errors: Vec<CorpusError>,
}

/// Parses a stream strictly, failing on the first error.
///
/// Plain citation totals in CSV are credited to the first year of the
/// default citation window; use [`parse_records_in`] to choose the window.
pub fn parse_records(
    reader: impl Read,
    format: RecordFormat,
) -> Result<Vec<PublicationRecord>, CorpusError> {
    parse_records_in(reader, format, &WindowConfig::default())
}

pub fn parse_records_in(
    reader: impl Read,
    format: RecordFormat,
    window: &WindowConfig,
) -> Result<Vec<PublicationRecord>, CorpusError> {
    let outcome = parse_all(reader, format, window)?;
    match outcome.errors.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(outcome.records),
    }
}

/// Parses a whole stream, collecting per-line errors instead of stopping.
///
/// Only I/O failures and a bad CSV header abort the parse.
pub fn parse_all(
    reader: impl Read,
    format: RecordFormat,
    window: &WindowConfig,
) -> Result<ParseOutcome, CorpusError> {
    let rows = match format {
        RecordFormat::Jsonl => parse_jsonl_rows(reader)?,
        RecordFormat::Csv => parse_csv_rows(reader, window)?,
    };

    let mut outcome = ParseOutcome::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line, row) in rows {
        let record = match row {
            Ok(r) => r,
            Err(e) => {
                outcome.errors.push(e);
                continue;
            }
        };
        if record.countries.is_empty() {
            outcome.errors.push(CorpusError::EmptyCountries {
                line,
                id: record.id,
            });
            continue;
        }
        if let Some(&first_line) = seen.get(&record.id) {
            outcome.errors.push(CorpusError::DuplicateId {
                id: record.id,
                line,
                first_line,
            });
            continue;
        }
        seen.insert(record.id.clone(), line);
        outcome.records.push(record);
    }
    Ok(outcome)
}

type Row = (usize, Result<PublicationRecord, CorpusError>);

fn parse_jsonl_rows(reader: impl Read) -> Result<Vec<Row>, CorpusError> {
    let reader = std::io::BufReader::new(reader);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let parsed =
            serde_json::from_str::<PublicationRecord>(text).map_err(|e| CorpusError::Malformed {
                line: line_no,
                reason: e.to_string(),
            });
        rows.push((line_no, parsed));
    }
    Ok(rows)
}

fn parse_csv_rows(reader: impl Read, window: &WindowConfig) -> Result<Vec<Row>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| CorpusError::Malformed {
        line: 1,
        reason: e.to_string(),
    })?;
    let header: Vec<&str> = header.iter().collect();
    if header != CSV_HEADER {
        return Err(CorpusError::Malformed {
            line: 1,
            reason: format!(
                "expected header {:?}, found {:?}",
                CSV_HEADER.join(","),
                header.join(",")
            ),
        });
    }

    let mut rows = Vec::new();
    for (idx, result) in rdr.records().enumerate() {
        let fallback_line = idx + 2;
        let row = match result {
            Ok(row) => {
                let line = row
                    .position()
                    .map(|p| p.line() as usize)
                    .unwrap_or(fallback_line);
                (
                    line,
                    csv_record(&row, window)
                        .map_err(|reason| CorpusError::Malformed { line, reason }),
                )
            }
            Err(e) => {
                let line = e
                    .position()
                    .map(|p| p.line() as usize)
                    .unwrap_or(fallback_line);
                (
                    line,
                    Err(CorpusError::Malformed {
                        line,
                        reason: e.to_string(),
                    }),
                )
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

fn csv_record(row: &csv::StringRecord, window: &WindowConfig) -> Result<PublicationRecord, String> {
    let field = |i: usize| row.get(i).unwrap_or("").trim();
    let id = field(0);
    if id.is_empty() {
        return Err("empty id".into());
    }
    let year = field(2)
        .parse::<i32>()
        .map_err(|_| format!("invalid year {:?}", field(2)))?;
    let countries = field(3)
        .split(';')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| c.parse::<CountryCode>().map_err(|e| e.to_string()))
        .collect::<Result<BTreeSet<_>, _>>()?;
    let citations_by_year = parse_citation_cell(field(4), window)?;
    let doc_type = match field(5) {
        "article" => DocType::Article,
        "other" => DocType::Other,
        other => return Err(format!("invalid doc_type {other:?}")),
    };
    Ok(PublicationRecord {
        id: id.to_string(),
        topic: field(1).to_string(),
        year,
        countries,
        citations_by_year,
        doc_type,
    })
}

/// `2019:3|2020:1`, an empty cell, or a plain total credited to the first citation year.
fn parse_citation_cell(cell: &str, window: &WindowConfig) -> Result<BTreeMap<i32, u64>, String> {
    let mut map = BTreeMap::new();
    if cell.is_empty() {
        return Ok(map);
    }
    if !cell.contains(':') {
        let total = cell
            .parse::<u64>()
            .map_err(|_| format!("invalid citation total {cell:?}"))?;
        map.insert(window.citation_years.start(), total);
        return Ok(map);
    }
    for part in cell.split('|') {
        let (y, c) = part
            .split_once(':')
            .ok_or_else(|| format!("invalid citation entry {part:?}"))?;
        let year = y
            .trim()
            .parse::<i32>()
            .map_err(|_| format!("invalid citation year {y:?}"))?;
        let count = c
            .trim()
            .parse::<u64>()
            .map_err(|_| format!("invalid citation count {c:?}"))?;
        if map.insert(year, count).is_some() {
            return Err(format!("citation year {year} repeated"));
        }
    }
    Ok(map)
}

pub fn write_jsonl<'a>(
    records: impl IntoIterator<Item = &'a PublicationRecord>,
    mut out: impl Write,
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_csv<'a>(
    records: impl IntoIterator<Item = &'a PublicationRecord>,
    out: impl Write,
) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let cites = r
            .citations_by_year
            .iter()
            .map(|(y, c)| format!("{y}:{c}"))
            .collect::<Vec<_>>()
            .join("|");
        w.write_record([
            r.id.as_str(),
            r.topic.as_str(),
            &r.year.to_string(),
            &country::join_codes(&r.countries),
            &cites,
            r.doc_type.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an exclusion list: one id per line, blank lines ignored.
pub fn parse_exclusions(reader: impl Read) -> Result<BTreeSet<String>, CorpusError> {
    let mut ids = BTreeSet::new();
    for line in std::io::BufReader::new(reader).lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() {
            ids.insert(id.to_string());
        }
    }
    Ok(ids)
}

/// Named country sets such as the EU.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Aggregates(BTreeMap<String, BTreeSet<CountryCode>>);

impl Aggregates {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Just the EU27 aggregate, named `EU`.
    pub fn builtin() -> Self {
        let mut map = BTreeMap::new();
        map.insert(country::EU_AGGREGATE.to_string(), country::eu27());
        Self(map)
    }

    pub fn from_pairs<I, S, C>(pairs: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (S, Vec<C>)>,
        S: Into<String>,
        C: AsRef<str>,
    {
        let mut map = BTreeMap::new();
        for (name, codes) in pairs {
            let name = name.into();
            let invalid = |reason: String| CorpusError::InvalidAggregate {
                name: name.clone(),
                reason,
            };
            if name.trim().is_empty() {
                return Err(invalid("empty name".into()));
            }
            if country::is_country_name(&name) {
                return Err(invalid("name collides with a country".into()));
            }
            let members = codes
                .iter()
                .map(|c| c.as_ref().parse::<CountryCode>())
                .collect::<Result<BTreeSet<_>, _>>()
                .map_err(|e| invalid(format!("unknown country code {:?}", e.0)))?;
            if members.is_empty() {
                return Err(invalid("no member countries".into()));
            }
            if map.contains_key(&name) {
                return Err(CorpusError::DuplicateAggregate(name));
            }
            map.insert(name, members);
        }
        Ok(Self(map))
    }

    /// Parses the aggregates JSON file (`{"name": ["AT", ...]}`), rejecting repeated names.
    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let pairs: OrderedPairs =
            serde_json::from_str(text).map_err(|e| CorpusError::Malformed {
                line: e.line(),
                reason: e.to_string(),
            })?;
        Self::from_pairs(pairs.0)
    }

    pub fn get(&self, name: &str) -> Option<&BTreeSet<CountryCode>> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<CountryCode>)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// JSON object read as a list so repeated keys are visible.
struct OrderedPairs(Vec<(String, Vec<String>)>);

impl<'de> Deserialize<'de> for OrderedPairs {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = OrderedPairs;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of aggregate name to country codes")
            }
            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                mut m: A,
            ) -> Result<Self::Value, A::Error> {
                let mut pairs = Vec::new();
                while let Some(entry) = m.next_entry::<String, Vec<String>>()? {
                    pairs.push(entry);
                }
                Ok(OrderedPairs(pairs))
            }
        }
        d.deserialize_map(V)
    }
}

/// Per-cause drop counts from [`load`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadDiagnostics {
    pub input: usize,
    pub filtered_doctype: usize,
    pub filtered_excluded: usize,
    pub filtered_year: usize,
    /// Topics present in the input, including ones that lost every record.
    pub input_topics: BTreeSet<String>,
}

impl LoadDiagnostics {
    pub fn dropped(&self) -> usize {
        self.filtered_doctype + self.filtered_excluded + self.filtered_year
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    records: Vec<PublicationRecord>,
    topics: BTreeSet<String>,
    window: WindowConfig,
    aggregates: Aggregates,
    excluded_ids: BTreeSet<String>,
    diagnostics: LoadDiagnostics,
}

/// Filters parsed records into a corpus.
///
/// A record is dropped for the first matching cause, checked in this order:
/// non-article, excluded id, publication year outside its topic window.
pub fn load(
    records: Vec<PublicationRecord>,
    window: WindowConfig,
    aggregates: Aggregates,
    excluded_ids: BTreeSet<String>,
) -> Result<Corpus, CorpusError> {
    let mut diagnostics = LoadDiagnostics {
        input: records.len(),
        ..Default::default()
    };
    diagnostics.input_topics = records.iter().map(|r| r.topic.clone()).collect();
    if let Some(topic) = window
        .topic_overrides
        .keys()
        .find(|t| !diagnostics.input_topics.contains(*t))
    {
        return Err(CorpusError::UnknownOverrideTopic(topic.clone()));
    }

    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        if r.countries.is_empty() {
            return Err(CorpusError::EmptyCountries {
                line: i + 1,
                id: r.id.clone(),
            });
        }
        if let Some(first) = seen.insert(&r.id, i + 1) {
            return Err(CorpusError::DuplicateId {
                id: r.id.clone(),
                line: i + 1,
                first_line: first,
            });
        }
    }

    let kept: Vec<PublicationRecord> = records
        .into_iter()
        .filter(|r| {
            if r.doc_type != DocType::Article {
                diagnostics.filtered_doctype += 1;
                false
            } else if excluded_ids.contains(&r.id) {
                diagnostics.filtered_excluded += 1;
                false
            } else if !window.publication_years_for(&r.topic).contains(r.year) {
                diagnostics.filtered_year += 1;
                false
            } else {
                true
            }
        })
        .collect();

    Ok(Corpus {
        topics: kept.iter().map(|r| r.topic.clone()).collect(),
        records: kept,
        window,
        aggregates,
        excluded_ids,
        diagnostics,
    })
}

impl Corpus {
    pub fn records(&self) -> &[PublicationRecord] {
        &self.records
    }

    pub fn topics(&self) -> &BTreeSet<String> {
        &self.topics
    }

    pub fn topic_records<'a>(
        &'a self,
        topic: &'a str,
    ) -> impl Iterator<Item = &'a PublicationRecord> + 'a {
        self.records.iter().filter(move |r| r.topic == topic)
    }

    pub fn window(&self) -> &WindowConfig {
        &self.window
    }

    pub fn aggregates(&self) -> &Aggregates {
        &self.aggregates
    }

    pub fn excluded_ids(&self) -> &BTreeSet<String> {
        &self.excluded_ids
    }

    pub fn diagnostics(&self) -> &LoadDiagnostics {
        &self.diagnostics
    }

    /// Smallest and largest publication year among loaded records.
    pub fn year_span(&self) -> Option<(i32, i32)> {
        let min = self.records.iter().map(|r| r.year).min()?;
        let max = self.records.iter().map(|r| r.year).max()?;
        Some((min, max))
    }

    pub fn into_records(self) -> Vec<PublicationRecord> {
        self.records
    }
}
