//! Envelope file ingestion (JSON and CSV) and explicit bin files.
//!
//! JSON layout (schema version 1):
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "characteristics": [
//!     {"id": "location", "kind": "categorical"},
//!     {"id": "time", "kind": "ordered", "order": "date-year", "resolution": "calendar year"}
//!   ],
//!   "studies": [
//!     {"study_id": "S1", "sample_size": 3,
//!      "ranges": {"location": ["area 1", "area 2"], "time": "2021..2022"},
//!      "effect": 0.4, "std_error": 0.1, "arms": {"control": 2, "treatment": 1}}
//!   ]
//! }
//! ```
//!
//! CSV layout: a header naming `study_id`, `sample_size`, one column per
//! characteristic written `id:kind` (`categorical`, `integer`, `date-year`,
//! `date-month`, `date-day`), and optionally `effect`, `std_error` and
//! `arm:NAME` columns. Cells hold `;`-separated atoms or `start..end`
//! intervals; an empty cell means the study does not report that
//! characteristic.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::atoms::{Kind, OrderKey};
use crate::error::{Error, Result};
use crate::model::{
    CharacteristicDecl, PartitionScheme, ReportedRange, StudyEnvelope, StudyExtras, Synthesis,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    Json,
    Csv,
}

impl InputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!("unknown input format `{other}`"))),
        }
    }

    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::Json,
        }
    }
}

/// What to do when a study omits a characteristic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MissingPolicy {
    #[default]
    Error,
    /// Treat the missing range as the full domain of that characteristic.
    FullRange,
}

impl MissingPolicy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(Self::Error),
            "full-range" => Ok(Self::FullRange),
            other => Err(Error::Config(format!("unknown missing-range policy `{other}`"))),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeFile {
    schema_version: u32,
    characteristics: Vec<CharacteristicDecl>,
    studies: Vec<StudyRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyRow {
    study_id: String,
    sample_size: u64,
    #[serde(default)]
    ranges: BTreeMap<String, RangeSpec>,
    #[serde(default)]
    effect: Option<f64>,
    #[serde(default)]
    std_error: Option<f64>,
    #[serde(default)]
    arms: BTreeMap<String, u64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RangeSpec {
    One(Token),
    Many(Vec<Token>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Token {
    Str(String),
    Int(i64),
}

impl Token {
    fn text(&self) -> String {
        match self {
            Token::Str(s) => s.clone(),
            Token::Int(i) => i.to_string(),
        }
    }
}

/// A study before missing ranges are resolved.
struct PartialStudy {
    study_id: String,
    sample_size: u64,
    line: Option<usize>,
    ranges: BTreeMap<String, Vec<String>>,
    extras: StudyExtras,
}

fn at_line(line: Option<usize>, e: Error) -> Error {
    match (e, line) {
        (Error::Format { message, line: None, column }, Some(l)) => Error::Format {
            message,
            line: Some(l),
            column,
        },
        (Error::Schema(message), Some(l)) => Error::Format {
            message,
            line: Some(l),
            column: None,
        },
        (e, _) => e,
    }
}

/// 1-based line of the `i`-th `"study_id"` key, used to point schema errors
/// at the offending row.
fn study_lines(text: &str) -> Vec<usize> {
    text.lines()
        .enumerate()
        .flat_map(|(l, line)| std::iter::repeat_n(l + 1, line.matches("\"study_id\"").count()))
        .collect()
}

fn expand_all(decl: &CharacteristicDecl, tokens: &[String]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for t in tokens {
        out.extend(decl.expand(t)?);
    }
    Ok(out)
}

fn resolve(
    decls: Vec<CharacteristicDecl>,
    rows: Vec<PartialStudy>,
    policy: MissingPolicy,
) -> Result<Synthesis> {
    for d in &decls {
        d.validate()?;
    }
    for r in &rows {
        if let Some(unknown) = r.ranges.keys().find(|k| !decls.iter().any(|d| &d.id == *k)) {
            return Err(at_line(
                r.line,
                Error::Schema(format!(
                    "study `{}` reports undeclared characteristic `{unknown}`",
                    r.study_id
                )),
            ));
        }
    }
    let mut studies: Vec<StudyEnvelope> = rows
        .iter()
        .map(|r| StudyEnvelope {
            study_id: r.study_id.clone(),
            sample_size: r.sample_size,
            ranges: Vec::new(),
            extras: r.extras.clone(),
        })
        .collect();
    for decl in &decls {
        let mut full: Option<BTreeSet<String>> = None;
        for (row, study) in rows.iter().zip(studies.iter_mut()) {
            let atoms: BTreeSet<String> = match row.ranges.get(&decl.id) {
                Some(tokens) => expand_all(decl, tokens)
                    .map_err(|e| {
                        at_line(
                            row.line,
                            Error::Schema(format!("study `{}`, `{}`: {e}", row.study_id, decl.id)),
                        )
                    })?
                    .into_iter()
                    .collect(),
                None => match policy {
                    MissingPolicy::Error => {
                        return Err(at_line(
                            row.line,
                            Error::Schema(format!(
                                "study `{}` is missing characteristic `{}`",
                                row.study_id, decl.id
                            )),
                        ))
                    }
                    MissingPolicy::FullRange => full
                        .get_or_insert_with(|| full_range(decl, &rows))
                        .clone(),
                },
            };
            study.ranges.push(ReportedRange {
                characteristic: decl.id.clone(),
                atoms,
            });
        }
    }
    Synthesis::new(decls, studies)
}

/// Declared atoms if any, otherwise the union of what other studies report.
fn full_range(decl: &CharacteristicDecl, rows: &[PartialStudy]) -> BTreeSet<String> {
    if !decl.atoms.is_empty() {
        return decl.atoms.iter().cloned().collect();
    }
    rows.iter()
        .filter_map(|r| r.ranges.get(&decl.id))
        .flat_map(|tokens| expand_all(decl, tokens).unwrap_or_default())
        .collect()
}

pub fn parse_json(text: &str, policy: MissingPolicy) -> Result<Synthesis> {
    let file: EnvelopeFile = serde_json::from_str(text).map_err(|e| Error::Format {
        message: e.to_string(),
        line: Some(e.line()),
        column: Some(e.column()),
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::format(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    let lines = study_lines(text);
    let rows = file
        .studies
        .into_iter()
        .enumerate()
        .map(|(i, r)| PartialStudy {
            study_id: r.study_id,
            sample_size: r.sample_size,
            line: lines.get(i).copied(),
            ranges: r
                .ranges
                .into_iter()
                .map(|(k, spec)| {
                    let tokens = match spec {
                        RangeSpec::One(t) => vec![t.text()],
                        RangeSpec::Many(ts) => ts.iter().map(Token::text).collect(),
                    };
                    (k, tokens)
                })
                .collect(),
            extras: StudyExtras {
                effect: r.effect,
                std_error: r.std_error,
                arms: r.arms,
            },
        })
        .collect::<Vec<_>>();
    check_duplicates(&rows)?;
    resolve(file.characteristics, rows, policy)
}

fn check_duplicates(rows: &[PartialStudy]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for r in rows {
        if !seen.insert(r.study_id.as_str()) {
            return Err(at_line(
                r.line,
                Error::Schema(format!("duplicate study_id `{}`", r.study_id)),
            ));
        }
    }
    Ok(())
}

enum Column {
    StudyId,
    SampleSize,
    Effect,
    StdError,
    Arm(String),
    Characteristic(usize),
}

fn parse_characteristic_header(name: &str) -> Result<CharacteristicDecl> {
    let (id, kind) = name.rsplit_once(':').ok_or_else(|| {
        Error::format(format!(
            "column `{name}` is not a known field; characteristics are written `id:kind`"
        ))
    })?;
    let id = id.trim();
    if id.is_empty() {
        return Err(Error::format(format!("column `{name}` has an empty id")));
    }
    match kind.trim() {
        "categorical" => Ok(CharacteristicDecl::categorical(id)),
        "declared" => Err(Error::format(
            "declared atom orders need a JSON envelope file",
        )),
        k => OrderKey::parse(k)
            .map(|o| CharacteristicDecl::ordered(id, o))
            .ok_or_else(|| Error::format(format!("unknown order key `{k}` in column `{name}`"))),
    }
}

pub fn parse_csv(text: &str, policy: MissingPolicy) -> Result<Synthesis> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let csv_err = |e: csv::Error| Error::Format {
        line: e.position().map(|p| p.line() as usize),
        message: e.to_string(),
        column: None,
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let mut decls = Vec::new();
    let mut columns = Vec::with_capacity(headers.len());
    for h in headers.iter() {
        let col = match h {
            "study_id" => Column::StudyId,
            "sample_size" => Column::SampleSize,
            "effect" => Column::Effect,
            "std_error" => Column::StdError,
            h if h.starts_with("arm:") => Column::Arm(h[4..].to_string()),
            h => {
                let d = parse_characteristic_header(h).map_err(|e| at_line(Some(1), e))?;
                decls.push(d);
                Column::Characteristic(decls.len() - 1)
            }
        };
        columns.push(col);
    }
    for required in ["study_id", "sample_size"] {
        if !headers.iter().any(|h| h == required) {
            return Err(at_line(
                Some(1),
                Error::format(format!("missing `{required}` column")),
            ));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line() as usize);
        let mut row = PartialStudy {
            study_id: String::new(),
            sample_size: 0,
            line,
            ranges: BTreeMap::new(),
            extras: StudyExtras::default(),
        };
        let number = |field: &str, what: &str| -> Result<f64> {
            field
                .parse::<f64>()
                .map_err(|_| at_line(line, Error::format(format!("{what} `{field}` is not a number"))))
        };
        for (col, field) in columns.iter().zip(record.iter()) {
            match col {
                Column::StudyId => row.study_id = field.to_string(),
                Column::SampleSize => {
                    row.sample_size = field.parse().map_err(|_| {
                        at_line(
                            line,
                            Error::format(format!("sample_size `{field}` is not a count")),
                        )
                    })?
                }
                Column::Effect if !field.is_empty() => row.extras.effect = Some(number(field, "effect")?),
                Column::StdError if !field.is_empty() => {
                    row.extras.std_error = Some(number(field, "std_error")?)
                }
                Column::Arm(name) if !field.is_empty() => {
                    let v = field.parse().map_err(|_| {
                        at_line(line, Error::format(format!("arm count `{field}` is not a count")))
                    })?;
                    row.extras.arms.insert(name.clone(), v);
                }
                Column::Characteristic(k) if !field.is_empty() => {
                    let tokens = field
                        .split(';')
                        .map(str::trim)
                        .filter(|t| !t.is_empty())
                        .map(String::from)
                        .collect();
                    row.ranges.insert(decls[*k].id.clone(), tokens);
                }
                _ => {}
            }
        }
        if row.study_id.is_empty() {
            return Err(at_line(line, Error::format("empty study_id")));
        }
        rows.push(row);
    }
    check_duplicates(&rows)?;
    resolve(decls, rows, policy)
}

pub fn parse_str(text: &str, format: InputFormat, policy: MissingPolicy) -> Result<Synthesis> {
    match format {
        InputFormat::Json => parse_json(text, policy),
        InputFormat::Csv => parse_csv(text, policy),
    }
}

/// Reads and validates an envelope file. The format defaults to the file
/// extension (`.csv`, anything else JSON).
pub fn ingest(
    path: impl AsRef<Path>,
    format: Option<InputFormat>,
    policy: MissingPolicy,
) -> Result<Synthesis> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_str(&text, format.unwrap_or_else(|| InputFormat::from_path(path)), policy)
}

/// Parses an explicit bin file: `{"characteristic": [["atom", "a..b"], ...]}`.
pub fn parse_bin_file(text: &str) -> Result<PartitionScheme> {
    let map: BTreeMap<String, Vec<Vec<Token>>> =
        serde_json::from_str(text).map_err(|e| Error::Format {
            message: format!("bin file: {e}"),
            line: Some(e.line()),
            column: Some(e.column()),
        })?;
    Ok(PartitionScheme::Explicit(
        map.into_iter()
            .map(|(k, bins)| {
                let bins = bins
                    .into_iter()
                    .map(|b| b.iter().map(Token::text).collect())
                    .collect();
                (k, bins)
            })
            .collect(),
    ))
}

/// Resolves `singleton`, `width=N` or `file=PATH`.
pub fn partition_scheme(arg: &str) -> Result<PartitionScheme> {
    match arg.strip_prefix("file=") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_bin_file(&text)
        }
        None => PartitionScheme::parse_inline(arg),
    }
}

/// Renders a synthesis back to the JSON envelope format, with every range as
/// an explicit atom list.
pub fn to_json(synthesis: &Synthesis) -> String {
    use serde_json::{json, Map, Value};
    let studies: Vec<Value> = synthesis
        .studies
        .iter()
        .map(|s| {
            let mut row = Map::new();
            row.insert("study_id".into(), json!(s.study_id));
            row.insert("sample_size".into(), json!(s.sample_size));
            let ranges: Map<String, Value> = s
                .ranges
                .iter()
                .map(|r| (r.characteristic.clone(), json!(sorted_atoms(synthesis, r))))
                .collect();
            row.insert("ranges".into(), Value::Object(ranges));
            if let Some(e) = s.extras.effect {
                row.insert("effect".into(), json!(e));
            }
            if let Some(se) = s.extras.std_error {
                row.insert("std_error".into(), json!(se));
            }
            if !s.extras.arms.is_empty() {
                row.insert("arms".into(), json!(s.extras.arms));
            }
            Value::Object(row)
        })
        .collect();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "characteristics": synthesis.characteristics,
        "studies": studies,
    });
    serde_json::to_string_pretty(&doc).expect("plain data serializes")
}

fn sorted_atoms(synthesis: &Synthesis, r: &ReportedRange) -> Vec<String> {
    let mut atoms: Vec<String> = r.atoms.iter().cloned().collect();
    if let Some(decl) = synthesis.characteristics.iter().find(|c| c.id == r.characteristic) {
        if let (Kind::Ordered, Some(order)) = (decl.kind, decl.order) {
            atoms.sort_by(|a, b| crate::atoms::compare_atoms(order, a, b, &decl.atoms));
        }
    }
    atoms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::encode_synthesis;

    const TOY_JSON: &str = r#"{
  "schema_version": 1,
  "characteristics": [
    {"id": "location", "kind": "categorical"},
    {"id": "time", "kind": "ordered", "order": "date-year"}
  ],
  "studies": [
    {"study_id": "S1", "sample_size": 3, "ranges": {"location": ["area 1", "area 2"], "time": "2021..2022"}},
    {"study_id": "S2", "sample_size": 4, "ranges": {"location": ["area 1", "area 2", "area 3"], "time": [2022, 2023]}},
    {"study_id": "S3", "sample_size": 2, "ranges": {"location": ["area 2", "area 3"], "time": "2022..2023"}},
    {"study_id": "S4", "sample_size": 5, "ranges": {"location": ["area 3", "area 4"], "time": "2023"}}
  ]
}"#;

    const TOY_CSV: &str = "study_id,sample_size,location:categorical,time:date-year
S1,3,area 1;area 2,2021..2022
S2,4,area 1;area 2;area 3,2022;2023
S3,2,area 2;area 3,2022..2023
S4,5,area 3;area 4,2023
";

    #[test]
    fn json_and_csv_agree() {
        let a = parse_json(TOY_JSON, MissingPolicy::Error).unwrap();
        let b = parse_csv(TOY_CSV, MissingPolicy::Error).unwrap();
        assert_eq!(a, crate::model::tests::toy4());
        let ea = encode_synthesis(&a, &PartitionScheme::Singleton).unwrap().1;
        let eb = encode_synthesis(&b, &PartitionScheme::Singleton).unwrap().1;
        assert_eq!(ea.digest(), eb.digest());
    }

    #[test]
    fn round_trip_through_json() {
        let a = parse_json(TOY_JSON, MissingPolicy::Error).unwrap();
        let b = parse_json(&to_json(&a), MissingPolicy::Error).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn malformed_json_reports_line() {
        let bad = TOY_JSON.replacen("\"sample_size\": 4,", "\"sample_size\": 4", 1);
        match parse_json(&bad, MissingPolicy::Error).unwrap_err() {
            Error::Format { line: Some(l), .. } => assert_eq!(l, 9),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = TOY_JSON.replacen("\"sample_size\": 4,", "\"sample_size\": 4, \"extra\": 1,", 1);
        assert!(parse_json(&bad, MissingPolicy::Error).is_err());
    }

    #[test]
    fn missing_characteristic() {
        let csv = TOY_CSV.replace("S3,2,area 2;area 3,2022..2023", "S3,2,,2022..2023");
        let err = parse_csv(&csv, MissingPolicy::Error).unwrap_err().to_string();
        assert!(err.contains("S3") && err.contains("location") && err.contains("line 4"), "{err}");
        let s = parse_csv(&csv, MissingPolicy::FullRange).unwrap();
        assert_eq!(s.studies[2].ranges[0].atoms.len(), 4);
    }

    #[test]
    fn duplicate_study_ids() {
        let csv = TOY_CSV.replace("S4,", "S1,");
        let err = parse_csv(&csv, MissingPolicy::Error).unwrap_err().to_string();
        assert!(err.contains("duplicate study_id `S1`") && err.contains("line 5"), "{err}");
    }

    #[test]
    fn empty_study_list() {
        let text = r#"{"schema_version": 1, "characteristics": [{"id": "c", "kind": "categorical"}], "studies": []}"#;
        assert_eq!(parse_json(text, MissingPolicy::Error).unwrap().n_studies(), 0);
    }

    #[test]
    fn csv_header_errors() {
        assert!(parse_csv("study_id,sample_size,age:weird\nA,1,3\n", MissingPolicy::Error).is_err());
        assert!(parse_csv("study_id,location:categorical\nA,x\n", MissingPolicy::Error).is_err());
        let s = parse_csv(
            "study_id,sample_size,age:integer,std_error,arm:control\nA,10,18..20,0.5,4\n",
            MissingPolicy::Error,
        )
        .unwrap();
        assert_eq!(s.studies[0].ranges[0].atoms.len(), 3);
        assert_eq!(s.studies[0].extras.std_error, Some(0.5));
        assert_eq!(s.studies[0].extras.arms["control"], 4);
    }

    #[test]
    fn bin_file() {
        let p = parse_bin_file(r#"{"time": [["2021..2022"], [2023]]}"#).unwrap();
        let a = parse_json(TOY_JSON, MissingPolicy::Error).unwrap();
        let (part, _) = encode_synthesis(&a, &p).unwrap();
        assert_eq!(part.bin_counts(), [4, 2]);
    }
}
