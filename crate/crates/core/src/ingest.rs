//! Delimited long-format text to [`Dataset`].
//!
//! The file has a header row; one column holds the student identifier, one the
//! integer time identifier, and every other column is a feature, in file order.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use thiserror::Error;

use crate::data::{validate_dataset, Dataset, FeatureDef, FeatureKind, FeatureValue, Row, Schema, ValidationReport};

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub delimiter: u8,
    pub student_column: String,
    pub time_column: String,
    /// Exact-match, case-sensitive. The first token is used when writing.
    pub missing_tokens: Vec<String>,
    pub kind_overrides: BTreeMap<String, FeatureKind>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            delimiter: b',',
            student_column: "student".into(),
            time_column: "time".into(),
            missing_tokens: vec![String::new(), "NA".into()],
            kind_overrides: BTreeMap::new(),
        }
    }
}

impl IngestConfig {
    /// Default config with overrides pinning every feature's kind to the
    /// schema's, so re-reading written data cannot re-infer a different kind.
    pub fn matching(schema: &Schema) -> Self {
        IngestConfig {
            kind_overrides: schema.features().iter().map(|f| (f.name.clone(), f.kind)).collect(),
            ..IngestConfig::default()
        }
    }

    pub fn is_missing(&self, cell: &str) -> bool {
        self.missing_tokens.iter().any(|t| t == cell)
    }

    fn check(&self) -> Result<(), IngestError> {
        let bad = |msg: String| Err(IngestError::Config(msg));
        if self.student_column == self.time_column {
            return bad("student and time columns must differ".into());
        }
        for c in [&self.student_column, &self.time_column] {
            if self.kind_overrides.contains_key(c) {
                return bad(format!("column '{c}' cannot take a kind override"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid ingest configuration: {0}")]
    Config(String),
    #[error("input has no header row")]
    NoHeader,
    #[error("header lacks mandatory column '{0}'")]
    MissingColumn(String),
    #[error("header repeats column '{0}'")]
    DuplicateColumn(String),
    #[error("no feature columns besides student and time")]
    NoFeatures,
    #[error("no data rows")]
    NoRows,
    #[error("kind override names unknown column '{0}'")]
    UnknownOverride(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("line {line}, column '{column}': time value '{value}' is not an integer")]
    BadTime { line: u64, column: String, value: String },
    #[error("line {line}, column '{column}': '{value}' is not a finite number but the column is numeric")]
    OverrideConflict { line: u64, column: String, value: String },
    #[error("line {line}, column '{column}': empty category")]
    EmptyCategory { line: u64, column: String },
    #[error("line {line}: duplicate (student '{student}', time {time}), first seen on line {first_line}")]
    Duplicate { line: u64, student: String, time: i64, first_line: u64 },
    #[error("dataset failed validation: {0}")]
    Invalid(ValidationReport),
    #[error("read error: {0}")]
    Csv(#[from] csv::Error),
}

/// Header plus unparsed cells, with the source line of each record.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
    pub lines: Vec<u64>,
}

pub fn read_raw<R: Read>(input: R, config: &IngestConfig) -> Result<RawTable, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(config.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header: Vec<String> = match records.next() {
        None => return Err(IngestError::NoHeader),
        Some(h) => h?.iter().map(str::to_string).collect(),
    };
    let mut table = RawTable {
        header,
        records: Vec::new(),
        lines: Vec::new(),
    };
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != table.header.len() {
            return Err(IngestError::Ragged {
                line,
                expected: table.header.len(),
                found: rec.len(),
            });
        }
        table.records.push(rec.iter().map(str::to_string).collect());
        table.lines.push(line);
    }
    Ok(table)
}

struct Layout {
    student: usize,
    time: usize,
    features: Vec<usize>,
}

fn layout(header: &[String], config: &IngestConfig) -> Result<Layout, IngestError> {
    let mut seen = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if seen.insert(h.as_str(), i).is_some() {
            return Err(IngestError::DuplicateColumn(h.clone()));
        }
    }
    let find = |name: &str| seen.get(name).copied().ok_or_else(|| IngestError::MissingColumn(name.to_string()));
    let student = find(&config.student_column)?;
    let time = find(&config.time_column)?;
    let features: Vec<usize> = (0..header.len()).filter(|&i| i != student && i != time).collect();
    if features.is_empty() {
        return Err(IngestError::NoFeatures);
    }
    for name in config.kind_overrides.keys() {
        if !features.iter().any(|&i| header[i] == *name) {
            return Err(IngestError::UnknownOverride(name.clone()));
        }
    }
    Ok(Layout { student, time, features })
}

/// Locale-independent decimal or scientific notation; non-finite is rejected.
pub fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// A column is numeric when every non-missing cell parses as a finite number;
/// it allows missing values when any cell is a missing token.
pub fn infer_schema(raw: &RawTable, config: &IngestConfig) -> Result<Schema, IngestError> {
    config.check()?;
    let layout = layout(&raw.header, config)?;
    if raw.records.is_empty() {
        return Err(IngestError::NoRows);
    }
    let mut defs = Vec::with_capacity(layout.features.len());
    for &col in &layout.features {
        let name = &raw.header[col];
        let mut allow_missing = false;
        let mut first_non_numeric = None;
        for (rec, line) in raw.records.iter().zip(&raw.lines) {
            let cell = &rec[col];
            if config.is_missing(cell) {
                allow_missing = true;
            } else if first_non_numeric.is_none() && parse_number(cell).is_none() {
                first_non_numeric = Some((*line, cell.clone()));
            }
        }
        let kind = match (config.kind_overrides.get(name), first_non_numeric) {
            (Some(FeatureKind::Numeric), Some((line, value))) => {
                return Err(IngestError::OverrideConflict {
                    line,
                    column: name.clone(),
                    value,
                })
            }
            (Some(kind), _) => *kind,
            (None, None) => FeatureKind::Numeric,
            (None, Some(_)) => FeatureKind::Categorical,
        };
        defs.push(FeatureDef::new(name.clone(), kind, allow_missing));
    }
    Schema::new(defs).map_err(|e| IngestError::Config(e.to_string()))
}

pub fn parse_dataset<R: Read>(input: R, config: &IngestConfig) -> Result<Dataset, IngestError> {
    config.check()?;
    let raw = read_raw(input, config)?;
    dataset_from_raw(&raw, config)
}

pub fn parse_dataset_str(text: &str, config: &IngestConfig) -> Result<Dataset, IngestError> {
    parse_dataset(text.as_bytes(), config)
}

pub fn dataset_from_raw(raw: &RawTable, config: &IngestConfig) -> Result<Dataset, IngestError> {
    let schema = infer_schema(raw, config)?;
    let layout = layout(&raw.header, config)?;
    let time_name = &raw.header[layout.time];

    let mut time_ids = Vec::with_capacity(raw.records.len());
    let mut first_seen: HashMap<(&str, i64), u64> = HashMap::new();
    for (rec, &line) in raw.records.iter().zip(&raw.lines) {
        let cell = &rec[layout.time];
        let time = cell.parse::<i64>().map_err(|_| IngestError::BadTime {
            line,
            column: time_name.clone(),
            value: cell.clone(),
        })?;
        let student = rec[layout.student].as_str();
        if let Some(&first_line) = first_seen.get(&(student, time)) {
            return Err(IngestError::Duplicate {
                line,
                student: student.to_string(),
                time,
                first_line,
            });
        }
        first_seen.insert((student, time), line);
        time_ids.push(time);
    }
    let mut times = time_ids.clone();
    times.sort_unstable();
    times.dedup();

    let mut rows = Vec::with_capacity(raw.records.len());
    for ((rec, &line), time) in raw.records.iter().zip(&raw.lines).zip(time_ids) {
        let step = times.binary_search(&time).expect("time collected above");
        let mut values = Vec::with_capacity(layout.features.len());
        for (def, &col) in schema.features().iter().zip(&layout.features) {
            let cell = &rec[col];
            let value = if config.is_missing(cell) {
                FeatureValue::Missing
            } else {
                match def.kind {
                    FeatureKind::Numeric => FeatureValue::Numeric(parse_number(cell).ok_or_else(|| {
                        IngestError::OverrideConflict {
                            line,
                            column: def.name.clone(),
                            value: cell.clone(),
                        }
                    })?),
                    FeatureKind::Categorical if cell.is_empty() => {
                        return Err(IngestError::EmptyCategory {
                            line,
                            column: def.name.clone(),
                        })
                    }
                    FeatureKind::Categorical => FeatureValue::Category(cell.clone()),
                }
            };
            values.push(value);
        }
        rows.push(Row {
            student: rec[layout.student].clone(),
            step,
            values,
        });
    }

    let dataset = Dataset::from_parts_unchecked(schema, times, rows);
    let report = validate_dataset(&dataset);
    if !report.is_empty() {
        return Err(IngestError::Invalid(report));
    }
    Ok(dataset)
}
