use serde::Serialize;
use thiserror::Error;

/// Rows per leaf at each time step. `counts[t][l]` is the count for time
/// `times[t]` and leaf `leaves[l]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistributionTable {
    pub times: Vec<i64>,
    pub leaves: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl DistributionTable {
    pub fn column(&self, leaf: &str) -> Option<Vec<u64>> {
        let l = self.leaves.iter().position(|x| x == leaf)?;
        Some(self.counts.iter().map(|row| row[l]).collect())
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("distribution file is empty")]
    Empty,
    #[error("header must start with 'time'")]
    BadHeader,
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: usize, expected: usize, found: usize },
    #[error("line {line}, column '{column}': '{value}' is not a non-negative integer")]
    BadValue { line: usize, column: String, value: String },
}

/// `time,<leaf labels...>` header, then one line per time step.
pub fn export_distribution(table: &DistributionTable) -> String {
    let mut out = String::from("time");
    for l in &table.leaves {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (t, row) in table.times.iter().zip(&table.counts) {
        out.push_str(&t.to_string());
        for c in row {
            out.push(',');
            out.push_str(&c.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn parse_distribution(text: &str) -> Result<DistributionTable, DistributionError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.is_empty());
    let (_, header) = lines.next().ok_or(DistributionError::Empty)?;
    let mut cols = header.split(',');
    if cols.next() != Some("time") {
        return Err(DistributionError::BadHeader);
    }
    let leaves: Vec<String> = cols.map(str::to_string).collect();
    let mut times = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != leaves.len() + 1 {
            return Err(DistributionError::Ragged {
                line: i + 1,
                expected: leaves.len() + 1,
                found: fields.len(),
            });
        }
        let bad = |column: &str, value: &str| DistributionError::BadValue {
            line: i + 1,
            column: column.to_string(),
            value: value.to_string(),
        };
        times.push(fields[0].parse::<i64>().map_err(|_| bad("time", fields[0]))?);
        let row = fields[1..]
            .iter()
            .zip(&leaves)
            .map(|(v, l)| v.parse::<u64>().map_err(|_| bad(l, v)))
            .collect::<Result<Vec<_>, _>>()?;
        counts.push(row);
    }
    Ok(DistributionTable {
        times,
        leaves,
        counts,
    })
}
