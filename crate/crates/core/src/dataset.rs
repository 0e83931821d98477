//! Column-per-node record tables and their CSV form.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{confusion, confusion_from_scores, GroupedCounts, MetricError};
use crate::scm::Record;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("column `{0}` appears twice")]
    DuplicateColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    ParseError {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: value {value} is not 0 or 1")]
    NonBinary {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("binding needs exactly one of `prediction` or `score` with `threshold`")]
    IncompleteBinding,
    #[error("record index {index} out of range for {len} rows")]
    RecordOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Where sampled data came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub model_hash: String,
}

/// Column roles for metric computations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Bindings {
    pub group: String,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl Bindings {
    /// Columns that must be 0/1.
    pub fn binary_columns(&self) -> Vec<&str> {
        let mut cols = vec![self.group.as_str(), self.label.as_str()];
        if let Some(p) = &self.prediction {
            cols.push(p);
        }
        cols
    }

    pub fn columns(&self) -> Vec<&str> {
        let mut cols = self.binary_columns();
        if let Some(s) = &self.score {
            cols.push(s);
        }
        cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let mut seen = std::collections::HashSet::new();
        for c in &columns {
            if !seen.insert(c) {
                return Err(DataError::DuplicateColumn(c.clone()));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(DataError::RaggedRow {
                    row: r + 1,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
        }
        Ok(Dataset {
            columns,
            rows,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, DataError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, DataError> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Row `index` (0-based) as a name-to-value map.
    pub fn record(&self, index: usize) -> Result<Record, DataError> {
        let row = self.rows.get(index).ok_or(DataError::RecordOutOfRange {
            index,
            len: self.rows.len(),
        })?;
        Ok(self
            .columns
            .iter()
            .cloned()
            .zip(row.iter().copied())
            .collect())
    }

    /// Fails on the first value of `column` that is not exactly 0 or 1.
    pub fn check_binary(&self, column: &str) -> Result<(), DataError> {
        let j = self.column_index(column)?;
        for (r, row) in self.rows.iter().enumerate() {
            if row[j] != 0.0 && row[j] != 1.0 {
                return Err(DataError::NonBinary {
                    row: r + 1,
                    column: column.to_string(),
                    value: row[j],
                });
            }
        }
        Ok(())
    }

    /// Confusion counts for the bound group, label and prediction (or
    /// thresholded score) columns.
    pub fn confusion(&self, b: &Bindings) -> Result<GroupedCounts, DataError> {
        let group = self.column(&b.group)?;
        let label = self.column(&b.label)?;
        match (&b.prediction, &b.score, b.threshold) {
            (Some(p), None, _) => Ok(confusion(&group, &label, &self.column(p)?)?),
            (None, Some(s), Some(t)) => {
                Ok(confusion_from_scores(&group, &label, &self.column(s)?, t)?)
            }
            _ => Err(DataError::IncompleteBinding),
        }
    }

    /// Comma-separated, header first, numbers in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DataError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns).map_err(csv_err)?;
        let mut buf = Vec::with_capacity(self.columns.len());
        for row in &self.rows {
            buf.clear();
            buf.extend(row.iter().map(|v| format!("{v:?}")));
            out.write_record(&buf).map_err(csv_err)?;
        }
        out.flush().map_err(|e| DataError::Io(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Dataset, DataError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(r);
        let columns: Vec<String> = reader
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if columns.is_empty() || columns.iter().all(String::is_empty) {
            return Err(DataError::Csv("missing header row".into()));
        }
        let mut rows = Vec::new();
        for (r, rec) in reader.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != columns.len() {
                return Err(DataError::RaggedRow {
                    row: r + 1,
                    expected: columns.len(),
                    found: rec.len(),
                });
            }
            let row = rec
                .iter()
                .zip(&columns)
                .map(|(field, col)| {
                    parse_number(field.trim()).ok_or_else(|| DataError::ParseError {
                        row: r + 1,
                        column: col.clone(),
                        value: field.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push(row);
        }
        Dataset::new(columns, rows)
    }
}

// Strict decimal parsing: no NaN, no infinities, no empty fields.
fn parse_number(s: &str) -> Option<f64> {
    if s.is_empty()
        || !s
            .bytes()
            .all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b))
    {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn csv_err(e: csv::Error) -> DataError {
    DataError::Csv(e.to_string())
}

/// Reads a CSV file, checking that `required` columns and every bound column
/// exist and that bound group/label/prediction columns are binary.
pub fn load_csv(
    path: &Path,
    bindings: Option<&Bindings>,
    required: &[String],
) -> Result<Dataset, DataError> {
    let file =
        std::fs::File::open(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    let data = Dataset::read_csv(std::io::BufReader::new(file))?;
    for col in required {
        data.column_index(col)?;
    }
    if let Some(b) = bindings {
        for col in b.columns() {
            data.column_index(col)?;
        }
        for col in b.binary_columns() {
            data.check_binary(col)?;
        }
    }
    Ok(data)
}

/// Per-column summary used in reports.
pub fn column_means(data: &Dataset) -> BTreeMap<String, f64> {
    let n = data.len().max(1) as f64;
    data.columns()
        .iter()
        .enumerate()
        .map(|(j, c)| (c.clone(), data.rows().iter().map(|r| r[j]).sum::<f64>() / n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_three_rows() {
        let text = "A,Q,D,Y\n1,0.5,2,1\n0,1.5,-1e-3,0\n1,2,3,1\n";
        let d = Dataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.column("D").unwrap(), vec![2.0, -0.001, 3.0]);
    }

    #[test]
    fn strict_numbers() {
        let err = Dataset::read_csv("A,B\n1,x\n".as_bytes()).unwrap_err();
        assert_eq!(
            err,
            DataError::ParseError {
                row: 1,
                column: "B".into(),
                value: "x".into()
            }
        );
        assert!(Dataset::read_csv("A\nNaN\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("A\n\"\"\n".as_bytes()).is_err());
        assert!(matches!(
            Dataset::read_csv("A,B\n1\n".as_bytes()),
            Err(DataError::RaggedRow { row: 1, .. })
        ));
    }

    #[test]
    fn non_binary_group() {
        let d = Dataset::read_csv("g,y\n0,1\n2,0\n".as_bytes()).unwrap();
        assert!(matches!(
            d.check_binary("g"),
            Err(DataError::NonBinary { row: 2, .. })
        ));
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![
            vec![0.1, 1.0 / 3.0, -2.5e-300],
            vec![1.0, 123456789.125, f64::MIN_POSITIVE],
        ];
        let d = Dataset::new(vec!["a".into(), "b".into(), "c".into()], rows).unwrap();
        let back = Dataset::read_csv(d.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn duplicate_header() {
        assert_eq!(
            Dataset::read_csv("a,a\n1,2\n".as_bytes()).unwrap_err(),
            DataError::DuplicateColumn("a".into())
        );
    }
}
