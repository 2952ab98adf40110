//! Rectangular numeric result tables and their CSV / JSON encodings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub metadata: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResultTable {
    pub fn new(columns: &[&str], metadata: BTreeMap<String, String>) -> Self {
        Self {
            metadata,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// `# key=value` metadata lines, a header, then one line per row with
    /// every value printed to 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}").unwrap();
        }
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, &x)| (c.clone(), json_number(x)))
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::json!({
            "metadata": self.metadata,
            "columns": self.columns,
            "rows": rows,
        })
    }

    /// Parses one table produced by [`ResultTable::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, CliError> {
        let mut metadata = BTreeMap::new();
        let mut lines = text.lines();
        let mut header = None;
        for line in lines.by_ref() {
            if let Some(meta) = line.strip_prefix("# ") {
                let (k, v) = meta
                    .split_once('=')
                    .ok_or_else(|| CliError::Config(format!("bad metadata line {line:?}")))?;
                metadata.insert(k.to_string(), v.to_string());
            } else {
                header = Some(line);
                break;
            }
        }
        let header = header.ok_or_else(|| CliError::Config("table has no header".into()))?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for line in lines.take_while(|l| !l.is_empty()) {
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| CliError::Config(format!("bad cell {c:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != columns.len() {
                return Err(CliError::Config(format!("row width {} != header width {}", row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Self { metadata, columns, rows })
    }

    /// Parses one table object produced by [`ResultTable::to_json_value`].
    pub fn from_json_value(v: &serde_json::Value) -> Result<Self, CliError> {
        let err = |msg: &str| CliError::Config(format!("bad JSON table: {msg}"));
        let metadata: BTreeMap<String, String> =
            serde_json::from_value(v.get("metadata").cloned().ok_or_else(|| err("no metadata"))?)
                .map_err(|e| err(&e.to_string()))?;
        let columns: Vec<String> = serde_json::from_value(v.get("columns").cloned().ok_or_else(|| err("no columns"))?)
            .map_err(|e| err(&e.to_string()))?;
        let rows = v
            .get("rows")
            .and_then(|r| r.as_array())
            .ok_or_else(|| err("no rows"))?
            .iter()
            .map(|row| {
                columns
                    .iter()
                    .map(|c| match row.get(c) {
                        Some(serde_json::Value::Null) => Ok(f64::NAN),
                        Some(x) => x.as_f64().ok_or_else(|| err("non-numeric cell")),
                        None => Err(err("missing cell")),
                    })
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { metadata, columns, rows })
    }
}

/// Non-finite values have no JSON number form and are written as `null`.
fn json_number(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

/// Renders a command's tables. CSV tables are separated by a blank line; a
/// single JSON table is one object, several form an array.
pub fn render(tables: &[ResultTable], format: Format) -> String {
    match format {
        Format::Csv => tables.iter().map(ResultTable::to_csv).collect::<Vec<_>>().join("\n"),
        Format::Json => {
            let value = if tables.len() == 1 {
                tables[0].to_json_value()
            } else {
                serde_json::Value::Array(tables.iter().map(ResultTable::to_json_value).collect())
            };
            let mut s = serde_json::to_string_pretty(&value).expect("tables serialize");
            s.push('\n');
            s
        }
    }
}

/// Inverse of [`render`], guessing the format from the first character.
pub fn parse_rendered(text: &str) -> Result<Vec<ResultTable>, CliError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        let v: serde_json::Value =
            serde_json::from_str(trimmed).map_err(|e| CliError::Config(format!("bad JSON output: {e}")))?;
        match &v {
            serde_json::Value::Array(items) => items.iter().map(ResultTable::from_json_value).collect(),
            _ => Ok(vec![ResultTable::from_json_value(&v)?]),
        }
    } else {
        text.split("\n\n")
            .filter(|chunk| !chunk.trim().is_empty())
            .map(ResultTable::from_csv)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        let mut meta = BTreeMap::new();
        meta.insert("seed".to_string(), "7".to_string());
        let mut t = ResultTable::new(&["x", "y"], meta);
        t.push(vec![0.1, 1.0 / 3.0]);
        t.push(vec![1e-300, 12345.678]);
        t
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample();
        let csv = t.to_csv();
        assert!(csv.starts_with("# seed=7\nx,y\n"));
        assert_eq!(ResultTable::from_csv(&csv).unwrap(), t);
    }

    #[test]
    fn json_and_csv_agree() {
        let t = sample();
        let from_json = parse_rendered(&render(std::slice::from_ref(&t), Format::Json)).unwrap();
        let from_csv = parse_rendered(&render(std::slice::from_ref(&t), Format::Csv)).unwrap();
        assert_eq!(from_json, from_csv);
        let two = parse_rendered(&render(&[t.clone(), t.clone()], Format::Csv)).unwrap();
        assert_eq!(two.len(), 2);
        let two = parse_rendered(&render(&[t.clone(), t], Format::Json)).unwrap();
        assert_eq!(two.len(), 2);
    }

    #[test]
    #[should_panic]
    fn ragged_rows_rejected() {
        let mut t = sample();
        t.push(vec![1.0]);
    }
}
