//! Tabular records written by the command-line tool, in CSV or JSON.
//!
//! CSV layout: `# key=value` comment lines for the schema version, command,
//! inputs (`# key=value`) and summary (`# summary.key=value`), then a header
//! row and data rows. Floats are written with 17 significant digits so every
//! value parses back to the same double.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    UInt(u64),
    Num(f64),
    Bool(bool),
    Text(String),
    Null,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::UInt(v) => v.to_string(),
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
            Cell::Null => String::new(),
        }
    }

    fn parse(s: &str) -> Cell {
        if s.is_empty() {
            Cell::Null
        } else if let Ok(v) = s.parse::<i64>() {
            Cell::Int(v)
        } else if let Ok(v) = s.parse::<u64>() {
            Cell::UInt(v)
        } else if let Ok(v) = s.parse::<bool>() {
            Cell::Bool(v)
        } else if let Some(v) = s.parse::<f64>().ok().filter(|v| v.is_finite()) {
            Cell::Num(v)
        } else {
            Cell::Text(s.to_string())
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::UInt(v) => Some(v as f64),
            Cell::Num(v) => Some(v),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Cell::Num(v)
        } else {
            Cell::Null
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::from)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        match i64::try_from(v) {
            Ok(i) => Cell::Int(i),
            Err(_) => Cell::UInt(v),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::from(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub schema_version: String,
    pub command: String,
    pub inputs: BTreeMap<String, Cell>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub summary: BTreeMap<String, Cell>,
}

fn io_err(e: impl fmt::Display) -> Error {
    Error::Config(format!("output: {e}"))
}

impl OutputRecord {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        OutputRecord {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            inputs: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn input(mut self, key: &str, value: impl Into<Cell>) -> Self {
        self.inputs.insert(key.to_string(), value.into());
        self
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn set_summary(&mut self, key: &str, value: impl Into<Cell>) {
        self.summary.insert(key.to_string(), value.into());
    }

    /// Values of one column as floats (`None` for non-numeric cells).
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }

    pub fn write<W: Write>(&self, format: Format, out: W) -> Result<()> {
        match format {
            Format::Json => self.write_json(out),
            Format::Csv => self.write_csv(out),
        }
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut head = format!(
            "# schema_version={}\n# command={}\n",
            self.schema_version, self.command
        );
        for (k, v) in &self.inputs {
            head += &format!("# {k}={}\n", v.render());
        }
        for (k, v) in &self.summary {
            head += &format!("# summary.{k}={}\n", v.render());
        }
        out.write_all(head.as_bytes()).map_err(io_err)?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.columns).map_err(io_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))
                .map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn to_string(&self, format: Format) -> Result<String> {
        let mut buf = Vec::new();
        self.write(format, &mut buf)?;
        String::from_utf8(buf).map_err(io_err)
    }

    pub fn read<R: Read>(format: Format, mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text).map_err(io_err)?;
        match format {
            Format::Json => serde_json::from_str(&text).map_err(io_err),
            Format::Csv => Self::parse_csv(&text),
        }
    }

    fn parse_csv(text: &str) -> Result<Self> {
        let mut record = OutputRecord::new("", &[]);
        record.schema_version.clear();
        let mut body = 0;
        for line in text.lines() {
            let Some(comment) = line.strip_prefix("# ") else {
                break;
            };
            body += line.len() + 1;
            let (k, v) = comment
                .split_once('=')
                .ok_or_else(|| io_err(format!("malformed comment line {line:?}")))?;
            match k {
                "schema_version" => record.schema_version = v.to_string(),
                "command" => record.command = v.to_string(),
                _ => match k.strip_prefix("summary.") {
                    Some(s) => {
                        record.summary.insert(s.to_string(), Cell::parse(v));
                    }
                    None => {
                        record.inputs.insert(k.to_string(), Cell::parse(v));
                    }
                },
            }
        }
        let mut r = csv::Reader::from_reader(&text.as_bytes()[body.min(text.len())..]);
        record.columns = r
            .headers()
            .map_err(io_err)?
            .iter()
            .map(String::from)
            .collect();
        for row in r.records() {
            record
                .rows
                .push(row.map_err(io_err)?.iter().map(Cell::parse).collect());
        }
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> OutputRecord {
        let mut r = OutputRecord::new("pmf", &["n", "p", "note"])
            .input("mu", 0.01)
            .input("stat", "poisson")
            .input("seed", u64::MAX)
            .input("prescan", false);
        r.push_row(vec![Cell::from(0u64), Cell::from(0.1 + 0.2), Cell::Null]);
        r.push_row(vec![
            Cell::from(1u64),
            Cell::from(1e-300),
            "a, \"quoted\" note".into(),
        ]);
        r.set_summary("tail_bound", 3.3e-13);
        r
    }

    #[test]
    fn csv_and_json_round_trip() {
        let r = sample();
        for fmt in [Format::Csv, Format::Json] {
            let text = r.to_string(fmt).unwrap();
            assert_eq!(
                OutputRecord::read(fmt, text.as_bytes()).unwrap(),
                r,
                "{fmt}"
            );
        }
    }

    #[test]
    fn csv_layout() {
        let text = sample().to_string(Format::Csv).unwrap();
        assert!(text.starts_with("# schema_version=1\n# command=pmf\n"));
        assert!(text.contains("\nn,p,note\n"));
        assert!(text.contains("3.0000000000000004e-1"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn non_finite_values_become_null() {
        assert_eq!(Cell::from(f64::NAN), Cell::Null);
        assert_eq!(Cell::from(None::<f64>), Cell::Null);
    }

    proptest! {
        #[test]
        fn floats_survive_both_formats(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
            let mut r = OutputRecord::new("x", &["v"]).input("v", v);
            r.push_row(vec![Cell::from(v)]);
            for fmt in [Format::Csv, Format::Json] {
                let back = OutputRecord::read(fmt, r.to_string(fmt).unwrap().as_bytes()).unwrap();
                let got = back.rows[0][0].as_f64().unwrap();
                prop_assert_eq!(got.to_bits(), v.to_bits());
            }
        }
    }
}
