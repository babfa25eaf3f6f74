//! Tabular artifacts: CSV with a provenance line, and a JSON mirror.
//!
//! A CSV artifact looks like
//!
//! ```text
//! # {"tool":"freespace","version":"0.1.0","command":"simulate",...}
//! detuning_mhz,transmission,sigma
//! 28,0.998,0.0021
//! ```
//!
//! The first line is `# ` followed by the provenance as compact JSON, then a
//! header row and the data. The JSON mirror holds the same provenance,
//! columns and rows. Floats are written in shortest round-trip form, so a
//! value read back is bit-identical to the value written.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const TOOL: &str = "freespace";

/// What produced an artifact, with everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Which table of the command's output this is.
    pub table: String,
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    /// Command-specific inputs that are not part of the run configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<serde_json::Value>,
}

impl Provenance {
    pub fn new(command: &str, table: &str, format: Format) -> Self {
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            table: table.into(),
            format,
            seed: None,
            samples: None,
            config: None,
            inputs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Bool(bool),
    Text(String),
    /// Non-finite floats become JSON null; read back as NaN.
    Null,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v}"),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Text(v) => f.write_str(v),
            Cell::Null => f.write_str("NaN"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(provenance: Provenance, columns: &[&str]) -> Self {
        Self { provenance, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(b"# ");
        serde_json::to_writer(&mut out, &self.provenance)?;
        out.push(b'\n');
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn render(&self) -> Result<Vec<u8>> {
        match self.provenance.format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Writes `<dir>/<table>.<ext>` and returns the path.
    pub fn write_to_dir(&self, dir: &Path) -> Result<std::path::PathBuf> {
        let path = dir.join(format!("{}.{}", self.provenance.table, self.provenance.format.extension()));
        std::fs::write(&path, self.render()?)?;
        Ok(path)
    }
}

/// A table read back from disk; cells are kept as text with their source line.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub provenance: Option<Provenance>,
    pub columns: Vec<String>,
    /// (1-based line number, fields)
    pub rows: Vec<(usize, Vec<String>)>,
}

impl RawTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parses the named columns of every row as floats.
    pub fn numeric(&self, names: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.rows
            .iter()
            .map(|(line, fields)| {
                names
                    .iter()
                    .map(|&i| {
                        let text = fields[i].trim();
                        text.parse::<f64>().map_err(|_| Error::Parse {
                            line: *line,
                            message: format!("column '{}': cannot parse '{}' as a number", self.columns[i], text),
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

fn split_record(line: &str, line_no: usize) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(line.as_bytes());
    match reader.records().next() {
        Some(Ok(rec)) => Ok(rec.iter().map(|s| s.to_string()).collect()),
        Some(Err(e)) => Err(Error::Parse { line: line_no, message: e.to_string() }),
        None => Ok(Vec::new()),
    }
}

/// Reads a CSV artifact (or any headered CSV). Blank lines and `#` comment
/// lines are skipped; the first `#` line is taken as provenance when it
/// holds valid JSON. Records may not span lines.
pub fn parse_csv(text: &str) -> Result<RawTable> {
    let mut provenance = None;
    let mut seen_comment = false;
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut last_line = 0;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if !seen_comment && columns.is_none() {
                provenance = serde_json::from_str(rest.trim()).ok();
            }
            seen_comment = true;
            continue;
        }
        let fields = split_record(line, line_no)?;
        match &columns {
            None => columns = Some(fields.iter().map(|f| f.trim().to_string()).collect()),
            Some(cols) => {
                if fields.len() != cols.len() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected {} fields, found {}", cols.len(), fields.len()),
                    });
                }
                rows.push((line_no, fields));
            }
        }
    }
    let Some(columns) = columns else {
        return Err(Error::Parse { line: last_line.max(1), message: "file contains no header row and no data".into() });
    };
    if rows.is_empty() {
        return Err(Error::Parse { line: last_line + 1, message: "header row present but no data rows".into() });
    }
    Ok(RawTable { provenance, columns, rows })
}

/// Reads a JSON mirror. Rows are numbered from 1 in the `rows` array.
pub fn parse_json(text: &str) -> Result<RawTable> {
    if text.trim().is_empty() {
        return Err(Error::Parse { line: 1, message: "file is empty".into() });
    }
    let table: Table = serde_json::from_str(text)
        .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    if table.rows.is_empty() {
        return Err(Error::Parse { line: 1, message: "table has no rows".into() });
    }
    let n = table.columns.len();
    let mut rows = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Parse { line: i + 1, message: format!("row {} has {} fields, expected {n}", i + 1, row.len()) });
        }
        rows.push((i + 1, row.iter().map(|c| c.to_string()).collect()));
    }
    Ok(RawTable { provenance: Some(table.provenance), columns: table.columns, rows })
}

/// Reads a CSV or JSON artifact, chosen by file extension.
pub fn read_table(path: &Path) -> Result<RawTable> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        parse_json(&text)
    } else {
        parse_csv(&text)
    }
}

/// Reads just the provenance of an artifact.
pub fn read_provenance(path: &Path) -> Result<Provenance> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        #[derive(Deserialize)]
        struct Head {
            provenance: Provenance,
        }
        let head: Head = serde_json::from_str(&text)
            .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        return Ok(head.provenance);
    }
    let first = text.lines().next().unwrap_or("");
    let json = first
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse { line: 1, message: "first line is not a provenance comment".into() })?;
    serde_json::from_str(json.trim()).map_err(|e| Error::Parse { line: 1, message: e.to_string() })
}
