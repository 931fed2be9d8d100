//! Rectangular numeric tables written as CSV with a `#` preamble.
//!
//! Floats use Rust's shortest round-trip formatting, so parsing a table and
//! writing it again reproduces the same bytes.

use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("row {row} has {got} entries, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("non-finite entry in column '{column}' at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("malformed table: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// Provenance lines, written with a leading `# `.
    pub preamble: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Columns allowed to carry NaN (flagged degenerate points).
    pub nan_columns: Vec<String>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        ResultTable {
            preamble: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            nan_columns: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<(), TableError> {
        if row.len() != self.columns.len() {
            return Err(TableError::Ragged { row: self.rows.len(), got: row.len(), expected: self.columns.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Rows where every NaN sits in a column that may hold NaN, or where the
    /// row is flagged; infinities are never allowed.
    pub fn validate(&self) -> Result<(), TableError> {
        let flag = self.columns.iter().position(|c| c == "flag");
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(TableError::Ragged { row: i, got: row.len(), expected: self.columns.len() });
            }
            let flagged = flag.is_some_and(|f| row[f] != 0.0);
            for (v, name) in row.iter().zip(&self.columns) {
                let ok = v.is_finite() || (v.is_nan() && (flagged || self.nan_columns.contains(name)));
                if !ok {
                    return Err(TableError::NonFinite { column: name.clone(), row: i });
                }
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), TableError> {
        self.validate()?;
        for line in &self.preamble {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_float(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, TableError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| TableError::Malformed(e.to_string()))
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, TableError> {
        let mut preamble = Vec::new();
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            match line.strip_prefix("# ") {
                Some(rest) if body.is_empty() => preamble.push(rest.to_string()),
                _ => {
                    body.push_str(&line);
                    body.push('\n');
                }
            }
        }
        let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut table = ResultTable { preamble, columns, rows: Vec::new(), nan_columns: Vec::new() };
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| TableError::Malformed(format!("'{s}': {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            table.push(row)?;
        }
        Ok(table)
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}
