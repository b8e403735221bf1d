//! Result tables and CSV output.
//!
//! CSV files carry a header row, '.' decimal separator, '\n' line
//! endings, and shortest-round-trip float formatting, so emitted values
//! parse back bit-exactly and repeated runs are byte-identical.

use crate::CliError;
use std::io::Write;
use std::path::Path;

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn write(&self, out: &mut impl Write) -> std::io::Result<()> {
        match self {
            Cell::Int(v) => write!(out, "{v}"),
            Cell::Float(v) => write!(out, "{v}"),
            Cell::Text(s) => write!(out, "{s}"),
            Cell::Empty => Ok(()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }
}

/// Rectangular table with named columns and a deterministic row order.
#[derive(Debug, Clone)]
pub struct ResultTable {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Column values as floats, skipping non-numeric cells.
    pub fn float_column(&self, name: &str) -> Vec<f64> {
        let Some(idx) = self.column_index(name) else {
            return Vec::new();
        };
        self.rows.iter().filter_map(|r| r[idx].as_f64()).collect()
    }

    /// Rows filtered by a text column value.
    pub fn filter_text(&self, column: &str, value: &str) -> Vec<&Vec<Cell>> {
        let Some(idx) = self.column_index(column) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter(|r| matches!(&r[idx], Cell::Text(s) if s == value))
            .collect()
    }
}

/// Writes a table as CSV.
pub fn emit_csv(table: &ResultTable, path: impl AsRef<Path>) -> Result<(), CliError> {
    let file = std::fs::File::create(path.as_ref())
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.as_ref().display())))?;
    let mut out = std::io::BufWriter::new(file);
    let write = |out: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        writeln!(out, "{}", table.columns().join(","))?;
        for row in table.rows() {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    write!(out, ",")?;
                }
                cell.write(out)?;
            }
            writeln!(out)?;
        }
        Ok(())
    };
    write(&mut out).map_err(|e| CliError::Config(format!("write failed: {e}")))
}

/// Parses a CSV produced by [`emit_csv`]; numbers recover bit-exactly.
pub fn parse_csv(text: &str) -> Result<ResultTable, CliError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config("empty CSV".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let mut table = ResultTable::new(&columns);
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                if tok.is_empty() {
                    Cell::Empty
                } else if let Ok(v) = tok.parse::<i64>() {
                    Cell::Int(v)
                } else if let Ok(v) = tok.parse::<f64>() {
                    Cell::Float(v)
                } else {
                    Cell::Text(tok.to_string())
                }
            })
            .collect();
        table.push(row);
    }
    Ok(table)
}

/// Least-squares slope of y over x.
pub fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
