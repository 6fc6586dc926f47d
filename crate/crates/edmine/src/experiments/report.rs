//! Result tables and file emission.
//!
//! Every emitted file starts with a `#`-prefixed provenance block (tool
//! version, experiment, config digest, seeds, protocol) so any number in any
//! output traces back to the run that produced it. Markdown renders percent
//! cells to two decimals for reading; the CSV keeps full precision so a
//! reload reproduces cells exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{EdmError, Result};

/// One table cell: a percent value and an optional dispersion (std dev).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: f64,
    pub dispersion: Option<f64>,
}

impl Cell {
    pub fn plain(value: f64) -> Self {
        Cell {
            value,
            dispersion: None,
        }
    }

    pub fn with_dispersion(value: f64, dispersion: f64) -> Self {
        Cell {
            value,
            dispersion: Some(dispersion),
        }
    }
}

/// A rectangular, captioned result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    /// File stem for emission.
    pub name: String,
    pub caption: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub cells: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(name: &str, caption: &str, row_labels: Vec<String>, col_labels: Vec<String>) -> Self {
        let cells = vec![vec![Cell::plain(f64::NAN); col_labels.len()]; row_labels.len()];
        ResultTable {
            name: name.to_string(),
            caption: caption.to_string(),
            row_labels,
            col_labels,
            cells,
        }
    }

    pub fn set(&mut self, row: usize, col: usize, cell: Cell) {
        self.cells[row][col] = cell;
    }

    pub fn is_rectangular(&self) -> bool {
        self.cells.len() == self.row_labels.len()
            && self.cells.iter().all(|r| r.len() == self.col_labels.len())
    }

    pub fn to_markdown(&self, provenance: &Provenance) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.caption);
        out.push('\n');
        for (key, value) in &provenance.lines {
            let _ = writeln!(out, "- {key}: {value}");
        }
        out.push('\n');
        let _ = write!(out, "| |");
        for col in &self.col_labels {
            let _ = write!(out, " {col} |");
        }
        out.push('\n');
        let _ = write!(out, "|---|");
        for _ in &self.col_labels {
            let _ = write!(out, "---|");
        }
        out.push('\n');
        for (row, label) in self.row_labels.iter().enumerate() {
            let _ = write!(out, "| {label} |");
            for cell in &self.cells[row] {
                match cell.dispersion {
                    Some(d) => {
                        let _ = write!(out, " {:.2} ± {:.2} |", cell.value, d);
                    }
                    None => {
                        let _ = write!(out, " {:.2} |", cell.value);
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Full-precision CSV with the provenance header block.
    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let mut out = provenance.header_block();
        out.push_str(&format!("# caption: {}\n", self.caption));
        out.push_str("row");
        for col in &self.col_labels {
            out.push(',');
            out.push_str(col);
            if self.has_dispersion() {
                out.push(',');
                out.push_str(&format!("{col}_std"));
            }
        }
        out.push('\n');
        for (row, label) in self.row_labels.iter().enumerate() {
            out.push_str(label);
            for cell in &self.cells[row] {
                out.push(',');
                out.push_str(&cell.value.to_string());
                if self.has_dispersion() {
                    out.push(',');
                    if let Some(d) = cell.dispersion {
                        out.push_str(&d.to_string());
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    fn has_dispersion(&self) -> bool {
        self.cells
            .iter()
            .any(|row| row.iter().any(|c| c.dispersion.is_some()))
    }

    /// Parse the cells back out of [`Self::to_csv`] output.
    pub fn cells_from_csv(text: &str) -> Result<Vec<Vec<Cell>>> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| EdmError::Experiment("empty table csv".into()))?;
        let with_dispersion = header.contains("_std");
        let mut cells = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let mut row = Vec::new();
            let mut i = 1;
            while i < fields.len() {
                let value: f64 = fields[i]
                    .parse()
                    .map_err(|_| EdmError::Experiment(format!("bad cell `{}`", fields[i])))?;
                let dispersion = if with_dispersion {
                    i += 1;
                    if fields[i].is_empty() {
                        None
                    } else {
                        Some(fields[i].parse().map_err(|_| {
                            EdmError::Experiment(format!("bad dispersion `{}`", fields[i]))
                        })?)
                    }
                } else {
                    None
                };
                row.push(Cell { value, dispersion });
                i += 1;
            }
            cells.push(row);
        }
        Ok(cells)
    }
}

/// Key/value provenance block prefixed to every output file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub lines: Vec<(String, String)>,
}

impl Provenance {
    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.lines.push((key.to_string(), value.into()));
    }

    pub fn header_block(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.lines {
            out.push_str(&format!("# {key}: {value}\n"));
        }
        out
    }
}

/// Write each table's `.md` and `.csv` under `dir`, returning the paths.
pub fn emit_report(
    tables: &[ResultTable],
    dir: &Path,
    provenance: &Provenance,
) -> Result<Vec<PathBuf>> {
    if tables.is_empty() {
        return Err(EdmError::Experiment("no tables to emit".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| EdmError::io(dir, e))?;
    let mut written = Vec::new();
    for table in tables {
        debug_assert!(table.is_rectangular());
        let md = dir.join(format!("{}.md", table.name));
        std::fs::write(&md, table.to_markdown(provenance)).map_err(|e| EdmError::io(&md, e))?;
        written.push(md);
        let csv = dir.join(format!("{}.csv", table.name));
        std::fs::write(&csv, table.to_csv(provenance)).map_err(|e| EdmError::io(&csv, e))?;
        written.push(csv);
    }
    Ok(written)
}

/// Write a raw CSV (plot data, rankings) with the provenance header.
pub fn write_csv_with_provenance(
    path: &Path,
    provenance: &Provenance,
    body: &str,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| EdmError::io(parent, e))?;
    }
    let mut out = provenance.header_block();
    out.push_str(body);
    std::fs::write(path, out).map_err(|e| EdmError::io(path, e))
}
