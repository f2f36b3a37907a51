use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Grouped longitudinal observations. Rows are stored contiguously per
/// subject, subjects ordered by first appearance in the source; within a
/// subject the source order is preserved.
#[derive(Clone, Debug)]
pub struct Dataset {
    subject_ids: Vec<String>,
    ranges: Vec<Range<usize>>,
    y: Vec<f64>,
    columns: Vec<String>,
    cov: Matrix,
}

impl Dataset {
    pub fn from_parts(
        subject: Vec<String>,
        y: Vec<f64>,
        columns: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = subject.len();
        if y.len() != n || rows.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "subject/y/covariate row counts differ: {n}/{}/{}",
                y.len(),
                rows.len()
            )));
        }
        if n == 0 {
            return Err(Error::DimensionMismatch("empty dataset".into()));
        }
        let mut ids: Vec<String> = Vec::new();
        for s in &subject {
            if !ids.iter().any(|i| i == s) {
                ids.push(s.clone());
            }
        }
        let mut order: Vec<usize> = Vec::with_capacity(n);
        let mut ranges = Vec::with_capacity(ids.len());
        for id in &ids {
            let start = order.len();
            for (row, s) in subject.iter().enumerate() {
                if s == id {
                    order.push(row);
                }
            }
            ranges.push(start..order.len());
        }
        let mut cov = Matrix::zeros(n, columns.len());
        let mut y_sorted = Vec::with_capacity(n);
        for (new, &old) in order.iter().enumerate() {
            if rows[old].len() != columns.len() {
                return Err(Error::DimensionMismatch(format!(
                    "covariate row {old} has {} values, expected {}",
                    rows[old].len(),
                    columns.len()
                )));
            }
            cov.row_mut(new).copy_from_slice(&rows[old]);
            y_sorted.push(y[old]);
        }
        Ok(Dataset { subject_ids: ids, ranges, y: y_sorted, columns, cov })
    }

    /// Reads a comma-separated file with a header row. `subject_col` may hold
    /// arbitrary text; `y_col` and every other column must parse as numbers
    /// and become covariates.
    pub fn load_csv(path: &Path, subject_col: &str, y_col: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text, subject_col, y_col)
    }

    pub fn parse_csv(text: &str, subject_col: &str, y_col: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::ParseError { row: 0, message: "empty file".into() })?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let subj_idx = names
            .iter()
            .position(|n| n == subject_col)
            .ok_or_else(|| Error::MissingColumn(subject_col.to_string()))?;
        let y_idx = names
            .iter()
            .position(|n| n == y_col)
            .ok_or_else(|| Error::MissingColumn(y_col.to_string()))?;
        let cov_idx: Vec<usize> =
            (0..names.len()).filter(|&i| i != subj_idx && i != y_idx).collect();
        let columns: Vec<String> = cov_idx.iter().map(|&i| names[i].clone()).collect();
        let mut subject = Vec::new();
        let mut y = Vec::new();
        let mut rows = Vec::new();
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != names.len() {
                return Err(Error::ParseError {
                    row: lineno,
                    message: format!("{} fields, header has {}", fields.len(), names.len()),
                });
            }
            subject.push(fields[subj_idx].to_string());
            y.push(parse_field(fields[y_idx], lineno, y_col)?);
            let mut row = Vec::with_capacity(cov_idx.len());
            for (&i, name) in cov_idx.iter().zip(&columns) {
                row.push(parse_field(fields[i], lineno, name)?);
            }
            rows.push(row);
        }
        Self::from_parts(subject, y, columns, rows)
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_subjects(&self) -> usize {
        self.ranges.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn subject_id(&self, i: usize) -> &str {
        &self.subject_ids[i]
    }

    pub fn subject_index(&self, id: &str) -> Option<usize> {
        self.subject_ids.iter().position(|s| s == id)
    }

    pub fn subject_range(&self, i: usize) -> Range<usize> {
        self.ranges[i].clone()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Covariate values of one observation row, dataset column order.
    pub fn cov_row(&self, obs: usize) -> &[f64] {
        self.cov.row(obs)
    }

    pub fn column_values(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        Ok((0..self.n_obs()).map(|i| self.cov.row(i)[idx]).collect())
    }

    /// Same observations with a replaced response (used by the bootstrap).
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.y.len() {
            return Err(Error::DimensionMismatch("response length mismatch".into()));
        }
        Ok(Dataset { y, ..self.clone() })
    }
}

fn parse_field(s: &str, row: usize, col: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::ParseError {
        row,
        message: format!("cannot parse '{s}' in column '{col}' as a number"),
    })
}
