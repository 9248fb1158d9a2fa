//! Typed rectangular data with explicit missingness masks.

mod csv_io;
mod rng;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to, Schema, MISSING_TOKEN};
pub use rng::RngStream;

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ColumnKind {
    #[default]
    Continuous,
    /// Stored as reals restricted to {0, 1}.
    Binary,
}

/// One variable: values plus an observed mask (`true` = observed).
///
/// Missing cells hold NaN in `values`; only the mask is authoritative.
#[derive(Debug, Clone)]
pub struct Column<S> {
    name: String,
    kind: ColumnKind,
    values: Vec<S>,
    observed: Vec<bool>,
}

impl<S: Scalar> Column<S> {
    pub fn new(
        name: impl Into<String>,
        kind: ColumnKind,
        values: Vec<S>,
        observed: Vec<bool>,
    ) -> Result<Self> {
        let name = name.into();
        if values.len() != observed.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), found: observed.len() });
        }
        let mut values = values;
        for (v, &obs) in values.iter_mut().zip(&observed) {
            if obs {
                if !v.is_finite() {
                    return Err(Error::Schema {
                        column: name,
                        message: format!("observed value {v} is not finite"),
                    });
                }
                if kind == ColumnKind::Binary && *v != S::zero() && *v != S::one() {
                    return Err(Error::Schema {
                        column: name,
                        message: format!("binary column holds {v}"),
                    });
                }
            } else {
                *v = S::nan();
            }
        }
        Ok(Self { name, kind, values, observed })
    }

    /// Fully observed continuous column.
    pub fn continuous(name: impl Into<String>, values: Vec<S>) -> Result<Self> {
        let observed = vec![true; values.len()];
        Self::new(name, ColumnKind::Continuous, values, observed)
    }

    /// Fully observed binary column.
    pub fn binary(name: impl Into<String>, values: Vec<S>) -> Result<Self> {
        let observed = vec![true; values.len()];
        Self::new(name, ColumnKind::Binary, values, observed)
    }

    /// Column from optional cells; `None` is missing.
    pub fn from_options(name: impl Into<String>, kind: ColumnKind, cells: &[Option<S>]) -> Result<Self> {
        let observed: Vec<bool> = cells.iter().map(Option::is_some).collect();
        let values = cells.iter().map(|c| c.unwrap_or_else(S::nan)).collect();
        Self::new(name, kind, values, observed)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn get(&self, row: usize) -> Option<S> {
        self.observed[row].then(|| self.values[row])
    }

    pub fn n_missing(&self) -> usize {
        self.observed.iter().filter(|o| !**o).count()
    }

    pub fn is_complete(&self) -> bool {
        self.observed.iter().all(|&o| o)
    }

    pub fn observed_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.observed[i]).collect()
    }

    pub fn missing_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.observed[i]).collect()
    }

    /// Marks `rows` missing, leaving other cells untouched.
    pub fn with_missing(&self, rows: impl IntoIterator<Item = usize>) -> Self {
        let mut out = self.clone();
        for r in rows {
            out.observed[r] = false;
            out.values[r] = S::nan();
        }
        out
    }

    /// Replaces every cell with `values`, all observed.
    pub(crate) fn filled(&self, values: Vec<S>) -> Self {
        Self { name: self.name.clone(), kind: self.kind, observed: vec![true; values.len()], values }
    }
}

/// Equality ignores the placeholder stored in missing cells.
impl<S: PartialEq> PartialEq for Column<S> {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.kind == other.kind
            && self.observed == other.observed
            && self.values.iter().zip(&other.values).zip(&self.observed).all(|((a, b), &o)| !o || a == b)
    }
}

/// Ordered collection of equal-length, uniquely named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    columns: Vec<Column<S>>,
    n: usize,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(columns: Vec<Column<S>>) -> Result<Self> {
        let n = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for c in &columns {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.len() });
            }
            if !seen.insert(c.name.clone()) {
                return Err(Error::Schema { column: c.name.clone(), message: "duplicate column name".into() });
            }
        }
        Ok(Self { columns, n })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column<S>] {
        &self.columns
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(Column::name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_owned()))
    }

    pub fn column(&self, name: &str) -> Result<&Column<S>> {
        self.index_of(name).map(|i| &self.columns[i])
    }

    pub fn column_at(&self, idx: usize) -> &Column<S> {
        &self.columns[idx]
    }

    /// Copy with the named column replaced.
    pub fn with_column(&self, column: Column<S>) -> Result<Self> {
        let idx = self.index_of(column.name())?;
        if column.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: column.len() });
        }
        let mut out = self.clone();
        out.columns[idx] = column;
        Ok(out)
    }

    pub fn is_complete(&self) -> bool {
        self.columns.iter().all(Column::is_complete)
    }

    /// Copy with only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let cols = names.iter().map(|n| self.column(n).cloned()).collect::<Result<Vec<_>>>()?;
        Self::new(cols)
    }
}

/// Cell mask, column-major and aligned with a dataset; `true` marks cells the
/// engine should (re)draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhereMask {
    columns: Vec<String>,
    cells: Vec<Vec<bool>>,
    n: usize,
}

impl WhereMask {
    pub fn none<S: Scalar>(data: &Dataset<S>) -> Self {
        Self {
            columns: data.names().map(str::to_owned).collect(),
            cells: vec![vec![false; data.n_rows()]; data.n_cols()],
            n: data.n_rows(),
        }
    }

    /// True exactly at missing cells (the ordinary imputation mask).
    pub fn missing<S: Scalar>(data: &Dataset<S>) -> Self {
        Self {
            columns: data.names().map(str::to_owned).collect(),
            cells: data.columns().iter().map(|c| c.observed().iter().map(|o| !o).collect()).collect(),
            n: data.n_rows(),
        }
    }

    pub fn from_cells(columns: Vec<String>, cells: Vec<Vec<bool>>) -> Result<Self> {
        if columns.len() != cells.len() {
            return Err(Error::DimensionMismatch { expected: columns.len(), found: cells.len() });
        }
        let n = cells.first().map_or(0, Vec::len);
        if let Some(bad) = cells.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
        }
        Ok(Self { columns, cells, n })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.cells.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &[bool] {
        &self.cells[idx]
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[col][row]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[col][row] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().flatten().filter(|&&b| b).count()
    }

    /// Clears every column not named in `keep`.
    pub fn restricted_to(&self, keep: &[&str]) -> Self {
        let mut out = self.clone();
        for (name, col) in out.columns.iter().zip(out.cells.iter_mut()) {
            if !keep.contains(&name.as_str()) {
                col.iter_mut().for_each(|b| *b = false);
            }
        }
        out
    }

    /// Cell-wise OR.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.columns != other.columns || self.n != other.n {
            return Err(Error::InvalidArgument("where masks have different shapes".into()));
        }
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| *x || *y).collect())
            .collect();
        Ok(Self { columns: self.columns.clone(), cells, n: self.n })
    }

    /// True at every cell of the named columns.
    pub fn all_of<S: Scalar>(data: &Dataset<S>, names: &[&str]) -> Self {
        let mut out = Self::none(data);
        for (name, col) in out.columns.iter().zip(out.cells.iter_mut()) {
            if names.contains(&name.as_str()) {
                col.iter_mut().for_each(|b| *b = true);
            }
        }
        out
    }

    pub(crate) fn matches<S: Scalar>(&self, data: &Dataset<S>) -> bool {
        self.n == data.n_rows() && self.columns.iter().map(String::as_str).eq(data.names())
    }
}
