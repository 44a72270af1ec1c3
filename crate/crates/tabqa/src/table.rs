//! Tables, cells and row masks — the knowledge base both executors query.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::DataError;

/// Default table geometry. Generated tables are square grids of this size.
pub const DEFAULT_ROWS: usize = 10;
pub const DEFAULT_COLS: usize = 10;

/// A single table cell: either an integer or an entity token.
///
/// Entity tokens are single vocabulary tokens (no whitespace); numbers are
/// rendered as their decimal token wherever a surface form is needed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellValue {
    Number(i64),
    Entity(String),
}

impl CellValue {
    /// The surface token for this value (decimal rendering for numbers).
    pub fn token(&self) -> String {
        match self {
            CellValue::Number(n) => n.to_string(),
            CellValue::Entity(s) => s.clone(),
        }
    }

    pub fn as_number(&self) -> Option<i64> {
        match self {
            CellValue::Number(n) => Some(*n),
            CellValue::Entity(_) => None,
        }
    }

    pub fn is_entity(&self) -> bool {
        matches!(self, CellValue::Entity(_))
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Number(n) => write!(f, "{n}"),
            CellValue::Entity(s) => write!(f, "{s}"),
        }
    }
}

/// Whether a column holds numbers or entity tokens.
///
/// Ordering operators (`argmin`, `argmax`, `greater_than`, `less_than`)
/// only accept Numeric columns as arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Numeric,
    Entity,
}

/// A named, typed column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldName {
    pub name: String,
    pub kind: FieldKind,
}

impl FieldName {
    pub fn numeric(name: impl Into<String>) -> Self {
        FieldName { name: name.into(), kind: FieldKind::Numeric }
    }

    pub fn entity(name: impl Into<String>) -> Self {
        FieldName { name: name.into(), kind: FieldKind::Entity }
    }
}

/// A rectangular grid of typed cells with named fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub fields: Vec<FieldName>,
    pub rows: Vec<Vec<CellValue>>,
}

impl Table {
    /// Builds a table, checking rectangularity, field-name uniqueness and
    /// column/kind consistency.
    pub fn new(fields: Vec<FieldName>, rows: Vec<Vec<CellValue>>) -> Result<Self, DataError> {
        let table = Table { fields, rows };
        table.validate_structure()?;
        Ok(table)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.fields.len()
    }

    /// The stored value at (row, col).
    pub fn cell(&self, row: usize, col: usize) -> Result<&CellValue, DataError> {
        if row >= self.n_rows() || col >= self.n_cols() {
            return Err(DataError::IndexOutOfRange {
                row,
                col,
                rows: self.n_rows(),
                cols: self.n_cols(),
            });
        }
        Ok(&self.rows[row][col])
    }

    /// Column index for a field name, if present.
    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn validate_structure(&self) -> Result<(), DataError> {
        for (i, f) in self.fields.iter().enumerate() {
            if self.fields[..i].iter().any(|g| g.name == f.name) {
                return Err(DataError::Validation(format!(
                    "duplicate field name `{}`",
                    f.name
                )));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.n_cols() {
                return Err(DataError::Validation(format!(
                    "row {} has {} cells, expected {}",
                    r,
                    row.len(),
                    self.n_cols()
                )));
            }
            for (c, cell) in row.iter().enumerate() {
                let ok = match self.fields[c].kind {
                    FieldKind::Numeric => matches!(cell, CellValue::Number(_)),
                    FieldKind::Entity => matches!(cell, CellValue::Entity(_)),
                };
                if !ok {
                    return Err(DataError::Validation(format!(
                        "cell ({r},{c}) does not match kind of field `{}`",
                        self.fields[c].name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks the exact geometry expected by the dataset schema.
    pub fn validate_dims(&self, rows: usize, cols: usize) -> Result<(), DataError> {
        if self.n_rows() != rows || self.n_cols() != cols {
            return Err(DataError::Validation(format!(
                "table must be {rows}×{cols}, got {}×{}",
                self.n_rows(),
                self.n_cols()
            )));
        }
        Ok(())
    }
}

/// Boolean per-row selection — the symbolic executor's intermediate state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMask {
    bits: Vec<bool>,
}

impl RowMask {
    pub fn all(n: usize) -> Self {
        RowMask { bits: vec![true; n] }
    }

    pub fn none(n: usize) -> Self {
        RowMask { bits: vec![false; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        RowMask { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, row: usize) -> bool {
        self.bits[row]
    }

    pub fn set(&mut self, row: usize, value: bool) {
        self.bits[row] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Row indices currently selected, ascending.
    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// The sole selected row, if the mask is a singleton.
    pub fn singleton(&self) -> Option<usize> {
        let mut it = self.selected();
        match (it.next(), it.next()) {
            (Some(row), None) => Some(row),
            _ => None,
        }
    }
}
