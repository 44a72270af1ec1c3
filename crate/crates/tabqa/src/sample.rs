//! Complete supervised samples: table, query, gold trace and denotation.

use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::query::Query;
use crate::symbolic::interp::execute_trace;
use crate::table::{CellValue, Table};
use crate::trace::{ExecutionTrace, OperatorKind};

/// The four query families, by trace skeleton length and shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryType {
    SelectWhere,
    Superlative,
    WhereSuperlative,
    NestQuery,
}

/// All query types, in canonical reporting order.
pub const QUERY_TYPES: [QueryType; 4] = [
    QueryType::SelectWhere,
    QueryType::Superlative,
    QueryType::WhereSuperlative,
    QueryType::NestQuery,
];

impl QueryType {
    /// Number of executable steps in this type's gold trace.
    pub fn n_steps(self) -> usize {
        match self {
            QueryType::SelectWhere | QueryType::Superlative => 2,
            QueryType::WhereSuperlative => 3,
            QueryType::NestQuery => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QueryType::SelectWhere => "SelectWhere",
            QueryType::Superlative => "Superlative",
            QueryType::WhereSuperlative => "WhereSuperlative",
            QueryType::NestQuery => "NestQuery",
        }
    }

    /// The fixed operator skeleton of this type's gold trace, with the
    /// superlative/comparison slots widened to their two alternatives.
    fn skeleton_ok(self, ops: &[OperatorKind]) -> bool {
        use OperatorKind::*;
        match self {
            QueryType::SelectWhere => matches!(ops, [SelectRow, SelectValue]),
            QueryType::Superlative => matches!(ops, [ArgMin | ArgMax, SelectValue]),
            QueryType::WhereSuperlative => {
                matches!(ops, [SelectRow, ArgMin | ArgMax, SelectValue])
            }
            QueryType::NestQuery => matches!(
                ops,
                [SelectRow, GreaterThan | LessThan, ArgMin | ArgMax, SelectValue]
            ),
        }
    }
}

impl std::fmt::Display for QueryType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One dataset record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub table: Table,
    pub query: Query,
    pub query_type: QueryType,
    pub gold_trace: ExecutionTrace,
    pub denotation: CellValue,
}

impl Sample {
    /// Re-checks every invariant, including re-executing the gold trace
    /// against the interpreter and comparing with the stored denotation.
    pub fn validate(&self, expect_rows: usize, expect_cols: usize) -> Result<(), DataError> {
        self.table.validate_structure()?;
        self.table.validate_dims(expect_rows, expect_cols)?;
        self.query.validate()?;
        self.gold_trace.validate()?;

        let ops: Vec<OperatorKind> =
            self.gold_trace.executable_steps().iter().map(|s| s.op).collect();
        if !self.query_type.skeleton_ok(&ops) {
            return Err(DataError::Validation(format!(
                "gold trace skeleton does not match query type {}",
                self.query_type
            )));
        }

        // Numeric columns used as gold-trace arguments must be duplicate-free
        // so that superlatives and comparisons are unambiguous.
        for step in self.gold_trace.executable_steps() {
            let col = step.field.expect("validated above");
            if col >= self.table.n_cols() {
                return Err(DataError::Validation(format!(
                    "gold trace references column {col} outside the table"
                )));
            }
            if self.table.fields[col].kind == crate::table::FieldKind::Numeric {
                let mut seen = std::collections::HashSet::new();
                for row in &self.table.rows {
                    let v = row[col].as_number().expect("numeric column");
                    if !seen.insert(v) {
                        return Err(DataError::Validation(format!(
                            "numeric column `{}` used by the gold trace has duplicate value {v}",
                            self.table.fields[col].name
                        )));
                    }
                }
            }
        }

        match execute_trace(&self.gold_trace, &self.table, &self.query) {
            Some(v) if v == self.denotation => Ok(()),
            Some(v) => Err(DataError::Validation(format!(
                "stored denotation `{}` disagrees with re-executed trace result `{v}`",
                self.denotation
            ))),
            None => Err(DataError::Validation(
                "gold trace produced no denotation on re-execution".into(),
            )),
        }
    }
}
