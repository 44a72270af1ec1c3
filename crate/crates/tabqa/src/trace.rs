//! Execution traces: operator sequences with field arguments.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::DataError;
use crate::table::Table;

/// Maximum number of non-EOE steps in any trace.
pub const MAX_STEPS: usize = 4;

/// The primitive operator set: six executable operators plus the terminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    SelectRow,
    ArgMin,
    ArgMax,
    GreaterThan,
    LessThan,
    SelectValue,
    Eoe,
}

/// Executable operators in canonical order (EOE excluded); index order is
/// the action numbering used by the predictors.
pub const EXECUTABLE_OPS: [OperatorKind; 6] = [
    OperatorKind::SelectRow,
    OperatorKind::ArgMin,
    OperatorKind::ArgMax,
    OperatorKind::GreaterThan,
    OperatorKind::LessThan,
    OperatorKind::SelectValue,
];

/// Total operator count including EOE.
pub const N_OPERATORS: usize = 7;

impl OperatorKind {
    /// Stable action index: the six executable operators then EOE.
    pub fn index(self) -> usize {
        match self {
            OperatorKind::SelectRow => 0,
            OperatorKind::ArgMin => 1,
            OperatorKind::ArgMax => 2,
            OperatorKind::GreaterThan => 3,
            OperatorKind::LessThan => 4,
            OperatorKind::SelectValue => 5,
            OperatorKind::Eoe => 6,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(OperatorKind::SelectRow),
            1 => Some(OperatorKind::ArgMin),
            2 => Some(OperatorKind::ArgMax),
            3 => Some(OperatorKind::GreaterThan),
            4 => Some(OperatorKind::LessThan),
            5 => Some(OperatorKind::SelectValue),
            6 => Some(OperatorKind::Eoe),
            _ => None,
        }
    }

    /// Every operator except EOE takes a field argument.
    pub fn takes_field(self) -> bool {
        self != OperatorKind::Eoe
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::SelectRow => "select_row",
            OperatorKind::ArgMin => "argmin",
            OperatorKind::ArgMax => "argmax",
            OperatorKind::GreaterThan => "greater_than",
            OperatorKind::LessThan => "less_than",
            OperatorKind::SelectValue => "select_value",
            OperatorKind::Eoe => "EOE",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "select_row" => Some(OperatorKind::SelectRow),
            "argmin" => Some(OperatorKind::ArgMin),
            "argmax" => Some(OperatorKind::ArgMax),
            "greater_than" => Some(OperatorKind::GreaterThan),
            "less_than" => Some(OperatorKind::LessThan),
            "select_value" => Some(OperatorKind::SelectValue),
            "EOE" | "eoe" => Some(OperatorKind::Eoe),
            _ => None,
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One step: an operator plus its column argument (absent only for EOE).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionStep {
    pub op: OperatorKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub field: Option<usize>,
}

impl ExecutionStep {
    pub fn new(op: OperatorKind, field: usize) -> Self {
        ExecutionStep { op, field: Some(field) }
    }

    pub fn eoe() -> Self {
        ExecutionStep { op: OperatorKind::Eoe, field: None }
    }
}

/// An ordered list of steps, optionally terminated by EOE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ExecutionTrace {
    pub steps: Vec<ExecutionStep>,
}

impl ExecutionTrace {
    pub fn new(steps: Vec<ExecutionStep>) -> Self {
        ExecutionTrace { steps }
    }

    /// Steps excluding any trailing EOE.
    pub fn executable_steps(&self) -> &[ExecutionStep] {
        match self.steps.last() {
            Some(s) if s.op == OperatorKind::Eoe => &self.steps[..self.steps.len() - 1],
            _ => &self.steps,
        }
    }

    pub fn n_executable(&self) -> usize {
        self.executable_steps().len()
    }

    /// Two traces are equivalent when their executable steps match exactly
    /// (operators and field arguments); trailing EOE is ignored.
    pub fn matches_ignoring_eoe(&self, other: &ExecutionTrace) -> bool {
        self.executable_steps() == other.executable_steps()
    }

    /// Checks the structural invariants: at most [`MAX_STEPS`] executable
    /// steps, EOE only in final position, field present iff required.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.n_executable() > MAX_STEPS {
            return Err(DataError::Validation(format!(
                "trace has {} executable steps, limit is {MAX_STEPS}",
                self.n_executable()
            )));
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.op == OperatorKind::Eoe && i + 1 != self.steps.len() {
                return Err(DataError::Validation(
                    "EOE must be the final step".into(),
                ));
            }
            match (step.op.takes_field(), step.field) {
                (true, None) => {
                    return Err(DataError::Validation(format!(
                        "step {i} ({}) is missing its field argument",
                        step.op
                    )))
                }
                (false, Some(_)) => {
                    return Err(DataError::Validation(
                        "EOE takes no field argument".into(),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Human-readable one-line form, `op(field) ; op(field) ; EOE`, with
    /// fields rendered through the table's column names.
    pub fn display(&self, table: &Table) -> String {
        let parts: Vec<String> = self
            .steps
            .iter()
            .map(|s| match s.field {
                Some(c) => {
                    let name = table
                        .fields
                        .get(c)
                        .map(|f| f.name.as_str())
                        .unwrap_or("?");
                    format!("{}({})", s.op, name)
                }
                None => s.op.to_string(),
            })
            .collect();
        parts.join(" ; ")
    }

    /// Parses the one-line form produced by [`display`](Self::display),
    /// resolving field names against the table.
    pub fn parse(text: &str, table: &Table) -> Result<Self, DataError> {
        let mut steps = Vec::new();
        for raw in text.split(';') {
            let part = raw.trim();
            if part.is_empty() {
                continue;
            }
            let (op_name, field) = match part.find('(') {
                Some(open) => {
                    let close = part.rfind(')').ok_or_else(|| {
                        DataError::Validation(format!("missing `)` in `{part}`"))
                    })?;
                    (part[..open].trim(), Some(part[open + 1..close].trim()))
                }
                None => (part, None),
            };
            let op = OperatorKind::from_name(op_name).ok_or_else(|| {
                DataError::Validation(format!("unknown operator `{op_name}`"))
            })?;
            let field = match field {
                Some(name) if op.takes_field() => Some(
                    table
                        .field_index(name)
                        .ok_or_else(|| {
                            DataError::Validation(format!("unknown field `{name}`"))
                        })?,
                ),
                Some(_) | None if !op.takes_field() => None,
                _ => {
                    return Err(DataError::Validation(format!(
                        "operator `{op}` requires a field argument"
                    )))
                }
            };
            steps.push(ExecutionStep { op, field });
        }
        let trace = ExecutionTrace::new(steps);
        trace.validate()?;
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{CellValue, FieldName, Table};

    fn table() -> Table {
        Table::new(
            vec![FieldName::numeric("area"), FieldName::numeric("duration")],
            vec![vec![CellValue::Number(200), CellValue::Number(30)]],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_text_form() {
        let t = table();
        let trace = ExecutionTrace::new(vec![
            ExecutionStep::new(OperatorKind::ArgMax, 0),
            ExecutionStep::new(OperatorKind::SelectValue, 1),
            ExecutionStep::eoe(),
        ]);
        let text = trace.display(&t);
        assert_eq!(text, "argmax(area) ; select_value(duration) ; EOE");
        let parsed = ExecutionTrace::parse(&text, &t).unwrap();
        assert_eq!(parsed, trace);
    }

    #[test]
    fn eoe_must_be_final() {
        let trace = ExecutionTrace::new(vec![
            ExecutionStep::eoe(),
            ExecutionStep::new(OperatorKind::SelectValue, 0),
        ]);
        assert!(trace.validate().is_err());
    }

    #[test]
    fn too_many_steps_rejected() {
        let step = ExecutionStep::new(OperatorKind::SelectRow, 0);
        let trace = ExecutionTrace::new(vec![step; 5]);
        assert!(trace.validate().is_err());
    }

    #[test]
    fn missing_field_rejected() {
        let trace = ExecutionTrace::new(vec![ExecutionStep {
            op: OperatorKind::ArgMax,
            field: None,
        }]);
        assert!(trace.validate().is_err());
    }

    #[test]
    fn eoe_normalized_match() {
        let a = ExecutionTrace::new(vec![
            ExecutionStep::new(OperatorKind::SelectRow, 1),
            ExecutionStep::new(OperatorKind::SelectValue, 0),
            ExecutionStep::eoe(),
        ]);
        let b = ExecutionTrace::new(vec![
            ExecutionStep::new(OperatorKind::SelectRow, 1),
            ExecutionStep::new(OperatorKind::SelectValue, 0),
        ]);
        assert!(a.matches_ignoring_eoe(&b));
        let c = ExecutionTrace::new(vec![
            ExecutionStep::new(OperatorKind::SelectRow, 0),
            ExecutionStep::new(OperatorKind::SelectValue, 0),
        ]);
        assert!(!a.matches_ignoring_eoe(&c));
    }

    #[test]
    fn operator_indices_are_stable() {
        for i in 0..N_OPERATORS {
            assert_eq!(OperatorKind::from_index(i).unwrap().index(), i);
        }
        assert_eq!(EXECUTABLE_OPS.len(), 6);
        assert!(EXECUTABLE_OPS.iter().all(|op| *op != OperatorKind::Eoe));
    }
}
