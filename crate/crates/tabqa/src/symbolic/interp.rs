//! Deterministic interpreter for the primitive operator set.
//!
//! State is a boolean row mask plus a remembered reference row. Ill-typed
//! applications (an ordering operator on an entity column, `select_value`
//! on a non-singleton mask, a comparison without a reference row, any
//! operator on an empty mask) soft-fail to an empty mask instead of
//! aborting: sampled rollouts routinely produce invalid programs and must
//! simply earn no reward.

use crate::query::Query;
use crate::table::{CellValue, FieldKind, RowMask, Table};
use crate::trace::{ExecutionTrace, OperatorKind};

/// Interpreter state between steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicState {
    pub mask: RowMask,
    /// Row captured by the most recent singleton-producing `select_row`;
    /// consumed by `greater_than` / `less_than`.
    pub reference_row: Option<usize>,
    pub produced_value: Option<CellValue>,
    pub terminated: bool,
}

impl SymbolicState {
    /// Initial state: every row selected, nothing produced.
    pub fn initial(n_rows: usize) -> Self {
        SymbolicState {
            mask: RowMask::all(n_rows),
            reference_row: None,
            produced_value: None,
            terminated: false,
        }
    }

    fn soft_fail(&self, n_rows: usize) -> Self {
        SymbolicState {
            mask: RowMask::none(n_rows),
            reference_row: self.reference_row,
            produced_value: None,
            terminated: self.terminated,
        }
    }
}

/// Applies one operator, returning the successor state. Never panics on a
/// structurally valid (table, query, step) combination; contract misuse
/// soft-fails as described on the module.
pub fn apply_operator(
    state: &SymbolicState,
    op: OperatorKind,
    field: Option<usize>,
    table: &Table,
    query: &Query,
) -> SymbolicState {
    let n = table.n_rows();
    if state.terminated {
        return state.clone();
    }
    if op == OperatorKind::Eoe {
        let mut next = state.clone();
        next.terminated = true;
        return next;
    }
    let col = match field {
        Some(c) if c < table.n_cols() => c,
        _ => return state.soft_fail(n),
    };

    match op {
        OperatorKind::SelectRow => {
            let wanted = match query.mentioned_value(table, col) {
                Some(v) => v,
                None => return state.soft_fail(n),
            };
            let mut mask = RowMask::none(n);
            for row in state.mask.selected() {
                if &table.rows[row][col] == wanted {
                    mask.set(row, true);
                }
            }
            let reference_row = mask.singleton().or(state.reference_row);
            SymbolicState {
                mask,
                reference_row,
                produced_value: None,
                terminated: false,
            }
        }
        OperatorKind::ArgMin | OperatorKind::ArgMax => {
            if table.fields[col].kind != FieldKind::Numeric {
                return state.soft_fail(n);
            }
            let mut best: Option<(usize, i64)> = None;
            for row in state.mask.selected() {
                let v = table.rows[row][col].as_number().expect("numeric column");
                let better = match (op, best) {
                    (_, None) => true,
                    (OperatorKind::ArgMin, Some((_, b))) => v < b,
                    (OperatorKind::ArgMax, Some((_, b))) => v > b,
                    _ => unreachable!(),
                };
                if better {
                    best = Some((row, v));
                }
            }
            match best {
                Some((row, _)) => {
                    let mut mask = RowMask::none(n);
                    mask.set(row, true);
                    SymbolicState {
                        mask,
                        reference_row: state.reference_row,
                        produced_value: None,
                        terminated: false,
                    }
                }
                // Empty input mask: stay empty, produce nothing.
                None => state.soft_fail(n),
            }
        }
        OperatorKind::GreaterThan | OperatorKind::LessThan => {
            if table.fields[col].kind != FieldKind::Numeric {
                return state.soft_fail(n);
            }
            let reference = match state.reference_row {
                Some(r) => r,
                None => return state.soft_fail(n),
            };
            let pivot = table.rows[reference][col].as_number().expect("numeric column");
            // Comparison ranges over ALL rows, not the current mask.
            let mut mask = RowMask::none(n);
            for (row, cells) in table.rows.iter().enumerate() {
                let v = cells[col].as_number().expect("numeric column");
                let keep = match op {
                    OperatorKind::GreaterThan => v > pivot,
                    OperatorKind::LessThan => v < pivot,
                    _ => unreachable!(),
                };
                if keep {
                    mask.set(row, true);
                }
            }
            SymbolicState {
                mask,
                reference_row: state.reference_row,
                produced_value: None,
                terminated: false,
            }
        }
        OperatorKind::SelectValue => match state.mask.singleton() {
            Some(row) => SymbolicState {
                mask: state.mask.clone(),
                reference_row: state.reference_row,
                produced_value: Some(table.rows[row][col].clone()),
                terminated: false,
            },
            None => state.soft_fail(n),
        },
        OperatorKind::Eoe => unreachable!("handled above"),
    }
}

/// Folds a trace from the all-ones mask; returns the produced value if one
/// is set when the trace terminates or is exhausted.
pub fn execute_trace(trace: &ExecutionTrace, table: &Table, query: &Query) -> Option<CellValue> {
    let mut state = SymbolicState::initial(table.n_rows());
    for step in &trace.steps {
        state = apply_operator(&state, step.op, step.field, table, query);
        if state.terminated {
            break;
        }
    }
    state.produced_value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::FieldName;
    use crate::trace::ExecutionStep;
    use std::collections::BTreeMap;

    /// Five olympic-style rows: year, city, area, gdp, duration.
    fn games_table() -> Table {
        let f = vec![
            FieldName::numeric("year"),
            FieldName::entity("city"),
            FieldName::numeric("area"),
            FieldName::numeric("gdp"),
            FieldName::numeric("duration"),
        ];
        let row = |y: i64, c: &str, a: i64, g: i64, d: i64| {
            vec![
                CellValue::Number(y),
                CellValue::Entity(c.into()),
                CellValue::Number(a),
                CellValue::Number(g),
                CellValue::Number(d),
            ]
        };
        Table::new(
            f,
            vec![
                row(2000, "sydney", 200, 310, 30),
                row(2004, "athens", 250, 250, 20),
                row(2008, "beijing", 350, 480, 25),
                row(2012, "london", 300, 520, 35),
                row(2016, "rio", 200, 190, 40),
            ],
        )
        .unwrap()
    }

    fn empty_query() -> Query {
        Query::new(vec!["q".into()], BTreeMap::new())
    }

    #[test]
    fn argmax_then_select_value() {
        let t = games_table();
        let q = empty_query();
        let s0 = SymbolicState::initial(t.n_rows());
        let s1 = apply_operator(&s0, OperatorKind::ArgMax, Some(2), &t, &q);
        assert_eq!(s1.mask.singleton(), Some(2), "largest area is the 2008 row");
        let s2 = apply_operator(&s1, OperatorKind::SelectValue, Some(4), &t, &q);
        assert_eq!(s2.produced_value, Some(CellValue::Number(25)));
    }

    #[test]
    fn nested_comparison_chain() {
        // select_row(gdp=250) ; less_than(area) ; argmax(year) ; select_value(duration)
        let t = games_table();
        let mut mv = BTreeMap::new();
        mv.insert("gdp".to_string(), CellValue::Number(250));
        let q = Query::new(vec!["gdp".into(), "250".into()], mv);

        let trace = ExecutionTrace::new(vec![
            ExecutionStep::new(OperatorKind::SelectRow, 3),
            ExecutionStep::new(OperatorKind::LessThan, 2),
            ExecutionStep::new(OperatorKind::ArgMax, 0),
            ExecutionStep::new(OperatorKind::SelectValue, 4),
            ExecutionStep::eoe(),
        ]);
        // Reference row is athens (area 250); rows with smaller area are
        // sydney (200) and rio (200); the latest of those is rio (2016).
        assert_eq!(execute_trace(&trace, &t, &q), Some(CellValue::Number(40)));
    }

    #[test]
    fn argmax_on_empty_mask_stays_empty() {
        let t = games_table();
        let q = empty_query();
        let empty = SymbolicState {
            mask: RowMask::none(t.n_rows()),
            reference_row: None,
            produced_value: None,
            terminated: false,
        };
        let s = apply_operator(&empty, OperatorKind::ArgMax, Some(0), &t, &q);
        assert_eq!(s.mask.count(), 0);
        assert_eq!(s.produced_value, None);
    }

    #[test]
    fn select_value_on_multi_row_mask_soft_fails() {
        let t = games_table();
        let q = empty_query();
        let s0 = SymbolicState::initial(t.n_rows());
        let s = apply_operator(&s0, OperatorKind::SelectValue, Some(0), &t, &q);
        assert_eq!(s.mask.count(), 0);
        assert_eq!(s.produced_value, None);
    }

    #[test]
    fn ordering_op_on_entity_column_soft_fails() {
        let t = games_table();
        let q = empty_query();
        let s0 = SymbolicState::initial(t.n_rows());
        let s = apply_operator(&s0, OperatorKind::ArgMax, Some(1), &t, &q);
        assert_eq!(s.mask.count(), 0);
    }

    #[test]
    fn comparison_without_reference_soft_fails() {
        let t = games_table();
        let q = empty_query();
        let s0 = SymbolicState::initial(t.n_rows());
        let s = apply_operator(&s0, OperatorKind::GreaterThan, Some(2), &t, &q);
        assert_eq!(s.mask.count(), 0);
    }

    #[test]
    fn eoe_only_trace_produces_nothing() {
        let t = games_table();
        let q = empty_query();
        let trace = ExecutionTrace::new(vec![ExecutionStep::eoe()]);
        assert_eq!(execute_trace(&trace, &t, &q), None);
    }

    #[test]
    fn argmin_tie_breaks_to_lowest_row() {
        let t = games_table();
        let q = empty_query();
        let s0 = SymbolicState::initial(t.n_rows());
        // Areas 200 appear at rows 0 and 4; the tie goes to row 0.
        let s = apply_operator(&s0, OperatorKind::ArgMin, Some(2), &t, &q);
        assert_eq!(s.mask.singleton(), Some(0));
    }

    #[test]
    fn mask_length_preserved_by_every_operator() {
        let t = games_table();
        let mut mv = BTreeMap::new();
        mv.insert("city".to_string(), CellValue::Entity("london".into()));
        let q = Query::new(vec!["london".into()], mv);
        let s0 = SymbolicState::initial(t.n_rows());
        for op in crate::trace::EXECUTABLE_OPS {
            for col in 0..t.n_cols() {
                let s = apply_operator(&s0, op, Some(col), &t, &q);
                assert_eq!(s.mask.len(), t.n_rows());
            }
        }
    }
}
