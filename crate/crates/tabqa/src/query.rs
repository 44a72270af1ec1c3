//! Natural-language queries over a table.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::DataError;
use crate::table::{CellValue, Table};

/// A tokenized query plus the table values it literally mentions.
///
/// `mentioned_values` grounds the `select_row` operator: it maps a field
/// name to the value the query cites for that column. Storing it explicitly
/// keeps interpreter behaviour independent of tokenizer details; it is
/// still validated against the token list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub tokens: Vec<String>,
    pub mentioned_values: BTreeMap<String, CellValue>,
}

impl Query {
    pub fn new(tokens: Vec<String>, mentioned_values: BTreeMap<String, CellValue>) -> Self {
        Query { tokens, mentioned_values }
    }

    /// The value the query mentions for the given column, if any.
    pub fn mentioned_value(&self, table: &Table, col: usize) -> Option<&CellValue> {
        table
            .fields
            .get(col)
            .and_then(|f| self.mentioned_values.get(&f.name))
    }

    /// Every mentioned value must appear verbatim among the tokens
    /// (numbers as their decimal token).
    pub fn validate(&self) -> Result<(), DataError> {
        for (field, value) in &self.mentioned_values {
            let token = value.token();
            if !self.tokens.iter().any(|t| *t == token) {
                return Err(DataError::Validation(format!(
                    "mentioned value `{token}` for field `{field}` does not appear among query tokens"
                )));
            }
        }
        Ok(())
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mentioned_value_must_be_a_token() {
        let mut mv = BTreeMap::new();
        mv.insert("year".to_string(), CellValue::Number(2008));
        let good = Query::new(
            vec!["year".into(), "is".into(), "2008".into()],
            mv.clone(),
        );
        assert!(good.validate().is_ok());

        let bad = Query::new(vec!["year".into(), "is".into()], mv);
        assert!(bad.validate().is_err());
    }
}
