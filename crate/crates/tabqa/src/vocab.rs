//! Token and field vocabularies shared by both models.
//!
//! The corpus is closed and synthetic, so every distinct token — including
//! every distinct number rendered as its decimal string — gets its own
//! embedding row. Out-of-vocabulary tokens map to a reserved UNK entry.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

use crate::sample::Sample;

pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from a sorted, deduplicated token set, with UNK
    /// at index 0.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Self {
        let set: BTreeSet<String> = tokens.into_iter().collect();
        let mut all = Vec::with_capacity(set.len() + 1);
        all.push(UNK.to_string());
        all.extend(set.into_iter().filter(|t| t != UNK));
        let mut v = Vocab { tokens: all, index: HashMap::new() };
        v.rebuild_index();
        v
    }

    /// Collects every query token and cell token in the samples.
    pub fn from_samples(samples: &[Sample]) -> Self {
        let mut tokens: Vec<String> = Vec::new();
        for s in samples {
            tokens.extend(s.query.tokens.iter().cloned());
            for row in &s.table.rows {
                for cell in row {
                    tokens.push(cell.token());
                }
            }
        }
        Vocab::from_tokens(tokens)
    }

    pub fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of a token, or the UNK index for unknown tokens.
    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }
}

/// A fixed, ordered list of field names with their embedding indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldVocab {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl FieldVocab {
    pub fn from_samples(samples: &[Sample]) -> Self {
        let set: BTreeSet<String> = samples
            .iter()
            .flat_map(|s| s.table.fields.iter().map(|f| f.name.clone()))
            .collect();
        let names: Vec<String> = set.into_iter().collect();
        let mut v = FieldVocab { names, index: HashMap::new() };
        v.rebuild_index();
        v
    }

    pub fn rebuild_index(&mut self) {
        self.index = self
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    /// Embedding indices for a table's columns, in column order.
    pub fn table_ids(&self, table: &crate::table::Table) -> Vec<u32> {
        table
            .fields
            .iter()
            .map(|f| self.id(&f.name).expect("field name missing from vocabulary"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unk_is_reserved_and_unknowns_map_to_it() {
        let v = Vocab::from_tokens(vec!["beta".into(), "alpha".into(), "beta".into()]);
        assert_eq!(v.len(), 3);
        assert_eq!(v.token(0), UNK);
        assert_eq!(v.id("alpha"), 1);
        assert_eq!(v.id("beta"), 2);
        assert_eq!(v.id("never-seen"), 0);
    }

    #[test]
    fn construction_is_order_independent() {
        let a = Vocab::from_tokens(vec!["x".into(), "y".into(), "z".into()]);
        let b = Vocab::from_tokens(vec!["z".into(), "x".into(), "y".into()]);
        assert_eq!(a.tokens, b.tokens);
    }
}
