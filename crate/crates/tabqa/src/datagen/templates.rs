//! Query templates with slot filling and light paraphrase variation.
//!
//! Slots are `{answer}`, `{where}`, `{value}`, `{target}`, `{compare}`,
//! `{sup}` and `{cmp}`; everything else is emitted verbatim as one token.

use crate::sample::QueryType;

pub const SELECT_WHERE: &[&str] = &[
    "what is the {answer} of the game whose {where} is {value} ?",
    "tell me the {answer} of the game whose {where} is {value}",
    "when the {where} is {value} , what is the {answer} ?",
    "find the {answer} for the game with {where} {value}",
    "which {answer} does the game with {where} {value} have ?",
];

pub const SUPERLATIVE: &[&str] = &[
    "what is the {answer} of the game with the {sup} {target} ?",
    "tell me the {answer} of the game whose {target} is the {sup}",
    "find the {answer} for the game with the {sup} {target}",
    "which {answer} does the game with the {sup} {target} have ?",
];

pub const WHERE_SUPERLATIVE: &[&str] = &[
    "among games whose {where} is {value} , what is the {answer} of the one with the {sup} {target} ?",
    "for games with {where} {value} , find the {answer} of the game with the {sup} {target}",
    "what is the {answer} of the game with the {sup} {target} among those whose {where} is {value} ?",
    "considering games whose {where} is {value} , tell me the {answer} of the one with the {sup} {target}",
];

pub const NEST_QUERY: &[&str] = &[
    "what is the {answer} of the game with the {sup} {target} whose {compare} is {cmp} than that of the game whose {where} is {value} ?",
    "among games whose {compare} is {cmp} than the game with {where} {value} , find the {answer} of the one with the {sup} {target}",
    "tell me the {answer} of the {sup} {target} game whose {compare} is {cmp} than the game whose {where} is {value}",
    "for games with {compare} {cmp} than that of the game whose {where} is {value} , what is the {answer} of the one with the {sup} {target} ?",
];

/// Paraphrase words keyed to the superlative direction (argmax first).
pub const SUP_MAX_WORDS: &[&str] = &["largest", "highest", "greatest", "biggest"];
pub const SUP_MIN_WORDS: &[&str] = &["smallest", "lowest", "least"];

/// Paraphrase words keyed to the comparison direction (greater first).
pub const CMP_GREATER_WORDS: &[&str] = &["greater", "larger", "higher"];
pub const CMP_LESS_WORDS: &[&str] = &["less", "smaller", "lower"];

pub fn templates_for(qtype: QueryType) -> &'static [&'static str] {
    match qtype {
        QueryType::SelectWhere => SELECT_WHERE,
        QueryType::Superlative => SUPERLATIVE,
        QueryType::WhereSuperlative => WHERE_SUPERLATIVE,
        QueryType::NestQuery => NEST_QUERY,
    }
}

/// Slot bindings for one rendering.
#[derive(Debug, Default)]
pub struct Slots<'a> {
    pub answer: &'a str,
    pub where_field: &'a str,
    pub value: &'a str,
    pub target: &'a str,
    pub compare: &'a str,
    pub sup: &'a str,
    pub cmp: &'a str,
}

/// Renders a template into whitespace tokens, substituting slots.
pub fn render(template: &str, slots: &Slots<'_>) -> Vec<String> {
    template
        .split_whitespace()
        .map(|tok| match tok {
            "{answer}" => slots.answer.to_string(),
            "{where}" => slots.where_field.to_string(),
            "{value}" => slots.value.to_string(),
            "{target}" => slots.target.to_string(),
            "{compare}" => slots.compare.to_string(),
            "{sup}" => slots.sup.to_string(),
            "{cmp}" => slots.cmp.to_string(),
            other => other.to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_fills_every_slot() {
        let slots = Slots {
            answer: "duration",
            where_field: "gdp",
            value: "250",
            target: "year",
            compare: "area",
            sup: "largest",
            cmp: "smaller",
        };
        for qtype in crate::sample::QUERY_TYPES {
            for t in templates_for(qtype) {
                let toks = render(t, &slots);
                assert!(toks.iter().all(|t| !t.starts_with('{')), "unfilled slot in {t:?}");
                assert!(!toks.is_empty());
            }
        }
    }
}
