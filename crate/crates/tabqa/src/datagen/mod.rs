//! Synthetic corpus generation: random typed tables plus templated queries
//! of four types, each carrying its gold trace and denotation.
//!
//! Generation is deterministic for a given (seed, config, schema): every
//! sample draws from its own seeded generator derived from the master seed
//! and the sample's position, so the corpus is reproducible byte-for-byte
//! at any parallelism level.

pub mod schema;
pub mod templates;

pub use schema::Schema;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::collections::HashSet;

use crate::error::GenError;
use crate::parallel::par_map_range;
use crate::query::Query;
use crate::sample::{QueryType, Sample, QUERY_TYPES};
use crate::symbolic::interp::execute_trace;
use crate::table::{CellValue, FieldKind, Table};
use crate::trace::{ExecutionStep, ExecutionTrace, OperatorKind};
use templates::Slots;

/// Bounded retries for rejected query configurations.
const MAX_RETRIES: usize = 100;

/// Split sizes, geometry and query-type mixture.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub rows: usize,
    /// Weights over [SelectWhere, Superlative, WhereSuperlative, NestQuery].
    pub mixture: [f64; 4],
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 1,
            train: 25_000,
            valid: 10_000,
            test: 10_000,
            rows: 10,
            mixture: [0.25; 4],
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.rows == 0 {
            return Err(GenError::InvalidConfig("rows must be positive".into()));
        }
        let sum: f64 = self.mixture.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.mixture.iter().any(|&w| w < 0.0) {
            return Err(GenError::InvalidConfig(
                "mixture weights must be nonnegative and sum to 1".into(),
            ));
        }
        Ok(())
    }
}

/// The three generated splits, in order.
#[derive(Debug)]
pub struct Splits {
    pub train: Vec<Sample>,
    pub valid: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// SplitMix64 finalizer, used to derive independent per-sample seeds.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix64(master ^ mix64(stream.wrapping_mul(0xa076_1d64_78bd_642f) ^ index))
}

fn sample_distinct_ints(rng: &mut ChaCha8Rng, lo: i64, hi: i64, n: usize) -> Vec<i64> {
    let mut out: Vec<i64> = Vec::with_capacity(n);
    while out.len() < n {
        let v = rng.gen_range(lo..=hi);
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn sample_distinct_indices(rng: &mut ChaCha8Rng, pool: usize, n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(n);
    while out.len() < n {
        let v = rng.gen_range(0..pool);
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Generates one table: every numeric column gets pairwise-distinct values,
/// every entity column pairwise-distinct pool tokens.
pub fn generate_table(rng: &mut ChaCha8Rng, schema: &Schema, rows: usize) -> Result<Table, GenError> {
    let mut columns: Vec<Vec<CellValue>> = Vec::with_capacity(schema.n_fields());
    for f in &schema.numeric_fields {
        let values = sample_distinct_ints(rng, f.lo, f.hi, rows);
        columns.push(values.into_iter().map(CellValue::Number).collect());
    }
    for f in &schema.entity_fields {
        let picks = sample_distinct_indices(rng, f.pool.len(), rows);
        columns.push(
            picks
                .into_iter()
                .map(|i| CellValue::Entity(f.pool[i].clone()))
                .collect(),
        );
    }
    let table_rows: Vec<Vec<CellValue>> = (0..rows)
        .map(|r| columns.iter().map(|c| c[r].clone()).collect())
        .collect();
    Ok(Table::new(schema.field_names(), table_rows)?)
}

fn numeric_cols(table: &Table) -> Vec<usize> {
    table
        .fields
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind == FieldKind::Numeric)
        .map(|(i, _)| i)
        .collect()
}

fn pick_distinct(rng: &mut ChaCha8Rng, pool: &[usize], exclude: &[usize]) -> Option<usize> {
    let candidates: Vec<usize> =
        pool.iter().copied().filter(|c| !exclude.contains(c)).collect();
    candidates.choose(rng).copied()
}

struct QueryDraft {
    tokens: Vec<String>,
    mentioned: BTreeMap<String, CellValue>,
    steps: Vec<ExecutionStep>,
}

fn draft_query(
    rng: &mut ChaCha8Rng,
    table: &Table,
    qtype: QueryType,
) -> Option<QueryDraft> {
    let all: Vec<usize> = (0..table.n_cols()).collect();
    let numeric = numeric_cols(table);
    let n = table.n_rows();
    let template = *templates::templates_for(qtype).choose(rng)?;

    let argmax = rng.gen_bool(0.5);
    let sup_op = if argmax { OperatorKind::ArgMax } else { OperatorKind::ArgMin };
    let sup_word = if argmax {
        *templates::SUP_MAX_WORDS.choose(rng)?
    } else {
        *templates::SUP_MIN_WORDS.choose(rng)?
    };
    let greater = rng.gen_bool(0.5);
    let cmp_op = if greater { OperatorKind::GreaterThan } else { OperatorKind::LessThan };
    let cmp_word = if greater {
        *templates::CMP_GREATER_WORDS.choose(rng)?
    } else {
        *templates::CMP_LESS_WORDS.choose(rng)?
    };

    let field_name = |c: usize| table.fields[c].name.as_str();

    match qtype {
        QueryType::SelectWhere | QueryType::WhereSuperlative => {
            let where_col = pick_distinct(rng, &all, &[])?;
            let (target_col, taken) = if qtype == QueryType::WhereSuperlative {
                let t = pick_distinct(rng, &numeric, &[where_col])?;
                (Some(t), vec![where_col, t])
            } else {
                (None, vec![where_col])
            };
            let answer_col = pick_distinct(rng, &all, &taken)?;
            let ref_row = rng.gen_range(0..n);
            let value = table.rows[ref_row][where_col].clone();
            let value_token = value.token();

            let slots = Slots {
                answer: field_name(answer_col),
                where_field: field_name(where_col),
                value: &value_token,
                target: target_col.map(field_name).unwrap_or(""),
                sup: sup_word,
                ..Slots::default()
            };
            let tokens = templates::render(template, &slots);
            let mut mentioned = BTreeMap::new();
            mentioned.insert(field_name(where_col).to_string(), value);

            let mut steps = vec![ExecutionStep::new(OperatorKind::SelectRow, where_col)];
            if let Some(t) = target_col {
                steps.push(ExecutionStep::new(sup_op, t));
            }
            steps.push(ExecutionStep::new(OperatorKind::SelectValue, answer_col));
            Some(QueryDraft { tokens, mentioned, steps })
        }
        QueryType::Superlative => {
            let target_col = pick_distinct(rng, &numeric, &[])?;
            let answer_col = pick_distinct(rng, &all, &[target_col])?;
            let slots = Slots {
                answer: field_name(answer_col),
                target: field_name(target_col),
                sup: sup_word,
                ..Slots::default()
            };
            let tokens = templates::render(template, &slots);
            let steps = vec![
                ExecutionStep::new(sup_op, target_col),
                ExecutionStep::new(OperatorKind::SelectValue, answer_col),
            ];
            Some(QueryDraft { tokens, mentioned: BTreeMap::new(), steps })
        }
        QueryType::NestQuery => {
            let compare_col = pick_distinct(rng, &numeric, &[])?;
            let target_col = pick_distinct(rng, &numeric, &[compare_col])?;
            let where_col = pick_distinct(rng, &all, &[compare_col, target_col])?;
            let answer_col =
                pick_distinct(rng, &all, &[compare_col, target_col, where_col])?;
            let ref_row = rng.gen_range(0..n);

            // The comparison must leave a non-empty candidate set.
            let pivot = table.rows[ref_row][compare_col].as_number()?;
            let survivors = table
                .rows
                .iter()
                .filter(|r| {
                    let v = r[compare_col].as_number().unwrap();
                    if greater { v > pivot } else { v < pivot }
                })
                .count();
            if survivors == 0 {
                return None;
            }

            let value = table.rows[ref_row][where_col].clone();
            let value_token = value.token();
            let slots = Slots {
                answer: field_name(answer_col),
                where_field: field_name(where_col),
                value: &value_token,
                target: field_name(target_col),
                compare: field_name(compare_col),
                sup: sup_word,
                cmp: cmp_word,
            };
            let tokens = templates::render(template, &slots);
            let mut mentioned = BTreeMap::new();
            mentioned.insert(field_name(where_col).to_string(), value);

            let steps = vec![
                ExecutionStep::new(OperatorKind::SelectRow, where_col),
                ExecutionStep::new(cmp_op, compare_col),
                ExecutionStep::new(sup_op, target_col),
                ExecutionStep::new(OperatorKind::SelectValue, answer_col),
            ];
            Some(QueryDraft { tokens, mentioned, steps })
        }
    }
}

/// Generates one query of the requested type over the table, returning the
/// query, its gold trace (EOE-terminated) and the interpreter's denotation.
pub fn generate_query(
    rng: &mut ChaCha8Rng,
    table: &Table,
    qtype: QueryType,
) -> Result<(Query, ExecutionTrace, CellValue), GenError> {
    for _ in 0..MAX_RETRIES {
        let Some(draft) = draft_query(rng, table, qtype) else {
            continue;
        };
        let query = Query::new(draft.tokens, draft.mentioned);
        let mut steps = draft.steps;
        steps.push(ExecutionStep::eoe());
        let trace = ExecutionTrace::new(steps);
        match execute_trace(&trace, table, &query) {
            Some(denotation) => return Ok((query, trace, denotation)),
            None => continue,
        }
    }
    Err(GenError::RetriesExhausted(MAX_RETRIES))
}

/// Exact per-type allocation by largest remainder, then a seeded shuffle.
fn type_assignment(rng: &mut ChaCha8Rng, n: usize, mixture: &[f64; 4]) -> Vec<QueryType> {
    let mut counts = [0usize; 4];
    let mut fractions: Vec<(usize, f64)> = Vec::with_capacity(4);
    let mut assigned = 0;
    for (i, &w) in mixture.iter().enumerate() {
        let exact = w * n as f64;
        counts[i] = exact.floor() as usize;
        assigned += counts[i];
        fractions.push((i, exact - exact.floor()));
    }
    fractions.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..(n - assigned) {
        counts[fractions[k % 4].0] += 1;
    }
    let mut types = Vec::with_capacity(n);
    for (i, &c) in counts.iter().enumerate() {
        types.extend(std::iter::repeat(QUERY_TYPES[i]).take(c));
    }
    types.shuffle(rng);
    types
}

fn generate_split(
    config: &GenConfig,
    schema: &Schema,
    stream: u64,
    n: usize,
) -> Result<Vec<Sample>, GenError> {
    let mut split_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, stream, u64::MAX));
    let types = type_assignment(&mut split_rng, n, &config.mixture);

    let results = par_map_range(n, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, stream, i as u64));
        let table = generate_table(&mut rng, schema, config.rows)?;
        let (query, gold_trace, denotation) = generate_query(&mut rng, &table, types[i])?;
        Ok::<Sample, GenError>(Sample {
            table,
            query,
            query_type: types[i],
            gold_trace,
            denotation,
        })
    });
    results.into_iter().collect()
}

/// Generates the full train/valid/test corpus and verifies that no sample
/// is shared between splits.
pub fn generate_dataset(config: &GenConfig, schema: &Schema) -> Result<Splits, GenError> {
    config.validate()?;
    schema.validate(config.rows)?;

    let train = generate_split(config, schema, 0, config.train)?;
    let valid = generate_split(config, schema, 1, config.valid)?;
    let test = generate_split(config, schema, 2, config.test)?;

    let mut seen: HashSet<[u8; 32]> = HashSet::new();
    for sample in train.iter().chain(valid.iter()).chain(test.iter()) {
        if !seen.insert(crate::dataset::sample_hash(sample)) {
            return Err(GenError::InvalidConfig(
                "duplicate sample across splits".into(),
            ));
        }
    }
    Ok(Splits { train, valid, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn table_generation_is_deterministic() {
        let schema = Schema::default();
        let a = generate_table(&mut rng(7), &schema, 10).unwrap();
        let b = generate_table(&mut rng(7), &schema, 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn table_columns_match_schema_kinds() {
        let schema = Schema::default();
        let t = generate_table(&mut rng(3), &schema, 10).unwrap();
        assert_eq!(t.n_rows(), 10);
        assert_eq!(t.n_cols(), 10);
        t.validate_structure().unwrap();
        for c in 0..4 {
            assert_eq!(t.fields[c].kind, FieldKind::Numeric);
        }
        for c in 4..10 {
            assert_eq!(t.fields[c].kind, FieldKind::Entity);
        }
    }

    #[test]
    fn generated_columns_have_no_duplicates() {
        let schema = Schema::default();
        for seed in 0..1000 {
            let t = generate_table(&mut rng(seed), &schema, 10).unwrap();
            for c in 0..t.n_cols() {
                let mut seen = HashSet::new();
                for r in 0..t.n_rows() {
                    assert!(
                        seen.insert(t.rows[r][c].token()),
                        "duplicate in column {c} of table {seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn gold_traces_have_canonical_skeletons() {
        let schema = Schema::default();
        for (i, qtype) in QUERY_TYPES.iter().enumerate() {
            let mut r = rng(100 + i as u64);
            let t = generate_table(&mut r, &schema, 10).unwrap();
            let (query, trace, denotation) = generate_query(&mut r, &t, *qtype).unwrap();
            assert_eq!(trace.n_executable(), qtype.n_steps());
            assert_eq!(trace.steps.last().unwrap().op, OperatorKind::Eoe);
            assert_eq!(execute_trace(&trace, &t, &query), Some(denotation));
        }
    }

    #[test]
    fn split_mixture_is_exact() {
        let mut r = rng(5);
        let types = type_assignment(&mut r, 1000, &[0.25; 4]);
        for qt in QUERY_TYPES {
            assert_eq!(types.iter().filter(|&&t| t == qt).count(), 250);
        }
        let types = type_assignment(&mut r, 10, &[0.5, 0.5, 0.0, 0.0]);
        assert_eq!(
            types.iter().filter(|&&t| t == QueryType::SelectWhere).count(),
            5
        );
    }

    #[test]
    fn dataset_is_deterministic_and_disjoint() {
        let schema = Schema::default();
        let config = GenConfig { train: 40, valid: 20, test: 20, ..GenConfig::default() };
        let a = generate_dataset(&config, &schema).unwrap();
        let b = generate_dataset(&config, &schema).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.valid, b.valid);
        assert_eq!(a.test, b.test);
        assert_eq!(a.train.len(), 40);
        assert_eq!(a.valid.len(), 20);
        assert_eq!(a.test.len(), 20);
    }

    #[test]
    fn generated_samples_validate() {
        let schema = Schema::default();
        let config = GenConfig { train: 60, valid: 0, test: 0, ..GenConfig::default() };
        let splits = generate_dataset(&config, &schema).unwrap();
        for s in &splits.train {
            s.validate(10, 10).unwrap();
        }
    }
}
