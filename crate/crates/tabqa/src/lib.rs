//! Coupled neural and symbolic execution for natural-language table queries.
//!
//! The crate contains two executors over the same synthetic table-QA task
//! and the machinery that couples them:
//!
//! - a fully *distributed* executor — stacked soft field-attention and row
//!   annotation layers ending in a cell classifier, trained end-to-end from
//!   answer supervision only ([`distributed`]);
//! - a *symbolic* executor — a deterministic interpreter over row masks
//!   driven by Jordan-RNN operator/field predictors, trained by REINFORCE
//!   ([`symbolic`]);
//! - the coupling pipeline — pretrain the symbolic field predictor from the
//!   distributed model's attention, improve it with policy gradients, then
//!   feed its traces back as field supervision ([`coupled`]);
//! - corpus generation, evaluation and timing harnesses ([`datagen`],
//!   [`eval`]).
//!
//! Batch work is data-parallel over rayon by default; disabling the
//! `parallel` feature falls back to sequential execution with identical
//! results.

pub mod dataset;
pub mod datagen;
pub mod error;
pub mod nn;
pub mod parallel;
pub mod query;
pub mod sample;
pub mod table;
pub mod trace;
pub mod vocab;

pub mod coupled;
pub mod distributed;
pub mod encoder;

pub mod symbolic {
    //! Symbolic executor: interpreter, predictors, decoding and sampling.
    pub mod decode;
    pub mod interp;
    pub mod predictor;

    pub use decode::{decode_greedy, decode_greedy_trace, sample_trace};
    pub use interp::{apply_operator, execute_trace, SymbolicState};
    pub use predictor::{PredictorModel, SymbolicConfig};
}

pub use error::{DataError, GenError, ModelError};
pub use query::Query;
pub use sample::{QueryType, Sample, QUERY_TYPES};
pub use table::{CellValue, FieldKind, FieldName, RowMask, Table};
pub use trace::{ExecutionStep, ExecutionTrace, OperatorKind};
