//! A deterministic ELIZA: keyword scanning, decomposition, reassembly, and a
//! bounded memory queue, driven by a JSON script.
//!
//! ```
//! use std::sync::Arc;
//! use eca_core::eliza::{ElizaScript, EngineState};
//!
//! let mut eliza = EngineState::new(Arc::new(ElizaScript::doctor()), 0);
//! assert_eq!(eliza.respond("Men are all alike.").unwrap().text, "In what way?");
//! ```

mod engine;
mod pattern;
mod script;
mod text;

pub use engine::{EngineState, Reply, MAX_GOTO_DEPTH, MEMORY_CAPACITY};
pub use pattern::match_decomposition;
pub use script::{
    parse_script, DecompRule, ElizaScript, KeywordEntry, PatternToken, Reassembly, TemplatePiece,
    DOCTOR_SCRIPT,
};
pub use text::{assemble, preprocess, Clause};

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("script syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("failed to read script {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("keyword `{keyword}` jumps to unknown keyword `{target}`")]
    DanglingGoto { keyword: String, target: String },
    #[error("keyword `{keyword}` references unknown synonym group `@{group}`")]
    UnknownGroup { keyword: String, group: String },
    #[error("duplicate keyword `{0}`")]
    DuplicateKeyword(String),
    #[error("keyword `{0}` must be a single non-empty lowercase token")]
    InvalidKeyword(String),
    #[error("keyword `{0}` has no rules and no goto")]
    NoRules(String),
    #[error("a rule of `{0}` has no reassembly templates")]
    EmptyReassembly(String),
    #[error("`{keyword}`: placeholder %{index} outside pattern of {pattern_len} tokens")]
    PlaceholderOutOfRange {
        keyword: String,
        index: usize,
        pattern_len: usize,
    },
    #[error("{context}: {message}")]
    Invalid { context: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("the conversation has ended")]
    Ended,
    #[error("goto chain starting near `{key}` exceeded {MAX_GOTO_DEPTH} hops")]
    GotoDepthExceeded { key: String },
}
