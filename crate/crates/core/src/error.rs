//! Error type shared by every stage of the analyzer.

use thiserror::Error;

/// Everything that can go wrong between reading source text and printing a
/// verdict.  Parse and semantic errors carry 1-based source positions;
/// resource limits carry the offending size so callers can suggest a larger
/// cap.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// The source text is not a well-formed program.
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// The program is grammatical but violates a signal-discipline rule
    /// (duplicate declaration, emitting an input, shadowing a declared
    /// input/output with `signal`, …).
    #[error("semantic error at {line}:{col}: {msg}")]
    Semantic { line: usize, col: usize, msg: String },

    /// `substitute` was asked to introduce a signal that already occurs in
    /// the target program, which would capture existing occurrences.
    #[error("freshness violation: signal `{signal}` already occurs in `{program}`")]
    FreshnessViolation { signal: String, program: String },

    /// A configurable cap was exceeded; `what` names the quantity.
    #[error("resource limit exceeded: {what} needs {needed} but the cap is {limit}")]
    ResourceLimit {
        what: &'static str,
        limit: usize,
        needed: usize,
    },

    /// An `--eval` restriction referenced unknown inputs or left some input
    /// unassigned.
    #[error("invalid input-evaluation restriction: {0}")]
    BadEvaluation(String),
}

impl Error {
    pub(crate) fn parse(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }

    pub(crate) fn semantic(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Semantic {
            line,
            col,
            msg: msg.into(),
        }
    }
}
