//! Causality analysis for the instantaneous fragment of Esterel.
//!
//! The library answers two questions about a single-instant reactive program
//! (built from `nothing`, `emit`, `present … then … else …`, sequencing `;`,
//! parallel `||`, and local-signal declaration `signal … in … end`):
//!
//! * **Logical correctness** — for every evaluation of the input signals, does
//!   the program's behaviour admit exactly one *supported model* of its
//!   operational rules?  Zero models for some evaluation means the program is
//!   non-reactive; several mean it is non-deterministic; exactly one for every
//!   evaluation means it is logically coherent.
//! * **Constructiveness** — can every behavioural fact (or its negation) be
//!   established by a *supported proof*, i.e. without the self-justifying
//!   guesswork that supported models allow?  Constructive programs are the
//!   ones a causality-respecting implementation can actually execute.
//!
//! The pipeline is: [`syntax`] parses and manipulates programs, [`formulas`]
//! defines the judgement language (emission, termination, transition, and
//! their negations, indexed by an input evaluation), [`grounding`] instantiates
//! the rule schemas over a finite residual term universe, [`models`]
//! enumerates supported models, [`proofs`] searches for supported proofs and
//! derives the constructiveness verdict, and [`report`] bundles everything
//! into a serializable analysis report for the CLI.
//!
//! ```
//! use esterel_causality::{analyze, AnalyzeOptions, LogicalStatus};
//!
//! // Emitting s exactly when s is present can justify either status for s.
//! let a = analyze(
//!     "present s then emit s else nothing end",
//!     "loop",
//!     &AnalyzeOptions::default(),
//! )?;
//! assert_eq!(a.logical.status, LogicalStatus::NonDeterministic);
//! assert_eq!(a.logical.model_count, 2);
//! assert!(!a.constructive.constructive);
//! # Ok::<(), esterel_causality::Error>(())
//! ```

pub mod error;
pub mod formulas;
pub mod grounding;
pub mod models;
pub mod proofs;
pub mod report;
pub mod syntax;

pub use error::Error;
pub use formulas::{
    all_input_evaluations, consistent, contradicts, AnalysisContext, EvalId, Family, Formula,
    FormulaKind, InputEvaluation, Polarity, SigId, TermId,
};
pub use report::{
    analyze, Analysis, AnalysisReport, AnalyzeOptions, ConstructiveSection, EvalEntry, FactEntry,
    LogicalSection, ModelEntry, ObligationEntry, ProgramSection, SpaceSection, TheoremEntry,
    Timing,
};

pub use proofs::{
    check_theorems, classify_constructive, prove, render_proof_json, render_proof_text,
    verify_proof, ConstructiveVerdict, Justification, Obligation, ProofResult, ProofTree,
    PropertyCheck, PropertyStatus, Prover, RefutedInstance, SignalOutcome, TerminationOutcome,
    DEFAULT_SWEEP_LIMIT,
};

pub use models::{
    classify_logical, enumerate_supported_models, is_supported_model, EvalModels, EvalSummary,
    LabelSet, LogicalStatus, LogicalVerdict, Model, WITNESS_CAP,
};

pub use grounding::{
    ground_space, ground_space_restricted, instances_concluding, residual_universe,
    supportable_space, GroundingConfig, RuleInstance, RuleName, RuleSet, Universe,
};
pub use syntax::{parse, pretty_file, Program, SignalEnv, SignalId, SignalKind};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
