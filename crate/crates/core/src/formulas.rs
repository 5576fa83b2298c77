//! The judgement language the analyzer reasons in.
//!
//! Three judgement kinds describe a program's instantaneous behaviour, each
//! indexed by a *total* evaluation of the input signals and implicitly by the
//! fixed analyzed program (the "context" that presence tests of non-input
//! signals consult):
//!
//! * `p emits[I] x` — running `p` emits signal `x`;
//! * `p term[I]`    — `p` terminates;
//! * `p --I,x--> p'` — `p` can take a step emitting `x`, leaving `p'`.
//!
//! Formulae come in both polarities.  A negative transition formula has *no*
//! target: `not p --I,x-->` denies every step with that label, so it
//! contradicts `p --I,x--> p'` for any `p'`.  Terms, signals, and evaluations
//! are stored as indices into the grounding universe; [`render_formula`]
//! resolves them through a [`FormulaAtlas`] for display.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use crate::error::Error;
use crate::syntax::{Program, SignalEnv, SignalId};
use crate::Result;

/// Index of a term in the grounding universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermId(pub u32);

/// Index of an emittable signal in the grounding universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SigId(pub u32);

/// Index of an input evaluation in the grounding universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EvalId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FormulaKind {
    Emits,
    Terminates,
    Trans,
}

/// What a formula asserts minus its polarity and target: the judgement kind,
/// subject term, evaluation, and label signal.  A positive and a negative
/// formula contradict exactly when their families coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Family {
    pub kind: FormulaKind,
    pub source: TermId,
    pub ieval: EvalId,
    pub signal: Option<SigId>,
}

/// A possibly negated judgement.  Constructed through [`Formula::emits`],
/// [`Formula::terminates`], [`Formula::trans`], and [`Formula::negate`],
/// which maintain the shape invariants (`signal` present iff the kind is
/// labelled, `target` present iff positive transition).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Formula {
    polarity: Polarity,
    kind: FormulaKind,
    source: TermId,
    ieval: EvalId,
    signal: Option<SigId>,
    target: Option<TermId>,
}

impl Formula {
    /// Positive `source emits[ieval] signal`.
    pub fn emits(source: TermId, ieval: EvalId, signal: SigId) -> Formula {
        Formula {
            polarity: Polarity::Positive,
            kind: FormulaKind::Emits,
            source,
            ieval,
            signal: Some(signal),
            target: None,
        }
    }

    /// Positive `source term[ieval]`.
    pub fn terminates(source: TermId, ieval: EvalId) -> Formula {
        Formula {
            polarity: Polarity::Positive,
            kind: FormulaKind::Terminates,
            source,
            ieval,
            signal: None,
            target: None,
        }
    }

    /// Positive `source --ieval,signal--> target`.
    pub fn trans(source: TermId, ieval: EvalId, signal: SigId, target: TermId) -> Formula {
        Formula {
            polarity: Polarity::Positive,
            kind: FormulaKind::Trans,
            source,
            ieval,
            signal: Some(signal),
            target: Some(target),
        }
    }

    /// The negative formula denying this formula's family.  For transitions
    /// the target is dropped: the result denies *every* step with the label.
    pub fn negate(&self) -> Formula {
        Formula {
            polarity: Polarity::Negative,
            target: None,
            ..*self
        }
    }

    /// The positive member of `family` with the given target (which must be
    /// present exactly for transitions).
    pub fn positive(family: Family, target: Option<TermId>) -> Formula {
        debug_assert_eq!(
            family.kind == FormulaKind::Trans,
            target.is_some(),
            "positive transitions carry a target; other judgements never do"
        );
        Formula {
            polarity: Polarity::Positive,
            kind: family.kind,
            source: family.source,
            ieval: family.ieval,
            signal: family.signal,
            target,
        }
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }

    pub fn kind(&self) -> FormulaKind {
        self.kind
    }

    pub fn source(&self) -> TermId {
        self.source
    }

    pub fn ieval(&self) -> EvalId {
        self.ieval
    }

    pub fn signal(&self) -> Option<SigId> {
        self.signal
    }

    pub fn target(&self) -> Option<TermId> {
        self.target
    }

    pub fn family(&self) -> Family {
        Family {
            kind: self.kind,
            source: self.source,
            ieval: self.ieval,
            signal: self.signal,
        }
    }
}

/// A positive and a negative formula clash when they say the same thing about
/// the same term under the same evaluation — transition targets are ignored,
/// so `not p --I,x-->` contradicts `p --I,x--> p'` for every `p'`.
pub fn contradicts(f: &Formula, g: &Formula) -> bool {
    f.polarity != g.polarity && f.family() == g.family()
}

/// Whether the premise list `premises` holds relative to the positive fact
/// set `facts`: every positive premise must be a member, and no negative
/// premise may be contradicted by a member.
pub fn consistent(facts: &BTreeSet<Formula>, premises: &[Formula]) -> bool {
    premises.iter().all(|premise| match premise.polarity {
        Polarity::Positive => facts.contains(premise),
        Polarity::Negative => !facts.iter().any(|fact| contradicts(fact, premise)),
    })
}

/// A total assignment of present/absent to every input signal of a program.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InputEvaluation {
    /// `true` means present.  Total over the program's inputs.
    assignment: BTreeMap<SignalId, bool>,
}

impl InputEvaluation {
    pub fn new(assignment: BTreeMap<SignalId, bool>) -> InputEvaluation {
        InputEvaluation { assignment }
    }

    /// Parses a restriction such as `i=+,j=-` against the environment's
    /// inputs; every input must be assigned exactly once.
    pub fn parse_restriction(text: &str, env: &SignalEnv) -> Result<InputEvaluation> {
        let mut assignment = BTreeMap::new();
        let trimmed = text.trim();
        if !trimmed.is_empty() {
            for part in trimmed.split(',') {
                let (name, value) = part
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| Error::BadEvaluation(format!("`{part}` is not `name=+/-`")))?;
                let signal = env
                    .inputs()
                    .iter()
                    .find(|s| s.name() == name.trim())
                    .ok_or_else(|| {
                        Error::BadEvaluation(format!("`{}` is not an input signal", name.trim()))
                    })?;
                let present = match value.trim() {
                    "+" => true,
                    "-" => false,
                    other => {
                        return Err(Error::BadEvaluation(format!(
                            "`{other}` is not a polarity (use `+` or `-`)"
                        )))
                    }
                };
                if assignment.insert(signal.clone(), present).is_some() {
                    return Err(Error::BadEvaluation(format!(
                        "input `{}` is assigned twice",
                        signal.name()
                    )));
                }
            }
        }
        if let Some(missing) = env.inputs().iter().find(|s| !assignment.contains_key(s)) {
            return Err(Error::BadEvaluation(format!(
                "input `{}` is left unassigned",
                missing.name()
            )));
        }
        Ok(InputEvaluation { assignment })
    }

    /// Presence of `signal` under this evaluation; `None` if it is not one of
    /// the evaluated inputs.
    pub fn is_present(&self, signal: &SignalId) -> Option<bool> {
        self.assignment.get(signal).copied()
    }

    pub fn inputs(&self) -> impl Iterator<Item = (&SignalId, bool)> {
        self.assignment.iter().map(|(s, p)| (s, *p))
    }
}

impl fmt::Display for InputEvaluation {
    /// `∅` for no inputs, otherwise `{i+,j-}` sorted by input name.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.assignment.is_empty() {
            return write!(f, "∅");
        }
        write!(f, "{{")?;
        for (idx, (signal, present)) in self.assignment.iter().enumerate() {
            if idx > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}{}", signal.name(), if *present { '+' } else { '-' })?;
        }
        write!(f, "}}")
    }
}

/// All `2^n` total input evaluations, in canonical order: the assignments are
/// enumerated lexicographically by input name with present before absent, so
/// for inputs `{i}` the order is `[{i+}, {i-}]`.
pub fn all_input_evaluations(env: &SignalEnv) -> Vec<InputEvaluation> {
    let inputs: Vec<&SignalId> = env.inputs().iter().collect();
    let mut out = Vec::with_capacity(1usize << inputs.len().min(20));
    let mut current = BTreeMap::new();
    fill(&inputs, 0, &mut current, &mut out);
    out
}

fn fill(
    inputs: &[&SignalId],
    idx: usize,
    current: &mut BTreeMap<SignalId, bool>,
    out: &mut Vec<InputEvaluation>,
) {
    if idx == inputs.len() {
        out.push(InputEvaluation::new(current.clone()));
        return;
    }
    for present in [true, false] {
        current.insert(inputs[idx].clone(), present);
        fill(inputs, idx + 1, current, out);
    }
    current.remove(inputs[idx]);
}

/// The fixed subject of an analysis: the whole program and its signal
/// interface.  Presence tests of output/local signals are answered by what
/// *this* program emits, so every formula is implicitly indexed by it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisContext {
    program: Program,
    env: SignalEnv,
}

impl AnalysisContext {
    pub fn new(program: Program, env: SignalEnv) -> AnalysisContext {
        debug_assert!(
            program
                .signal_names()
                .iter()
                .all(|n| env.all_names().contains(n)),
            "every signal used by the program must be in its environment"
        );
        AnalysisContext { program, env }
    }

    /// Parses source text into a context.
    pub fn from_source(source: &str) -> Result<AnalysisContext> {
        let (program, env) = crate::syntax::parse(source)?;
        Ok(AnalysisContext::new(program, env))
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn env(&self) -> &SignalEnv {
        &self.env
    }
}

/// Resolves formula indices to printable text.  Implemented by the grounding
/// universe.
pub trait FormulaAtlas {
    fn term_text(&self, term: TermId) -> String;
    fn eval_text(&self, eval: EvalId) -> String;
    fn signal_text(&self, signal: SigId) -> String;
}

/// Canonical text rendering:
///
/// * `p emits[I] x`
/// * `p term[I]`
/// * `p --I,x--> p'`
/// * negatives get a `not ` prefix and negative transitions drop the target.
pub fn render_formula(f: &Formula, atlas: &impl FormulaAtlas) -> String {
    let mut out = String::new();
    if f.polarity == Polarity::Negative {
        out.push_str("not ");
    }
    let source = atlas.term_text(f.source);
    let eval = atlas.eval_text(f.ieval);
    match f.kind {
        FormulaKind::Emits => {
            let signal = atlas.signal_text(f.signal.expect("emits formulae carry a signal"));
            out.push_str(&format!("{source} emits[{eval}] {signal}"));
        }
        FormulaKind::Terminates => {
            out.push_str(&format!("{source} term[{eval}]"));
        }
        FormulaKind::Trans => {
            let signal = atlas.signal_text(f.signal.expect("transitions carry a signal"));
            out.push_str(&format!("{source} --{eval},{signal}-->"));
            if let Some(target) = f.target {
                out.push(' ');
                out.push_str(&atlas.term_text(target));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn t(n: u32) -> TermId {
        TermId(n)
    }

    fn sig(n: u32) -> SigId {
        SigId(n)
    }

    const E: EvalId = EvalId(0);

    #[test]
    fn contradiction_requires_opposite_polarity_and_same_family() {
        let pos = Formula::emits(t(0), E, sig(0));
        assert!(contradicts(&pos, &pos.negate()));
        assert!(contradicts(&pos.negate(), &pos));
        assert!(!contradicts(&pos, &pos));
        let other_signal = Formula::emits(t(0), E, sig(1));
        assert!(!contradicts(&pos, &other_signal.negate()));
        let other_eval = Formula::emits(t(0), EvalId(1), sig(0));
        assert!(!contradicts(&pos, &other_eval.negate()));
    }

    #[test]
    fn negative_transitions_contradict_every_target() {
        let step_to_a = Formula::trans(t(0), E, sig(0), t(1));
        let step_to_b = Formula::trans(t(0), E, sig(0), t(2));
        let denial = step_to_a.negate();
        assert_eq!(denial.target(), None);
        assert!(contradicts(&step_to_a, &denial));
        assert!(contradicts(&step_to_b, &denial));
        let other_label = Formula::trans(t(0), E, sig(1), t(1));
        assert!(!contradicts(&other_label, &denial));
    }

    #[test]
    fn consistency_checks_membership_and_uncontradictedness() {
        let emit_fact = Formula::emits(t(1), E, sig(0));
        let facts: BTreeSet<Formula> = [emit_fact].into();
        // Positive premise: must be a member.
        assert!(consistent(&facts, &[emit_fact]));
        assert!(!consistent(&facts, &[Formula::emits(t(2), E, sig(0))]));
        // Negative premise: must be uncontradicted by the members.
        let absent = Formula::emits(t(0), E, sig(0)).negate();
        assert!(consistent(&facts, &[absent, emit_fact]));
        assert!(!consistent(&facts, &[emit_fact.negate()]));
        // The empty premise list is vacuously consistent with anything.
        assert!(consistent(&facts, &[]));
        assert!(consistent(&BTreeSet::new(), &[]));
    }

    #[test]
    fn evaluations_enumerate_all_assignments_in_canonical_order() {
        let (_, env) = parse("input i, j;\nnothing").unwrap();
        let evals = all_input_evaluations(&env);
        let texts: Vec<String> = evals.iter().map(|e| e.to_string()).collect();
        assert_eq!(texts, ["{i+,j+}", "{i+,j-}", "{i-,j+}", "{i-,j-}"]);
        let distinct: BTreeSet<&InputEvaluation> = evals.iter().collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn no_inputs_means_the_single_empty_evaluation() {
        let (_, env) = parse("emit s").unwrap();
        let evals = all_input_evaluations(&env);
        assert_eq!(evals.len(), 1);
        assert_eq!(evals[0].to_string(), "∅");
        assert_eq!(evals[0].is_present(&SignalId::local("s")), None);
    }

    #[test]
    fn restriction_parsing_demands_totality() {
        let (_, env) = parse("input i, j;\nnothing").unwrap();
        let eval = InputEvaluation::parse_restriction("i=+,j=-", &env).unwrap();
        assert_eq!(eval.to_string(), "{i+,j-}");
        assert!(InputEvaluation::parse_restriction("i=+", &env).is_err());
        assert!(InputEvaluation::parse_restriction("i=+,j=-,i=-", &env).is_err());
        assert!(InputEvaluation::parse_restriction("i=+,k=-", &env).is_err());
        assert!(InputEvaluation::parse_restriction("i=presents,j=-", &env).is_err());
    }

    struct FixedAtlas;

    impl FormulaAtlas for FixedAtlas {
        fn term_text(&self, term: TermId) -> String {
            ["emit s", "nothing"][term.0 as usize].to_owned()
        }
        fn eval_text(&self, _: EvalId) -> String {
            "{i+}".to_owned()
        }
        fn signal_text(&self, _: SigId) -> String {
            "s".to_owned()
        }
    }

    #[test]
    fn renders_all_judgement_shapes() {
        let emits = Formula::emits(t(0), E, sig(0));
        let term = Formula::terminates(t(1), E);
        let trans = Formula::trans(t(0), E, sig(0), t(1));
        assert_eq!(render_formula(&emits, &FixedAtlas), "emit s emits[{i+}] s");
        assert_eq!(render_formula(&term, &FixedAtlas), "nothing term[{i+}]");
        assert_eq!(
            render_formula(&trans, &FixedAtlas),
            "emit s --{i+},s--> nothing"
        );
        assert_eq!(
            render_formula(&trans.negate(), &FixedAtlas),
            "not emit s --{i+},s-->"
        );
        assert_eq!(
            render_formula(&term.negate(), &FixedAtlas),
            "not nothing term[{i+}]"
        );
    }

    #[test]
    fn consistency_is_conjunctive_over_premises() {
        use proptest::prelude::*;
        let formula = (0u32..3, 0u32..2, proptest::bool::ANY).prop_map(|(src, sg, positive)| {
            let f = Formula::emits(t(src), E, sig(sg));
            if positive {
                f
            } else {
                f.negate()
            }
        });
        let mut runner = proptest::test_runner::TestRunner::default();
        runner
            .run(
                &(
                    proptest::collection::btree_set(
                        (0u32..3, 0u32..2).prop_map(|(s, g)| Formula::emits(t(s), E, sig(g))),
                        0..5,
                    ),
                    proptest::collection::vec(formula, 0..5),
                ),
                |(facts, premises)| {
                    let whole = consistent(&facts, &premises);
                    let split = premises.iter().all(|p| consistent(&facts, &[*p]));
                    prop_assert_eq!(whole, split);
                    Ok(())
                },
            )
            .unwrap();
    }
}
