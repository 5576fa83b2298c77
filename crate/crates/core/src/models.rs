//! Supported models and the logical verdict.
//!
//! A set of positive facts `T` is a *supported model* (relative to a term
//! scope `P` and a label scope `L`) when
//!
//! 1. every member of `T` is concluded by some rule instance whose premises
//!    are consistent with `T` (positives are members, negatives are
//!    uncontradicted), and
//! 2. conversely, every in-scope fact that *has* such an instance is a
//!    member: `T` contains everything it justifies, no more and no less.
//!
//! Negative premises make this non-monotone — `T` may justify itself into
//! existence (`present s then emit s else nothing end` has one model where
//! `s` circulates and one where it stays silent) or out of existence
//! (swapping the branches leaves no model at all).  The program is logically
//! coherent when every input evaluation admits exactly one model.
//!
//! Facts under different evaluations never share a rule instance, so the
//! global models are exactly the cross products of per-evaluation model
//! sets; enumeration works one evaluation at a time over the supportable
//! facts (nothing outside them can ever satisfy condition 1).

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::fmt;

use crate::error::Error;
use crate::formulas::{consistent, EvalId, Family, Formula, FormulaKind, SigId, TermId};
use crate::grounding::Universe;
use crate::Result;

/// At most this many full cross-product models are materialized as
/// witnesses; the exact count is always reported.
pub const WITNESS_CAP: usize = 8;

/// Which judgement families condition 2 ranges over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelSet {
    /// Every label: emission of each signal, termination, every transition
    /// label.
    All,
    /// Only the listed (kind, signal) pairs.
    Only(BTreeSet<(FormulaKind, Option<SigId>)>),
}

impl LabelSet {
    pub fn contains(&self, kind: FormulaKind, signal: Option<SigId>) -> bool {
        match self {
            LabelSet::All => true,
            LabelSet::Only(set) => set.contains(&(kind, signal)),
        }
    }
}

/// A set of positive facts, usually one (global or per-evaluation) supported
/// model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Model {
    facts: BTreeSet<Formula>,
}

impl Model {
    pub fn new(facts: BTreeSet<Formula>) -> Model {
        debug_assert!(facts.iter().all(Formula::is_positive));
        Model { facts }
    }

    pub fn facts(&self) -> &BTreeSet<Formula> {
        &self.facts
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.facts.contains(f)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Canonical rendering: one line per fact, sorted lexicographically.
    pub fn render(&self, u: &Universe) -> Vec<String> {
        let mut lines: Vec<String> = self.facts.iter().map(|f| u.render(f)).collect();
        lines.sort();
        lines
    }
}

/// Checks the two supported-model conditions directly against the
/// definition.  `scope` restricts which source terms and `labels` which
/// judgement families condition 2 quantifies over; condition 1 is checked
/// for every member regardless.
pub fn is_supported_model(
    u: &Universe,
    model: &Model,
    scope: &BTreeSet<TermId>,
    labels: &LabelSet,
) -> bool {
    let facts = model.facts();
    // Condition 1: membership needs a consistent justifying instance.
    for f in facts {
        if !u
            .instances_concluding(f)
            .iter()
            .any(|ri| consistent(facts, &ri.premises))
        {
            return false;
        }
    }
    // Condition 2: a consistent justifying instance forces membership.
    for f in u.pos_space() {
        if facts.contains(f)
            || !scope.contains(&f.source())
            || !labels.contains(f.kind(), f.signal())
        {
            continue;
        }
        if u.instances_concluding(f)
            .iter()
            .any(|ri| consistent(facts, &ri.premises))
        {
            return false;
        }
    }
    true
}

/// All supported models of one input evaluation, over the full residual term
/// scope and every label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalModels {
    pub eval: EvalId,
    pub models: Vec<Model>,
}

/// Enumerates, per input evaluation, every supported model (full scope, all
/// labels), deduplicated and deterministically ordered by rendered form.
///
/// Fails with [`Error::ResourceLimit`] when some evaluation has more
/// supportable facts than the configured choice-point cap.
pub fn enumerate_supported_models(u: &Universe) -> Result<Vec<EvalModels>> {
    let cap = u.config().max_choice_points;
    let mut out = Vec::with_capacity(u.evals().len());
    for eval in 0..u.evals().len() as u32 {
        let eval = EvalId(eval);
        let facts: Vec<Formula> = u
            .supportable_facts()
            .filter(|f| f.ieval() == eval)
            .collect();
        if facts.len() > cap {
            return Err(Error::ResourceLimit {
                what: "supportable facts per evaluation (choice points)",
                limit: cap,
                needed: facts.len(),
            });
        }
        let mut models = EvalSearch::new(u, facts).run();
        models.sort_by_cached_key(|m| m.render(u));
        models.dedup();
        out.push(EvalModels { eval, models });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Unknown,
    In,
    Out,
}

/// One instance compiled to local fact indices: satisfiable only if every
/// `pos` member is In and no member of any `neg` family is In.
struct InstSpec {
    pos: Vec<usize>,
    neg: Vec<Family>,
}

struct EvalSearch {
    facts: Vec<Formula>,
    instances: Vec<Vec<InstSpec>>,
    families: HashMap<Family, Vec<usize>>,
}

impl EvalSearch {
    fn new(u: &Universe, facts: Vec<Formula>) -> EvalSearch {
        let index: HashMap<Formula, usize> =
            facts.iter().enumerate().map(|(i, f)| (*f, i)).collect();
        let mut families: HashMap<Family, Vec<usize>> = HashMap::new();
        for (i, f) in facts.iter().enumerate() {
            families.entry(f.family()).or_default().push(i);
        }
        let instances = facts
            .iter()
            .map(|f| {
                u.instances_concluding(f)
                    .into_iter()
                    .filter_map(|ri| {
                        let mut pos = Vec::new();
                        let mut neg = Vec::new();
                        for premise in &ri.premises {
                            if premise.is_positive() {
                                // A positive premise outside the supportable
                                // set can never hold; drop the instance.
                                pos.push(*index.get(premise)?);
                            } else {
                                neg.push(premise.family());
                            }
                        }
                        Some(InstSpec { pos, neg })
                    })
                    .collect()
            })
            .collect();
        EvalSearch {
            facts,
            instances,
            families,
        }
    }

    fn run(&self) -> Vec<Model> {
        let mut out = Vec::new();
        self.search(vec![Status::Unknown; self.facts.len()], &mut out);
        out
    }

    /// Is the instance still satisfiable / already satisfied under `status`?
    fn inst_state(&self, inst: &InstSpec, status: &[Status]) -> (bool, bool) {
        let mut satisfied = true;
        for &p in &inst.pos {
            match status[p] {
                Status::Out => return (false, false),
                Status::In => {}
                Status::Unknown => satisfied = false,
            }
        }
        for fam in &inst.neg {
            for &member in self.families.get(fam).map(Vec::as_slice).unwrap_or(&[]) {
                match status[member] {
                    Status::In => return (false, false),
                    Status::Out => {}
                    Status::Unknown => satisfied = false,
                }
            }
        }
        (true, satisfied)
    }

    /// Propagates forced decisions to a fixpoint.  Returns false on
    /// contradiction (some In fact lost its last satisfiable instance, or
    /// some Out fact has a fully satisfied one).
    fn propagate(&self, status: &mut [Status]) -> bool {
        loop {
            let mut changed = false;
            for i in 0..self.facts.len() {
                let mut any_satisfiable = false;
                let mut any_satisfied = false;
                for inst in &self.instances[i] {
                    let (satisfiable, satisfied) = self.inst_state(inst, status);
                    any_satisfiable |= satisfiable;
                    any_satisfied |= satisfied;
                    if any_satisfied {
                        break;
                    }
                }
                match status[i] {
                    Status::In if !any_satisfiable => return false,
                    Status::Out if any_satisfied => return false,
                    Status::Unknown => {
                        if any_satisfied {
                            status[i] = Status::In;
                            changed = true;
                        } else if !any_satisfiable {
                            status[i] = Status::Out;
                            changed = true;
                        }
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn search(&self, mut status: Vec<Status>, out: &mut Vec<Model>) {
        if !self.propagate(&mut status) {
            return;
        }
        match status.iter().position(|s| *s == Status::Unknown) {
            Some(i) => {
                let mut with = status.clone();
                with[i] = Status::In;
                self.search(with, out);
                status[i] = Status::Out;
                self.search(status, out);
            }
            None => {
                // Propagation at a full assignment already guarantees the
                // fixpoint property; re-check it directly as a guard against
                // solver bugs.
                if self.is_fixpoint(&status) {
                    let facts = self
                        .facts
                        .iter()
                        .zip(&status)
                        .filter(|(_, s)| **s == Status::In)
                        .map(|(f, _)| *f)
                        .collect();
                    out.push(Model::new(facts));
                }
            }
        }
    }

    fn is_fixpoint(&self, status: &[Status]) -> bool {
        (0..self.facts.len()).all(|i| {
            let justified = self.instances[i]
                .iter()
                .any(|inst| self.inst_state(inst, status).1);
            justified == (status[i] == Status::In)
        })
    }
}

/// The three logical verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogicalStatus {
    /// Exactly one supported model per input evaluation.
    Coherent,
    /// Some evaluation has no supported model.
    NonReactive,
    /// Some evaluation has several supported models.
    NonDeterministic,
}

impl fmt::Display for LogicalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogicalStatus::Coherent => write!(f, "coherent"),
            LogicalStatus::NonReactive => write!(f, "non-reactive"),
            LogicalStatus::NonDeterministic => write!(f, "non-deterministic"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSummary {
    pub eval: EvalId,
    pub model_count: usize,
    pub status: LogicalStatus,
}

/// The logical classification of a grounded program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalVerdict {
    pub status: LogicalStatus,
    /// Exact number of global models (the product over evaluations).
    pub model_count: u128,
    /// Up to [`WITNESS_CAP`] global models (each the union of one model per
    /// evaluation), in deterministic order.
    pub witnesses: Vec<Model>,
    pub per_evaluation: Vec<EvalSummary>,
    /// The per-evaluation model lists the verdict was computed from.
    pub eval_models: Vec<EvalModels>,
}

/// Classifies reactivity/determinism by enumerating supported models for
/// every evaluation and combining them.
pub fn classify_logical(u: &Universe) -> Result<LogicalVerdict> {
    let eval_models = enumerate_supported_models(u)?;
    let per_evaluation: Vec<EvalSummary> = eval_models
        .iter()
        .map(|em| EvalSummary {
            eval: em.eval,
            model_count: em.models.len(),
            status: match em.models.len() {
                0 => LogicalStatus::NonReactive,
                1 => LogicalStatus::Coherent,
                _ => LogicalStatus::NonDeterministic,
            },
        })
        .collect();
    let status = if per_evaluation
        .iter()
        .any(|s| s.status == LogicalStatus::NonReactive)
    {
        LogicalStatus::NonReactive
    } else if per_evaluation
        .iter()
        .any(|s| s.status == LogicalStatus::NonDeterministic)
    {
        LogicalStatus::NonDeterministic
    } else {
        LogicalStatus::Coherent
    };
    let model_count = eval_models
        .iter()
        .fold(1u128, |acc, em| acc.saturating_mul(em.models.len() as u128));
    let witnesses = cross_product_witnesses(&eval_models);
    Ok(LogicalVerdict {
        status,
        model_count,
        witnesses,
        per_evaluation,
        eval_models,
    })
}

/// First [`WITNESS_CAP`] elements of the cross product, odometer order (last
/// evaluation varies fastest).
fn cross_product_witnesses(eval_models: &[EvalModels]) -> Vec<Model> {
    if eval_models.iter().any(|em| em.models.is_empty()) {
        return Vec::new();
    }
    let mut witnesses = Vec::new();
    let mut odometer = vec![0usize; eval_models.len()];
    'outer: loop {
        let mut facts = BTreeSet::new();
        for (em, &pick) in eval_models.iter().zip(&odometer) {
            facts.extend(em.models[pick].facts().iter().copied());
        }
        witnesses.push(Model::new(facts));
        if witnesses.len() >= WITNESS_CAP {
            break;
        }
        for slot in (0..odometer.len()).rev() {
            odometer[slot] += 1;
            if odometer[slot] < eval_models[slot].models.len() {
                continue 'outer;
            }
            odometer[slot] = 0;
        }
        break;
    }
    witnesses
}
