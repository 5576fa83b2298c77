//! Supported proofs and the constructive verdict.
//!
//! A supported proof is a finite tree of formulas.  A positive node is
//! justified by a single rule instance whose premises are exactly the
//! children.  A negative node must *refute* every instance whose conclusion
//! contradicts it: for each such instance some premise is contradicted by a
//! proved child.  When no instance concludes anything in the contradicted
//! family, the negative node stands vacuously.
//!
//! The search explores exactly the repetition-free trees (no formula occurs
//! twice on a root-to-node path); any proof can be normalised into that form
//! by splicing out the inner occurrence, so the restriction loses nothing
//! and guarantees termination.  Successes are memoised unconditionally — a
//! found tree is valid regardless of how the search was constrained.
//! Failures are memoised only when they did not depend on a path ban of some
//! strict ancestor, tracked by the minimum touched path index.
//!
//! A program is constructive when, for every input evaluation, every
//! emittable signal of its interface is settled both ways (emission plus a
//! transition, or both negations) and its termination is settled, all by
//! supported proofs.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde_json::json;

use crate::formulas::{
    contradicts, render_formula, EvalId, Formula, FormulaAtlas, FormulaKind, SigId, TermId,
};
use crate::grounding::{RuleInstance, RuleName, Universe};
use crate::models::{LogicalStatus, LogicalVerdict};

/// Default cap on the positive-judgement space size for the full
/// provable-versus-model sweeps in [`check_theorems`]; larger spaces skip
/// the sweeps rather than stall.
pub const DEFAULT_SWEEP_LIMIT: usize = 2_000;

/// One node of a supported proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofTree {
    root: Formula,
    step: Justification,
}

/// How a proof node is justified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Justification {
    /// Positive node: an instance of `rule` concludes the root from exactly
    /// the children's roots, in premise order.
    Rule {
        rule: RuleName,
        premises: Vec<ProofTree>,
    },
    /// Negative node: one entry per instance contradicting the root, in
    /// enumeration order, each refuted through one of its premises.
    Refutation { refuted: Vec<RefutedInstance> },
    /// Negative node with nothing to refute: no instance concludes any
    /// formula of the contradicted family.
    NoContradictingInstances,
}

/// One contradicting instance together with the premise that was refuted
/// and the proof of its contradictor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefutedInstance {
    pub rule: RuleName,
    pub conclusion: Formula,
    pub premise: Formula,
    pub witness: ProofTree,
}

impl ProofTree {
    pub fn rule(root: Formula, rule: RuleName, premises: Vec<ProofTree>) -> ProofTree {
        ProofTree {
            root,
            step: Justification::Rule { rule, premises },
        }
    }

    pub fn refutation(root: Formula, refuted: Vec<RefutedInstance>) -> ProofTree {
        ProofTree {
            root,
            step: Justification::Refutation { refuted },
        }
    }

    pub fn vacuous(root: Formula) -> ProofTree {
        ProofTree {
            root,
            step: Justification::NoContradictingInstances,
        }
    }

    pub fn root(&self) -> &Formula {
        &self.root
    }

    pub fn step(&self) -> &Justification {
        &self.step
    }

    /// Total number of nodes, counting refutation witnesses.
    pub fn node_count(&self) -> usize {
        1 + match &self.step {
            Justification::Rule { premises, .. } => premises.iter().map(ProofTree::node_count).sum(),
            Justification::Refutation { refuted } => {
                refuted.iter().map(|r| r.witness.node_count()).sum()
            }
            Justification::NoContradictingInstances => 0,
        }
    }

    /// Every rule applied at a positive node, pre-order, witnesses included
    /// (the rules of *refuted* instances are not applications and are not
    /// listed).
    pub fn applied_rules(&self) -> Vec<RuleName> {
        let mut out = Vec::new();
        self.collect_rules(&mut out);
        out
    }

    fn collect_rules(&self, out: &mut Vec<RuleName>) {
        match &self.step {
            Justification::Rule { rule, premises } => {
                out.push(*rule);
                for p in premises {
                    p.collect_rules(out);
                }
            }
            Justification::Refutation { refuted } => {
                for r in refuted {
                    r.witness.collect_rules(out);
                }
            }
            Justification::NoContradictingInstances => {}
        }
    }
}

/// Outcome of one proof attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofResult {
    pub goal: Formula,
    pub tree: Option<ProofTree>,
}

impl ProofResult {
    pub fn provable(&self) -> bool {
        self.tree.is_some()
    }
}

/// One-shot proof search; build a [`Prover`] instead when asking several
/// questions about the same universe, so the memo table is shared.
pub fn prove(u: &Universe, goal: &Formula) -> ProofResult {
    Prover::new(u).prove(goal)
}

enum MemoEntry {
    Proved(ProofTree),
    Failed,
}

/// Memoising supported-proof searcher over one grounded universe.
pub struct Prover<'u> {
    u: &'u Universe,
    memo: HashMap<Formula, MemoEntry>,
    path: Vec<Formula>,
    path_index: HashMap<Formula, usize>,
}

impl<'u> Prover<'u> {
    pub fn new(u: &'u Universe) -> Prover<'u> {
        Prover {
            u,
            memo: HashMap::new(),
            path: Vec::new(),
            path_index: HashMap::new(),
        }
    }

    pub fn universe(&self) -> &'u Universe {
        self.u
    }

    pub fn prove(&mut self, goal: &Formula) -> ProofResult {
        debug_assert!(self.path.is_empty());
        let (tree, _) = self.prove_rec(*goal);
        ProofResult { goal: *goal, tree }
    }

    /// Returns the proof if one exists, plus the smallest path index whose
    /// ban any *failed* branch ran into (`usize::MAX` when none — the result
    /// is then context-free).
    fn prove_rec(&mut self, goal: Formula) -> (Option<ProofTree>, usize) {
        if let Some(entry) = self.memo.get(&goal) {
            return match entry {
                MemoEntry::Proved(t) => (Some(t.clone()), usize::MAX),
                MemoEntry::Failed => (None, usize::MAX),
            };
        }
        if let Some(&idx) = self.path_index.get(&goal) {
            // Already being proved further up: this branch would repeat a
            // formula on the path, which a normalised proof never needs.
            return (None, idx);
        }
        let my_idx = self.path.len();
        self.path.push(goal);
        self.path_index.insert(goal, my_idx);
        let (tree, taint) = if goal.is_positive() {
            self.search_positive(goal)
        } else {
            self.search_negative(goal)
        };
        self.path.pop();
        self.path_index.remove(&goal);
        match tree {
            Some(t) => {
                self.memo.insert(goal, MemoEntry::Proved(t.clone()));
                (Some(t), usize::MAX)
            }
            None => {
                if taint >= my_idx {
                    // The failure involved no strict ancestor's ban (a ban on
                    // the goal itself is intrinsic), so it holds on any path.
                    self.memo.insert(goal, MemoEntry::Failed);
                    (None, usize::MAX)
                } else {
                    (None, taint)
                }
            }
        }
    }

    fn search_positive(&mut self, goal: Formula) -> (Option<ProofTree>, usize) {
        let mut taint = usize::MAX;
        for ri in self.u.instances_concluding(&goal) {
            let mut premises = Vec::with_capacity(ri.premises.len());
            let mut ok = true;
            for premise in &ri.premises {
                match self.prove_rec(*premise) {
                    (Some(t), _) => premises.push(t),
                    (None, touched) => {
                        taint = taint.min(touched);
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return (Some(ProofTree::rule(goal, ri.rule, premises)), usize::MAX);
            }
        }
        (None, taint)
    }

    fn search_negative(&mut self, goal: Formula) -> (Option<ProofTree>, usize) {
        let contradicting = contradicting_instances(self.u, &goal);
        if contradicting.is_empty() {
            return (Some(ProofTree::vacuous(goal)), usize::MAX);
        }
        let mut taint = usize::MAX;
        let mut refuted = Vec::with_capacity(contradicting.len());
        for ri in contradicting {
            let mut witness = None;
            'premises: for premise in &ri.premises {
                for candidate in contradictors_of(self.u, premise) {
                    match self.prove_rec(candidate) {
                        (Some(t), _) => {
                            witness = Some((*premise, t));
                            break 'premises;
                        }
                        (None, touched) => taint = taint.min(touched),
                    }
                }
            }
            match witness {
                Some((premise, w)) => refuted.push(RefutedInstance {
                    rule: ri.rule,
                    conclusion: ri.conclusion,
                    premise,
                    witness: w,
                }),
                None => return (None, taint),
            }
        }
        (Some(ProofTree::refutation(goal, refuted)), usize::MAX)
    }
}

/// Positive formulas of `f`'s family: the fact itself for emission and
/// termination, one per target term (in term order) for transitions.
fn positives_of_family(u: &Universe, f: &Formula) -> Vec<Formula> {
    match f.kind() {
        FormulaKind::Emits => vec![Formula::emits(f.source(), f.ieval(), f.signal().unwrap())],
        FormulaKind::Terminates => vec![Formula::terminates(f.source(), f.ieval())],
        FormulaKind::Trans => (0..u.terms().len() as u32)
            .map(|t| Formula::trans(f.source(), f.ieval(), f.signal().unwrap(), TermId(t)))
            .collect(),
    }
}

/// Every instance whose conclusion contradicts the (negative) goal, in
/// deterministic enumeration order.
fn contradicting_instances(u: &Universe, goal: &Formula) -> Vec<RuleInstance> {
    debug_assert!(!goal.is_positive());
    let mut out = Vec::new();
    for pos in positives_of_family(u, goal) {
        out.extend(u.instances_concluding(&pos));
    }
    out
}

/// Formulas that contradict `premise`, in the order the search tries them.
fn contradictors_of(u: &Universe, premise: &Formula) -> Vec<Formula> {
    if premise.is_positive() {
        vec![premise.negate()]
    } else {
        positives_of_family(u, premise)
    }
}

/// Re-checks a finished tree against the definition, independently of how
/// the search behaved (path repetition, for instance, is legal here).
pub fn verify_proof(u: &Universe, tree: &ProofTree) -> std::result::Result<(), String> {
    let root = tree.root();
    match tree.step() {
        Justification::Rule { rule, premises } => {
            if !root.is_positive() {
                return Err(format!(
                    "rule node with negative root {}",
                    u.render(root)
                ));
            }
            let listed: Vec<Formula> = premises.iter().map(|t| *t.root()).collect();
            let matched = u
                .instances_concluding(root)
                .into_iter()
                .any(|ri| ri.rule == *rule && ri.premises == listed);
            if !matched {
                return Err(format!(
                    "no {} instance concludes {} from the listed premises",
                    rule,
                    u.render(root)
                ));
            }
            premises.iter().try_for_each(|t| verify_proof(u, t))
        }
        Justification::Refutation { refuted } => {
            if root.is_positive() {
                return Err(format!(
                    "refutation node with positive root {}",
                    u.render(root)
                ));
            }
            let contradicting = contradicting_instances(u, root);
            if contradicting.len() != refuted.len() {
                return Err(format!(
                    "{} refutes {} instance(s) but {} contradict it",
                    u.render(root),
                    refuted.len(),
                    contradicting.len()
                ));
            }
            for (ri, rec) in contradicting.iter().zip(refuted) {
                if ri.rule != rec.rule || ri.conclusion != rec.conclusion {
                    return Err(format!(
                        "refutation entries for {} are out of order",
                        u.render(root)
                    ));
                }
                if !ri.premises.contains(&rec.premise) {
                    return Err(format!(
                        "{} is not a premise of the refuted {} instance",
                        u.render(&rec.premise),
                        rec.rule
                    ));
                }
                if !contradicts(rec.witness.root(), &rec.premise) {
                    return Err(format!(
                        "witness {} does not contradict premise {}",
                        u.render(rec.witness.root()),
                        u.render(&rec.premise)
                    ));
                }
                verify_proof(u, &rec.witness)?;
            }
            Ok(())
        }
        Justification::NoContradictingInstances => {
            if root.is_positive() {
                return Err(format!(
                    "vacuous node with positive root {}",
                    u.render(root)
                ));
            }
            if contradicting_instances(u, root).is_empty() {
                Ok(())
            } else {
                Err(format!(
                    "{} claims vacuity but contradicting instances exist",
                    u.render(root)
                ))
            }
        }
    }
}

/// Positive-style text of a formula's family, target left open for
/// transitions.
fn family_text<A: FormulaAtlas>(f: &Formula, atlas: &A) -> String {
    let term = atlas.term_text(f.source());
    let eval = atlas.eval_text(f.ieval());
    match f.kind() {
        FormulaKind::Emits => {
            format!("{} emits[{}] {}", term, eval, atlas.signal_text(f.signal().unwrap()))
        }
        FormulaKind::Terminates => format!("{} term[{}]", term, eval),
        FormulaKind::Trans => {
            format!("{} --{},{}-->", term, eval, atlas.signal_text(f.signal().unwrap()))
        }
    }
}

/// Indented plain-text rendering of a proof tree.
pub fn render_proof_text<A: FormulaAtlas>(atlas: &A, tree: &ProofTree) -> String {
    let mut out = String::new();
    render_text_into(atlas, tree, 0, &mut out);
    out
}

fn render_text_into<A: FormulaAtlas>(atlas: &A, tree: &ProofTree, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let root = render_formula(tree.root(), atlas);
    match tree.step() {
        Justification::Rule { rule, premises } => {
            let _ = writeln!(out, "{pad}{root}   [{rule}]");
            for p in premises {
                render_text_into(atlas, p, depth + 1, out);
            }
        }
        Justification::Refutation { refuted } => {
            let plural = if refuted.len() == 1 { "instance" } else { "instances" };
            let _ = writeln!(out, "{pad}{root}   [refutes {} {plural}]", refuted.len());
            for r in refuted {
                let _ = writeln!(
                    out,
                    "{pad}  against {}: {} — refuted premise: {}",
                    r.rule,
                    render_formula(&r.conclusion, atlas),
                    render_formula(&r.premise, atlas),
                );
                render_text_into(atlas, &r.witness, depth + 2, out);
            }
        }
        Justification::NoContradictingInstances => {
            let _ = writeln!(
                out,
                "{pad}{root}   [no rule concludes {}]",
                family_text(tree.root(), atlas)
            );
        }
    }
}

/// JSON rendering of a proof tree (rule nodes carry `rule` and `children`,
/// refutation nodes `refutations`, vacuous nodes `vacuous: true`).
pub fn render_proof_json<A: FormulaAtlas>(atlas: &A, tree: &ProofTree) -> serde_json::Value {
    let root = render_formula(tree.root(), atlas);
    match tree.step() {
        Justification::Rule { rule, premises } => json!({
            "root": root,
            "rule": rule.to_string(),
            "children": premises.iter().map(|p| render_proof_json(atlas, p)).collect::<Vec<_>>(),
        }),
        Justification::Refutation { refuted } => json!({
            "root": root,
            "refutations": refuted.iter().map(|r| json!({
                "rule": r.rule.to_string(),
                "conclusion": render_formula(&r.conclusion, atlas),
                "premise": render_formula(&r.premise, atlas),
                "witness": render_proof_json(atlas, &r.witness),
            })).collect::<Vec<_>>(),
        }),
        Justification::NoContradictingInstances => json!({
            "root": root,
            "vacuous": true,
        }),
    }
}

/// What the proof obligations for one emittable signal resolved to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SignalOutcome {
    /// Emission and a transition bearing the signal are both proved.
    Emitted {
        emits: ProofTree,
        step: ProofTree,
        target: TermId,
    },
    /// Non-emission and absence of any such transition are both proved.
    Silent {
        not_emits: ProofTree,
        not_steps: ProofTree,
    },
    Unresolved,
}

/// What the termination obligation resolved to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TerminationOutcome {
    Terminates(ProofTree),
    Rejects(ProofTree),
    Unresolved,
}

/// One obligation of the constructive verdict, with the raw provability of
/// each polarity kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Obligation {
    Signal {
        eval: EvalId,
        signal: SigId,
        emits: bool,
        not_emits: bool,
        steps: bool,
        not_steps: bool,
        outcome: SignalOutcome,
    },
    Termination {
        eval: EvalId,
        terminates: bool,
        not_terminates: bool,
        outcome: TerminationOutcome,
    },
}

impl Obligation {
    pub fn eval(&self) -> EvalId {
        match self {
            Obligation::Signal { eval, .. } | Obligation::Termination { eval, .. } => *eval,
        }
    }

    pub fn is_resolved(&self) -> bool {
        match self {
            Obligation::Signal { outcome, .. } => !matches!(outcome, SignalOutcome::Unresolved),
            Obligation::Termination { outcome, .. } => {
                !matches!(outcome, TerminationOutcome::Unresolved)
            }
        }
    }

    /// True when both polarities of some covered formula were provable —
    /// an inconsistency of the rule system, never of a correct one.
    pub fn is_contradictory(&self) -> bool {
        match self {
            Obligation::Signal {
                emits,
                not_emits,
                steps,
                not_steps,
                ..
            } => (*emits && *not_emits) || (*steps && *not_steps),
            Obligation::Termination {
                terminates,
                not_terminates,
                ..
            } => *terminates && *not_terminates,
        }
    }
}

/// The constructive classification of a grounded program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstructiveVerdict {
    pub constructive: bool,
    /// Evaluation-major; within one evaluation the interface signals in
    /// canonical order, then termination.
    pub obligations: Vec<Obligation>,
}

/// Decides constructiveness: both polarities of every obligation are
/// attempted and the outcomes recorded.
pub fn classify_constructive(u: &Universe) -> ConstructiveVerdict {
    let mut prover = Prover::new(u);
    let ctx_id = u.context_id();
    let signals: Vec<SigId> = u
        .ctx()
        .env()
        .emittable()
        .map(|s| u.signal_id(s.name()).expect("interface signal is grounded"))
        .collect();
    let mut obligations = Vec::new();
    for e in 0..u.evals().len() as u32 {
        let eval = EvalId(e);
        for &signal in &signals {
            let emits_goal = Formula::emits(ctx_id, eval, signal);
            let emits = prover.prove(&emits_goal).tree;
            let not_emits = prover.prove(&emits_goal.negate()).tree;
            let mut step = None;
            for t in 0..u.terms().len() as u32 {
                let goal = Formula::trans(ctx_id, eval, signal, TermId(t));
                if let Some(tree) = prover.prove(&goal).tree {
                    step = Some((tree, TermId(t)));
                    break;
                }
            }
            let not_steps_goal = Formula::trans(ctx_id, eval, signal, TermId(0)).negate();
            let not_steps = prover.prove(&not_steps_goal).tree;
            let flags = (
                emits.is_some(),
                not_emits.is_some(),
                step.is_some(),
                not_steps.is_some(),
            );
            let outcome = match (emits, not_emits, step, not_steps) {
                (Some(emits), None, Some((step, target)), None) => SignalOutcome::Emitted {
                    emits,
                    step,
                    target,
                },
                (None, Some(not_emits), None, Some(not_steps)) => SignalOutcome::Silent {
                    not_emits,
                    not_steps,
                },
                _ => SignalOutcome::Unresolved,
            };
            obligations.push(Obligation::Signal {
                eval,
                signal,
                emits: flags.0,
                not_emits: flags.1,
                steps: flags.2,
                not_steps: flags.3,
                outcome,
            });
        }
        let term_goal = Formula::terminates(ctx_id, eval);
        let terminates = prover.prove(&term_goal).tree;
        let not_terminates = prover.prove(&term_goal.negate()).tree;
        let flags = (terminates.is_some(), not_terminates.is_some());
        let outcome = match (terminates, not_terminates) {
            (Some(t), None) => TerminationOutcome::Terminates(t),
            (None, Some(t)) => TerminationOutcome::Rejects(t),
            _ => TerminationOutcome::Unresolved,
        };
        obligations.push(Obligation::Termination {
            eval,
            terminates: flags.0,
            not_terminates: flags.1,
            outcome,
        });
    }
    let constructive = obligations.iter().all(Obligation::is_resolved);
    ConstructiveVerdict {
        constructive,
        obligations,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyStatus {
    Holds,
    Violated,
    /// The check needed a sweep over a judgement space above the cap.
    Skipped,
    NotApplicable,
}

impl std::fmt::Display for PropertyStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PropertyStatus::Holds => write!(f, "holds"),
            PropertyStatus::Violated => write!(f, "VIOLATED"),
            PropertyStatus::Skipped => write!(f, "skipped"),
            PropertyStatus::NotApplicable => write!(f, "not applicable"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub status: PropertyStatus,
}

/// Cross-checks the metatheory on this program:
///
/// 1. a constructive program is logically coherent;
/// 2. for a constructive program the provable positive facts are exactly
///    the unique supported model;
/// 3. no formula is provable in both polarities.
///
/// Checks 2 and 3 sweep every positive judgement (both polarities); the
/// sweep is skipped when the space exceeds `sweep_limit`.
pub fn check_theorems(
    u: &Universe,
    logical: &LogicalVerdict,
    constructive: &ConstructiveVerdict,
    sweep_limit: Option<usize>,
) -> Vec<PropertyCheck> {
    let coherent = logical.status == LogicalStatus::Coherent;
    let implies_coherent = if !constructive.constructive {
        PropertyStatus::NotApplicable
    } else if coherent {
        PropertyStatus::Holds
    } else {
        PropertyStatus::Violated
    };

    let sweep_allowed = sweep_limit.is_none_or(|cap| u.pos_space().len() <= cap);
    let mut sweep: Option<Vec<(bool, bool)>> = None;
    if sweep_allowed {
        let mut prover = Prover::new(u);
        sweep = Some(
            u.pos_space()
                .iter()
                .map(|f| {
                    (
                        prover.prove(f).provable(),
                        prover.prove(&f.negate()).provable(),
                    )
                })
                .collect(),
        );
    }

    let matches_model = if !constructive.constructive {
        PropertyStatus::NotApplicable
    } else if !coherent {
        PropertyStatus::Violated
    } else {
        match &sweep {
            None => PropertyStatus::Skipped,
            Some(results) => {
                let union: std::collections::BTreeSet<Formula> = logical
                    .eval_models
                    .iter()
                    .flat_map(|em| em.models[0].facts().iter().copied())
                    .collect();
                let equal = u
                    .pos_space()
                    .iter()
                    .zip(results)
                    .all(|(f, (pos, _))| *pos == union.contains(f));
                if equal {
                    PropertyStatus::Holds
                } else {
                    PropertyStatus::Violated
                }
            }
        }
    };

    let obligation_contradiction = constructive
        .obligations
        .iter()
        .any(Obligation::is_contradictory);
    let consistent = if obligation_contradiction {
        PropertyStatus::Violated
    } else {
        match &sweep {
            None => PropertyStatus::Skipped,
            Some(results) => {
                if results.iter().any(|(pos, neg)| *pos && *neg) {
                    PropertyStatus::Violated
                } else {
                    PropertyStatus::Holds
                }
            }
        }
    };

    vec![
        PropertyCheck {
            name: "constructive-implies-coherent",
            status: implies_coherent,
        },
        PropertyCheck {
            name: "constructive-matches-unique-model",
            status: matches_model,
        },
        PropertyCheck {
            name: "no-contradictory-provables",
            status: consistent,
        },
    ]
}
