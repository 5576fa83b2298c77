//! Grounding: from a program to a finite space of judgements and rule
//! instances.
//!
//! The deduction rules are schemas over terms and signals.  To make model
//! search and proof search finite we instantiate them over the *residual
//! universe* of the analyzed program: the least term set containing all
//! subterms of the program (and, for every `signal … in … end` term, the
//! subterms of its freshly renamed body) that is closed under forming
//! one-step transition targets.  Every judgement a derivation can ever
//! mention lives inside this universe.
//!
//! [`ground_space`] builds the universe, enumerates the positive judgement
//! space, and prunes it to the *supportable* subset — the greatest set of
//! facts each of which has a justifying instance whose positive premises are
//! all supportable themselves (negative premises are ignored, so this is a
//! sound over-approximation of every supported model and of every positively
//! provable fact).

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::fmt;

use crate::error::Error;
use crate::formulas::{
    all_input_evaluations, AnalysisContext, EvalId, Formula, FormulaAtlas, FormulaKind,
    InputEvaluation, SigId, TermId,
};
use crate::syntax::{fresh_signal_among, Program, SignalId, SignalKind};
use crate::Result;

/// Which rule system to ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleSet {
    /// The full system: structural emission rules alongside termination and
    /// transition rules.
    Standard,
    /// The collapsed-emission variant: every structural emission rule is
    /// replaced by the single rule `emit*`, which concludes `p emits[I] x`
    /// from `p --I,x--> p'`.  Termination and transition rules are unchanged.
    CollapsedEmission,
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleSet::Standard => write!(f, "standard"),
            RuleSet::CollapsedEmission => write!(f, "collapsed-emission"),
        }
    }
}

/// Caps that keep grounding and model search from running away on
/// adversarial inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundingConfig {
    /// Maximum number of positive judgements across all evaluations.
    pub max_pos_space: usize,
    /// Maximum number of supportable judgements per evaluation that model
    /// search will branch over.
    pub max_choice_points: usize,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        GroundingConfig {
            max_pos_space: 200_000,
            max_choice_points: 24,
        }
    }
}

/// Names of the rule schemas, as they appear in rendered proofs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleName {
    // Emission rules.
    E0,
    S0,
    S1,
    S2,
    P0,
    P1,
    F0,
    F1,
    F2,
    F3,
    En0,
    // Termination and transition rules.
    Nil,
    Em,
    Seq0,
    Seq1,
    Seq2,
    Seq3,
    Seq4,
    Par0,
    Par1,
    Par2,
    Par3,
    Par4,
    If0,
    If1,
    If2,
    If3,
    If4,
    If5,
    If6,
    If7,
    Enc0,
    Enc1,
    /// The collapsed-emission rule.
    EmitStar,
}

impl RuleName {
    pub const ALL_STANDARD: [RuleName; 33] = [
        RuleName::E0,
        RuleName::S0,
        RuleName::S1,
        RuleName::S2,
        RuleName::P0,
        RuleName::P1,
        RuleName::F0,
        RuleName::F1,
        RuleName::F2,
        RuleName::F3,
        RuleName::En0,
        RuleName::Nil,
        RuleName::Em,
        RuleName::Seq0,
        RuleName::Seq1,
        RuleName::Seq2,
        RuleName::Seq3,
        RuleName::Seq4,
        RuleName::Par0,
        RuleName::Par1,
        RuleName::Par2,
        RuleName::Par3,
        RuleName::Par4,
        RuleName::If0,
        RuleName::If1,
        RuleName::If2,
        RuleName::If3,
        RuleName::If4,
        RuleName::If5,
        RuleName::If6,
        RuleName::If7,
        RuleName::Enc0,
        RuleName::Enc1,
    ];
}

impl fmt::Display for RuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RuleName::E0 => "e0",
            RuleName::S0 => "s0",
            RuleName::S1 => "s1",
            RuleName::S2 => "s2",
            RuleName::P0 => "p0",
            RuleName::P1 => "p1",
            RuleName::F0 => "f0",
            RuleName::F1 => "f1",
            RuleName::F2 => "f2",
            RuleName::F3 => "f3",
            RuleName::En0 => "en0",
            RuleName::Nil => "nil",
            RuleName::Em => "em",
            RuleName::Seq0 => "seq0",
            RuleName::Seq1 => "seq1",
            RuleName::Seq2 => "seq2",
            RuleName::Seq3 => "seq3",
            RuleName::Seq4 => "seq4",
            RuleName::Par0 => "par0",
            RuleName::Par1 => "par1",
            RuleName::Par2 => "par2",
            RuleName::Par3 => "par3",
            RuleName::Par4 => "par4",
            RuleName::If0 => "if0",
            RuleName::If1 => "if1",
            RuleName::If2 => "if2",
            RuleName::If3 => "if3",
            RuleName::If4 => "if4",
            RuleName::If5 => "if5",
            RuleName::If6 => "if6",
            RuleName::If7 => "if7",
            RuleName::Enc0 => "enc0",
            RuleName::Enc1 => "enc1",
            RuleName::EmitStar => "emit*",
        };
        f.write_str(name)
    }
}

/// One fully instantiated rule: ground premises above a ground conclusion.
/// Premises are listed in the order the schema states them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleInstance {
    pub rule: RuleName,
    pub premises: Vec<Formula>,
    pub conclusion: Formula,
}

/// How a `signal … in … end` term was opened up: the bound signal, the fresh
/// replacement minted for it, and the renamed body as a universe term.
#[derive(Debug, Clone, PartialEq, Eq)]
struct LocalRenaming {
    bound: SignalId,
    fresh: SignalId,
    bound_sig: SigId,
    fresh_sig: SigId,
    renamed_body: TermId,
}

/// The finite ground world of one analysis: terms, emittable signals
/// (including minted fresh ones), input evaluations, the positive judgement
/// space, and its supportable subset.
#[derive(Debug, Clone)]
pub struct Universe {
    ctx: AnalysisContext,
    mode: RuleSet,
    config: GroundingConfig,
    terms: Vec<Program>,
    term_ids: HashMap<Program, TermId>,
    signals: Vec<SignalId>,
    sig_ids: HashMap<String, SigId>,
    evals: Vec<InputEvaluation>,
    /// Renaming bookkeeping for every `Local` term in the universe.
    renamings: HashMap<TermId, LocalRenaming>,
    /// Which terms are subterms of the analyzed program itself (the rest are
    /// residual: reachable only by taking steps).
    context_subterms: Vec<bool>,
    pos_space: Vec<Formula>,
    fact_ids: HashMap<Formula, usize>,
    supportable: Vec<bool>,
}

impl Universe {
    pub fn ctx(&self) -> &AnalysisContext {
        &self.ctx
    }

    pub fn mode(&self) -> RuleSet {
        self.mode
    }

    pub fn config(&self) -> &GroundingConfig {
        &self.config
    }

    pub fn terms(&self) -> &[Program] {
        &self.terms
    }

    pub fn term(&self, id: TermId) -> &Program {
        &self.terms[id.0 as usize]
    }

    pub fn term_id(&self, term: &Program) -> Option<TermId> {
        self.term_ids.get(term).copied()
    }

    /// The analyzed program itself (always the first term).
    pub fn context_id(&self) -> TermId {
        TermId(0)
    }

    pub fn signals(&self) -> &[SignalId] {
        &self.signals
    }

    pub fn signal(&self, id: SigId) -> &SignalId {
        &self.signals[id.0 as usize]
    }

    pub fn signal_id(&self, name: &str) -> Option<SigId> {
        self.sig_ids.get(name).copied()
    }

    pub fn evals(&self) -> &[InputEvaluation] {
        &self.evals
    }

    pub fn eval(&self, id: EvalId) -> &InputEvaluation {
        &self.evals[id.0 as usize]
    }

    /// Whether `term` is a subterm of the analyzed program (as opposed to a
    /// residual term only reachable by taking a step).
    pub fn is_context_subterm(&self, id: TermId) -> bool {
        self.context_subterms[id.0 as usize]
    }

    /// Every well-formed positive judgement over this universe, ordered by
    /// (evaluation, kind, source, signal, target).
    pub fn pos_space(&self) -> &[Formula] {
        &self.pos_space
    }

    pub fn fact_index(&self, f: &Formula) -> Option<usize> {
        self.fact_ids.get(f).copied()
    }

    pub fn is_supportable(&self, f: &Formula) -> bool {
        self.fact_index(f).is_some_and(|i| self.supportable[i])
    }

    pub fn supportable_facts(&self) -> impl Iterator<Item = Formula> + '_ {
        self.pos_space
            .iter()
            .enumerate()
            .filter(|(i, _)| self.supportable[*i])
            .map(|(_, f)| *f)
    }

    pub fn supportable_count_for(&self, eval: EvalId) -> usize {
        self.supportable_facts()
            .filter(|f| f.ieval() == eval)
            .count()
    }

    pub fn render(&self, f: &Formula) -> String {
        crate::formulas::render_formula(f, self)
    }

    /// All rule instances with conclusion `f`, in schema order with
    /// premise-only variables enumerated signals-major, terms-minor.
    pub fn instances_concluding(&self, f: &Formula) -> Vec<RuleInstance> {
        debug_assert!(f.is_positive(), "only positive judgements are concluded");
        match f.kind() {
            FormulaKind::Emits => match self.mode {
                RuleSet::Standard => self.emission_instances(f),
                RuleSet::CollapsedEmission => self.collapsed_emission_instances(f),
            },
            FormulaKind::Terminates => self.termination_instances(f),
            FormulaKind::Trans => self.transition_instances(f),
        }
    }

    fn emission_instances(&self, f: &Formula) -> Vec<RuleInstance> {
        let e = f.ieval();
        let x = f.signal().expect("emission judgements carry a signal");
        let mut out = Vec::new();
        let mut inst = |rule: RuleName, premises: Vec<Formula>| {
            out.push(RuleInstance {
                rule,
                premises,
                conclusion: *f,
            });
        };
        match self.term(f.source()) {
            Program::Nil => {}
            Program::Emit(y) => {
                if self.signal_id(y.name()) == Some(x) {
                    inst(RuleName::E0, vec![]);
                }
            }
            Program::Seq(p, q) => {
                let (p, q) = (self.id_of(p), self.id_of(q));
                inst(RuleName::S0, vec![Formula::emits(p, e, x)]);
                inst(
                    RuleName::S1,
                    vec![Formula::terminates(p, e), Formula::emits(q, e, x)],
                );
                for x2 in self.all_sigs() {
                    for p2 in self.all_terms() {
                        inst(
                            RuleName::S2,
                            vec![
                                Formula::trans(p, e, x2, p2),
                                Formula::terminates(p2, e),
                                Formula::emits(q, e, x),
                            ],
                        );
                    }
                }
            }
            Program::Par(p, q) => {
                let (p, q) = (self.id_of(p), self.id_of(q));
                inst(RuleName::P0, vec![Formula::emits(p, e, x)]);
                inst(RuleName::P1, vec![Formula::emits(q, e, x)]);
            }
            Program::Present {
                cond,
                then_branch,
                else_branch,
            } => {
                let (p, q) = (self.id_of(then_branch), self.id_of(else_branch));
                if cond.kind() == SignalKind::Input {
                    match self.eval(e).is_present(cond) {
                        Some(true) => inst(RuleName::F2, vec![Formula::emits(p, e, x)]),
                        Some(false) => inst(RuleName::F3, vec![Formula::emits(q, e, x)]),
                        None => unreachable!("evaluations are total over the inputs"),
                    }
                } else {
                    let c = self.context_id();
                    let cond_sig = self.sig_of(cond);
                    inst(
                        RuleName::F0,
                        vec![Formula::emits(c, e, cond_sig), Formula::emits(p, e, x)],
                    );
                    inst(
                        RuleName::F1,
                        vec![
                            Formula::emits(c, e, cond_sig).negate(),
                            Formula::emits(q, e, x),
                        ],
                    );
                }
            }
            Program::Local { .. } => {
                let renaming = &self.renamings[&f.source()];
                for s2 in self.premise_labels_for(renaming, x) {
                    inst(
                        RuleName::En0,
                        vec![Formula::emits(renaming.renamed_body, e, s2)],
                    );
                }
            }
        }
        out
    }

    fn collapsed_emission_instances(&self, f: &Formula) -> Vec<RuleInstance> {
        let e = f.ieval();
        let x = f.signal().expect("emission judgements carry a signal");
        self.all_terms()
            .map(|target| RuleInstance {
                rule: RuleName::EmitStar,
                premises: vec![Formula::trans(f.source(), e, x, target)],
                conclusion: *f,
            })
            .collect()
    }

    fn termination_instances(&self, f: &Formula) -> Vec<RuleInstance> {
        let e = f.ieval();
        let mut out = Vec::new();
        let mut inst = |rule: RuleName, premises: Vec<Formula>| {
            out.push(RuleInstance {
                rule,
                premises,
                conclusion: *f,
            });
        };
        match self.term(f.source()) {
            Program::Nil => inst(RuleName::Nil, vec![]),
            Program::Emit(_) => {}
            Program::Seq(p, q) => {
                let (p, q) = (self.id_of(p), self.id_of(q));
                inst(
                    RuleName::Seq4,
                    vec![Formula::terminates(p, e), Formula::terminates(q, e)],
                );
            }
            Program::Par(p, q) => {
                let (p, q) = (self.id_of(p), self.id_of(q));
                inst(
                    RuleName::Par4,
                    vec![Formula::terminates(p, e), Formula::terminates(q, e)],
                );
            }
            Program::Present {
                cond,
                then_branch,
                else_branch,
            } => {
                let (p, q) = (self.id_of(then_branch), self.id_of(else_branch));
                if cond.kind() == SignalKind::Input {
                    match self.eval(e).is_present(cond) {
                        Some(true) => inst(RuleName::If6, vec![Formula::terminates(p, e)]),
                        Some(false) => inst(RuleName::If7, vec![Formula::terminates(q, e)]),
                        None => unreachable!("evaluations are total over the inputs"),
                    }
                } else {
                    let c = self.context_id();
                    let cond_sig = self.sig_of(cond);
                    inst(
                        RuleName::If4,
                        vec![
                            Formula::emits(c, e, cond_sig),
                            Formula::terminates(p, e),
                        ],
                    );
                    inst(
                        RuleName::If5,
                        vec![
                            Formula::emits(c, e, cond_sig).negate(),
                            Formula::terminates(q, e),
                        ],
                    );
                }
            }
            Program::Local { .. } => {
                let renaming = &self.renamings[&f.source()];
                inst(
                    RuleName::Enc1,
                    vec![Formula::terminates(renaming.renamed_body, e)],
                );
            }
        }
        out
    }

    fn transition_instances(&self, f: &Formula) -> Vec<RuleInstance> {
        let e = f.ieval();
        let x = f.signal().expect("transitions carry a signal");
        let t = f.target().expect("positive transitions carry a target");
        let mut out = Vec::new();
        let mut inst = |rule: RuleName, premises: Vec<Formula>| {
            out.push(RuleInstance {
                rule,
                premises,
                conclusion: *f,
            });
        };
        match self.term(f.source()) {
            Program::Nil => {}
            Program::Emit(y) => {
                if self.signal_id(y.name()) == Some(x) && *self.term(t) == Program::Nil {
                    inst(RuleName::Em, vec![]);
                }
            }
            Program::Seq(p, q) => {
                let (p, q) = (self.id_of(p), self.id_of(q));
                // seq0/seq1: both halves step; the target is the second
                // half's.  seq0 keeps the first half's label, seq1 the
                // second's.
                for x2 in self.all_sigs() {
                    for p2 in self.all_terms() {
                        inst(
                            RuleName::Seq0,
                            vec![
                                Formula::trans(p, e, x, p2),
                                Formula::terminates(p2, e),
                                Formula::trans(q, e, x2, t),
                            ],
                        );
                    }
                }
                for x2 in self.all_sigs() {
                    for p2 in self.all_terms() {
                        inst(
                            RuleName::Seq1,
                            vec![
                                Formula::trans(p, e, x2, p2),
                                Formula::terminates(p2, e),
                                Formula::trans(q, e, x, t),
                            ],
                        );
                    }
                }
                inst(
                    RuleName::Seq2,
                    vec![Formula::terminates(p, e), Formula::trans(q, e, x, t)],
                );
                inst(
                    RuleName::Seq3,
                    vec![
                        Formula::trans(p, e, x, t),
                        Formula::terminates(t, e),
                        Formula::terminates(q, e),
                    ],
                );
            }
            Program::Par(p, q) => {
                let (p, q) = (self.id_of(p), self.id_of(q));
                // par0/par1: both halves step and the target splits into the
                // halves' targets.  par0 keeps the left label, par1 the right.
                if let Program::Par(a, b) = self.term(t) {
                    let (a, b) = (self.id_of(a), self.id_of(b));
                    for x2 in self.all_sigs() {
                        inst(
                            RuleName::Par0,
                            vec![Formula::trans(p, e, x, a), Formula::trans(q, e, x2, b)],
                        );
                    }
                    for x2 in self.all_sigs() {
                        inst(
                            RuleName::Par1,
                            vec![Formula::trans(p, e, x2, a), Formula::trans(q, e, x, b)],
                        );
                    }
                }
                inst(
                    RuleName::Par2,
                    vec![Formula::terminates(p, e), Formula::trans(q, e, x, t)],
                );
                inst(
                    RuleName::Par3,
                    vec![Formula::trans(p, e, x, t), Formula::terminates(q, e)],
                );
            }
            Program::Present {
                cond,
                then_branch,
                else_branch,
            } => {
                let (p, q) = (self.id_of(then_branch), self.id_of(else_branch));
                if cond.kind() == SignalKind::Input {
                    match self.eval(e).is_present(cond) {
                        Some(true) => inst(RuleName::If2, vec![Formula::trans(p, e, x, t)]),
                        Some(false) => inst(RuleName::If3, vec![Formula::trans(q, e, x, t)]),
                        None => unreachable!("evaluations are total over the inputs"),
                    }
                } else {
                    let c = self.context_id();
                    let cond_sig = self.sig_of(cond);
                    inst(
                        RuleName::If0,
                        vec![
                            Formula::emits(c, e, cond_sig),
                            Formula::trans(p, e, x, t),
                        ],
                    );
                    inst(
                        RuleName::If1,
                        vec![
                            Formula::emits(c, e, cond_sig).negate(),
                            Formula::trans(q, e, x, t),
                        ],
                    );
                }
            }
            Program::Local { .. } => {
                let renaming = &self.renamings[&f.source()];
                // The conclusion target must have shape `signal s in … end`
                // with the same binder, and its body must be the renamed
                // image of a universe term.
                if let Program::Local { signal, body } = self.term(t) {
                    if *signal == renaming.bound {
                        if let Ok(preimage) = body.substitute(&renaming.bound, &renaming.fresh) {
                            if let Some(p2) = self.term_id(&preimage) {
                                for s2 in self.premise_labels_for(renaming, x) {
                                    inst(
                                        RuleName::Enc0,
                                        vec![Formula::trans(renaming.renamed_body, e, s2, p2)],
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Premise labels `s'` whose image under "rename the fresh signal back
    /// to the bound one" equals the conclusion label `x`: both the bound and
    /// the fresh signal map to the bound one, everything else to itself.
    fn premise_labels_for(&self, renaming: &LocalRenaming, x: SigId) -> Vec<SigId> {
        if x == renaming.bound_sig {
            let mut pair = [renaming.bound_sig, renaming.fresh_sig];
            pair.sort();
            pair.to_vec()
        } else if x == renaming.fresh_sig {
            Vec::new()
        } else {
            vec![x]
        }
    }

    fn id_of(&self, term: &Program) -> TermId {
        self.term_id(term)
            .expect("the universe is closed under subterms and targets")
    }

    fn sig_of(&self, signal: &SignalId) -> SigId {
        self.signal_id(signal.name())
            .expect("every emittable signal in play is catalogued")
    }

    fn all_sigs(&self) -> impl Iterator<Item = SigId> {
        (0..self.signals.len() as u32).map(SigId)
    }

    fn all_terms(&self) -> impl Iterator<Item = TermId> {
        (0..self.terms.len() as u32).map(TermId)
    }
}

impl FormulaAtlas for Universe {
    fn term_text(&self, term: TermId) -> String {
        self.term(term).to_string()
    }

    fn eval_text(&self, eval: EvalId) -> String {
        self.eval(eval).to_string()
    }

    fn signal_text(&self, signal: SigId) -> String {
        self.signal(signal).name().to_owned()
    }
}

/// Free-function form of [`Universe::instances_concluding`].
pub fn instances_concluding(u: &Universe, f: &Formula) -> Vec<RuleInstance> {
    u.instances_concluding(f)
}

/// The residual term universe of a context: subterms of the program, renamed
/// bodies (with subterms) for every `Local` term, and closure under one-step
/// transition targets.  The analyzed program is the first element.
pub fn residual_universe(ctx: &AnalysisContext, config: &GroundingConfig) -> Result<Vec<Program>> {
    let builder = UniverseBuilder::build(ctx, config)?;
    Ok(builder.terms)
}

/// Grounds a context over all `2^n` input evaluations.
pub fn ground_space(ctx: &AnalysisContext, mode: RuleSet, config: &GroundingConfig) -> Result<Universe> {
    finish_universe(ctx, mode, config, all_input_evaluations(ctx.env()))
}

/// Grounds a context over a single, explicitly chosen input evaluation.
pub fn ground_space_restricted(
    ctx: &AnalysisContext,
    mode: RuleSet,
    config: &GroundingConfig,
    eval: InputEvaluation,
) -> Result<Universe> {
    finish_universe(ctx, mode, config, vec![eval])
}

/// The supportable subset of the positive space, as a plain set.
pub fn supportable_space(u: &Universe) -> BTreeSet<Formula> {
    u.supportable_facts().collect()
}

struct UniverseBuilder {
    terms: Vec<Program>,
    term_ids: HashMap<Program, TermId>,
    signals: Vec<SignalId>,
    sig_ids: HashMap<String, SigId>,
    renamings: HashMap<TermId, LocalRenaming>,
    taken_names: BTreeSet<String>,
    cap: usize,
}

impl UniverseBuilder {
    fn build(ctx: &AnalysisContext, config: &GroundingConfig) -> Result<Self> {
        let mut signals = Vec::new();
        let mut sig_ids = HashMap::new();
        for s in ctx.env().emittable() {
            sig_ids.insert(s.name().to_owned(), SigId(signals.len() as u32));
            signals.push(s.clone());
        }
        let mut builder = UniverseBuilder {
            terms: Vec::new(),
            term_ids: HashMap::new(),
            signals,
            sig_ids,
            renamings: HashMap::new(),
            taken_names: ctx.env().all_names(),
            cap: config.max_pos_space,
        };
        builder.add_with_subterms(ctx.program())?;
        // Work through the growing term list; every term contributes its
        // renamed body (if it binds a signal) and its one-step targets.
        let mut next = 0usize;
        while next < builder.terms.len() {
            let term = builder.terms[next].clone();
            let targets = builder.targets_of(&term)?;
            for target in targets {
                builder.add_with_subterms(&target)?;
            }
            next += 1;
        }
        Ok(builder)
    }

    /// Mints the fresh signal and renamed body for a `Local` term the first
    /// time anything needs them.  The term must already be in the universe.
    fn ensure_renaming(&mut self, term: &Program) -> Result<LocalRenaming> {
        let id = self.term_ids[term];
        if let Some(renaming) = self.renamings.get(&id) {
            return Ok(renaming.clone());
        }
        let Program::Local { signal, body } = term else {
            unreachable!("renamings only exist for Local terms");
        };
        let fresh = fresh_signal_among(&self.taken_names, signal);
        self.taken_names.insert(fresh.name().to_owned());
        let fresh_sig = SigId(self.signals.len() as u32);
        self.sig_ids.insert(fresh.name().to_owned(), fresh_sig);
        self.signals.push(fresh.clone());
        let renamed = body
            .substitute(signal, &fresh)
            .expect("the minted signal is fresh for the whole universe");
        let renamed_body = self.add_with_subterms(&renamed)?;
        let bound_sig = self.sig_ids[signal.name()];
        let renaming = LocalRenaming {
            bound: signal.clone(),
            fresh,
            bound_sig,
            fresh_sig,
            renamed_body,
        };
        self.renamings.insert(id, renaming.clone());
        Ok(renaming)
    }

    fn add_with_subterms(&mut self, term: &Program) -> Result<TermId> {
        let id = self.add(term)?;
        match term {
            Program::Nil | Program::Emit(_) => {}
            Program::Present {
                then_branch,
                else_branch,
                ..
            } => {
                self.add_with_subterms(then_branch)?;
                self.add_with_subterms(else_branch)?;
            }
            Program::Seq(a, b) | Program::Par(a, b) => {
                self.add_with_subterms(a)?;
                self.add_with_subterms(b)?;
            }
            Program::Local { body, .. } => {
                self.add_with_subterms(body)?;
            }
        }
        Ok(id)
    }

    fn add(&mut self, term: &Program) -> Result<TermId> {
        if let Some(id) = self.term_ids.get(term) {
            return Ok(*id);
        }
        if self.terms.len() >= self.cap {
            return Err(Error::ResourceLimit {
                what: "residual universe terms",
                limit: self.cap,
                needed: self.terms.len() + 1,
            });
        }
        let id = TermId(self.terms.len() as u32);
        self.terms.push(term.clone());
        self.term_ids.insert(term.clone(), id);
        Ok(id)
    }

    /// Over-approximation of the targets one step from `term` can reach.
    fn targets_of(&mut self, term: &Program) -> Result<BTreeSet<Program>> {
        Ok(match term {
            Program::Nil => BTreeSet::new(),
            Program::Emit(_) => [Program::Nil].into(),
            Program::Present {
                then_branch,
                else_branch,
                ..
            } => {
                let mut t = self.targets_of(then_branch)?;
                t.extend(self.targets_of(else_branch)?);
                t
            }
            Program::Seq(p, q) => {
                // The residual of a sequence step is either the second
                // half's target (the first half got consumed) or the first
                // half's target (its step finished the whole sequence).
                let mut t = self.targets_of(p)?;
                t.extend(self.targets_of(q)?);
                t
            }
            Program::Par(p, q) => {
                let left = self.targets_of(p)?;
                let right = self.targets_of(q)?;
                let mut t = BTreeSet::new();
                for a in &left {
                    for b in &right {
                        t.insert(Program::par(a.clone(), b.clone()));
                    }
                }
                t.extend(left);
                t.extend(right);
                t
            }
            Program::Local { signal, .. } => {
                // Targets are the renamed body's targets, wrapped back under
                // the binder with the fresh signal renamed to the bound one.
                // Renaming back cannot capture: the fresh signal never occurs
                // under a binder of the bound signal.
                let renaming = self.ensure_renaming(term)?;
                let body = self.terms[renaming.renamed_body.0 as usize].clone();
                self.targets_of(&body)?
                    .into_iter()
                    .map(|b| {
                        Program::local(
                            signal.clone(),
                            b.substitute_free(&renaming.fresh, &renaming.bound),
                        )
                    })
                    .collect()
            }
        })
    }
}

fn finish_universe(
    ctx: &AnalysisContext,
    mode: RuleSet,
    config: &GroundingConfig,
    evals: Vec<InputEvaluation>,
) -> Result<Universe> {
    let builder = UniverseBuilder::build(ctx, config)?;
    let term_count = builder.terms.len();
    let sig_count = builder.signals.len();
    // Per evaluation: emits (t·σ) + terminates (t) + transitions (t·σ·t).
    let per_eval = (term_count as u128)
        * (sig_count as u128 + 1 + term_count as u128 * sig_count as u128);
    let needed = per_eval * evals.len() as u128;
    if needed > config.max_pos_space as u128 {
        return Err(Error::ResourceLimit {
            what: "positive judgement space",
            limit: config.max_pos_space,
            needed: usize::try_from(needed).unwrap_or(usize::MAX),
        });
    }

    let mut pos_space = Vec::with_capacity(needed as usize);
    for eval in 0..evals.len() as u32 {
        let e = EvalId(eval);
        for src in 0..term_count as u32 {
            for sig in 0..sig_count as u32 {
                pos_space.push(Formula::emits(TermId(src), e, SigId(sig)));
            }
        }
        for src in 0..term_count as u32 {
            pos_space.push(Formula::terminates(TermId(src), e));
        }
        for src in 0..term_count as u32 {
            for sig in 0..sig_count as u32 {
                for tgt in 0..term_count as u32 {
                    pos_space.push(Formula::trans(TermId(src), e, SigId(sig), TermId(tgt)));
                }
            }
        }
    }
    let fact_ids: HashMap<Formula, usize> = pos_space
        .iter()
        .enumerate()
        .map(|(i, f)| (*f, i))
        .collect();

    let program_subterms = ctx.program().subterms();
    let context_subterms = builder
        .terms
        .iter()
        .map(|t| program_subterms.contains(t))
        .collect();

    let mut universe = Universe {
        ctx: ctx.clone(),
        mode,
        config: *config,
        terms: builder.terms,
        term_ids: builder.term_ids,
        signals: builder.signals,
        sig_ids: builder.sig_ids,
        evals,
        renamings: builder.renamings,
        context_subterms,
        pos_space,
        fact_ids,
        supportable: Vec::new(),
    };
    universe.supportable = compute_supportable(&universe);
    Ok(universe)
}

/// Greatest-fixpoint pruning: repeatedly drop facts without any justifying
/// instance whose positive premises all survive.  Negative premises are
/// ignored, so everything any supported model (or positive supported proof)
/// can contain survives.
fn compute_supportable(u: &Universe) -> Vec<bool> {
    let n = u.pos_space().len();
    let mut alive = vec![true; n];
    // Materialize, per fact, the positive-premise index lists of its
    // instances, plus the reverse dependency map.
    let mut inst_premises: Vec<Vec<Vec<usize>>> = Vec::with_capacity(n);
    for f in u.pos_space() {
        let lists = u
            .instances_concluding(f)
            .into_iter()
            .map(|ri| {
                ri.premises
                    .iter()
                    .filter(|p| p.is_positive())
                    .map(|p| u.fact_index(p).expect("premises live in the ground space"))
                    .collect()
            })
            .collect();
        inst_premises.push(lists);
    }
    let mut queue: Vec<usize> = Vec::new();
    let mut live_instances: Vec<usize> = inst_premises.iter().map(Vec::len).collect();
    // An instance dies when its first positive premise dies; count premise
    // deaths per instance.
    let mut users: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    let mut dead_premises: Vec<Vec<usize>> = Vec::with_capacity(n);
    for (fact, lists) in inst_premises.iter().enumerate() {
        dead_premises.push(vec![0; lists.len()]);
        for (inst, premises) in lists.iter().enumerate() {
            for &premise in premises {
                users.entry(premise).or_default().push((fact, inst));
            }
        }
    }
    for (fact, &count) in live_instances.iter().enumerate() {
        if count == 0 {
            queue.push(fact);
            alive[fact] = false;
        }
    }
    while let Some(dead) = queue.pop() {
        for &(fact, inst) in users.get(&dead).map(Vec::as_slice).unwrap_or(&[]) {
            dead_premises[fact][inst] += 1;
            if dead_premises[fact][inst] == 1 {
                live_instances[fact] -= 1;
                if live_instances[fact] == 0 && alive[fact] {
                    alive[fact] = false;
                    queue.push(fact);
                }
            }
        }
    }
    alive
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::AnalysisContext;

    fn universe(source: &str) -> Universe {
        let ctx = AnalysisContext::from_source(source).unwrap();
        ground_space(&ctx, RuleSet::Standard, &GroundingConfig::default()).unwrap()
    }

    /// `present s then emit s else nothing end`, the self-justifying loop.
    const SELF_LOOP: &str = "present s then emit s else nothing end";

    #[test]
    fn emit_is_concluded_by_the_axiom_alone() {
        let u = universe("emit s");
        let emit = u.context_id();
        let s = u.signal_id("s").unwrap();
        let fact = Formula::emits(emit, EvalId(0), s);
        let instances = u.instances_concluding(&fact);
        assert_eq!(instances.len(), 1);
        assert_eq!(instances[0].rule, RuleName::E0);
        assert!(instances[0].premises.is_empty());
        // nothing never emits: zero instances.
        let nil = u.term_id(&Program::Nil).unwrap();
        assert!(u.instances_concluding(&Formula::emits(nil, EvalId(0), s)).is_empty());
    }

    #[test]
    fn self_loop_universe_has_three_terms_and_fifteen_judgements() {
        let u = universe(SELF_LOOP);
        assert_eq!(u.terms().len(), 3);
        assert_eq!(u.pos_space().len(), 15); // 3·1 emits + 3 term + 3·1·3 trans
        assert_eq!(u.evals().len(), 1);
    }

    #[test]
    fn presence_tests_on_locals_consult_the_whole_program() {
        let u = universe(SELF_LOOP);
        let p1 = u.context_id();
        let s = u.signal_id("s").unwrap();
        let emit_s = u.term_id(&Program::emit(SignalId::local("s"))).unwrap();
        let nil = u.term_id(&Program::Nil).unwrap();
        let fact = Formula::trans(p1, EvalId(0), s, nil);
        let instances = u.instances_concluding(&fact);
        // Both branch rules instantiate; the else-branch one demands a step
        // of `nothing`, which nothing can justify.
        assert_eq!(instances.len(), 2);
        assert_eq!(instances[0].rule, RuleName::If0);
        assert_eq!(
            instances[0].premises,
            vec![
                Formula::emits(p1, EvalId(0), s),
                Formula::trans(emit_s, EvalId(0), s, nil),
            ]
        );
        assert_eq!(instances[1].rule, RuleName::If1);
        assert_eq!(
            instances[1].premises,
            vec![
                Formula::emits(p1, EvalId(0), s).negate(),
                Formula::trans(nil, EvalId(0), s, nil),
            ]
        );
        assert!(!u.is_supportable(&Formula::trans(nil, EvalId(0), s, nil)));
    }

    #[test]
    fn parallel_universe_contains_the_joint_target() {
        let u = universe("output o;\npresent s then emit o else nothing end || emit s");
        let both_done = Program::par(Program::Nil, Program::Nil);
        assert!(u.term_id(&both_done).is_some());
        assert_eq!(u.terms().len(), 6);
    }

    #[test]
    fn residual_terms_are_flagged_as_non_subterms() {
        let u = universe("output o;\npresent s then emit o else nothing end || emit s");
        let both_done = u.term_id(&Program::par(Program::Nil, Program::Nil)).unwrap();
        assert!(!u.is_context_subterm(both_done));
        assert!(u.is_context_subterm(u.context_id()));
    }

    #[test]
    fn branch_choice_makes_nothing_residual() {
        // `nothing` is reachable (taking the then-branch consumes `emit s`)
        // but is not a subterm: residual closure is what brings it in.
        let u = universe("present s then emit s else emit s end");
        let nil = u.term_id(&Program::Nil).unwrap();
        assert!(!u.is_context_subterm(nil));
        assert_eq!(u.terms().len(), 3);
    }

    #[test]
    fn local_terms_get_fresh_renamed_bodies() {
        let u = universe("output o;\nsignal s in emit s ; present s then nothing else emit o end end");
        // The renamed body and its fresh signal are part of the universe.
        assert!(u.signal_id("s$0").is_some());
        let renamed = Program::seq(
            Program::emit(SignalId::local("s$0")),
            Program::present(
                SignalId::local("s$0"),
                Program::Nil,
                Program::emit(SignalId::output("o")),
            ),
        );
        assert!(u.term_id(&renamed).is_some(), "renamed body must be a term");
        // Emission through the binder: the label maps back to the bound name.
        let s = u.signal_id("s").unwrap();
        let s0 = u.signal_id("s$0").unwrap();
        let local = u.context_id();
        let en0 = u.instances_concluding(&Formula::emits(local, EvalId(0), s));
        assert_eq!(en0.len(), 2, "both the bound and the fresh label map back");
        assert!(en0.iter().all(|ri| ri.rule == RuleName::En0));
        let premise_sigs: Vec<SigId> =
            en0.iter().map(|ri| ri.premises[0].signal().unwrap()).collect();
        assert_eq!(premise_sigs, vec![s, s0]);
        // No label maps to the fresh signal itself.
        assert!(u.instances_concluding(&Formula::emits(local, EvalId(0), s0)).is_empty());
    }

    #[test]
    fn nested_binders_of_the_same_name_mint_distinct_fresh_signals() {
        let u = universe("signal s in signal s in emit s end end");
        assert!(u.signal_id("s$0").is_some());
        assert!(u.signal_id("s$1").is_some());
    }

    #[test]
    fn supportable_pruning_keeps_cycles_but_drops_unjustifiable_facts() {
        let u = universe(SELF_LOOP);
        let supportable = supportable_space(&u);
        let p1 = u.context_id();
        let s = u.signal_id("s").unwrap();
        let emit_s = u.term_id(&Program::emit(SignalId::local("s"))).unwrap();
        let nil = u.term_id(&Program::Nil).unwrap();
        let e = EvalId(0);
        let expected: BTreeSet<Formula> = [
            Formula::emits(p1, e, s),           // f0, self-supporting through the loop
            Formula::trans(p1, e, s, nil),      // if0
            Formula::terminates(p1, e),         // if5 (negative premise ignored here)
            Formula::emits(emit_s, e, s),       // e0
            Formula::trans(emit_s, e, s, nil),  // em
            Formula::terminates(nil, e),        // nil
        ]
        .into();
        assert_eq!(supportable, expected);
    }

    #[test]
    fn transitions_to_the_wrong_target_are_never_supportable() {
        let u = universe(SELF_LOOP);
        let p1 = u.context_id();
        let s = u.signal_id("s").unwrap();
        // A step of the whole program "to itself" would need `emit s` or
        // `nothing` to step to a present-term, which no rule offers.
        assert!(!u.is_supportable(&Formula::trans(p1, EvalId(0), s, p1)));
    }

    #[test]
    fn evaluations_multiply_the_judgement_space() {
        let u = universe("input i;\npresent i then emit s else nothing end");
        assert_eq!(u.evals().len(), 2);
        let per_eval = u.pos_space().len() / 2;
        assert_eq!(u.pos_space().len(), per_eval * 2);
        // Restricting to one evaluation halves the space.
        let ctx = AnalysisContext::from_source("input i;\npresent i then emit s else nothing end")
            .unwrap();
        let restricted = ground_space_restricted(
            &ctx,
            RuleSet::Standard,
            &GroundingConfig::default(),
            crate::formulas::InputEvaluation::parse_restriction("i=+", ctx.env()).unwrap(),
        )
        .unwrap();
        assert_eq!(restricted.pos_space().len(), per_eval);
        assert_eq!(restricted.evals().len(), 1);
    }

    #[test]
    fn input_branch_rules_depend_on_the_evaluation() {
        let u = universe("input i;\npresent i then emit s else nothing end");
        let root = u.context_id();
        let s = u.signal_id("s").unwrap();
        // Evaluation 0 is {i+}: only the then-branch emission rule fires.
        let present = u.instances_concluding(&Formula::emits(root, EvalId(0), s));
        assert_eq!(present.len(), 1);
        assert_eq!(present[0].rule, RuleName::F2);
        let absent = u.instances_concluding(&Formula::emits(root, EvalId(1), s));
        assert_eq!(absent.len(), 1);
        assert_eq!(absent[0].rule, RuleName::F3);
        // Termination pairs the same way: then under i+, else under i-.
        let term_plus = u.instances_concluding(&Formula::terminates(root, EvalId(0)));
        assert_eq!(term_plus[0].rule, RuleName::If6);
        let term_minus = u.instances_concluding(&Formula::terminates(root, EvalId(1)));
        assert_eq!(term_minus[0].rule, RuleName::If7);
    }

    #[test]
    fn collapsed_mode_replaces_emission_rules_wholesale() {
        let ctx = AnalysisContext::from_source("emit s").unwrap();
        let u = ground_space(&ctx, RuleSet::CollapsedEmission, &GroundingConfig::default())
            .unwrap();
        let s = u.signal_id("s").unwrap();
        let fact = Formula::emits(u.context_id(), EvalId(0), s);
        let instances = u.instances_concluding(&fact);
        assert_eq!(instances.len(), u.terms().len());
        assert!(instances.iter().all(|ri| ri.rule == RuleName::EmitStar));
        assert!(instances
            .iter()
            .all(|ri| ri.premises.len() == 1 && ri.premises[0].kind() == FormulaKind::Trans));
    }

    #[test]
    fn instance_enumeration_is_deterministic() {
        let u = universe("output o;\n(present s then emit o else nothing end || emit s) ; emit o");
        for f in u.pos_space() {
            assert_eq!(u.instances_concluding(f), u.instances_concluding(f));
        }
    }

    #[test]
    fn tiny_caps_are_reported_as_resource_limits() {
        let ctx = AnalysisContext::from_source(SELF_LOOP).unwrap();
        let config = GroundingConfig {
            max_pos_space: 10,
            ..GroundingConfig::default()
        };
        let err = ground_space(&ctx, RuleSet::Standard, &config).unwrap_err();
        assert!(matches!(
            err,
            Error::ResourceLimit {
                what: "positive judgement space",
                limit: 10,
                needed: 15,
            }
        ));
    }
}
