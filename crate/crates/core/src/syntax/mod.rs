//! Abstract syntax for instantaneous programs, plus the textual concrete
//! syntax (parser and pretty-printer) and the term-level helpers the rest of
//! the analyzer builds on: subterm collection, capture-free signal
//! substitution, and fresh-signal generation.

mod parse;

pub use parse::parse;

use std::collections::BTreeSet;
use std::fmt;

use crate::error::Error;
use crate::Result;

/// Role a signal plays in a program.  Inputs come from the environment and
/// may never be emitted; outputs and locals are emittable.  Signal names are
/// unique across roles within one program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SignalKind {
    Input,
    Output,
    Local,
}

impl SignalKind {
    /// Inputs cannot appear in `emit` or as a transition/emission label.
    pub fn is_emittable(self) -> bool {
        !matches!(self, SignalKind::Input)
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalKind::Input => write!(f, "input"),
            SignalKind::Output => write!(f, "output"),
            SignalKind::Local => write!(f, "local"),
        }
    }
}

/// A signal together with its role.  Two signals are the same signal exactly
/// when both name and role agree; the parser guarantees a name never carries
/// two roles inside one program.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignalId {
    name: String,
    kind: SignalKind,
}

impl SignalId {
    pub fn new(name: impl Into<String>, kind: SignalKind) -> Self {
        let name = name.into();
        debug_assert!(!name.is_empty(), "signal names must be non-empty");
        SignalId { name, kind }
    }

    pub fn input(name: impl Into<String>) -> Self {
        SignalId::new(name, SignalKind::Input)
    }

    pub fn output(name: impl Into<String>) -> Self {
        SignalId::new(name, SignalKind::Output)
    }

    pub fn local(name: impl Into<String>) -> Self {
        SignalId::new(name, SignalKind::Local)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }
}

impl fmt::Display for SignalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// An instantaneous program.
///
/// `Seq` and `Par` are binary; the parser builds left-leaning spines for
/// `a ; b ; c` and `a || b || c`.  `Local` declares a signal visible only in
/// its body (the bound signal always has [`SignalKind::Local`]).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Program {
    /// Does nothing and terminates.
    Nil,
    /// Emits the signal and terminates.
    Emit(SignalId),
    /// Runs one branch depending on the presence of `cond` in this instant.
    Present {
        cond: SignalId,
        then_branch: Box<Program>,
        else_branch: Box<Program>,
    },
    /// Runs the left program, then the right one, within the same instant.
    Seq(Box<Program>, Box<Program>),
    /// Runs both programs in the same instant.
    Par(Box<Program>, Box<Program>),
    /// Declares a local signal scoped to `body`.
    Local { signal: SignalId, body: Box<Program> },
}

impl Program {
    pub fn emit(signal: SignalId) -> Self {
        Program::Emit(signal)
    }

    pub fn present(cond: SignalId, then_branch: Program, else_branch: Program) -> Self {
        Program::Present {
            cond,
            then_branch: Box::new(then_branch),
            else_branch: Box::new(else_branch),
        }
    }

    pub fn seq(first: Program, second: Program) -> Self {
        Program::Seq(Box::new(first), Box::new(second))
    }

    pub fn par(left: Program, right: Program) -> Self {
        Program::Par(Box::new(left), Box::new(right))
    }

    pub fn local(signal: SignalId, body: Program) -> Self {
        Program::Local {
            signal,
            body: Box::new(body),
        }
    }

    /// All subterms of `self`, including `self` itself.
    pub fn subterms(&self) -> BTreeSet<Program> {
        let mut out = BTreeSet::new();
        self.collect_subterms(&mut out);
        out
    }

    fn collect_subterms(&self, out: &mut BTreeSet<Program>) {
        out.insert(self.clone());
        match self {
            Program::Nil | Program::Emit(_) => {}
            Program::Present {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.collect_subterms(out);
                else_branch.collect_subterms(out);
            }
            Program::Seq(a, b) | Program::Par(a, b) => {
                a.collect_subterms(out);
                b.collect_subterms(out);
            }
            Program::Local { body, .. } => body.collect_subterms(out),
        }
    }

    /// Every signal name occurring anywhere in the program: emitted signals,
    /// presence conditions, and `signal` binders alike.
    pub fn signal_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_signal_names(&mut out);
        out
    }

    fn collect_signal_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Program::Nil => {}
            Program::Emit(s) => {
                out.insert(s.name().to_owned());
            }
            Program::Present {
                cond,
                then_branch,
                else_branch,
            } => {
                out.insert(cond.name().to_owned());
                then_branch.collect_signal_names(out);
                else_branch.collect_signal_names(out);
            }
            Program::Seq(a, b) | Program::Par(a, b) => {
                a.collect_signal_names(out);
                b.collect_signal_names(out);
            }
            Program::Local { signal, body } => {
                out.insert(signal.name().to_owned());
                body.collect_signal_names(out);
            }
        }
    }

    /// Replaces free occurrences of `from` (as emitted signal, presence
    /// condition, or `signal` binder) by `to`.  A `Local` that re-binds
    /// `from` shadows it, so its body is left untouched.
    ///
    /// `to` must not already occur anywhere in `self`; substitution with a
    /// non-fresh signal could capture unrelated occurrences and is rejected
    /// with [`Error::FreshnessViolation`].
    pub fn substitute(&self, from: &SignalId, to: &SignalId) -> Result<Program> {
        if self.signal_names().contains(to.name()) {
            return Err(Error::FreshnessViolation {
                signal: to.name().to_owned(),
                program: self.to_string(),
            });
        }
        Ok(self.substitute_free(from, to))
    }

    /// Substitution without the freshness guard, for callers that can prove
    /// capture is impossible (grounding renames a fresh signal back to the
    /// binder it replaced; the fresh signal never occurs under a binder of
    /// the original, so no occurrence can be captured).
    pub(crate) fn substitute_free(&self, from: &SignalId, to: &SignalId) -> Program {
        let swap = |s: &SignalId| if s == from { to.clone() } else { s.clone() };
        match self {
            Program::Nil => Program::Nil,
            Program::Emit(s) => Program::Emit(swap(s)),
            Program::Present {
                cond,
                then_branch,
                else_branch,
            } => Program::Present {
                cond: swap(cond),
                then_branch: Box::new(then_branch.substitute_free(from, to)),
                else_branch: Box::new(else_branch.substitute_free(from, to)),
            },
            Program::Seq(a, b) => Program::Seq(
                Box::new(a.substitute_free(from, to)),
                Box::new(b.substitute_free(from, to)),
            ),
            Program::Par(a, b) => Program::Par(
                Box::new(a.substitute_free(from, to)),
                Box::new(b.substitute_free(from, to)),
            ),
            Program::Local { signal, body } => {
                if signal == from {
                    // The inner binder shadows `from`; occurrences below it
                    // refer to the inner signal and must stay.
                    self.clone()
                } else {
                    Program::Local {
                        signal: signal.clone(),
                        body: Box::new(body.substitute_free(from, to)),
                    }
                }
            }
        }
    }
}

/// Operator tightness used by the pretty-printer: `||` binds loosest, `;`
/// tighter, everything else is atomic (keyword forms carry their own
/// delimiters).
fn binding_level(p: &Program) -> u8 {
    match p {
        Program::Par(..) => 0,
        Program::Seq(..) => 1,
        _ => 2,
    }
}

impl fmt::Display for Program {
    /// Canonical concrete syntax.  Left-leaning `;`/`||` spines print
    /// without parentheses; anything else is parenthesized so that
    /// [`parse`] reconstructs the exact tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_at_level(self, 0, f)
    }
}

fn fmt_at_level(p: &Program, min_level: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if binding_level(p) < min_level {
        write!(f, "(")?;
        fmt_at_level(p, 0, f)?;
        return write!(f, ")");
    }
    match p {
        Program::Nil => write!(f, "nothing"),
        Program::Emit(s) => write!(f, "emit {s}"),
        Program::Present {
            cond,
            then_branch,
            else_branch,
        } => write!(f, "present {cond} then {then_branch} else {else_branch} end"),
        Program::Seq(a, b) => {
            fmt_at_level(a, 1, f)?;
            write!(f, " ; ")?;
            fmt_at_level(b, 2, f)
        }
        Program::Par(a, b) => {
            fmt_at_level(a, 0, f)?;
            write!(f, " || ")?;
            fmt_at_level(b, 1, f)
        }
        Program::Local { signal, body } => write!(f, "signal {signal} in {body} end"),
    }
}

/// Renders a complete source file: `input`/`output` declaration headers for
/// the environment followed by the program body.  `parse` applied to the
/// result reconstructs both the program and the environment.
pub fn pretty_file(program: &Program, env: &SignalEnv) -> String {
    let mut out = String::new();
    let mut header = |kw: &str, signals: &BTreeSet<SignalId>| {
        if !signals.is_empty() {
            let names: Vec<&str> = signals.iter().map(SignalId::name).collect();
            out.push_str(kw);
            out.push(' ');
            out.push_str(&names.join(", "));
            out.push_str(";\n");
        }
    };
    header("input", &env.inputs);
    header("output", &env.outputs);
    out.push_str(&program.to_string());
    out.push('\n');
    out
}

/// The signal interface of a program: declared inputs and outputs plus every
/// local signal in use.  Names are pairwise disjoint across the three sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalEnv {
    inputs: BTreeSet<SignalId>,
    outputs: BTreeSet<SignalId>,
    locals: BTreeSet<SignalId>,
}

impl SignalEnv {
    /// Builds an environment from name lists, checking role consistency and
    /// name disjointness.
    pub fn new<I, O, L>(inputs: I, outputs: O, locals: L) -> Result<SignalEnv>
    where
        I: IntoIterator<Item = SignalId>,
        O: IntoIterator<Item = SignalId>,
        L: IntoIterator<Item = SignalId>,
    {
        let inputs: BTreeSet<SignalId> = inputs.into_iter().collect();
        let outputs: BTreeSet<SignalId> = outputs.into_iter().collect();
        let locals: BTreeSet<SignalId> = locals.into_iter().collect();
        for (set, kind) in [
            (&inputs, SignalKind::Input),
            (&outputs, SignalKind::Output),
            (&locals, SignalKind::Local),
        ] {
            if let Some(bad) = set.iter().find(|s| s.kind() != kind) {
                return Err(Error::semantic(
                    0,
                    0,
                    format!("signal `{bad}` placed in the {kind} set but has kind {}", bad.kind()),
                ));
            }
        }
        let env = SignalEnv {
            inputs,
            outputs,
            locals,
        };
        let mut seen = BTreeSet::new();
        for s in env.all_signals() {
            if !seen.insert(s.name().to_owned()) {
                return Err(Error::semantic(
                    0,
                    0,
                    format!("signal name `{}` is used with two different roles", s.name()),
                ));
            }
        }
        Ok(env)
    }

    pub fn inputs(&self) -> &BTreeSet<SignalId> {
        &self.inputs
    }

    pub fn outputs(&self) -> &BTreeSet<SignalId> {
        &self.outputs
    }

    pub fn locals(&self) -> &BTreeSet<SignalId> {
        &self.locals
    }

    /// Outputs and locals — the signals that may be emitted and that may
    /// label transitions.  Outputs come first, then locals, each sorted by
    /// name; this is the canonical signal order used everywhere.
    pub fn emittable(&self) -> impl Iterator<Item = &SignalId> {
        self.outputs.iter().chain(self.locals.iter())
    }

    pub fn all_signals(&self) -> impl Iterator<Item = &SignalId> {
        self.inputs
            .iter()
            .chain(self.outputs.iter())
            .chain(self.locals.iter())
    }

    pub fn all_names(&self) -> BTreeSet<String> {
        self.all_signals().map(|s| s.name().to_owned()).collect()
    }
}

/// Picks a local signal whose name does not occur in `env`, derived from
/// `hint` by appending `$0`, `$1`, … with the smallest unused index.
pub fn fresh_signal(env: &SignalEnv, hint: &SignalId) -> SignalId {
    fresh_signal_among(&env.all_names(), hint)
}

/// Like [`fresh_signal`] but against an explicit set of taken names, so
/// callers that mint several fresh signals can thread the growing set.
pub fn fresh_signal_among(taken: &BTreeSet<String>, hint: &SignalId) -> SignalId {
    for n in 0.. {
        let candidate = format!("{}${}", hint.name(), n);
        if !taken.contains(&candidate) {
            return SignalId::local(candidate);
        }
    }
    unreachable!("some index in 0.. is always unused")
}
