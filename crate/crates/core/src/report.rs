//! End-to-end analysis and its serialisable report.
//!
//! [`analyze`] drives the full pipeline — parse, ground, enumerate supported
//! models, settle the constructive obligations, cross-check the metatheory —
//! and returns a rich [`Analysis`] keeping every intermediate result.
//! [`Analysis::report`] flattens that into the stable JSON-friendly
//! [`AnalysisReport`] (schema 1): formulas and terms are rendered to their
//! canonical text, judgements whose source term only arises as a residual of
//! execution carry `"residual": true`, and proofs are attached on request.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::formulas::{AnalysisContext, FormulaAtlas, InputEvaluation};
use crate::grounding::{ground_space, ground_space_restricted, GroundingConfig, RuleSet, Universe};
use crate::models::{classify_logical, LogicalVerdict, Model};
use crate::proofs::{
    check_theorems, classify_constructive, render_proof_json, ConstructiveVerdict, Obligation,
    PropertyCheck, PropertyStatus, SignalOutcome, TerminationOutcome, DEFAULT_SWEEP_LIMIT,
};
use crate::Result;

/// Knobs for one analysis run.
#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub mode: RuleSet,
    pub grounding: GroundingConfig,
    /// Restrict the analysis to a single input evaluation, written as in
    /// `i=+,j=-`; `None` analyses all of them.
    pub eval_filter: Option<String>,
    /// Attach the witness models to the report.
    pub attach_models: bool,
    /// Attach proof trees (JSON form) to resolved obligations.
    pub attach_proofs: bool,
    /// Cap for the metatheory sweeps; see [`check_theorems`].
    pub sweep_limit: Option<usize>,
}

impl Default for AnalyzeOptions {
    fn default() -> AnalyzeOptions {
        AnalyzeOptions {
            mode: RuleSet::Standard,
            grounding: GroundingConfig::default(),
            eval_filter: None,
            attach_models: true,
            attach_proofs: false,
            sweep_limit: Some(DEFAULT_SWEEP_LIMIT),
        }
    }
}

/// Wall-clock time of each phase, in microseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub parse_us: u64,
    pub grounding_us: u64,
    pub models_us: u64,
    pub proofs_us: u64,
    pub theorems_us: u64,
    pub total_us: u64,
}

/// Everything one analysis produced, in full fidelity.
#[derive(Debug)]
pub struct Analysis {
    pub name: String,
    pub source: String,
    pub options: AnalyzeOptions,
    pub universe: Universe,
    pub logical: LogicalVerdict,
    pub constructive: ConstructiveVerdict,
    pub theorems: Vec<PropertyCheck>,
    pub timing: Timing,
}

/// Runs the whole pipeline on one source text.
pub fn analyze(source: &str, name: &str, options: &AnalyzeOptions) -> Result<Analysis> {
    let start = Instant::now();
    let ctx = AnalysisContext::from_source(source)?;
    let parse_us = start.elapsed().as_micros() as u64;

    let t = Instant::now();
    let universe = match &options.eval_filter {
        Some(text) => {
            let eval = InputEvaluation::parse_restriction(text, ctx.env())?;
            ground_space_restricted(&ctx, options.mode, &options.grounding, eval)?
        }
        None => ground_space(&ctx, options.mode, &options.grounding)?,
    };
    let grounding_us = t.elapsed().as_micros() as u64;

    let t = Instant::now();
    let logical = classify_logical(&universe)?;
    let models_us = t.elapsed().as_micros() as u64;

    let t = Instant::now();
    let constructive = classify_constructive(&universe);
    let proofs_us = t.elapsed().as_micros() as u64;

    let t = Instant::now();
    let theorems = check_theorems(&universe, &logical, &constructive, options.sweep_limit);
    let theorems_us = t.elapsed().as_micros() as u64;

    Ok(Analysis {
        name: name.to_owned(),
        source: source.to_owned(),
        options: options.clone(),
        universe,
        logical,
        constructive,
        theorems,
        timing: Timing {
            parse_us,
            grounding_us,
            models_us,
            proofs_us,
            theorems_us,
            total_us: start.elapsed().as_micros() as u64,
        },
    })
}

/// Stable serialisable form of an [`Analysis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: u32,
    pub program: ProgramSection,
    pub mode: String,
    pub space: SpaceSection,
    pub logical: LogicalSection,
    pub constructive: ConstructiveSection,
    pub theorems: Vec<TheoremEntry>,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramSection {
    pub name: String,
    pub source: String,
    /// Canonical single-line body with minimal parentheses.
    pub canonical: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub locals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSection {
    pub terms: usize,
    pub signals: usize,
    pub evaluations: Vec<String>,
    pub positive_judgements: usize,
    pub supportable_judgements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalSection {
    pub status: String,
    /// Exact global model count, in decimal (may exceed 64 bits).
    pub model_count: String,
    /// Witness models (capped), present when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<ModelEntry>>,
    pub per_evaluation: Vec<EvalEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub facts: Vec<FactEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactEntry {
    pub text: String,
    /// The fact's source term is reachable only by executing the program,
    /// not one of its syntactic subterms.
    pub residual: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub evaluation: String,
    pub model_count: usize,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructiveSection {
    pub constructive: bool,
    pub obligations: Vec<ObligationEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObligationEntry {
    pub evaluation: String,
    /// A signal name, or `termination`.
    pub subject: String,
    pub resolution: String,
    /// Rendered target term of the proved transition, for emitted signals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Which of the obligation's formulas were provable, by polarity.
    pub diagnostic: BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proofs: Option<BTreeMap<String, serde_json::Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremEntry {
    pub name: String,
    pub status: String,
}

fn property_status_text(status: &PropertyStatus) -> &'static str {
    match status {
        PropertyStatus::Holds => "holds",
        PropertyStatus::Violated => "violated",
        PropertyStatus::Skipped => "skipped",
        PropertyStatus::NotApplicable => "not-applicable",
    }
}

impl Analysis {
    fn model_entry(&self, model: &Model) -> ModelEntry {
        let u = &self.universe;
        let mut facts: Vec<FactEntry> = model
            .facts()
            .iter()
            .map(|f| FactEntry {
                text: u.render(f),
                residual: !u.is_context_subterm(f.source()),
            })
            .collect();
        facts.sort_by(|a, b| a.text.cmp(&b.text));
        ModelEntry { facts }
    }

    fn obligation_entry(&self, ob: &Obligation) -> ObligationEntry {
        let u = &self.universe;
        let evaluation = u.eval_text(ob.eval());
        match ob {
            Obligation::Signal {
                signal,
                emits,
                not_emits,
                steps,
                not_steps,
                outcome,
                ..
            } => {
                let diagnostic: BTreeMap<String, bool> = [
                    ("emits".to_owned(), *emits),
                    ("not_emits".to_owned(), *not_emits),
                    ("steps".to_owned(), *steps),
                    ("not_steps".to_owned(), *not_steps),
                ]
                .into();
                let (resolution, target, proofs) = match outcome {
                    SignalOutcome::Emitted {
                        emits,
                        step,
                        target,
                    } => (
                        "emitted",
                        Some(u.term_text(*target)),
                        self.options.attach_proofs.then(|| {
                            BTreeMap::from([
                                ("emits".to_owned(), render_proof_json(u, emits)),
                                ("step".to_owned(), render_proof_json(u, step)),
                            ])
                        }),
                    ),
                    SignalOutcome::Silent {
                        not_emits,
                        not_steps,
                    } => (
                        "silent",
                        None,
                        self.options.attach_proofs.then(|| {
                            BTreeMap::from([
                                ("not_emits".to_owned(), render_proof_json(u, not_emits)),
                                ("not_steps".to_owned(), render_proof_json(u, not_steps)),
                            ])
                        }),
                    ),
                    SignalOutcome::Unresolved => ("unresolved", None, None),
                };
                ObligationEntry {
                    evaluation,
                    subject: u.signal(*signal).name().to_owned(),
                    resolution: resolution.to_owned(),
                    target,
                    diagnostic,
                    proofs,
                }
            }
            Obligation::Termination {
                terminates,
                not_terminates,
                outcome,
                ..
            } => {
                let diagnostic: BTreeMap<String, bool> = [
                    ("terminates".to_owned(), *terminates),
                    ("not_terminates".to_owned(), *not_terminates),
                ]
                .into();
                let (resolution, proofs) = match outcome {
                    TerminationOutcome::Terminates(t) => (
                        "terminates",
                        self.options.attach_proofs.then(|| {
                            BTreeMap::from([("terminates".to_owned(), render_proof_json(u, t))])
                        }),
                    ),
                    TerminationOutcome::Rejects(t) => (
                        "does-not-terminate",
                        self.options.attach_proofs.then(|| {
                            BTreeMap::from([("not_terminates".to_owned(), render_proof_json(u, t))])
                        }),
                    ),
                    TerminationOutcome::Unresolved => ("unresolved", None),
                };
                ObligationEntry {
                    evaluation,
                    subject: "termination".to_owned(),
                    resolution: resolution.to_owned(),
                    target: None,
                    diagnostic,
                    proofs,
                }
            }
        }
    }

    pub fn report(&self) -> AnalysisReport {
        let u = &self.universe;
        let env = u.ctx().env();
        let names = |set: &std::collections::BTreeSet<crate::syntax::SignalId>| {
            set.iter().map(|s| s.name().to_owned()).collect::<Vec<_>>()
        };
        AnalysisReport {
            schema: 1,
            program: ProgramSection {
                name: self.name.clone(),
                source: self.source.clone(),
                canonical: u.ctx().program().to_string(),
                inputs: names(env.inputs()),
                outputs: names(env.outputs()),
                locals: names(env.locals()),
            },
            mode: u.mode().to_string(),
            space: SpaceSection {
                terms: u.terms().len(),
                signals: u.signals().len(),
                evaluations: (0..u.evals().len() as u32)
                    .map(|e| u.eval_text(crate::formulas::EvalId(e)))
                    .collect(),
                positive_judgements: u.pos_space().len(),
                supportable_judgements: u.supportable_facts().count(),
            },
            logical: LogicalSection {
                status: self.logical.status.to_string(),
                model_count: self.logical.model_count.to_string(),
                witnesses: self.options.attach_models.then(|| {
                    self.logical
                        .witnesses
                        .iter()
                        .map(|m| self.model_entry(m))
                        .collect()
                }),
                per_evaluation: self
                    .logical
                    .per_evaluation
                    .iter()
                    .map(|s| EvalEntry {
                        evaluation: u.eval_text(s.eval),
                        model_count: s.model_count,
                        status: s.status.to_string(),
                    })
                    .collect(),
            },
            constructive: ConstructiveSection {
                constructive: self.constructive.constructive,
                obligations: self
                    .constructive
                    .obligations
                    .iter()
                    .map(|ob| self.obligation_entry(ob))
                    .collect(),
            },
            theorems: self
                .theorems
                .iter()
                .map(|c| TheoremEntry {
                    name: c.name.to_owned(),
                    status: property_status_text(&c.status).to_owned(),
                })
                .collect(),
            timing: self.timing.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PRESENT: &str = "input i;\noutput o;\npresent i then emit s else nothing end ;\n\
                               present s then nothing else emit o end";
    const BROADCAST: &str = "output o;\npresent s then emit o else nothing end || emit s";

    #[test]
    fn report_round_trips_through_json() {
        let options = AnalyzeOptions {
            attach_proofs: true,
            ..AnalyzeOptions::default()
        };
        let analysis = analyze(TWO_PRESENT, "two-present", &options).unwrap();
        let report = analysis.report();
        assert_eq!(report.schema, 1);
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: AnalysisReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn report_sections_carry_the_verdicts() {
        let analysis = analyze(TWO_PRESENT, "two-present", &AnalyzeOptions::default()).unwrap();
        let report = analysis.report();
        assert_eq!(report.program.inputs, ["i"]);
        assert_eq!(report.program.outputs, ["o"]);
        assert_eq!(report.program.locals, ["s"]);
        assert_eq!(report.mode, "standard");
        assert_eq!(report.logical.status, "coherent");
        assert_eq!(report.logical.model_count, "1");
        assert_eq!(report.space.evaluations, ["{i+}", "{i-}"]);
        assert!(report.constructive.constructive);
        assert_eq!(report.constructive.obligations.len(), 6);
        assert!(report
            .theorems
            .iter()
            .all(|t| t.status == "holds"));
        // Proofs were not requested.
        assert!(report
            .constructive
            .obligations
            .iter()
            .all(|ob| ob.proofs.is_none()));
    }

    #[test]
    fn evaluation_filter_restricts_the_space() {
        let options = AnalyzeOptions {
            eval_filter: Some("i=+".to_owned()),
            ..AnalyzeOptions::default()
        };
        let analysis = analyze(TWO_PRESENT, "two-present", &options).unwrap();
        let report = analysis.report();
        assert_eq!(report.space.evaluations, ["{i+}"]);
        assert_eq!(report.logical.per_evaluation.len(), 1);
        assert_eq!(report.logical.status, "coherent");
    }

    #[test]
    fn collapsed_mode_is_recorded_and_changes_the_verdict() {
        let standard = analyze(BROADCAST, "broadcast", &AnalyzeOptions::default()).unwrap();
        assert!(standard.constructive.constructive);
        assert_eq!(standard.report().mode, "standard");
        let options = AnalyzeOptions {
            mode: RuleSet::CollapsedEmission,
            ..AnalyzeOptions::default()
        };
        let collapsed = analyze(BROADCAST, "broadcast", &options).unwrap();
        assert!(!collapsed.constructive.constructive);
        assert_eq!(collapsed.report().mode, "collapsed-emission");
    }

    #[test]
    fn residual_sources_are_flagged_in_witness_models() {
        // Both branches emit, so `nothing` occurs only as the residual of
        // running an emission, never as a subterm.
        let analysis = analyze(
            "present s then emit s else emit s end",
            "both-branches",
            &AnalyzeOptions::default(),
        )
        .unwrap();
        let report = analysis.report();
        let witnesses = report.logical.witnesses.as_ref().unwrap();
        assert_eq!(witnesses.len(), 1);
        let nil_fact = witnesses[0]
            .facts
            .iter()
            .find(|f| f.text == "nothing term[∅]")
            .expect("the unique model contains the leaf termination fact");
        assert!(nil_fact.residual);
        let root_fact = witnesses[0]
            .facts
            .iter()
            .find(|f| f.text.starts_with("present s then emit s else emit s end emits"))
            .unwrap();
        assert!(!root_fact.residual);
    }
}
