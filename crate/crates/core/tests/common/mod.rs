//! Shared plumbing for the acceptance suite: corpus access, random program
//! generation, and the reference oracles the search engines are checked
//! against.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use esterel_causality::{
    analyze, contradicts, Analysis, AnalyzeOptions, Formula, Model, Program, SignalEnv, SignalId,
    Universe,
};
use rand::rngs::StdRng;
use rand::Rng;

/// The verdict triple recorded next to each corpus program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expected {
    pub status: String,
    pub models: u128,
    pub constructive: bool,
}

pub struct CorpusEntry {
    pub name: String,
    pub source: String,
    pub expected: Expected,
}

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Every `.est` program bundled with the repository, sorted by name, each
/// with its parsed `.expected` sidecar.
pub fn load_corpus() -> Vec<CorpusEntry> {
    let dir = corpus_dir();
    let mut entries = Vec::new();
    for entry in fs::read_dir(&dir).expect("corpus directory is readable") {
        let path = entry.expect("corpus directory entry").path();
        if path.extension().and_then(|e| e.to_str()) != Some("est") {
            continue;
        }
        let name = path
            .file_stem()
            .expect("corpus file has a stem")
            .to_string_lossy()
            .into_owned();
        let source = fs::read_to_string(&path).expect("corpus source is readable");
        let sidecar = fs::read_to_string(path.with_extension("expected"))
            .unwrap_or_else(|e| panic!("expected-verdict sidecar for {name}: {e}"));
        entries.push(CorpusEntry {
            name,
            source,
            expected: parse_expected(&sidecar),
        });
    }
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    assert!(!entries.is_empty(), "corpus directory is empty");
    entries
}

pub fn corpus_entry(name: &str) -> CorpusEntry {
    load_corpus()
        .into_iter()
        .find(|e| e.name == name)
        .unwrap_or_else(|| panic!("no corpus program named {name}"))
}

fn parse_expected(text: &str) -> Expected {
    let mut status = None;
    let mut models = None;
    let mut constructive = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .unwrap_or_else(|| panic!("sidecar line is not `key = value`: {line}"));
        let value = value.trim();
        match key.trim() {
            "status" => status = Some(value.to_owned()),
            "models" => models = Some(value.parse().expect("sidecar model count")),
            "constructive" => constructive = Some(value.parse().expect("sidecar bool")),
            other => panic!("unknown sidecar key `{other}`"),
        }
    }
    Expected {
        status: status.expect("sidecar has a status"),
        models: models.expect("sidecar has a model count"),
        constructive: constructive.expect("sidecar has a constructive flag"),
    }
}

pub fn analyze_entry(entry: &CorpusEntry) -> Analysis {
    analyze(&entry.source, &entry.name, &AnalyzeOptions::default())
        .unwrap_or_else(|e| panic!("analysis of {} failed: {e}", entry.name))
}

/// Renders the per-evaluation model lists of an analysis: one sorted fact
/// list per model, grouped per evaluation in evaluation order.
pub fn rendered_eval_models(a: &Analysis) -> Vec<Vec<Vec<String>>> {
    a.logical
        .eval_models
        .iter()
        .map(|em| em.models.iter().map(|m| m.render(&a.universe)).collect())
        .collect()
}

/// The single global model of a coherent analysis, rendered and sorted.
pub fn rendered_unique_model(a: &Analysis) -> Vec<String> {
    assert_eq!(
        a.logical.witnesses.len(),
        1,
        "{} does not have exactly one model",
        a.name
    );
    a.logical.witnesses[0].render(&a.universe)
}

// ---------------------------------------------------------------------------
// Random program sources
// ---------------------------------------------------------------------------

/// A small random source over at most one input and the locals `s`/`t`,
/// shaped so that a useful share of samples stays within the oracle's
/// per-evaluation positive-space budget.
pub fn random_tiny_source(rng: &mut StdRng) -> String {
    let has_input = rng.random_bool(0.4);
    let mut src = String::new();
    if has_input {
        src.push_str("input i;\n");
    }
    src.push_str(&tiny_term(rng, has_input, 2));
    src.push('\n');
    src
}

fn tiny_term(rng: &mut StdRng, has_input: bool, fuel: u32) -> String {
    if fuel == 0 || rng.random_bool(0.45) {
        return match rng.random_range(0..3) {
            0 => "nothing".to_owned(),
            _ => format!("emit {}", tiny_signal(rng)),
        };
    }
    match rng.random_range(0..5) {
        0 | 1 => {
            let cond = if has_input && rng.random_bool(0.4) {
                "i".to_owned()
            } else {
                tiny_signal(rng).to_owned()
            };
            format!(
                "present {cond} then {} else {} end",
                tiny_term(rng, has_input, fuel - 1),
                tiny_term(rng, has_input, fuel - 1)
            )
        }
        2 | 3 => format!(
            "({}) ; ({})",
            tiny_term(rng, has_input, fuel - 1),
            tiny_term(rng, has_input, fuel - 1)
        ),
        _ => format!(
            "({}) || ({})",
            tiny_term(rng, has_input, fuel - 1),
            tiny_term(rng, has_input, fuel - 1)
        ),
    }
}

fn tiny_signal(rng: &mut StdRng) -> &'static str {
    if rng.random_bool(0.7) {
        "s"
    } else {
        "t"
    }
}

const INPUT_POOL: [&str; 2] = ["i", "j"];
const OUTPUT_POOL: [&str; 2] = ["o", "q"];
const LOCAL_POOL: [&str; 4] = ["s", "t", "u", "v"];

/// A random AST of moderate depth together with a matching environment:
/// a random subset of declared inputs/outputs plus whatever local names the
/// term ended up using.
pub fn random_ast(rng: &mut StdRng) -> (Program, SignalEnv) {
    let n_inputs = rng.random_range(0..=2);
    let n_outputs = rng.random_range(0..=2);
    let inputs: Vec<SignalId> = INPUT_POOL[..n_inputs]
        .iter()
        .map(|n| SignalId::input(*n))
        .collect();
    let outputs: Vec<SignalId> = OUTPUT_POOL[..n_outputs]
        .iter()
        .map(|n| SignalId::output(*n))
        .collect();
    let program = gen_term(rng, &inputs, &outputs, 4);
    let declared: BTreeSet<&str> = INPUT_POOL
        .iter()
        .chain(OUTPUT_POOL.iter())
        .copied()
        .collect();
    let locals: Vec<SignalId> = program
        .signal_names()
        .into_iter()
        .filter(|n| !declared.contains(n.as_str()))
        .map(SignalId::local)
        .collect();
    let env = SignalEnv::new(inputs, outputs, locals).expect("generated environment is consistent");
    (program, env)
}

fn gen_term(rng: &mut StdRng, inputs: &[SignalId], outputs: &[SignalId], fuel: u32) -> Program {
    if fuel == 0 || rng.random_bool(0.35) {
        return if rng.random_bool(0.25) {
            Program::Nil
        } else {
            Program::emit(random_emittable(rng, outputs))
        };
    }
    match rng.random_range(0..7) {
        0 | 1 => Program::present(
            random_condition(rng, inputs, outputs),
            gen_term(rng, inputs, outputs, fuel - 1),
            gen_term(rng, inputs, outputs, fuel - 1),
        ),
        2 | 3 => Program::seq(
            gen_term(rng, inputs, outputs, fuel - 1),
            gen_term(rng, inputs, outputs, fuel - 1),
        ),
        4 | 5 => Program::par(
            gen_term(rng, inputs, outputs, fuel - 1),
            gen_term(rng, inputs, outputs, fuel - 1),
        ),
        _ => Program::local(
            SignalId::local(LOCAL_POOL[rng.random_range(0..LOCAL_POOL.len())]),
            gen_term(rng, inputs, outputs, fuel - 1),
        ),
    }
}

fn random_emittable(rng: &mut StdRng, outputs: &[SignalId]) -> SignalId {
    if !outputs.is_empty() && rng.random_bool(0.4) {
        outputs[rng.random_range(0..outputs.len())].clone()
    } else {
        SignalId::local(LOCAL_POOL[rng.random_range(0..LOCAL_POOL.len())])
    }
}

fn random_condition(rng: &mut StdRng, inputs: &[SignalId], outputs: &[SignalId]) -> SignalId {
    if !inputs.is_empty() && rng.random_bool(0.35) {
        return inputs[rng.random_range(0..inputs.len())].clone();
    }
    if !outputs.is_empty() && rng.random_bool(0.25) {
        return outputs[rng.random_range(0..outputs.len())].clone();
    }
    SignalId::local(LOCAL_POOL[rng.random_range(0..LOCAL_POOL.len())])
}

// ---------------------------------------------------------------------------
// Reference oracles
// ---------------------------------------------------------------------------

/// A universe's positive space with every rule instance compiled to bitmask
/// form: an instance holds under a candidate model `mask` exactly when all
/// its positive-premise bits are set and no fact contradicting one of its
/// negative premises is.
pub struct CompiledSpace {
    pub facts: Vec<Formula>,
    instances: Vec<Vec<(u32, u32)>>,
}

pub fn compile_space(u: &Universe) -> CompiledSpace {
    let facts: Vec<Formula> = u.pos_space().to_vec();
    assert!(
        facts.len() <= 18,
        "the power-set oracle is only for tiny universes"
    );
    let index: HashMap<Formula, usize> = facts.iter().enumerate().map(|(i, f)| (*f, i)).collect();
    let instances = facts
        .iter()
        .map(|f| {
            u.instances_concluding(f)
                .into_iter()
                .map(|inst| {
                    let mut pos = 0u32;
                    let mut neg = 0u32;
                    for premise in &inst.premises {
                        if premise.is_positive() {
                            pos |= 1 << index[premise];
                        } else {
                            for (i, g) in facts.iter().enumerate() {
                                if contradicts(g, premise) {
                                    neg |= 1 << i;
                                }
                            }
                        }
                    }
                    (pos, neg)
                })
                .collect()
        })
        .collect();
    CompiledSpace { facts, instances }
}

impl CompiledSpace {
    fn justified(&self, i: usize, mask: u32) -> bool {
        self.instances[i]
            .iter()
            .any(|&(pos, neg)| mask & pos == pos && mask & neg == 0)
    }
}

/// Every supported model of a single-evaluation universe, found by testing
/// each subset of the positive space against the defining conditions: a
/// subset is a model exactly when membership coincides with justifiability
/// for every fact of the space.
pub fn powerset_models(u: &Universe) -> BTreeSet<Vec<String>> {
    let space = compile_space(u);
    let n = space.facts.len();
    let mut out = BTreeSet::new();
    for mask in 0u32..(1u32 << n) {
        let ok = (0..n).all(|i| ((mask >> i) & 1 == 1) == space.justified(i, mask));
        if ok {
            let members: BTreeSet<Formula> = space
                .facts
                .iter()
                .enumerate()
                .filter(|(i, _)| (mask >> i) & 1 == 1)
                .map(|(_, f)| *f)
                .collect();
            out.insert(Model::new(members).render(u));
        }
    }
    out
}

/// Brute-force proof search: same rule reading as the engine but with no
/// memoisation or failure caching — only the ban on repeating a formula
/// along a path (which also bounds the depth) and a node budget.
pub fn bf_provable(u: &Universe, goal: &Formula, budget: &mut u64) -> bool {
    let depth_cap = 2 * u.pos_space().len() + 2;
    let mut path = Vec::new();
    bf_go(u, goal, &mut path, depth_cap, budget)
}

fn bf_go(
    u: &Universe,
    goal: &Formula,
    path: &mut Vec<Formula>,
    depth_cap: usize,
    budget: &mut u64,
) -> bool {
    assert!(*budget > 0, "brute-force oracle budget exhausted");
    *budget -= 1;
    if path.len() >= depth_cap || path.contains(goal) {
        return false;
    }
    path.push(*goal);
    let ok = if goal.is_positive() {
        u.instances_concluding(goal).iter().any(|inst| {
            inst.premises
                .iter()
                .all(|p| bf_go(u, p, path, depth_cap, budget))
        })
    } else {
        bf_contradicting(u, goal).iter().all(|inst| {
            inst.premises
                .iter()
                .any(|p| bf_refuted(u, p, path, depth_cap, budget))
        })
    };
    path.pop();
    ok
}

/// A premise is refuted by proving something contradicting it.
fn bf_refuted(
    u: &Universe,
    p: &Formula,
    path: &mut Vec<Formula>,
    depth_cap: usize,
    budget: &mut u64,
) -> bool {
    if p.is_positive() {
        bf_go(u, &p.negate(), path, depth_cap, budget)
    } else {
        bf_family_positives(u, p)
            .iter()
            .any(|f| bf_go(u, f, path, depth_cap, budget))
    }
}

/// All ground instances whose conclusion contradicts the negative `goal`.
fn bf_contradicting(u: &Universe, goal: &Formula) -> Vec<esterel_causality::RuleInstance> {
    bf_family_positives(u, goal)
        .iter()
        .flat_map(|f| u.instances_concluding(f))
        .collect()
}

/// Every positive formula of the universe contradicting the negative `g`.
fn bf_family_positives(u: &Universe, g: &Formula) -> Vec<Formula> {
    u.pos_space()
        .iter()
        .filter(|f| contradicts(f, g))
        .copied()
        .collect()
}
