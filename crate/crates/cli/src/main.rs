//! Command-line front end: single-program reports and corpus summaries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use esterel_causality::{
    analyze, render_proof_text, Analysis, AnalysisReport, AnalyzeOptions, Error, LogicalStatus,
    Obligation, ProofTree, PropertyStatus, RuleSet, SignalOutcome, TerminationOutcome, Universe,
};

/// Causality analyzer for instantaneous Esterel programs.
///
/// Decides reactivity and determinism by enumerating supported models of the
/// program's behaviour and constructiveness by proof search, and reports the
/// verdicts per input evaluation.
#[derive(Parser)]
#[command(name = "esterel-causality", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one program and print a full report.
    Analyze(AnalyzeArgs),
    /// Analyze every `.est` file in a directory and print a summary table.
    Corpus(CorpusArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Path of the program to analyze.
    file: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Attach proof trees for every settled obligation.
    #[arg(long)]
    proofs: bool,
    /// List the facts of every witness model.
    #[arg(long)]
    models: bool,
    /// Fold the emission rules into the transition rules.
    #[arg(long)]
    collapsed_emission: bool,
    /// Restrict the analysis to one input evaluation, e.g. `i=+,j=-`.
    #[arg(long, value_name = "SPEC")]
    eval: Option<String>,
    /// Cap on the total number of positive judgements.
    #[arg(long, value_name = "N")]
    max_space: Option<usize>,
    /// Cap on the per-evaluation facts the model search may branch over.
    #[arg(long, value_name = "N")]
    max_choice_points: Option<usize>,
    /// Run the metatheory sweeps without the default size cutoff.
    #[arg(long)]
    full_sweep: bool,
}

#[derive(Args)]
struct CorpusArgs {
    /// Directory containing `.est` programs.
    dir: PathBuf,
    /// Fold the emission rules into the transition rules.
    #[arg(long)]
    collapsed_emission: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Analyze(args) => run_analyze(&args),
        Command::Corpus(args) => run_corpus(&args),
    };
    ExitCode::from(code)
}

/// 0 constructive; 10 coherent but not constructive; 20 non-reactive;
/// 21 non-deterministic; 70 a metatheory check failed.
fn verdict_code(a: &Analysis) -> u8 {
    if a.theorems
        .iter()
        .any(|c| c.status == PropertyStatus::Violated)
    {
        return 70;
    }
    match a.logical.status {
        LogicalStatus::NonReactive => 20,
        LogicalStatus::NonDeterministic => 21,
        LogicalStatus::Coherent => {
            if a.constructive.constructive {
                0
            } else {
                10
            }
        }
    }
}

/// 2 for anything wrong with the input itself, 3 for a blown cap.
fn error_code(e: &Error) -> u8 {
    match e {
        Error::ResourceLimit { .. } => 3,
        _ => 2,
    }
}

fn build_options(args: &AnalyzeArgs) -> AnalyzeOptions {
    let mut options = AnalyzeOptions::default();
    if args.collapsed_emission {
        options.mode = RuleSet::CollapsedEmission;
    }
    if let Some(n) = args.max_space {
        options.grounding.max_pos_space = n;
    }
    if let Some(n) = args.max_choice_points {
        options.grounding.max_choice_points = n;
    }
    options.eval_filter = args.eval.clone();
    options.attach_models = args.models;
    options.attach_proofs = args.proofs;
    if args.full_sweep {
        options.sweep_limit = None;
    }
    options
}

fn run_analyze(args: &AnalyzeArgs) -> u8 {
    let source = match std::fs::read_to_string(&args.file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.file.display());
            return 2;
        }
    };
    let name = program_name(&args.file);
    match analyze(&source, &name, &build_options(args)) {
        Ok(a) => {
            let report = a.report();
            match args.format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serialises")
                ),
                Format::Text => print!("{}", render_text(&a, &report, args.proofs)),
            }
            verdict_code(&a)
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}

fn program_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn name_list(names: &[String]) -> String {
    if names.is_empty() {
        "-".to_owned()
    } else {
        names.join(", ")
    }
}

fn ms(us: u64) -> String {
    format!("{:.1}ms", us as f64 / 1000.0)
}

fn render_text(a: &Analysis, r: &AnalysisReport, proofs: bool) -> String {
    let mut out = String::new();
    let p = &r.program;
    let _ = writeln!(out, "program {}", p.name);
    let _ = writeln!(out, "  body     {}", p.canonical);
    let _ = writeln!(out, "  inputs   {}", name_list(&p.inputs));
    let _ = writeln!(out, "  outputs  {}", name_list(&p.outputs));
    let _ = writeln!(out, "  locals   {}", name_list(&p.locals));
    let _ = writeln!(out, "  mode     {}", r.mode);
    let _ = writeln!(
        out,
        "  space    {} terms, {} signals, {} evaluations, {} judgements ({} supportable)",
        r.space.terms,
        r.space.signals,
        r.space.evaluations.len(),
        r.space.positive_judgements,
        r.space.supportable_judgements,
    );

    let _ = writeln!(out, "\nlogical");
    let _ = writeln!(out, "  status   {}", r.logical.status);
    let _ = writeln!(out, "  models   {}", r.logical.model_count);
    for row in &r.logical.per_evaluation {
        let _ = writeln!(
            out,
            "    {}  {} model{}  ({})",
            row.evaluation,
            row.model_count,
            if row.model_count == 1 { "" } else { "s" },
            row.status,
        );
    }

    if let Some(witnesses) = &r.logical.witnesses {
        let _ = writeln!(out, "\nmodels");
        let mut any_residual = false;
        for (i, m) in witnesses.iter().enumerate() {
            let _ = writeln!(out, "  model {} of {}", i + 1, r.logical.model_count);
            for f in &m.facts {
                any_residual |= f.residual;
                let _ = writeln!(out, "    {} {}", if f.residual { "*" } else { " " }, f.text);
            }
        }
        if any_residual {
            let _ = writeln!(out, "  (* = fact about a residual term)");
        }
    }

    let _ = writeln!(out, "\nconstructive");
    let _ = writeln!(
        out,
        "  verdict  {}",
        if r.constructive.constructive {
            "constructive"
        } else {
            "not constructive"
        }
    );
    for ob in &r.constructive.obligations {
        let mut line = format!("    {}  {}: {}", ob.evaluation, ob.subject, ob.resolution);
        if let Some(target) = &ob.target {
            let _ = write!(line, " -> {target}");
        }
        if ob.resolution == "unresolved" {
            let diag: Vec<String> = ob
                .diagnostic
                .iter()
                .map(|(k, v)| format!("{k}={}", if *v { "yes" } else { "no" }))
                .collect();
            let _ = write!(line, "  [{}]", diag.join(", "));
        }
        let _ = writeln!(out, "{line}");
    }

    if proofs {
        let _ = writeln!(out, "\nproofs");
        render_proof_section(a, &mut out);
    }

    let _ = writeln!(out, "\ntheorems");
    for t in &r.theorems {
        let _ = writeln!(out, "  {:<36} {}", t.name, t.status);
    }

    let _ = writeln!(
        out,
        "\ntiming  parse {}  ground {}  models {}  proofs {}  theorems {}  total {}",
        ms(r.timing.parse_us),
        ms(r.timing.grounding_us),
        ms(r.timing.models_us),
        ms(r.timing.proofs_us),
        ms(r.timing.theorems_us),
        ms(r.timing.total_us),
    );
    out
}

fn render_proof_section(a: &Analysis, out: &mut String) {
    let u = &a.universe;
    for ob in &a.constructive.obligations {
        match ob {
            Obligation::Signal {
                eval,
                signal,
                outcome,
                ..
            } => {
                let head = format!("{} {}", u.eval(*eval), u.signal(*signal).name());
                match outcome {
                    SignalOutcome::Emitted { emits, step, .. } => {
                        push_tree(out, &format!("{head} emission"), u, emits);
                        push_tree(out, &format!("{head} step"), u, step);
                    }
                    SignalOutcome::Silent {
                        not_emits,
                        not_steps,
                    } => {
                        push_tree(out, &format!("{head} silence"), u, not_emits);
                        push_tree(out, &format!("{head} no step"), u, not_steps);
                    }
                    SignalOutcome::Unresolved => {
                        let _ = writeln!(out, "  {head}: unresolved (no proof)");
                    }
                }
            }
            Obligation::Termination { eval, outcome, .. } => {
                let head = format!("{} termination", u.eval(*eval));
                match outcome {
                    TerminationOutcome::Terminates(t) | TerminationOutcome::Rejects(t) => {
                        push_tree(out, &head, u, t)
                    }
                    TerminationOutcome::Unresolved => {
                        let _ = writeln!(out, "  {head}: unresolved (no proof)");
                    }
                }
            }
        }
    }
}

fn push_tree(out: &mut String, head: &str, u: &Universe, tree: &ProofTree) {
    let _ = writeln!(out, "  {head}:");
    for line in render_proof_text(u, tree).lines() {
        let _ = writeln!(out, "    {line}");
    }
}

struct Row {
    name: String,
    result: Result<RowData, String>,
}

struct RowData {
    status: String,
    models: String,
    constructive: bool,
    theorems: &'static str,
    violated: bool,
    total: Duration,
}

fn analyze_file(path: &Path, mode: RuleSet) -> Row {
    let name = program_name(path);
    let source = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            return Row {
                name,
                result: Err(format!("cannot read: {e}")),
            }
        }
    };
    let options = AnalyzeOptions {
        mode,
        attach_models: false,
        ..AnalyzeOptions::default()
    };
    match analyze(&source, &name, &options) {
        Ok(a) => {
            let violated = a
                .theorems
                .iter()
                .any(|c| c.status == PropertyStatus::Violated);
            let skipped = a
                .theorems
                .iter()
                .any(|c| c.status == PropertyStatus::Skipped);
            Row {
                name,
                result: Ok(RowData {
                    status: a.logical.status.to_string(),
                    models: a.logical.model_count.to_string(),
                    constructive: a.constructive.constructive,
                    theorems: if violated {
                        "violated"
                    } else if skipped {
                        "partial"
                    } else {
                        "ok"
                    },
                    violated,
                    total: Duration::from_micros(a.timing.total_us),
                }),
            }
        }
        Err(e) => Row {
            name,
            result: Err(e.to_string()),
        },
    }
}

fn run_corpus(args: &CorpusArgs) -> u8 {
    let entries = match std::fs::read_dir(&args.dir) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.dir.display());
            return 2;
        }
    };
    let mut files: Vec<PathBuf> = entries
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "est"))
        .collect();
    files.sort();
    if files.is_empty() {
        println!("no programs found in {}", args.dir.display());
        return 0;
    }

    let mode = if args.collapsed_emission {
        RuleSet::CollapsedEmission
    } else {
        RuleSet::Standard
    };
    let workers = thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(4)
        .min(files.len());
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<Row>> = (0..files.len()).map(|_| None).collect();
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(path) = files.get(i) else { break };
                        local.push((i, analyze_file(path, mode)));
                    }
                    local
                })
            })
            .collect();
        for handle in handles {
            for (i, row) in handle.join().expect("analysis worker panicked") {
                slots[i] = Some(row);
            }
        }
    });
    let rows: Vec<Row> = slots.into_iter().map(|r| r.expect("missing row")).collect();

    let name_w = rows
        .iter()
        .map(|r| r.name.len())
        .chain(["program".len()])
        .max()
        .unwrap();
    let status_w = rows
        .iter()
        .filter_map(|r| r.result.as_ref().ok().map(|d| d.status.len()))
        .chain(["status".len()])
        .max()
        .unwrap();
    println!(
        "{:<name_w$}  {:<status_w$}  {:>6}  {:<12}  {:<8}  {:>9}",
        "program", "status", "models", "constructive", "theorems", "time"
    );
    for row in &rows {
        match &row.result {
            Ok(d) => println!(
                "{:<name_w$}  {:<status_w$}  {:>6}  {:<12}  {:<8}  {:>9}",
                row.name,
                d.status,
                d.models,
                if d.constructive { "yes" } else { "no" },
                d.theorems,
                format!("{:.1}ms", d.total.as_secs_f64() * 1000.0),
            ),
            Err(msg) => println!("{:<name_w$}  error: {msg}", row.name),
        }
    }

    let errors = rows.iter().filter(|r| r.result.is_err()).count();
    let violations = rows
        .iter()
        .filter(|r| r.result.as_ref().is_ok_and(|d| d.violated))
        .count();
    println!(
        "\n{} program{}, {errors} error{}, {violations} violation{}",
        rows.len(),
        if rows.len() == 1 { "" } else { "s" },
        if errors == 1 { "" } else { "s" },
        if violations == 1 { "" } else { "s" },
    );
    // The exit code flags soundness violations only; per-file problems are
    // visible in the table but do not fail the run.
    if violations > 0 {
        70
    } else {
        0
    }
}
