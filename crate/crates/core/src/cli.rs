//! Command-line frontend. Exit codes: 0 success or passing verdict, 1 failing
//! verdict, 2 usage, input, or runtime error.

use std::collections::BTreeMap;
use std::error::Error;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::approx::{self, Budget, Level, Mode};
use crate::causal::{read_model, write_model, CausalSituation, Valuation, ValuationFile};
use crate::domain::{Domain, Value};
use crate::gen::{corpus, graph_of_situation, ModelParams};
use crate::hpcause::{enumerate_actual_causes, is_actual_cause, CauseQuery};
use crate::opmrules::{audit, check_conjecture, infer, Status};
use crate::provgraph::{
    evaluate, read_graph, read_interpretation, validate, write_graph, write_interpretation, Interpretation, ProvGraph,
};
use crate::slp::{self, Program, Semantics};
use crate::translate::{cause_situation, to_causal, TranslationOptions};

type CliResult = Result<i32, Box<dyn Error + Send + Sync>>;

#[derive(Parser, Debug)]
#[command(name = "provcause", version, about = "Causal semantics and audits for provenance graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SemanticsArg {
    Trivial,
    Trace,
    Static,
}

impl From<SemanticsArg> for Semantics {
    fn from(s: SemanticsArg) -> Self {
        match s {
            SemanticsArg::Trivial => Semantics::Trivial,
            SemanticsArg::Trace => Semantics::Trace,
            SemanticsArg::Static => Semantics::Static,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LevelArg {
    Pointwise,
    Local,
    Global,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Pointwise => Level::Pointwise,
            LevelArg::Local => Level::Local,
            LevelArg::Global => Level::Global,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Functional,
    Causal,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Functional => Mode::Functional,
            ModeArg::Causal => Mode::Causal,
        }
    }
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// Provenance graph file.
    graph: PathBuf,
    /// Interpretation file.
    #[arg(long)]
    interp: PathBuf,
}

#[derive(Args, Debug)]
struct ModelOrGraph {
    /// Causal model file, or a provenance graph when --interp is given.
    file: PathBuf,
    #[arg(long)]
    interp: Option<PathBuf>,
    /// Exogenous context for a model, `U=v,...`; unset variables take the
    /// first domain value.
    #[arg(long)]
    context: Option<String>,
    /// Per-process fault terms when reading a graph.
    #[arg(long, value_enum, default_value = "off")]
    faults: Switch,
}

#[derive(Args, Debug)]
struct ProgramArgs {
    /// Program file (.slp).
    program: PathBuf,
    /// Value domain: `bool`, `mod:M`, or `enum:a|b|...`.
    #[arg(long, default_value = "mod:7")]
    domain: Domain,
    #[arg(long, value_enum, default_value = "trace")]
    semantics: SemanticsArg,
}

#[derive(Args, Debug)]
struct BudgetArgs {
    /// Largest input space enumerated.
    #[arg(long, default_value_t = Budget::default().inputs)]
    budget: u64,
    /// Largest number of memoized states in one intervention search.
    #[arg(long, default_value_t = Budget::default().states)]
    state_budget: u64,
}

impl BudgetArgs {
    fn budget(&self) -> Budget {
        Budget {
            inputs: self.budget,
            states: self.state_budget,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the structural invariants of a graph.
    Validate(GraphArgs),
    /// Evaluate a graph at the given inputs (default: its recorded labels).
    Eval {
        #[command(flatten)]
        g: GraphArgs,
        #[arg(long)]
        inputs: Option<String>,
        /// Print every node, not only the result.
        #[arg(long)]
        all: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Translate a graph to a causal model (stdout) and its valuation.
    ToCausal {
        #[command(flatten)]
        g: GraphArgs,
        #[arg(long, value_enum, default_value = "off")]
        faults: Switch,
        /// Where to write the valuation sidecar.
        #[arg(long)]
        valuation_out: Option<PathBuf>,
    },
    /// Solve a causal model under interventions.
    Intervene {
        model: PathBuf,
        /// Interventions `X=v,...`.
        #[arg(long)]
        set: Option<String>,
        #[arg(long)]
        context: Option<String>,
        /// Print the intervened model instead of its solution.
        #[arg(long)]
        print_model: bool,
    },
    /// Decide whether a conjunction is a weak and an actual cause.
    Cause {
        #[command(flatten)]
        src: ModelOrGraph,
        /// Candidate cause `X=v,...`.
        #[arg(long)]
        candidate: String,
        /// Effect `Y=v`, or `Y` for its actual value.
        #[arg(long)]
        effect: String,
    },
    /// Enumerate the actual causes of an effect.
    Causes {
        #[command(flatten)]
        src: ModelOrGraph,
        #[arg(long)]
        effect: String,
        #[arg(long, default_value_t = 3)]
        max_cause_size: usize,
    },
    /// Run the OPM inference rules.
    Infer {
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
    },
    /// Classify every derived edge as sound or spurious.
    Audit {
        #[command(flatten)]
        g: GraphArgs,
        #[arg(long, default_value_t = 3)]
        max_cause_size: usize,
        #[arg(long, value_enum, default_value = "off")]
        faults: Switch,
        /// Exit 1 if any edge is spurious.
        #[arg(long)]
        strict: bool,
    },
    /// Compare wasDerivedFrom+ with part-of-actual-cause on a graph, or on
    /// graphs of random models when --seed is given.
    Conjecture {
        graph: Option<PathBuf>,
        #[arg(long)]
        interp: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = ModelParams::default().max_endogenous)]
        max_endogenous: usize,
        #[arg(long, default_value_t = 3)]
        max_cause_size: usize,
        #[arg(long, value_enum, default_value = "off")]
        faults: Switch,
        /// Exit 1 unless both directions hold.
        #[arg(long)]
        strict: bool,
    },
    /// Emit the provenance graph a semantics records for one run.
    Trace {
        #[command(flatten)]
        p: ProgramArgs,
        #[arg(long)]
        inputs: String,
        /// Where to write the interpretation of the emitted graph.
        #[arg(long)]
        interp_out: Option<PathBuf>,
    },
    /// Decide whether a semantics approximates the program.
    Approx {
        #[command(flatten)]
        p: ProgramArgs,
        #[arg(long, value_enum, default_value = "causal")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "local")]
        level: LevelArg,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Check a single point: record at these inputs...
        #[arg(long)]
        inputs: Option<String>,
        /// ...evaluate at these (default: the same)...
        #[arg(long)]
        at: Option<String>,
        /// ...under this intervention.
        #[arg(long)]
        set: Option<String>,
    },
    /// Compute the predictive-power relation.
    Power {
        #[command(flatten)]
        p: ProgramArgs,
        #[arg(long, value_enum, default_value = "causal")]
        mode: ModeArg,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Print every pair instead of a summary.
        #[arg(long)]
        dump: bool,
    },
    /// Compare the predictive power of two semantics by inclusion.
    Compare {
        #[command(flatten)]
        p: ProgramArgs,
        /// The second semantics.
        #[arg(long, value_enum)]
        against: SemanticsArg,
        #[arg(long, value_enum, default_value = "causal")]
        mode: ModeArg,
        #[command(flatten)]
        budget: BudgetArgs,
    },
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Box<dyn Error + Send + Sync>> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_graph(path: &Path) -> Result<ProvGraph, Box<dyn Error + Send + Sync>> {
    read_graph(&read(path)?).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_graph_with(g: &GraphArgs) -> Result<(ProvGraph, Interpretation), Box<dyn Error + Send + Sync>> {
    let graph = load_graph(&g.graph)?;
    let interp = read_interpretation(&read(&g.interp)?, &graph.domain)
        .map_err(|e| format!("{}: {e}", g.interp.display()))?;
    Ok((graph, interp))
}

fn load_program(path: &Path) -> Result<Program, Box<dyn Error + Send + Sync>> {
    let text = String::from_utf8(read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    slp::parse(&text).map_err(|e| format!("{}:{e}", path.display()).into())
}

/// Parses `k=v,k=v`. Empty input gives no pairs.
fn assignments(text: &str, domain: &Domain) -> Result<Vec<(String, Value)>, Box<dyn Error + Send + Sync>> {
    let mut out: Vec<(String, Value)> = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected `name=value`, got `{part}`"))?;
        let k = k.trim().to_string();
        if out.iter().any(|(n, _)| *n == k) {
            return Err(format!("`{k}` is assigned twice").into());
        }
        out.push((k, domain.parse(v)?));
    }
    Ok(out)
}

/// Values for `names` from `text`, all of which must be given.
fn tuple_for(names: &[String], text: &str, domain: &Domain) -> Result<Vec<Value>, Box<dyn Error + Send + Sync>> {
    let given: BTreeMap<String, Value> = assignments(text, domain)?.into_iter().collect();
    if let Some(k) = given.keys().find(|k| !names.contains(k)) {
        return Err(format!("`{k}` is not an input").into());
    }
    names
        .iter()
        .map(|n| given.get(n).copied().ok_or_else(|| format!("missing value for input `{n}`").into()))
        .collect()
}

fn labeled(domain: &Domain, v: &BTreeMap<String, Value>) -> serde_json::Value {
    v.iter()
        .map(|(k, x)| (k.clone(), json!(domain.label(*x))))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn print_json(out: &mut dyn Write, v: &serde_json::Value) -> std::io::Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(v).expect("json values serialize"))
}

fn options(faults: Switch) -> TranslationOptions {
    match faults {
        Switch::On => TranslationOptions::with_faults(),
        Switch::Off => TranslationOptions::default(),
    }
}

fn situation(src: &ModelOrGraph) -> Result<CausalSituation, Box<dyn Error + Send + Sync>> {
    let bytes = read(&src.file)?;
    match &src.interp {
        Some(i) => {
            let graph = read_graph(&bytes).map_err(|e| format!("{}: {e}", src.file.display()))?;
            let interp = read_interpretation(&read(i)?, &graph.domain).map_err(|e| format!("{}: {e}", i.display()))?;
            Ok(cause_situation(&graph, &interp, options(src.faults))?.situation)
        }
        None => {
            let model = read_model(&bytes).map_err(|e| format!("{}: {e}", src.file.display()))?;
            let context = context_for(&model, src.context.as_deref())?;
            Ok(CausalSituation::from_context(model, &context)?)
        }
    }
}

fn context_for(model: &crate::causal::CausalModel, text: Option<&str>) -> Result<Valuation, Box<dyn Error + Send + Sync>> {
    let given = assignments(text.unwrap_or(""), model.domain())?;
    if let Some((k, _)) = given.iter().find(|(k, _)| !model.is_exogenous(k)) {
        return Err(format!("`{k}` is not exogenous").into());
    }
    let mut context: Valuation = model.exogenous().iter().map(|u| (u.clone(), Value(0))).collect();
    context.extend(given);
    Ok(context)
}

fn effect(s: &CausalSituation, text: &str) -> Result<(String, Value), Box<dyn Error + Send + Sync>> {
    let d = s.model.domain();
    match text.split_once('=') {
        Some(_) => {
            let mut a = assignments(text, d)?;
            if a.len() != 1 {
                return Err("the effect must be a single `Y=v`".into());
            }
            Ok(a.remove(0))
        }
        None => {
            let v = s.value(text.trim()).ok_or_else(|| format!("unknown variable `{text}`"))?;
            Ok((text.trim().to_string(), v))
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> CliResult {
    match command {
        Command::Validate(g) => {
            let (graph, interp) = load_graph_with(&g)?;
            let report = validate(&graph, &interp);
            let violations: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            print_json(out, &json!({ "valid": report.is_valid(), "violations": violations }))?;
            Ok(if report.is_valid() { 0 } else { 1 })
        }
        Command::Eval { g, inputs, all, format } => {
            let (graph, interp) = load_graph_with(&g)?;
            let u = match inputs {
                Some(text) => tuple_for(&graph.inputs, &text, &graph.domain)?,
                None => graph.input_labels(),
            };
            let e = evaluate(&graph, &interp, &u)?;
            let d = &graph.domain;
            match format {
                Format::Json => print_json(
                    out,
                    &json!({
                        "result": { graph.result.clone(): d.label(e.result) },
                        "values": labeled(d, &e.values),
                    }),
                )?,
                _ => {
                    writeln!(out, "{}={}", graph.result, d.label(e.result))?;
                    if all {
                        for (k, v) in &e.values {
                            if *k != graph.result {
                                writeln!(out, "{k}={}", d.label(*v))?;
                            }
                        }
                    }
                }
            }
            Ok(0)
        }
        Command::ToCausal { g, faults, valuation_out } => {
            let (graph, interp) = load_graph_with(&g)?;
            let t = to_causal(&graph, &interp, options(faults))?;
            write!(out, "{}", write_model(&t.situation.model))?;
            if let Some(path) = valuation_out {
                let sidecar = serde_json::to_string_pretty(&ValuationFile::new(&t.situation))?;
                fs::write(&path, sidecar + "\n").map_err(|e| format!("{}: {e}", path.display()))?;
            }
            Ok(0)
        }
        Command::Intervene { model, set, context, print_model } => {
            let m = read_model(&read(&model)?).map_err(|e| format!("{}: {e}", model.display()))?;
            let settings: Valuation = assignments(set.as_deref().unwrap_or(""), m.domain())?.into_iter().collect();
            let im = m.intervene(&settings)?;
            if print_model {
                write!(out, "{}", write_model(&im))?;
            } else {
                let ctx = context_for(&m, context.as_deref())?;
                print_json(out, &labeled(m.domain(), &im.solve(&ctx)?))?;
            }
            Ok(0)
        }
        Command::Cause { src, candidate, effect: eff } => {
            let s = situation(&src)?;
            let d = s.model.domain().clone();
            let query = CauseQuery {
                candidate: assignments(&candidate, &d)?,
                target: effect(&s, &eff)?,
            };
            let v = is_actual_cause(&s, &query)?;
            print_json(out, &v.to_json(&d))?;
            Ok(if v.actual { 0 } else { 1 })
        }
        Command::Causes { src, effect: eff, max_cause_size } => {
            let s = situation(&src)?;
            let d = s.model.domain().clone();
            let target = effect(&s, &eff)?;
            let causes = enumerate_actual_causes(&s, &target, max_cause_size)?;
            let rows: Vec<serde_json::Value> = causes
                .iter()
                .map(|c| {
                    json!({
                        "cause": labeled(&d, &c.cause.iter().cloned().collect()),
                        "witness": c.witness.to_json(&d),
                    })
                })
                .collect();
            print_json(
                out,
                &json!({
                    "effect": { target.0.clone(): d.label(target.1) },
                    "maxCauseSize": max_cause_size,
                    "causes": rows,
                }),
            )?;
            Ok(0)
        }
        Command::Infer { graph, format } => {
            let g = load_graph(&graph)?;
            let e = infer(&g);
            match format {
                Format::Json => {
                    let rows: Vec<serde_json::Value> = e
                        .triples()
                        .into_iter()
                        .map(|(r, a, b)| json!({ "relation": r.name(), "from": a, "to": b }))
                        .collect();
                    print_json(out, &json!(rows))?;
                }
                _ => write!(out, "{}", e.to_tsv())?,
            }
            Ok(0)
        }
        Command::Audit {
            g,
            max_cause_size,
            faults,
            strict,
        } => {
            let (graph, interp) = load_graph_with(&g)?;
            let report = audit(&graph, &interp, options(faults), max_cause_size)?;
            let s = cause_situation(&graph, &interp, options(faults))?.situation;
            for mut row in report.rows_json(&s) {
                row["maxCauseSize"] = json!(max_cause_size);
                writeln!(out, "{row}")?;
            }
            writeln!(out, "{}", report.summary())?;
            Ok(if strict && report.count(Status::Spurious) > 0 { 1 } else { 0 })
        }
        Command::Conjecture {
            graph,
            interp,
            seed,
            count,
            max_endogenous,
            max_cause_size,
            faults,
            strict,
        } => {
            let holds = match (graph, seed) {
                (Some(path), None) => {
                    let interp = interp.ok_or("--interp is required with a graph")?;
                    let (g, i) = load_graph_with(&GraphArgs { graph: path, interp })?;
                    let r = check_conjecture(&g, &i, options(faults), max_cause_size)?;
                    print_json(out, &r.to_json())?;
                    r.holds()
                }
                (None, Some(seed)) => {
                    let params = ModelParams {
                        max_endogenous,
                        ..ModelParams::default()
                    };
                    let mut rows = Vec::new();
                    let (mut dnc, mut cnd) = (0, 0);
                    for (k, s) in corpus(seed, count, params).iter().enumerate() {
                        let (g, i) = graph_of_situation(s);
                        let r = check_conjecture(&g, &i, options(faults), max_cause_size)?;
                        dnc += r.derived_not_caused.len();
                        cnd += r.caused_not_derived.len();
                        if !r.holds() {
                            let mut j = r.to_json();
                            j["model"] = json!(k);
                            rows.push(j);
                        }
                    }
                    print_json(
                        out,
                        &json!({
                            "seed": seed,
                            "count": count,
                            "maxCauseSize": max_cause_size,
                            "derivedNotCaused": dnc,
                            "causedNotDerived": cnd,
                            "failures": rows,
                        }),
                    )?;
                    dnc == 0 && cnd == 0
                }
                _ => return Err("give either a graph file or --seed".into()),
            };
            Ok(if strict && !holds { 1 } else { 0 })
        }
        Command::Trace { p, inputs, interp_out } => {
            let program = load_program(&p.program)?;
            let u = tuple_for(&program.inputs, &inputs, &p.domain)?;
            let (g, i) = slp::emit(&program, &p.domain, p.semantics.into(), &u)?;
            write!(out, "{}", write_graph(&g)?)?;
            if let Some(path) = interp_out {
                fs::write(&path, write_interpretation(&i, &p.domain)).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            Ok(0)
        }
        Command::Approx {
            p,
            mode,
            level,
            budget,
            inputs,
            at,
            set,
        } => {
            let program = load_program(&p.program)?;
            let d = &p.domain;
            let sem: Semantics = p.semantics.into();
            if inputs.is_some() || at.is_some() || set.is_some() {
                let u_text = inputs.ok_or("--inputs is required to check a single point")?;
                let u = tuple_for(&program.inputs, &u_text, d)?;
                let up = match at {
                    Some(t) => tuple_for(&program.inputs, &t, d)?,
                    None => u.clone(),
                };
                let tau: BTreeMap<String, Value> = assignments(set.as_deref().unwrap_or(""), d)?.into_iter().collect();
                let c = approx::check_causal_at(&program, d, sem, &u, &up, &tau)?;
                print_json(
                    out,
                    &json!({
                        "semantics": sem.name(),
                        "pass": c.is_none(),
                        "counterexample": c.as_ref().map(|c| c.to_json(d)),
                    }),
                )?;
                return Ok(if c.is_none() { 0 } else { 1 });
            }
            let v = approx::check(&program, d, sem, mode.into(), level.into(), &budget.budget())?;
            print_json(out, &v.to_json(&program, d))?;
            Ok(if v.pass { 0 } else { 1 })
        }
        Command::Power { p, mode, budget, dump } => {
            let program = load_program(&p.program)?;
            let rel = approx::power(&program, &p.domain, p.semantics.into(), mode.into(), &budget.budget())?;
            if dump {
                write!(out, "{}", rel.dump(&p.domain))?;
            } else {
                print_json(out, &rel.to_json(&program))?;
            }
            Ok(0)
        }
        Command::Compare { p, against, mode, budget } => {
            let program = load_program(&p.program)?;
            let b = budget.budget();
            let ra = approx::power(&program, &p.domain, p.semantics.into(), mode.into(), &b)?;
            let rb = approx::power(&program, &p.domain, against.into(), mode.into(), &b)?;
            let ordering = approx::compare(&ra, &rb)?;
            print_json(
                out,
                &json!({
                    "mode": Mode::from(mode).name(),
                    "a": ra.semantics.name(),
                    "b": rb.semantics.name(),
                    "aPairs": ra.len(),
                    "bPairs": rb.len(),
                    "ordering": ordering.name(),
                }),
            )?;
            Ok(0)
        }
    }
}
