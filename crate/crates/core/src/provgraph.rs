//! Provenance graphs: bipartite artifact/process DAGs, their structural
//! validation, functional evaluation under an interpretation, and the JSON
//! graph and interpretation file formats.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Domain, Value};
use crate::func::{FnError, FnRepr, FnSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub id: String,
    pub value: Value,
    pub input: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    pub id: String,
    pub name: String,
}

/// `process used artifact` on input port `port` (1-based).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Used {
    pub process: String,
    pub artifact: String,
    pub port: u32,
}

/// `artifact wasGeneratedBy process`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Generated {
    pub artifact: String,
    pub process: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvGraph {
    pub domain: Domain,
    pub artifacts: Vec<Artifact>,
    pub processes: Vec<Process>,
    pub used: Vec<Used>,
    pub generated: Vec<Generated>,
    /// The result artifact `v0`.
    pub result: String,
    /// The ordered input artifacts `v1..vn`.
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Artifact,
    Process,
}

impl ProvGraph {
    pub fn artifact(&self, id: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.id == id)
    }

    pub fn process(&self, id: &str) -> Option<&Process> {
        self.processes.iter().find(|p| p.id == id)
    }

    pub fn kind(&self, id: &str) -> Option<NodeKind> {
        if self.artifact(id).is_some() {
            Some(NodeKind::Artifact)
        } else if self.process(id).is_some() {
            Some(NodeKind::Process)
        } else {
            None
        }
    }

    pub fn node_count(&self) -> usize {
        self.artifacts.len() + self.processes.len()
    }

    /// The process generating `artifact`, if exactly one does.
    pub fn generator(&self, artifact: &str) -> Option<&str> {
        let mut it = self.generated.iter().filter(|g| g.artifact == artifact);
        match (it.next(), it.next()) {
            (Some(g), None) => Some(&g.process),
            _ => None,
        }
    }

    /// Artifacts used by `process`, ordered by port.
    pub fn uses_of(&self, process: &str) -> Vec<&Used> {
        let mut uses: Vec<&Used> = self.used.iter().filter(|u| u.process == process).collect();
        uses.sort_by_key(|u| u.port);
        uses
    }

    /// Copy of the graph with artifact labels replaced from `values`.
    pub fn relabeled(&self, values: &BTreeMap<String, Value>) -> ProvGraph {
        let mut g = self.clone();
        for a in &mut g.artifacts {
            if let Some(v) = values.get(&a.id) {
                a.value = *v;
            }
        }
        g
    }

    /// Current labels of the input artifacts, in `inputs` order.
    pub fn input_labels(&self) -> Vec<Value> {
        self.inputs
            .iter()
            .map(|id| self.artifact(id).map(|a| a.value).unwrap_or(Value(0)))
            .collect()
    }
}

/// Process-name algebra: arity and total function for each name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpDef {
    pub arity: usize,
    pub func: FnSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interpretation {
    pub ops: BTreeMap<String, OpDef>,
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, arity: usize, func: FnSpec) -> Self {
        self.insert(name, arity, func);
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, arity: usize, func: FnSpec) {
        self.ops.insert(name.into(), OpDef { arity, func });
    }

    pub fn get(&self, name: &str) -> Option<&OpDef> {
        self.ops.get(name)
    }
}

/// One violated structural invariant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    NoArtifacts,
    DuplicateId { id: String },
    DanglingEdge { from: String, to: String, missing: String },
    NotBipartite { from: String, to: String },
    Cycle { nodes: Vec<String> },
    MissingResult { id: String },
    InputGenerated { artifact: String, process: String },
    NotGenerated { artifact: String },
    MultiplyGenerated { artifact: String, processes: Vec<String> },
    NotFunctional { process: String, generated: usize },
    InputFlagMismatch { artifact: String },
    DuplicateInput { artifact: String },
    UnknownProcessName { process: String, name: String },
    ArityMismatch { process: String, name: String, expected: usize, got: usize },
    BadPorts { process: String, ports: Vec<u32> },
    BadFunction { name: String, reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoArtifacts => write!(f, "graph has no artifacts"),
            DuplicateId { id } => write!(f, "duplicate node id `{id}`"),
            DanglingEdge { from, to, missing } => {
                write!(f, "edge {from} -> {to} refers to unknown node `{missing}`")
            }
            NotBipartite { from, to } => {
                write!(f, "edge {from} -> {to} does not join an artifact and a process")
            }
            Cycle { nodes } => write!(f, "cycle through {}", nodes.join(", ")),
            MissingResult { id } => write!(f, "result `{id}` is not an artifact"),
            InputGenerated { artifact, process } => {
                write!(f, "input artifact `{artifact}` is generated by `{process}`")
            }
            NotGenerated { artifact } => {
                write!(f, "non-input artifact `{artifact}` has no generating process")
            }
            MultiplyGenerated { artifact, processes } => write!(
                f,
                "artifact `{artifact}` is generated by several processes: {}",
                processes.join(", ")
            ),
            NotFunctional { process, generated } => {
                write!(f, "process `{process}` generates {generated} artifacts, expected 1")
            }
            InputFlagMismatch { artifact } => write!(
                f,
                "artifact `{artifact}` input flag disagrees with the inputs list"
            ),
            DuplicateInput { artifact } => write!(f, "input `{artifact}` listed twice"),
            UnknownProcessName { process, name } => {
                write!(f, "process `{process}` has uninterpreted name `{name}`")
            }
            ArityMismatch {
                process,
                name,
                expected,
                got,
            } => write!(
                f,
                "process `{process}` ({name}) has {got} used-edges, arity is {expected}"
            ),
            BadPorts { process, ports } => {
                write!(f, "process `{process}` ports {ports:?} are not exactly 1..ar")
            }
            BadFunction { name, reason } => write!(f, "function for `{name}`: {reason}"),
        }
    }
}

/// Structural report; an empty list means the graph is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(graph: &ProvGraph, interp: &Interpretation) -> ValidationReport {
    let mut out = Vec::new();
    if graph.artifacts.is_empty() {
        out.push(Violation::NoArtifacts);
    }

    let mut kinds: HashMap<&str, NodeKind> = HashMap::new();
    for (id, kind) in graph
        .artifacts
        .iter()
        .map(|a| (&a.id, NodeKind::Artifact))
        .chain(graph.processes.iter().map(|p| (&p.id, NodeKind::Process)))
    {
        if kinds.insert(id, kind).is_some() {
            out.push(Violation::DuplicateId { id: id.clone() });
        }
    }

    // Every edge as (from, to, expected kinds).
    let edges: Vec<(&str, &str, NodeKind, NodeKind)> = graph
        .used
        .iter()
        .map(|u| (u.process.as_str(), u.artifact.as_str(), NodeKind::Process, NodeKind::Artifact))
        .chain(graph.generated.iter().map(|g| {
            (g.artifact.as_str(), g.process.as_str(), NodeKind::Artifact, NodeKind::Process)
        }))
        .collect();
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for &(from, to, want_from, want_to) in &edges {
        let (kf, kt) = match (kinds.get(from), kinds.get(to)) {
            (Some(a), Some(b)) => (*a, *b),
            (a, _) => {
                let missing = if a.is_none() { from } else { to };
                out.push(Violation::DanglingEdge {
                    from: from.into(),
                    to: to.into(),
                    missing: missing.into(),
                });
                continue;
            }
        };
        if kf == kt || (kf, kt) != (want_from, want_to) {
            out.push(Violation::NotBipartite {
                from: from.into(),
                to: to.into(),
            });
        }
        adjacency.entry(from).or_default().push(to);
    }

    let cyclic = cyclic_core(kinds.keys().copied(), &adjacency);
    if !cyclic.is_empty() {
        out.push(Violation::Cycle { nodes: cyclic });
    }

    match kinds.get(graph.result.as_str()) {
        Some(NodeKind::Artifact) => {}
        _ => out.push(Violation::MissingResult {
            id: graph.result.clone(),
        }),
    }

    let listed: BTreeSet<&str> = graph.inputs.iter().map(String::as_str).collect();
    for (i, id) in graph.inputs.iter().enumerate() {
        if graph.inputs[..i].contains(id) {
            out.push(Violation::DuplicateInput {
                artifact: id.clone(),
            });
        }
        if graph.artifact(id).is_none() {
            out.push(Violation::InputFlagMismatch {
                artifact: id.clone(),
            });
        }
    }
    for a in &graph.artifacts {
        let generators: Vec<String> = graph
            .generated
            .iter()
            .filter(|g| g.artifact == a.id)
            .map(|g| g.process.clone())
            .collect();
        if a.input != listed.contains(a.id.as_str()) {
            out.push(Violation::InputFlagMismatch {
                artifact: a.id.clone(),
            });
        }
        match (a.input, generators.len()) {
            (true, 0) | (false, 1) => {}
            (true, _) => out.push(Violation::InputGenerated {
                artifact: a.id.clone(),
                process: generators[0].clone(),
            }),
            (false, 0) => out.push(Violation::NotGenerated {
                artifact: a.id.clone(),
            }),
            (false, _) => out.push(Violation::MultiplyGenerated {
                artifact: a.id.clone(),
                processes: generators,
            }),
        }
    }

    for p in &graph.processes {
        let generated = graph.generated.iter().filter(|g| g.process == p.id).count();
        if generated != 1 {
            out.push(Violation::NotFunctional {
                process: p.id.clone(),
                generated,
            });
        }
        let Some(op) = interp.get(&p.name) else {
            out.push(Violation::UnknownProcessName {
                process: p.id.clone(),
                name: p.name.clone(),
            });
            continue;
        };
        let mut ports: Vec<u32> = graph
            .used
            .iter()
            .filter(|u| u.process == p.id)
            .map(|u| u.port)
            .collect();
        ports.sort_unstable();
        if ports.len() != op.arity {
            out.push(Violation::ArityMismatch {
                process: p.id.clone(),
                name: p.name.clone(),
                expected: op.arity,
                got: ports.len(),
            });
        } else if !ports.iter().enumerate().all(|(i, &port)| port as usize == i + 1) {
            out.push(Violation::BadPorts {
                process: p.id.clone(),
                ports,
            });
        }
    }

    let used_names: BTreeSet<&str> = graph.processes.iter().map(|p| p.name.as_str()).collect();
    for (name, op) in &interp.ops {
        if !used_names.contains(name.as_str()) {
            continue;
        }
        if let Err(e) = op.func.check(&graph.domain, op.arity) {
            out.push(Violation::BadFunction {
                name: name.clone(),
                reason: e.to_string(),
            });
        }
    }

    out.sort();
    out.dedup();
    ValidationReport { violations: out }
}

/// Nodes left after repeatedly trimming sources and sinks: the cycles and
/// whatever lies between them. Empty iff the graph is acyclic.
fn cyclic_core<'a>(
    nodes: impl Iterator<Item = &'a str>,
    adjacency: &BTreeMap<&'a str, Vec<&'a str>>,
) -> Vec<String> {
    let mut alive: BTreeSet<&str> = nodes.collect();
    loop {
        let mut indeg: BTreeMap<&str, usize> = alive.iter().map(|n| (*n, 0)).collect();
        let mut outdeg = indeg.clone();
        for (from, tos) in adjacency {
            for to in tos {
                if alive.contains(from) && alive.contains(to) {
                    *outdeg.get_mut(from).unwrap() += 1;
                    *indeg.get_mut(to).unwrap() += 1;
                }
            }
        }
        let before = alive.len();
        alive.retain(|n| indeg[n] > 0 && outdeg[n] > 0);
        if alive.len() == before {
            break;
        }
    }
    alive.into_iter().map(String::from).collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("graph is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("expected {expected} input values, got {got}")]
    InputArity { expected: usize, got: usize },
    #[error("input value for `{id}` is outside the domain")]
    OutOfDomain { id: String },
    #[error("process order is not topological at `{0}`")]
    NotTopological(String),
    #[error("unknown process `{0}` in evaluation order")]
    UnknownProcess(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    First,
    Last,
}

/// A topological order of the process nodes (each process after the
/// generators of everything it uses). Ties are broken by declaration order.
pub fn topological_process_order(graph: &ProvGraph, tie: TieBreak) -> Option<Vec<String>> {
    let index: HashMap<&str, usize> = graph
        .processes
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); graph.processes.len()];
    for u in &graph.used {
        if let (Some(&p), Some(q)) = (index.get(u.process.as_str()), graph.generator(&u.artifact)) {
            if let Some(&q) = index.get(q) {
                deps[p].insert(q);
            }
        }
    }
    let mut done = vec![false; deps.len()];
    let mut order = Vec::with_capacity(deps.len());
    while order.len() < deps.len() {
        let ready = (0..deps.len()).filter(|&i| !done[i] && deps[i].iter().all(|&d| done[d]));
        let next = match tie {
            TieBreak::First => ready.min(),
            TieBreak::Last => ready.max(),
        }?;
        done[next] = true;
        order.push(graph.processes[next].id.clone());
    }
    Some(order)
}

/// A valid graph compiled to slot operations for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledGraph {
    domain: Domain,
    ids: Vec<String>,
    slot: HashMap<String, usize>,
    input_slots: Vec<usize>,
    steps: Vec<Step>,
    result_slot: usize,
}

#[derive(Debug, Clone)]
struct Step {
    process: String,
    func: FnSpec,
    args: Vec<usize>,
    process_slot: usize,
    artifact_slot: usize,
}

impl CompiledGraph {
    pub fn new(graph: &ProvGraph, interp: &Interpretation) -> Result<Self, EvalError> {
        let report = validate(graph, interp);
        if !report.is_valid() {
            return Err(EvalError::Invalid(report.violations));
        }
        let order = topological_process_order(graph, TieBreak::First)
            .expect("validated graphs are acyclic");
        Ok(Self::with_order_unchecked(graph, interp, &order))
    }

    fn with_order_unchecked(graph: &ProvGraph, interp: &Interpretation, order: &[String]) -> Self {
        let ids: Vec<String> = graph
            .artifacts
            .iter()
            .map(|a| a.id.clone())
            .chain(graph.processes.iter().map(|p| p.id.clone()))
            .collect();
        let slot: HashMap<String, usize> =
            ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let steps = order
            .iter()
            .map(|pid| {
                let p = graph.process(pid).expect("order names known processes");
                let artifact = graph
                    .generated
                    .iter()
                    .find(|g| &g.process == pid)
                    .expect("functional graph");
                Step {
                    process: pid.clone(),
                    func: interp.get(&p.name).expect("interpreted name").func.clone(),
                    args: graph.uses_of(pid).iter().map(|u| slot[&u.artifact]).collect(),
                    process_slot: slot[pid],
                    artifact_slot: slot[&artifact.artifact],
                }
            })
            .collect();
        CompiledGraph {
            domain: graph.domain.clone(),
            input_slots: graph.inputs.iter().map(|i| slot[i]).collect(),
            result_slot: slot[&graph.result],
            ids,
            slot,
            steps,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn arity(&self) -> usize {
        self.input_slots.len()
    }

    fn check_inputs(&self, inputs: &[Value]) -> Result<(), EvalError> {
        if inputs.len() != self.input_slots.len() {
            return Err(EvalError::InputArity {
                expected: self.input_slots.len(),
                got: inputs.len(),
            });
        }
        if let Some(i) = inputs.iter().position(|v| !self.domain.contains(*v)) {
            return Err(EvalError::OutOfDomain {
                id: self.ids[self.input_slots[i]].clone(),
            });
        }
        Ok(())
    }

    /// Values for every node, indexed by slot.
    fn run_slots(&self, inputs: &[Value]) -> Vec<Value> {
        let mut vals = vec![Value(0); self.ids.len()];
        for (&s, &v) in self.input_slots.iter().zip(inputs) {
            vals[s] = v;
        }
        let mut args = Vec::new();
        for step in &self.steps {
            args.clear();
            args.extend(step.args.iter().map(|&s| vals[s]));
            let out = step.func.apply(&self.domain, &args);
            vals[step.process_slot] = out;
            vals[step.artifact_slot] = out;
        }
        vals
    }

    pub fn evaluate(&self, inputs: &[Value]) -> Result<Evaluation, EvalError> {
        self.check_inputs(inputs)?;
        let vals = self.run_slots(inputs);
        Ok(Evaluation {
            values: self.ids.iter().cloned().zip(vals.iter().copied()).collect(),
            result: vals[self.result_slot],
        })
    }

    /// `[[G]](inputs)`; panics on arity mismatch.
    pub fn apply(&self, inputs: &[Value]) -> Value {
        assert_eq!(inputs.len(), self.input_slots.len(), "input arity");
        self.run_slots(inputs)[self.result_slot]
    }

    pub fn value_of(&self, inputs: &[Value], id: &str) -> Option<Value> {
        let s = *self.slot.get(id)?;
        Some(self.run_slots(inputs)[s])
    }

    pub fn process_ids(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.process.as_str())
    }
}

/// Values of every node plus the result `v0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub values: BTreeMap<String, Value>,
    pub result: Value,
}

/// Applies the interpretation to compute every node value from the inputs.
pub fn evaluate(
    graph: &ProvGraph,
    interp: &Interpretation,
    inputs: &[Value],
) -> Result<Evaluation, EvalError> {
    CompiledGraph::new(graph, interp)?.evaluate(inputs)
}

/// Evaluates processes in the caller's order, which must be topological.
pub fn evaluate_in_order(
    graph: &ProvGraph,
    interp: &Interpretation,
    inputs: &[Value],
    order: &[String],
) -> Result<Evaluation, EvalError> {
    let report = validate(graph, interp);
    if !report.is_valid() {
        return Err(EvalError::Invalid(report.violations));
    }
    let mut seen = BTreeSet::new();
    for pid in order {
        if graph.process(pid).is_none() {
            return Err(EvalError::UnknownProcess(pid.clone()));
        }
        for u in graph.uses_of(pid) {
            if let Some(q) = graph.generator(&u.artifact) {
                if !seen.contains(q) {
                    return Err(EvalError::NotTopological(pid.clone()));
                }
            }
        }
        seen.insert(pid.as_str());
    }
    if seen.len() != graph.processes.len() {
        return Err(EvalError::NotTopological("<missing processes>".into()));
    }
    CompiledGraph::with_order_unchecked(graph, interp, order).evaluate(inputs)
}

/// The function `[[G]] : D^n -> D`.
#[derive(Debug, Clone)]
pub struct GraphFunction {
    compiled: CompiledGraph,
}

impl GraphFunction {
    pub fn arity(&self) -> usize {
        self.compiled.arity()
    }

    pub fn apply(&self, inputs: &[Value]) -> Result<Value, EvalError> {
        self.compiled.check_inputs(inputs)?;
        Ok(self.compiled.apply(inputs))
    }

    /// The full truth table over `D^n` in lexicographic input order.
    pub fn table(&self) -> Vec<(Vec<Value>, Value)> {
        self.compiled
            .domain
            .tuples(self.arity())
            .map(|t| {
                let v = self.compiled.apply(&t);
                (t, v)
            })
            .collect()
    }

    pub fn compiled(&self) -> &CompiledGraph {
        &self.compiled
    }
}

pub fn functional_semantics(
    graph: &ProvGraph,
    interp: &Interpretation,
) -> Result<GraphFunction, EvalError> {
    Ok(GraphFunction {
        compiled: CompiledGraph::new(graph, interp)?,
    })
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("cannot serialize graph: {0}")]
    Unserializable(String),
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => FormatError::Schema(e.to_string()),
            _ => FormatError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
        }
    }
}

impl From<FnError> for FormatError {
    fn from(e: FnError) -> Self {
        FormatError::Schema(e.to_string())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    domain: Domain,
    artifacts: Vec<ArtifactEntry>,
    processes: Vec<ProcessEntry>,
    result: String,
    inputs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArtifactEntry {
    id: String,
    value: String,
    input: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProcessEntry {
    id: String,
    name: String,
    uses: Vec<UseEntry>,
    generates: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UseEntry {
    artifact: String,
    port: u32,
}

pub fn read_graph(bytes: &[u8]) -> Result<ProvGraph, FormatError> {
    let file: GraphFile = serde_json::from_slice(bytes)?;
    let domain = file.domain;
    let artifacts = file
        .artifacts
        .into_iter()
        .map(|a| {
            let value = domain
                .parse(&a.value)
                .map_err(|e| FormatError::Schema(format!("artifact `{}`: {e}", a.id)))?;
            Ok(Artifact {
                id: a.id,
                value,
                input: a.input,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    if !artifacts.iter().any(|a| a.id == file.result) {
        return Err(FormatError::Schema(format!("no result node `{}`", file.result)));
    }
    let mut processes = Vec::new();
    let mut used = Vec::new();
    let mut generated = Vec::new();
    for p in file.processes {
        used.extend(p.uses.into_iter().map(|u| Used {
            process: p.id.clone(),
            artifact: u.artifact,
            port: u.port,
        }));
        generated.push(Generated {
            artifact: p.generates,
            process: p.id.clone(),
        });
        processes.push(Process {
            id: p.id,
            name: p.name,
        });
    }
    Ok(ProvGraph {
        domain,
        artifacts,
        processes,
        used,
        generated,
        result: file.result,
        inputs: file.inputs,
    })
}

/// Canonical form: nodes sorted by id, uses sorted by (port, artifact),
/// pretty-printed with a trailing newline.
pub fn write_graph(graph: &ProvGraph) -> Result<String, FormatError> {
    let mut artifacts: Vec<&Artifact> = graph.artifacts.iter().collect();
    artifacts.sort_by(|a, b| a.id.cmp(&b.id));
    let mut processes: Vec<&Process> = graph.processes.iter().collect();
    processes.sort_by(|a, b| a.id.cmp(&b.id));
    for u in &graph.used {
        if graph.process(&u.process).is_none() {
            return Err(FormatError::Unserializable(format!(
                "used-edge source `{}` is not a process",
                u.process
            )));
        }
    }
    for g in &graph.generated {
        if graph.process(&g.process).is_none() {
            return Err(FormatError::Unserializable(format!(
                "generated-edge target `{}` is not a process",
                g.process
            )));
        }
    }
    let processes = processes
        .into_iter()
        .map(|p| {
            let gens: Vec<&Generated> = graph.generated.iter().filter(|g| g.process == p.id).collect();
            let [g] = gens.as_slice() else {
                return Err(FormatError::Unserializable(format!(
                    "process `{}` generates {} artifacts",
                    p.id,
                    gens.len()
                )));
            };
            let mut uses: Vec<&Used> = graph.used.iter().filter(|u| u.process == p.id).collect();
            uses.sort_by(|a, b| (a.port, &a.artifact).cmp(&(b.port, &b.artifact)));
            Ok(ProcessEntry {
                id: p.id.clone(),
                name: p.name.clone(),
                uses: uses
                    .into_iter()
                    .map(|u| UseEntry {
                        artifact: u.artifact.clone(),
                        port: u.port,
                    })
                    .collect(),
                generates: g.artifact.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let file = GraphFile {
        domain: graph.domain.clone(),
        artifacts: artifacts
            .into_iter()
            .map(|a| ArtifactEntry {
                id: a.id.clone(),
                value: graph.domain.label(a.value),
                input: a.input,
            })
            .collect(),
        processes,
        result: graph.result.clone(),
        inputs: graph.inputs.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("graph serializes");
    s.push('\n');
    Ok(s)
}

/// Canonical form of an already-parsed graph.
pub fn canonicalize(graph: &ProvGraph) -> Result<ProvGraph, FormatError> {
    read_graph(write_graph(graph)?.as_bytes())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpFile {
    ops: Vec<OpEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpEntry {
    name: String,
    arity: usize,
    #[serde(rename = "fn")]
    func: FnRepr,
}

/// Interpretation files carry no domain of their own; tables and constants
/// are read against the graph's domain.
pub fn read_interpretation(bytes: &[u8], domain: &Domain) -> Result<Interpretation, FormatError> {
    let file: InterpFile = serde_json::from_slice(bytes)?;
    let mut interp = Interpretation::new();
    for op in file.ops {
        if interp.get(&op.name).is_some() {
            return Err(FormatError::Schema(format!("duplicate op `{}`", op.name)));
        }
        let func = FnSpec::from_repr(&op.func, domain, op.arity)
            .map_err(|e| FormatError::Schema(format!("op `{}`: {e}", op.name)))?;
        interp.insert(op.name, op.arity, func);
    }
    Ok(interp)
}

pub fn write_interpretation(interp: &Interpretation, domain: &Domain) -> String {
    let file = InterpFile {
        ops: interp
            .ops
            .iter()
            .map(|(name, op)| OpEntry {
                name: name.clone(),
                arity: op.arity,
                func: op.func.to_repr(domain, op.arity),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("interpretation serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::func::Builtin;

    fn ones(n: usize) -> Vec<Value> {
        vec![Value(1); n]
    }

    #[test]
    fn cake_is_valid() {
        let (g, i) = fixtures::cake();
        assert_eq!(validate(&g, &i).violations, vec![]);
        assert_eq!(g.artifacts.len(), 10);
        assert_eq!(g.processes.len(), 4);
    }

    #[test]
    fn artifact_to_artifact_edge_is_not_bipartite() {
        let (mut g, i) = fixtures::cake();
        g.generated.push(Generated {
            artifact: "cake".into(),
            process: "water".into(),
        });
        let report = validate(&g, &i);
        assert!(report.violations.contains(&Violation::NotBipartite {
            from: "cake".into(),
            to: "water".into(),
        }));
    }

    #[test]
    fn missing_port_breaks_sortedness() {
        let (mut g, i) = fixtures::cake();
        g.used.retain(|u| !(u.process == "mixProcess" && u.port == 5));
        let report = validate(&g, &i);
        assert!(report.violations.contains(&Violation::ArityMismatch {
            process: "mixProcess".into(),
            name: "mix".into(),
            expected: 5,
            got: 4,
        }));
    }

    #[test]
    fn port_gaps_and_duplicates() {
        let (mut g, i) = fixtures::cake();
        for u in &mut g.used {
            if u.process == "bakeProcess" && u.port == 2 {
                u.port = 3;
            }
        }
        assert!(validate(&g, &i)
            .violations
            .iter()
            .any(|v| matches!(v, Violation::BadPorts { process, .. } if process == "bakeProcess")));
    }

    #[test]
    fn cycles_and_generation_rules() {
        let (mut g, i) = fixtures::cake();
        // batter feeds back into the mixing step
        g.used.push(Used {
            process: "mixProcess".into(),
            artifact: "batter".into(),
            port: 6,
        });
        g.generated.push(Generated {
            artifact: "water".into(),
            process: "bakeProcess".into(),
        });
        let v = validate(&g, &i).violations;
        assert!(v.iter().any(|x| matches!(x, Violation::Cycle { nodes } if nodes.contains(&"batter".to_string()))));
        assert!(v.contains(&Violation::InputGenerated {
            artifact: "water".into(),
            process: "bakeProcess".into(),
        }));
        assert!(v.contains(&Violation::NotFunctional {
            process: "bakeProcess".into(),
            generated: 2,
        }));
    }

    #[test]
    fn cake_evaluation() {
        let (g, i) = fixtures::cake();
        let e = evaluate(&g, &i, &ones(6)).unwrap();
        assert_eq!(e.result, Value(1));
        // water = 0
        let mut inputs = ones(6);
        inputs[0] = Value(0);
        let e = evaluate(&g, &i, &inputs).unwrap();
        assert_eq!(e.values["mix"], Value(0));
        assert_eq!(e.values["cake"], Value(0));
        assert_eq!(e.result, Value(0));
        assert!(matches!(
            evaluate(&g, &i, &ones(5)),
            Err(EvalError::InputArity { expected: 6, got: 5 })
        ));
    }

    #[test]
    fn single_node_graph_is_identity() {
        let g = ProvGraph {
            domain: Domain::Mod(5),
            artifacts: vec![Artifact {
                id: "x".into(),
                value: Value(0),
                input: true,
            }],
            processes: vec![],
            used: vec![],
            generated: vec![],
            result: "x".into(),
            inputs: vec!["x".into()],
        };
        let f = functional_semantics(&g, &Interpretation::new()).unwrap();
        for d in g.domain.values() {
            assert_eq!(f.apply(&[d]).unwrap(), d);
        }
    }

    #[test]
    fn apply_f_graph_is_f() {
        let d = Domain::Mod(4);
        let g = ProvGraph {
            domain: d.clone(),
            artifacts: vec![
                Artifact { id: "a".into(), value: Value(0), input: true },
                Artifact { id: "b".into(), value: Value(0), input: true },
                Artifact { id: "r".into(), value: Value(0), input: false },
            ],
            processes: vec![Process { id: "p".into(), name: "f".into() }],
            used: vec![
                Used { process: "p".into(), artifact: "a".into(), port: 1 },
                Used { process: "p".into(), artifact: "b".into(), port: 2 },
            ],
            generated: vec![Generated { artifact: "r".into(), process: "p".into() }],
            result: "r".into(),
            inputs: vec!["a".into(), "b".into()],
        };
        let f = FnSpec::Builtin(Builtin::Mul);
        let interp = Interpretation::new().with("f", 2, f.clone());
        let sem = functional_semantics(&g, &interp).unwrap();
        for (args, out) in sem.table() {
            assert_eq!(out, f.apply(&d, &args));
        }
    }

    #[test]
    fn evaluation_order_does_not_matter() {
        let (g, i) = fixtures::cake();
        let a = topological_process_order(&g, TieBreak::First).unwrap();
        let b = topological_process_order(&g, TieBreak::Last).unwrap();
        for t in g.domain.tuples(6) {
            assert_eq!(
                evaluate_in_order(&g, &i, &t, &a).unwrap(),
                evaluate_in_order(&g, &i, &t, &b).unwrap()
            );
        }
        let mut bad = a.clone();
        bad.reverse();
        assert!(matches!(
            evaluate_in_order(&g, &i, &ones(6), &bad),
            Err(EvalError::NotTopological(_))
        ));
    }

    #[test]
    fn read_errors() {
        let empty = br#"{"domain":{"kind":"bool"},"artifacts":[],"processes":[],"result":"v0","inputs":[]}"#;
        match read_graph(empty) {
            Err(FormatError::Schema(m)) => assert!(m.contains("no result node"), "{m}"),
            other => panic!("{other:?}"),
        }
        match read_graph(b"{\n  \"domain\": ") {
            Err(FormatError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let extra = br#"{"domain":{"kind":"bool"},"artifacts":[],"processes":[],"result":"v0","inputs":[],"agents":[]}"#;
        assert!(matches!(read_graph(extra), Err(FormatError::Schema(_))));
    }

    #[test]
    fn cake_file_roundtrip() {
        let text = fixtures::CAKE_GRAPH;
        let g = read_graph(text.as_bytes()).unwrap();
        let once = write_graph(&g).unwrap();
        let twice = write_graph(&read_graph(once.as_bytes()).unwrap()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn interpretation_roundtrip() {
        let (g, i) = fixtures::cake();
        let text = write_interpretation(&i, &g.domain);
        assert_eq!(read_interpretation(text.as_bytes(), &g.domain).unwrap(), i);
        let bad = br#"{"ops":[{"name":"x","arity":1,"fn":{"builtin":"and","extra":1}}]}"#;
        assert!(read_interpretation(bad, &g.domain).is_err());
    }
}
