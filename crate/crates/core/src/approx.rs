//! Pointwise, local and global approximation of a program by a provenance
//! semantics, and the predictive-power relation `u ~> u'`, in both the
//! functional and the causal reading.
//!
//! Everything is decided by exhaustion over `D^n` (and `D^n x D^n`) within
//! an explicit budget. Interventions `tau` range over partial valuations of
//! the versioned variables of the run being compared against. The universal
//! quantifier over `tau` is checked by a depth-first search that walks the
//! reference run and the graph side by side and memoizes on the values that
//! are still live, so equal sub-problems are explored once.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::domain::{Domain, Value};
use crate::func::FnSpec;
use crate::provgraph::{
    functional_semantics, topological_process_order, CompiledGraph, EvalError, Interpretation,
    ProvGraph, TieBreak,
};
use crate::slp::{emit_run, run, run_forced, Arg, EmitError, Program, Run, RunError, Semantics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Functional,
    Causal,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Functional => "functional",
            Mode::Causal => "causal",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "functional" => Ok(Mode::Functional),
            "causal" => Ok(Mode::Causal),
            _ => Err(format!("unknown mode `{s}` (functional, causal)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Pointwise,
    Local,
    Global,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Pointwise => "pointwise",
            Level::Local => "local",
            Level::Global => "global",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pointwise" => Ok(Level::Pointwise),
            "local" => Ok(Level::Local),
            "global" => Ok(Level::Global),
            _ => Err(format!("unknown level `{s}` (pointwise, local, global)")),
        }
    }
}

/// Limits on exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    /// Largest input space to enumerate: `|D|^n`, or `|D|^2n` for pairs.
    pub inputs: u64,
    /// Largest number of memoized search states in one intervention search.
    pub states: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            inputs: 1_000_000,
            states: 2_000_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApproxError {
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("input space of {needed} tuples exceeds the budget of {budget}")]
    InputBudget { needed: String, budget: u64 },
    #[error("intervention search exceeded the budget of {budget} states")]
    StateBudget { budget: u64 },
    #[error("the {mode} reading has no {level} level")]
    NoSuchLevel { mode: Mode, level: Level },
    #[error("relations are over different input spaces")]
    DifferentSpaces,
}

/// A point where the graph and the program disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    /// Input the graph was recorded at.
    pub u: Vec<Value>,
    /// Input the graph was evaluated at.
    pub u_prime: Vec<Value>,
    pub tau: BTreeMap<String, Value>,
    pub variable: String,
    pub expected: Value,
    pub got: Value,
}

fn labels(domain: &Domain, vals: &[Value]) -> Vec<String> {
    vals.iter().map(|v| domain.label(*v)).collect()
}

impl Counterexample {
    pub fn to_json(&self, domain: &Domain) -> serde_json::Value {
        json!({
            "u": labels(domain, &self.u),
            "uPrime": labels(domain, &self.u_prime),
            "tau": self.tau.iter().map(|(k, v)| (k.clone(), json!(domain.label(*v)))).collect::<serde_json::Map<_, _>>(),
            "variable": self.variable,
            "expected": domain.label(self.expected),
            "got": domain.label(self.got),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub mode: Mode,
    pub level: Level,
    pub semantics: Semantics,
    pub pass: bool,
    /// The lexicographically first failure.
    pub counterexample: Option<Counterexample>,
    /// Input pairs `(u, u')` examined.
    pub pairs_checked: u64,
    /// Interventions covered by the examined pairs, saturating.
    pub tau_checked: u128,
    /// Interventions naming variables absent from the `u'` run, saturating.
    pub tau_skipped: u128,
}

impl Verdict {
    pub fn to_json(&self, program: &Program, domain: &Domain) -> serde_json::Value {
        json!({
            "mode": self.mode.name(),
            "level": self.level.name(),
            "semantics": self.semantics.name(),
            "inputs": program.inputs,
            "pass": self.pass,
            "counterexample": self.counterexample.as_ref().map(|c| c.to_json(domain)),
            "pairsChecked": self.pairs_checked,
            "tauChecked": self.tau_checked.to_string(),
            "tauSkipped": self.tau_skipped.to_string(),
        })
    }
}

// ---------------------------------------------------------------- input space

/// Every input tuple with its run and the graph the semantics records
/// there. Graphs that differ only in their labels share a class.
struct Space {
    domain: Domain,
    tuples: Vec<Vec<Value>>,
    runs: Vec<Run>,
    class_of: Vec<usize>,
    classes: Vec<(ProvGraph, Interpretation)>,
}

fn check_space(domain: &Domain, n: usize, budget: u64) -> Result<(), ApproxError> {
    match domain.tuple_count(n) {
        Some(k) if k <= budget => Ok(()),
        Some(k) => Err(ApproxError::InputBudget {
            needed: k.to_string(),
            budget,
        }),
        None => Err(ApproxError::InputBudget {
            needed: format!("{}^{n}", domain.size()),
            budget,
        }),
    }
}

impl Space {
    fn new(program: &Program, domain: &Domain, semantics: Semantics, pairs: bool, budget: &Budget) -> Result<Self, ApproxError> {
        let n = program.inputs.len();
        check_space(domain, if pairs { 2 * n } else { n }, budget.inputs)?;
        if semantics == Semantics::Static && program.has_control() {
            return Err(EmitError::NotStatic.into());
        }
        let tuples: Vec<Vec<Value>> = domain.tuples(n).collect();
        let runs = tuples
            .par_iter()
            .map(|u| run(program, domain, u))
            .collect::<Result<Vec<_>, _>>()?;
        let mut keys: HashMap<String, usize> = HashMap::new();
        let mut classes = Vec::new();
        let mut class_of = Vec::with_capacity(runs.len());
        for r in &runs {
            let (g, i) = emit_run(domain, r, semantics);
            let mut stripped = g.clone();
            for a in &mut stripped.artifacts {
                a.value = Value(0);
            }
            let key = format!("{stripped:?}");
            let next = classes.len();
            let c = *keys.entry(key).or_insert(next);
            if c == next {
                classes.push((g, i));
            }
            class_of.push(c);
        }
        Ok(Space {
            domain: domain.clone(),
            tuples,
            runs,
            class_of,
            classes,
        })
    }

    fn len(&self) -> usize {
        self.tuples.len()
    }
}

// ---------------------------------------------------------------- functional

fn compile_classes(space: &Space) -> Result<Vec<CompiledGraph>, ApproxError> {
    space
        .classes
        .iter()
        .map(|(g, i)| Ok(functional_semantics(g, i)?.compiled().clone()))
        .collect()
}

fn functional_mismatch(space: &Space, compiled: &[CompiledGraph], u: usize, up: usize) -> Option<Counterexample> {
    let got = compiled[space.class_of[u]].apply(&space.tuples[up]);
    let expected = space.runs[up].value;
    (got != expected).then(|| Counterexample {
        u: space.tuples[u].clone(),
        u_prime: space.tuples[up].clone(),
        tau: BTreeMap::new(),
        variable: space.runs[up].result.clone(),
        expected,
        got,
    })
}

pub fn check_functional(
    program: &Program,
    domain: &Domain,
    semantics: Semantics,
    level: Level,
    budget: &Budget,
) -> Result<Verdict, ApproxError> {
    if level == Level::Local {
        return Err(ApproxError::NoSuchLevel {
            mode: Mode::Functional,
            level,
        });
    }
    let space = Space::new(program, domain, semantics, level == Level::Global, budget)?;
    let compiled = compile_classes(&space)?;
    let n = space.len();
    let (counterexample, pairs) = match level {
        Level::Pointwise => (
            (0..n).into_par_iter().find_map_first(|u| functional_mismatch(&space, &compiled, u, u)),
            n as u64,
        ),
        _ => (
            (0..n * n)
                .into_par_iter()
                .find_map_first(|k| functional_mismatch(&space, &compiled, k / n, k % n)),
            (n * n) as u64,
        ),
    };
    Ok(Verdict {
        mode: Mode::Functional,
        level,
        semantics,
        pass: counterexample.is_none(),
        counterexample,
        pairs_checked: pairs,
        tau_checked: 0,
        tau_skipped: 0,
    })
}

// ---------------------------------------------------------------- causal

/// Artifact values of `graph` at `inputs` with the artifacts named in `tau`
/// forced.
fn graph_forced(
    graph: &ProvGraph,
    interp: &Interpretation,
    inputs: &[Value],
    tau: &BTreeMap<String, Value>,
) -> BTreeMap<String, Value> {
    let mut vals: BTreeMap<String, Value> = graph.inputs.iter().cloned().zip(inputs.iter().copied()).collect();
    let order = topological_process_order(graph, TieBreak::First).expect("emitted graphs are acyclic");
    for pid in order {
        let p = graph.process(&pid).expect("known process");
        let args: Vec<Value> = graph.uses_of(&pid).iter().map(|u| vals[&u.artifact]).collect();
        let out = interp.get(&p.name).expect("interpreted").func.apply(&graph.domain, &args);
        let a = graph
            .generated
            .iter()
            .find(|g| g.process == pid)
            .expect("functional graph");
        let v = tau.get(&a.artifact).copied().unwrap_or(out);
        vals.insert(a.artifact.clone(), v);
    }
    vals
}

/// First disagreement, in execution order, between the forced run and the
/// graph forced the same way; the result is compared last.
fn first_mismatch(graph: &ProvGraph, interp: &Interpretation, forced: &Run, u: &[Value], tau: &BTreeMap<String, Value>) -> Option<Counterexample> {
    let inputs: Vec<Value> = forced.inputs.iter().map(|(_, v)| *v).collect();
    let g = graph_forced(graph, interp, &inputs, tau);
    let make = |variable: &str, expected: Value, got: Value| Counterexample {
        u: u.to_vec(),
        u_prime: inputs.clone(),
        tau: tau.clone(),
        variable: variable.to_string(),
        expected,
        got,
    };
    for inst in &forced.instances {
        let is_inner = graph.artifact(&inst.name).is_some_and(|a| !a.input);
        if is_inner && g[&inst.name] != inst.value {
            return Some(make(&inst.name, inst.value, g[&inst.name]));
        }
    }
    let got = g[&graph.result];
    (got != forced.value).then(|| make(&forced.result, forced.value, got))
}

/// Compares the graph the semantics records at `u` with the program at
/// `u_prime` under one intervention.
pub fn check_causal_at(
    program: &Program,
    domain: &Domain,
    semantics: Semantics,
    u: &[Value],
    u_prime: &[Value],
    tau: &BTreeMap<String, Value>,
) -> Result<Option<Counterexample>, ApproxError> {
    if semantics == Semantics::Static && program.has_control() {
        return Err(EmitError::NotStatic.into());
    }
    let (g, i) = emit_run(domain, &run(program, domain, u)?, semantics);
    let forced = run_forced(program, domain, u_prime, tau)?;
    Ok(first_mismatch(&g, &i, &forced, u, tau))
}

#[derive(Clone)]
enum Operand {
    Slot(usize),
    Const(Value),
}

enum Step {
    /// Chooses free (0) or a forced value `d` (stored as `d + 1`).
    Decide { slot: usize },
    Compute {
        slot: usize,
        func: FnSpec,
        args: Vec<Operand>,
        decide: Option<usize>,
    },
}

#[derive(Hash, PartialEq, Eq)]
enum Key {
    Packed(usize, u128),
    Wide(usize, Vec<u32>),
}

/// The reference run at `u'` and a graph, laid out as one straight-line
/// program over slots, with a decision step before each run variable.
struct Joint<'a> {
    domain: &'a Domain,
    steps: Vec<Step>,
    /// Slot pairs that must agree once step `i` has run.
    checks: Vec<Vec<(usize, usize)>>,
    /// Slots live at each decision step.
    live: Vec<Vec<usize>>,
    bits: u32,
    slots: usize,
    inputs: Vec<Value>,
    /// Run variable for each decision, in decision order.
    decided: Vec<String>,
}

impl<'a> Joint<'a> {
    fn new(domain: &'a Domain, graph: &ProvGraph, interp: &Interpretation, at: &Run) -> Self {
        let n_in = at.inputs.len();
        let mut slot_of: HashMap<String, usize> = at.inputs.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();
        let mut slots = n_in;
        let mut fresh = || {
            slots += 1;
            slots - 1
        };
        // node: (step, deps, decision rank)
        let mut nodes: Vec<(Step, Vec<usize>, Option<usize>)> = Vec::new();
        let mut decide_of: HashMap<&str, usize> = HashMap::new();
        for (k, inst) in at.instances.iter().enumerate() {
            let d = fresh();
            nodes.push((Step::Decide { slot: d }, vec![], Some(k)));
            decide_of.insert(&inst.name, d);
            let args: Vec<Operand> = inst
                .args
                .iter()
                .map(|a| match a {
                    Arg::Var(v) => Operand::Slot(slot_of[v]),
                    Arg::Const(c) => Operand::Const(*c),
                })
                .collect();
            let s = fresh();
            let deps = std::iter::once(d)
                .chain(args.iter().filter_map(|a| match a {
                    Operand::Slot(x) => Some(*x),
                    Operand::Const(_) => None,
                }))
                .collect();
            nodes.push((
                Step::Compute {
                    slot: s,
                    func: FnSpec::Builtin(inst.op),
                    args,
                    decide: Some(d),
                },
                deps,
                None,
            ));
            slot_of.insert(inst.name.clone(), s);
        }
        let ref_result = slot_of[&at.result];

        // Graph artifacts get their own slots; inputs are shared.
        let mut gslot: HashMap<&str, usize> = graph.inputs.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let order = topological_process_order(graph, TieBreak::First).expect("emitted graphs are acyclic");
        for pid in &order {
            let p = graph.process(pid).expect("known process");
            let out = &graph.generated.iter().find(|g| &g.process == pid).expect("functional graph").artifact;
            let args: Vec<Operand> = graph.uses_of(pid).iter().map(|u| Operand::Slot(gslot[u.artifact.as_str()])).collect();
            let decide = decide_of.get(out.as_str()).copied();
            let s = fresh();
            let deps = args
                .iter()
                .filter_map(|a| match a {
                    Operand::Slot(x) => Some(*x),
                    Operand::Const(_) => None,
                })
                .chain(decide)
                .collect();
            nodes.push((
                Step::Compute {
                    slot: s,
                    func: interp.get(&p.name).expect("interpreted").func.clone(),
                    args,
                    decide,
                },
                deps,
                None,
            ));
            if decide.is_some() {
                pairs.push((slot_of[out], s));
            }
            gslot.insert(out, s);
        }
        let graph_result = gslot[graph.result.as_str()];
        if !pairs.contains(&(ref_result, graph_result)) && ref_result != graph_result {
            pairs.push((ref_result, graph_result));
        }

        // Kahn's order: compute whatever is ready, decide only when stuck,
        // and decide run variables in execution order.
        let total = nodes.len();
        let mut placed = vec![false; total];
        let mut done_slot = vec![false; slots];
        for s in done_slot.iter_mut().take(n_in) {
            *s = true;
        }
        let mut order_ix = Vec::with_capacity(total);
        while order_ix.len() < total {
            let ready = |i: usize| !placed[i] && nodes[i].1.iter().all(|&d| done_slot[d]);
            let next = (0..total)
                .find(|&i| nodes[i].2.is_none() && ready(i))
                .or_else(|| (0..total).filter(|&i| ready(i)).min_by_key(|&i| nodes[i].2))
                .expect("acyclic");
            placed[next] = true;
            let s = match &nodes[next].0 {
                Step::Decide { slot } | Step::Compute { slot, .. } => *slot,
            };
            done_slot[s] = true;
            order_ix.push(next);
        }
        let mut pos_of_slot = vec![None; slots];
        for (p, &i) in order_ix.iter().enumerate() {
            let s = match &nodes[i].0 {
                Step::Decide { slot } | Step::Compute { slot, .. } => *slot,
            };
            pos_of_slot[s] = Some(p);
        }
        let mut checks = vec![Vec::new(); total];
        for &(a, b) in &pairs {
            let at_pos = pos_of_slot[a].max(pos_of_slot[b]);
            if let Some(p) = at_pos {
                checks[p].push((a, b));
            }
        }
        let mut last_use = vec![0usize; slots];
        for (p, &i) in order_ix.iter().enumerate() {
            for &d in &nodes[i].1 {
                last_use[d] = last_use[d].max(p);
            }
            for &(a, b) in &checks[p] {
                last_use[a] = last_use[a].max(p);
                last_use[b] = last_use[b].max(p);
            }
        }
        let mut slots_by_node: Vec<Option<Step>> = nodes.into_iter().map(|(s, _, _)| Some(s)).collect();
        let steps: Vec<Step> = order_ix.iter().map(|&i| slots_by_node[i].take().expect("placed once")).collect();
        let live = (0..steps.len())
            .map(|p| {
                (n_in..slots)
                    .filter(|&s| pos_of_slot[s].is_some_and(|q| q < p) && last_use[s] >= p)
                    .collect()
            })
            .collect();
        let decided = steps
            .iter()
            .filter_map(|s| match s {
                Step::Decide { slot } => decide_of.iter().find(|(_, &d)| d == *slot).map(|(n, _)| n.to_string()),
                _ => None,
            })
            .collect();
        Joint {
            domain,
            steps,
            checks,
            live,
            bits: 32 - domain.size().leading_zeros(),
            slots,
            inputs: at.inputs.iter().map(|(_, v)| *v).collect(),
            decided,
        }
    }

    fn key(&self, p: usize, vals: &[u32]) -> Key {
        let live = &self.live[p];
        if live.len() as u32 * self.bits <= 128 {
            let mut k = 0u128;
            for &s in live {
                k = (k << self.bits) | vals[s] as u128;
            }
            Key::Packed(p, k)
        } else {
            Key::Wide(p, live.iter().map(|&s| vals[s]).collect())
        }
    }

    /// True if some choice of the remaining decisions breaks a check.
    fn explore(
        &self,
        p: usize,
        vals: &mut [u32],
        path: &mut Vec<u32>,
        memo: &mut HashSet<Key>,
        scratch: &mut Vec<Value>,
        budget: u64,
    ) -> Result<bool, ApproxError> {
        for q in p..self.steps.len() {
            match &self.steps[q] {
                Step::Decide { slot } => {
                    let key = self.key(q, vals);
                    if memo.contains(&key) {
                        return Ok(false);
                    }
                    for c in 0..=self.domain.size() {
                        vals[*slot] = c;
                        path.push(c);
                        if self.explore(q + 1, vals, path, memo, scratch, budget)? {
                            return Ok(true);
                        }
                        path.pop();
                    }
                    if memo.len() as u64 >= budget {
                        return Err(ApproxError::StateBudget { budget });
                    }
                    memo.insert(key);
                    return Ok(false);
                }
                Step::Compute { slot, func, args, decide } => {
                    let forced = decide.map(|d| vals[d]).filter(|&c| c > 0);
                    vals[*slot] = match forced {
                        Some(c) => c - 1,
                        None => {
                            scratch.clear();
                            scratch.extend(args.iter().map(|a| match a {
                                Operand::Slot(s) => Value(vals[*s]),
                                Operand::Const(v) => *v,
                            }));
                            func.apply(self.domain, scratch).0
                        }
                    };
                }
            }
            if self.checks[q].iter().any(|&(a, b)| vals[a] != vals[b]) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// The first intervention, in search order, under which the two sides
    /// disagree.
    fn search(&self, budget: u64) -> Result<Option<BTreeMap<String, Value>>, ApproxError> {
        let mut vals = vec![0u32; self.slots];
        for (i, v) in self.inputs.iter().enumerate() {
            vals[i] = v.0;
        }
        let mut path = Vec::new();
        let mut memo = HashSet::new();
        let mut scratch = Vec::new();
        if !self.explore(0, &mut vals, &mut path, &mut memo, &mut scratch, budget)? {
            return Ok(None);
        }
        Ok(Some(
            self.decided
                .iter()
                .zip(&path)
                .filter(|(_, &c)| c > 0)
                .map(|(n, &c)| (n.clone(), Value(c - 1)))
                .collect(),
        ))
    }
}

/// Checks `[[P(u)]]_tau(u') = f_tau(u')` for every `tau` over the `u'` run.
fn causal_pair(space: &Space, program: &Program, class: usize, u: usize, up: usize, budget: &Budget) -> Result<Option<Counterexample>, ApproxError> {
    let (g, i) = &space.classes[class];
    let joint = Joint::new(&space.domain, g, i, &space.runs[up]);
    let Some(tau) = joint.search(budget.states)? else {
        return Ok(None);
    };
    let forced = run_forced(program, &space.domain, &space.tuples[up], &tau)?;
    let c = first_mismatch(g, i, &forced, &space.tuples[u], &tau).expect("the search found a disagreement");
    Ok(Some(c))
}

fn pow_sat(base: u128, exp: usize) -> u128 {
    u32::try_from(exp)
        .ok()
        .and_then(|e| base.checked_pow(e))
        .unwrap_or(u128::MAX)
}

/// `(checked, skipped)` intervention counts for the pair `(u, u')`.
fn tau_counts(space: &Space, u: usize, up: usize) -> (u128, u128) {
    let base = space.domain.size() as u128 + 1;
    let here: BTreeSet<&str> = space.runs[up].instances.iter().map(|i| i.name.as_str()).collect();
    let extra = space.runs[u]
        .instances
        .iter()
        .filter(|i| !here.contains(i.name.as_str()))
        .count();
    let checked = pow_sat(base, here.len());
    let all = pow_sat(base, here.len() + extra);
    (checked, all.saturating_sub(checked))
}

/// Results of the full causal comparison for each class and each `u'`.
fn causal_table(space: &Space, program: &Program, budget: &Budget) -> Result<Vec<Option<Counterexample>>, ApproxError> {
    let n = space.len();
    let rep: Vec<usize> = (0..space.classes.len())
        .map(|c| space.class_of.iter().position(|&k| k == c).expect("nonempty class"))
        .collect();
    (0..space.classes.len() * n)
        .into_par_iter()
        .map(|k| causal_pair(space, program, k / n, rep[k / n], k % n, budget))
        .collect()
}

pub fn check_causal(
    program: &Program,
    domain: &Domain,
    semantics: Semantics,
    level: Level,
    budget: &Budget,
) -> Result<Verdict, ApproxError> {
    let space = Space::new(program, domain, semantics, level == Level::Global, budget)?;
    let n = space.len();
    let mut verdict = Verdict {
        mode: Mode::Causal,
        level,
        semantics,
        pass: true,
        counterexample: None,
        pairs_checked: 0,
        tau_checked: 0,
        tau_skipped: 0,
    };
    let counterexample = match level {
        Level::Pointwise => {
            verdict.pairs_checked = n as u64;
            verdict.tau_checked = n as u128;
            (0..n).into_par_iter().find_map_first(|u| {
                let (g, i) = &space.classes[space.class_of[u]];
                first_mismatch(g, i, &space.runs[u], &space.tuples[u], &BTreeMap::new())
            })
        }
        Level::Local => {
            let found = (0..n).into_par_iter().find_map_first(|u| {
                match causal_pair(&space, program, space.class_of[u], u, u, budget) {
                    Ok(None) => None,
                    other => Some((u, other)),
                }
            });
            let upto = match &found {
                Some((u, _)) => *u + 1,
                None => n,
            };
            verdict.pairs_checked = upto as u64;
            for u in 0..upto {
                verdict.tau_checked = verdict.tau_checked.saturating_add(tau_counts(&space, u, u).0);
            }
            found.map(|(_, r)| r).transpose()?.flatten()
        }
        Level::Global => {
            let table = causal_table(&space, program, budget)?;
            let mut first = None;
            'outer: for u in 0..n {
                for up in 0..n {
                    let (c, s) = tau_counts(&space, u, up);
                    verdict.pairs_checked += 1;
                    verdict.tau_checked = verdict.tau_checked.saturating_add(c);
                    verdict.tau_skipped = verdict.tau_skipped.saturating_add(s);
                    if let Some(c) = &table[space.class_of[u] * n + up] {
                        first = Some(Counterexample {
                            u: space.tuples[u].clone(),
                            ..c.clone()
                        });
                        break 'outer;
                    }
                }
            }
            first
        }
    };
    verdict.pass = counterexample.is_none();
    verdict.counterexample = counterexample;
    Ok(verdict)
}

pub fn check(
    program: &Program,
    domain: &Domain,
    semantics: Semantics,
    mode: Mode,
    level: Level,
    budget: &Budget,
) -> Result<Verdict, ApproxError> {
    match mode {
        Mode::Functional => check_functional(program, domain, semantics, level, budget),
        Mode::Causal => check_causal(program, domain, semantics, level, budget),
    }
}

// ---------------------------------------------------------------- power

/// `u ~> u'` over all pairs of input tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerRelation {
    pub mode: Mode,
    pub semantics: Semantics,
    pub tuples: Vec<Vec<Value>>,
    /// Row-major membership: `holds[i * n + j]` for `(tuples[i], tuples[j])`.
    holds: Vec<bool>,
    /// Interventions skipped because they name variables absent from the
    /// `u'` run, saturating.
    pub tau_skipped: u128,
}

impl PowerRelation {
    fn n(&self) -> usize {
        self.tuples.len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.holds[i * self.n() + j]
    }

    pub fn len(&self) -> usize {
        self.holds.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_reflexive(&self) -> bool {
        (0..self.n()).all(|i| self.contains(i, i))
    }

    pub fn is_total(&self) -> bool {
        self.holds.iter().all(|&b| b)
    }

    /// Members as index pairs, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n();
        (0..n * n).filter(|&k| self.holds[k]).map(move |k| (k / n, k % n))
    }

    pub fn is_subset(&self, other: &PowerRelation) -> bool {
        self.holds.iter().zip(&other.holds).all(|(&a, &b)| !a || b)
    }

    pub fn to_json(&self, program: &Program) -> serde_json::Value {
        json!({
            "mode": self.mode.name(),
            "semantics": self.semantics.name(),
            "inputs": program.inputs,
            "tuples": self.n(),
            "pairs": self.len(),
            "reflexive": self.is_reflexive(),
            "total": self.is_total(),
            "tauSkipped": self.tau_skipped.to_string(),
        })
    }

    /// One `u<TAB>u'` line per member, comma-separated labels, sorted.
    pub fn dump(&self, domain: &Domain) -> String {
        let row = |i: usize| labels(domain, &self.tuples[i]).join(",");
        let mut lines: Vec<String> = self.pairs().map(|(i, j)| format!("{}\t{}\n", row(i), row(j))).collect();
        lines.sort();
        lines.concat()
    }
}

pub fn power(
    program: &Program,
    domain: &Domain,
    semantics: Semantics,
    mode: Mode,
    budget: &Budget,
) -> Result<PowerRelation, ApproxError> {
    let space = Space::new(program, domain, semantics, true, budget)?;
    let n = space.len();
    let mut tau_skipped = 0u128;
    let holds: Vec<bool> = match mode {
        Mode::Functional => {
            let compiled = compile_classes(&space)?;
            (0..n * n)
                .into_par_iter()
                .map(|k| functional_mismatch(&space, &compiled, k / n, k % n).is_none())
                .collect()
        }
        Mode::Causal => {
            let table = causal_table(&space, program, budget)?;
            for u in 0..n {
                for up in 0..n {
                    tau_skipped = tau_skipped.saturating_add(tau_counts(&space, u, up).1);
                }
            }
            (0..n * n)
                .map(|k| table[space.class_of[k / n] * n + k % n].is_none())
                .collect()
        }
    };
    Ok(PowerRelation {
        mode,
        semantics,
        tuples: space.tuples,
        holds,
        tau_skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// A is contained in B.
    Below,
    /// B is contained in A.
    Above,
    Equal,
    Incomparable,
}

impl Comparison {
    pub fn name(self) -> &'static str {
        match self {
            Comparison::Below => "A<=B",
            Comparison::Above => "B<=A",
            Comparison::Equal => "equal",
            Comparison::Incomparable => "incomparable",
        }
    }
}

pub fn compare(a: &PowerRelation, b: &PowerRelation) -> Result<Comparison, ApproxError> {
    if a.tuples != b.tuples {
        return Err(ApproxError::DifferentSpaces);
    }
    Ok(match (a.is_subset(b), b.is_subset(a)) {
        (true, true) => Comparison::Equal,
        (true, false) => Comparison::Below,
        (false, true) => Comparison::Above,
        (false, false) => Comparison::Incomparable,
    })
}

/// Builds a relation from explicit membership; for tests and tools that
/// construct relations by other means.
pub fn relation_from_fn(
    mode: Mode,
    semantics: Semantics,
    tuples: Vec<Vec<Value>>,
    holds: impl Fn(&[Value], &[Value]) -> bool,
) -> PowerRelation {
    let holds = tuples
        .iter()
        .flat_map(|u| tuples.iter().map(|v| (u, v)).collect::<Vec<_>>())
        .map(|(u, v)| holds(u, v))
        .collect();
    PowerRelation {
        mode,
        semantics,
        tuples,
        holds,
        tau_skipped: 0,
    }
}
