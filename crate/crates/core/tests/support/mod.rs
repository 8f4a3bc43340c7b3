//! Independent oracles shared by the integration tests. Nothing here calls
//! into the search code it is used to check.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use provcause::causal::{CausalSituation, Valuation};
use provcause::provgraph::{Interpretation, ProvGraph};
use provcause::slp::{emit, run, run_forced, Program, Semantics};
use provcause::translate::{to_causal, TranslationOptions};
use provcause::{Domain, Value};

pub type Literal = (String, Value);

/// `(W, x', w')` as plain maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaiveWitness {
    pub w: Vec<String>,
    pub x_prime: Valuation,
    pub w_prime: Valuation,
}

pub fn subsets_by_size<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    for k in 0..=items.len() {
        out.extend(k_subsets(items, k));
    }
    out
}

pub fn k_subsets<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    if k == 0 {
        return vec![vec![]];
    }
    if items.len() < k {
        return vec![];
    }
    let mut out = Vec::new();
    for (i, first) in items.iter().enumerate() {
        for mut rest in k_subsets(&items[i + 1..], k - 1) {
            rest.insert(0, first.clone());
            out.push(rest);
        }
    }
    out
}

fn tuples(size: u32, n: usize) -> Vec<Vec<Value>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..size).map(move |v| {
                    let mut t = t.clone();
                    t.push(Value(v));
                    t
                })
            })
            .collect();
    }
    out
}

/// `Y` after intervening with `settings` in the situation's own context.
fn outcome(s: &CausalSituation, settings: &Valuation, y: &str) -> Value {
    s.model.intervene(settings).unwrap().solve(&s.context()).unwrap()[y]
}

/// Literal reading of the weak-cause definition: every `W` disjoint from
/// `X`, every `x'`, every `w'`, and in 2(b) every `Z` outside `X ∪ W`.
/// `X` is taken in declaration order.
pub fn naive_weak(s: &CausalSituation, candidate: &[Literal], target: &Literal) -> Option<NaiveWitness> {
    let vars: Vec<String> = s.model.endogenous().map(String::from).collect();
    let mut x: Vec<Literal> = candidate.to_vec();
    x.sort_by_key(|(n, _)| vars.iter().position(|v| v == n));
    let xs: BTreeSet<&String> = x.iter().map(|(n, _)| n).collect();
    let rest: Vec<String> = vars.iter().filter(|v| !xs.contains(v)).cloned().collect();
    let size = s.model.domain().size();
    for w in subsets_by_size(&rest) {
        for x_prime in tuples(size, x.len()) {
            for w_prime in tuples(size, w.len()) {
                let mut a: Valuation = x.iter().map(|(n, _)| n.clone()).zip(x_prime.clone()).collect();
                a.extend(w.iter().cloned().zip(w_prime.clone()));
                if outcome(s, &a, &target.0) == target.1 {
                    continue;
                }
                let outside: Vec<String> = rest.iter().filter(|v| !w.contains(v)).cloned().collect();
                let all_z = subsets_by_size(&outside).into_iter().all(|z| {
                    let mut b: Valuation = x.iter().cloned().collect();
                    b.extend(w.iter().cloned().zip(w_prime.clone()));
                    b.extend(z.iter().map(|v| (v.clone(), s.valuation[v])));
                    outcome(s, &b, &target.0) == target.1
                });
                if all_z {
                    return Some(NaiveWitness {
                        w: w.clone(),
                        x_prime: x.iter().map(|(n, _)| n.clone()).zip(x_prime.clone()).collect(),
                        w_prime: w.iter().cloned().zip(w_prime.clone()).collect(),
                    });
                }
            }
        }
    }
    None
}

/// `(weak, actual, first weak proper subset)`.
pub fn naive_actual(
    s: &CausalSituation,
    candidate: &[Literal],
    target: &Literal,
) -> (bool, bool, Option<Vec<Literal>>) {
    let vars: Vec<String> = s.model.endogenous().map(String::from).collect();
    let mut x: Vec<Literal> = candidate.to_vec();
    x.sort_by_key(|(n, _)| vars.iter().position(|v| v == n));
    let weak = naive_weak(s, &x, target).is_some();
    let failing = (1..x.len())
        .flat_map(|k| k_subsets(&x, k))
        .find(|sub| naive_weak(s, sub, target).is_some());
    (weak, weak && failing.is_none(), failing)
}

/// All actual causes of size at most `max`, over every endogenous variable.
pub fn naive_causes(s: &CausalSituation, target: &Literal, max: usize) -> Vec<Vec<Literal>> {
    let lits: Vec<Literal> = s
        .model
        .endogenous()
        .filter(|v| *v != target.0)
        .map(|v| (v.to_string(), s.valuation[v]))
        .collect();
    (1..=max)
        .flat_map(|k| k_subsets(&lits, k))
        .filter(|c| naive_actual(s, c, target).1)
        .collect()
}

/// Pairs `(x, y)` with a directed path from `x` to `y` through the graph's
/// edges (process used artifact, artifact generated by process), found by
/// depth-first search from each node.
pub fn reachability(graph: &ProvGraph) -> BTreeSet<(String, String)> {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for u in &graph.used {
        adj.entry(&u.process).or_default().push(&u.artifact);
    }
    for g in &graph.generated {
        adj.entry(&g.artifact).or_default().push(&g.process);
    }
    let nodes: Vec<&str> = graph
        .artifacts
        .iter()
        .map(|a| a.id.as_str())
        .chain(graph.processes.iter().map(|p| p.id.as_str()))
        .collect();
    let mut out = BTreeSet::new();
    for &start in &nodes {
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            for &m in adj.get(n).map(|v| v.as_slice()).unwrap_or(&[]) {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        for m in seen {
            out.insert((start.to_string(), m.to_string()));
        }
    }
    out
}

/// Every partial valuation of `names`, in lexicographic order with the
/// first name most significant and "not set" before each value.
pub fn all_interventions(names: &[String], size: u32) -> Vec<BTreeMap<String, Value>> {
    let mut out = vec![BTreeMap::new()];
    for name in names.iter().rev() {
        let mut next = Vec::new();
        for choice in std::iter::once(None).chain((0..size).map(Some)) {
            for rest in &out {
                let mut t = rest.clone();
                if let Some(v) = choice {
                    t.insert(name.clone(), Value(v));
                }
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// `(variable, expected, got)` for the first disagreement between the
/// forced run at `u_prime` and the graph's causal model intervened by the
/// same `tau`, solved in the context `u_prime`.
pub fn naive_mismatch(
    program: &Program,
    domain: &Domain,
    graph: &ProvGraph,
    interp: &Interpretation,
    u_prime: &[Value],
    tau: &BTreeMap<String, Value>,
) -> Option<(String, Value, Value)> {
    let forced = run_forced(program, domain, u_prime, tau).unwrap();
    let model = to_causal(graph, interp, TranslationOptions::default()).unwrap().situation.model;
    let settings: Valuation = tau
        .iter()
        .filter(|(k, _)| model.is_endogenous(k))
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    let context: Valuation = graph.inputs.iter().cloned().zip(u_prime.iter().copied()).collect();
    let solved = model.intervene(&settings).unwrap().solve(&context).unwrap();
    for inst in &forced.instances {
        if model.is_endogenous(&inst.name) && solved[&inst.name] != inst.value {
            return Some((inst.name.clone(), inst.value, solved[&inst.name]));
        }
    }
    let got = solved[&graph.result];
    (got != forced.value).then(|| (forced.result.clone(), forced.value, got))
}

/// The first failing intervention for the graph recorded at `u` against
/// the program at `u_prime`.
pub fn naive_first_failure(
    program: &Program,
    domain: &Domain,
    semantics: Semantics,
    u: &[Value],
    u_prime: &[Value],
) -> Option<(BTreeMap<String, Value>, String, Value, Value)> {
    let (graph, interp) = emit(program, domain, semantics, u).unwrap();
    let names: Vec<String> = run(program, domain, u_prime)
        .unwrap()
        .instances
        .into_iter()
        .map(|i| i.name)
        .collect();
    all_interventions(&names, domain.size()).into_iter().find_map(|tau| {
        naive_mismatch(program, domain, &graph, &interp, u_prime, &tau).map(|(v, e, g)| (tau, v, e, g))
    })
}

/// Source text of a random well-formed program over `domain`, with
/// conditionals and, on numeric domains, loops.
pub fn random_program(seed: u64, domain: &Domain) -> String {
    use rand::Rng;
    let mut rng = provcause::gen::rng(seed);
    let numeric = domain.is_numeric();
    let n_inputs = rng.gen_range(1..=3);
    let inputs: Vec<String> = (0..n_inputs).map(|i| format!("i{i}")).collect();
    let mut visible: Vec<String> = inputs.clone();
    let mut assigned: Vec<String> = Vec::new();
    let mut lines = vec![format!("input {};", inputs.join(", "))];
    let size = domain.size();

    fn atom(rng: &mut impl rand::Rng, visible: &[String], size: u32) -> String {
        if rng.gen_bool(0.2) {
            rng.gen_range(0..size).to_string()
        } else {
            visible[rng.gen_range(0..visible.len())].clone()
        }
    }
    fn call(rng: &mut impl rand::Rng, visible: &[String], size: u32, numeric: bool) -> String {
        let (op, arity) = if numeric {
            [("add", rng.gen_range(1..=3)), ("mul", 2), ("copy", 1)][rng.gen_range(0..3)]
        } else {
            [("and", 2), ("or", 2), ("xor", 2), ("not", 1), ("copy", 1)][rng.gen_range(0..5)]
        };
        let args: Vec<String> = (0..arity).map(|_| atom(rng, visible, size)).collect();
        format!("{op}({})", args.join(", "))
    }
    fn rhs(rng: &mut impl rand::Rng, visible: &[String], inputs: &[String], size: u32, numeric: bool) -> String {
        match rng.gen_range(0..6) {
            0 => atom(rng, visible, size),
            1 => format!(
                "if {} then {} else {}",
                inputs[rng.gen_range(0..inputs.len())],
                call(rng, visible, size, numeric),
                call(rng, visible, size, numeric)
            ),
            _ => call(rng, visible, size, numeric),
        }
    }

    for k in 0..rng.gen_range(1..=4) {
        if numeric && !assigned.is_empty() && rng.gen_bool(0.3) {
            let count = &inputs[rng.gen_range(0..inputs.len())];
            let mut body = Vec::new();
            for _ in 0..rng.gen_range(1..=2) {
                let target = assigned[rng.gen_range(0..assigned.len())].clone();
                body.push(format!("{target} := {};", rhs(&mut rng, &visible, &inputs, size, numeric)));
            }
            lines.push(format!("repeat {count} {{ {} }}", body.join(" ")));
        } else {
            let v = format!("v{k}");
            lines.push(format!("{v} := {};", rhs(&mut rng, &visible, &inputs, size, numeric)));
            visible.push(v.clone());
            assigned.push(v);
        }
    }
    let result = assigned.last().unwrap_or(&inputs[0]);
    lines.push(format!("return {result}"));
    lines.join("\n")
}
