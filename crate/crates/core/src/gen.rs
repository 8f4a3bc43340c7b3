//! Seeded random causal models and provenance graphs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::causal::{CausalModel, CausalSituation, Equation, Valuation};
use crate::domain::{Domain, Value};
use crate::func::{FnSpec, Table};
use crate::provgraph::{
    evaluate, Artifact, Generated, Interpretation, Process, ProvGraph, Used,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub max_exogenous: usize,
    pub max_endogenous: usize,
    pub max_parents: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            max_exogenous: 2,
            max_endogenous: 5,
            max_parents: 3,
        }
    }
}

fn random_table(rng: &mut impl Rng, domain: &Domain, arity: usize) -> Table {
    let outputs = domain
        .tuples(arity)
        .map(|_| Value(rng.gen_range(0..domain.size())))
        .collect();
    Table::from_outputs(domain, arity, outputs).expect("one output per tuple")
}

/// A random boolean model. Exogenous `U0..`, endogenous `X0..` in
/// topological order; each `Xi` reads a nonempty random set of earlier
/// variables through a random truth table.
pub fn random_model(rng: &mut impl Rng, params: ModelParams) -> CausalModel {
    let domain = Domain::Bool;
    let n_exo = rng.gen_range(1..=params.max_exogenous);
    let n_endo = rng.gen_range(1..=params.max_endogenous);
    let exogenous: Vec<String> = (0..n_exo).map(|i| format!("U{i}")).collect();
    let mut names = exogenous.clone();
    let mut equations = Vec::new();
    for i in 0..n_endo {
        let k = rng.gen_range(1..=params.max_parents.min(names.len()));
        let mut parents: Vec<String> = names.choose_multiple(rng, k).cloned().collect();
        parents.sort_by_key(|p| names.iter().position(|n| n == p));
        let func = FnSpec::Table(random_table(rng, &domain, parents.len()));
        let id = format!("X{i}");
        equations.push(Equation { id: id.clone(), parents, func });
        names.push(id);
    }
    CausalModel::new(domain, exogenous, equations).expect("generated models are well formed")
}

/// A random model solved in a random context.
pub fn random_situation(rng: &mut impl Rng, params: ModelParams) -> CausalSituation {
    let model = random_model(rng, params);
    let context: Valuation = model
        .exogenous()
        .iter()
        .map(|u| (u.clone(), Value(rng.gen_range(0..model.domain().size()))))
        .collect();
    CausalSituation::from_context(model, &context).expect("context covers all exogenous")
}

/// `count` situations drawn from one seed.
pub fn corpus(seed: u64, count: usize, params: ModelParams) -> Vec<CausalSituation> {
    let mut r = rng(seed);
    (0..count).map(|_| random_situation(&mut r, params)).collect()
}

#[derive(Debug, Clone)]
pub struct GraphParams {
    pub domain: Domain,
    pub max_inputs: usize,
    pub max_processes: usize,
    pub max_arity: usize,
    /// Upper bound on artifacts plus processes.
    pub max_nodes: usize,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            domain: Domain::Bool,
            max_inputs: 6,
            max_processes: 12,
            max_arity: 3,
            max_nodes: 30,
        }
    }
}

/// A random valid graph with its interpretation, labeled by evaluating it
/// at random inputs. Inputs are `a0..`, process `pj` has name `fj` and
/// generates the next artifact; the last artifact is the result.
pub fn random_graph(rng: &mut impl Rng, params: &GraphParams) -> (ProvGraph, Interpretation) {
    let domain = params.domain.clone();
    let n = rng.gen_range(1..=params.max_inputs.min(params.max_nodes));
    let room = (params.max_nodes - n) / 2;
    let k = rng.gen_range(0..=params.max_processes.min(room));
    let mut artifacts: Vec<Artifact> = (0..n)
        .map(|i| Artifact {
            id: format!("a{i}"),
            value: Value(0),
            input: true,
        })
        .collect();
    let mut processes = Vec::new();
    let mut used = Vec::new();
    let mut generated = Vec::new();
    let mut interp = Interpretation::new();
    for j in 0..k {
        let pid = format!("p{j}");
        let name = format!("f{j}");
        let arity = rng.gen_range(1..=params.max_arity);
        for port in 1..=arity {
            let a = &artifacts[rng.gen_range(0..artifacts.len())];
            used.push(Used {
                process: pid.clone(),
                artifact: a.id.clone(),
                port: port as u32,
            });
        }
        let out = format!("a{}", n + j);
        generated.push(Generated {
            artifact: out.clone(),
            process: pid.clone(),
        });
        artifacts.push(Artifact {
            id: out,
            value: Value(0),
            input: false,
        });
        interp.insert(name.clone(), arity, FnSpec::Table(random_table(rng, &domain, arity)));
        processes.push(Process { id: pid, name });
    }
    let graph = ProvGraph {
        domain: domain.clone(),
        result: artifacts.last().expect("at least one input").id.clone(),
        inputs: (0..n).map(|i| format!("a{i}")).collect(),
        artifacts,
        processes,
        used,
        generated,
    };
    let inputs: Vec<Value> = (0..n).map(|_| Value(rng.gen_range(0..domain.size()))).collect();
    let eval = evaluate(&graph, &interp, &inputs).expect("generated graphs are valid");
    (graph.relabeled(&eval.values), interp)
}

pub fn random_graphs(seed: u64, count: usize, params: &GraphParams) -> Vec<(ProvGraph, Interpretation)> {
    let mut r = rng(seed);
    (0..count).map(|_| random_graph(&mut r, params)).collect()
}

/// Process id used for endogenous variable `x` by [`graph_of_situation`].
pub fn process_for(x: &str) -> String {
    format!("p_{x}")
}

/// Draws a situation as a provenance graph: exogenous variables become
/// input artifacts, each endogenous `X` becomes a process `p_X` (name `f_X`)
/// using its parents in order and generating artifact `X`. Labels come from
/// the valuation; the last endogenous variable is the result.
pub fn graph_of_situation(situation: &CausalSituation) -> (ProvGraph, Interpretation) {
    let model = &situation.model;
    let label = |id: &str| situation.valuation[id];
    let mut artifacts: Vec<Artifact> = model
        .exogenous()
        .iter()
        .map(|u| Artifact {
            id: u.clone(),
            value: label(u),
            input: true,
        })
        .collect();
    let mut processes = Vec::new();
    let mut used = Vec::new();
    let mut generated = Vec::new();
    let mut interp = Interpretation::new();
    for eq in model.equations() {
        let pid = process_for(&eq.id);
        let name = format!("f_{}", eq.id);
        for (i, p) in eq.parents.iter().enumerate() {
            used.push(Used {
                process: pid.clone(),
                artifact: p.clone(),
                port: i as u32 + 1,
            });
        }
        generated.push(Generated {
            artifact: eq.id.clone(),
            process: pid.clone(),
        });
        artifacts.push(Artifact {
            id: eq.id.clone(),
            value: label(&eq.id),
            input: false,
        });
        interp.insert(name.clone(), eq.parents.len(), eq.func.clone());
        processes.push(Process { id: pid, name });
    }
    let result = model
        .equations()
        .last()
        .map(|e| e.id.clone())
        .unwrap_or_else(|| model.exogenous()[0].clone());
    let graph = ProvGraph {
        domain: model.domain().clone(),
        artifacts,
        processes,
        used,
        generated,
        result,
        inputs: model.exogenous().to_vec(),
    };
    (graph, interp)
}
