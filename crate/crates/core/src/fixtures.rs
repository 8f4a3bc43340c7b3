//! Bundled example graphs, models and programs.

use crate::causal::{read_model, CausalModel};
use crate::provgraph::{read_graph, read_interpretation, Interpretation, ProvGraph};

pub const CAKE_GRAPH: &str = include_str!("../fixtures/cake.json");
pub const CAKE_OPS: &str = include_str!("../fixtures/cake-ops.json");
pub const CAKE_MODEL: &str = include_str!("../fixtures/cake-model.json");
pub const CONST_GATE_GRAPH: &str = include_str!("../fixtures/constgate.json");
pub const CONST_GATE_OPS: &str = include_str!("../fixtures/constgate-ops.json");
pub const OR_GRAPH: &str = include_str!("../fixtures/or.json");
pub const OR_OPS: &str = include_str!("../fixtures/or-ops.json");
pub const INCR_PROGRAM: &str = include_str!("../fixtures/incr.slp");
pub const POWER_PROGRAM: &str = include_str!("../fixtures/power.slp");
pub const SELECT_PROGRAM: &str = include_str!("../fixtures/select.slp");
pub const AFFINE_PROGRAM: &str = include_str!("../fixtures/affine.slp");

fn load(graph: &str, ops: &str) -> (ProvGraph, Interpretation) {
    let g = read_graph(graph.as_bytes()).expect("bundled graph parses");
    let i = read_interpretation(ops.as_bytes(), &g.domain).expect("bundled ops parse");
    (g, i)
}

/// The cake graph: six ingredients, four processes, every label 1.
pub fn cake() -> (ProvGraph, Interpretation) {
    load(CAKE_GRAPH, CAKE_OPS)
}

/// The cake as a causal model with fault terms `U1..U4` and the
/// ingredients as endogenous facts.
pub fn cake_model() -> CausalModel {
    read_model(CAKE_MODEL.as_bytes()).expect("bundled model parses")
}

/// One process that outputs 1 whatever its input is.
pub fn const_gate() -> (ProvGraph, Interpretation) {
    load(CONST_GATE_GRAPH, CONST_GATE_OPS)
}

/// `out := x or y` with both inputs 1.
pub fn or_gate() -> (ProvGraph, Interpretation) {
    load(OR_GRAPH, OR_OPS)
}
