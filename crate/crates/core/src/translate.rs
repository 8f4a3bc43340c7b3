//! Reading a provenance graph as a causal situation `(M_G, sigma_G)`.
//!
//! Input artifacts become exogenous; every other artifact and every process
//! becomes endogenous. An artifact copies its generating process; a process
//! applies its interpretation function to the artifacts it used, in port
//! order. With fault terms enabled each process `p` also reads a fresh
//! exogenous `U_p` through a binary combiner.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::causal::{CausalError, CausalModel, CausalSituation, Equation, Valuation};
use crate::domain::Value;
use crate::func::{Builtin, FnError, FnSpec};
use crate::provgraph::{validate, Interpretation, ProvGraph, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranslationOptions {
    pub fault_terms: bool,
    pub fault_combiner: Builtin,
}

impl Default for TranslationOptions {
    fn default() -> Self {
        TranslationOptions {
            fault_terms: false,
            fault_combiner: Builtin::Xor,
        }
    }
}

impl TranslationOptions {
    pub fn with_faults() -> Self {
        TranslationOptions {
            fault_terms: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranslateError {
    #[error("graph is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("fault combiner: {0}")]
    Combiner(FnError),
    #[error("generated name `{0}` collides with a graph node")]
    NameClash(String),
    #[error(transparent)]
    Causal(#[from] CausalError),
}

/// `(M_G, sigma_G)` plus the nodes whose recorded label breaks an equation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation {
    pub situation: CausalSituation,
    pub inconsistent_at: Vec<String>,
}

impl Translation {
    pub fn is_consistent(&self) -> bool {
        self.inconsistent_at.is_empty()
    }
}

pub fn fault_term_name(process: &str) -> String {
    format!("U_{process}")
}

/// Exogenous stand-in introduced by [`endogenize_inputs`].
pub fn input_context_name(artifact: &str) -> String {
    format!("U_{artifact}")
}

pub fn to_causal(
    graph: &ProvGraph,
    interp: &Interpretation,
    opts: TranslationOptions,
) -> Result<Translation, TranslateError> {
    let report = validate(graph, interp);
    if !report.is_valid() {
        return Err(TranslateError::Invalid(report.violations));
    }
    let domain = &graph.domain;
    if opts.fault_terms {
        opts.fault_combiner
            .check(domain, 2)
            .map_err(TranslateError::Combiner)?;
    }

    let mut exogenous = graph.inputs.clone();
    let mut equations = Vec::new();
    let mut sigma = Valuation::new();
    for id in &graph.inputs {
        sigma.insert(id.clone(), graph.artifact(id).expect("validated").value);
    }

    for p in &graph.processes {
        let op = interp.get(&p.name).expect("validated");
        let mut parents: Vec<String> = graph.uses_of(&p.id).iter().map(|u| u.artifact.clone()).collect();
        let args: Vec<Value> = parents
            .iter()
            .map(|a| graph.artifact(a).expect("validated").value)
            .collect();
        // sigma_G(p) is what the process computes from its recorded inputs.
        let mut value = op.func.apply(domain, &args);
        let func = if opts.fault_terms {
            let u = fault_term_name(&p.id);
            if graph.kind(&u).is_some() {
                return Err(TranslateError::NameClash(u));
            }
            exogenous.push(u.clone());
            sigma.insert(u.clone(), Value(0));
            parents.push(u);
            value = opts.fault_combiner.apply(domain, &[value, Value(0)]);
            FnSpec::Faulted {
                base: Box::new(op.func.clone()),
                combiner: opts.fault_combiner,
            }
        } else {
            op.func.clone()
        };
        sigma.insert(p.id.clone(), value);
        equations.push(Equation {
            id: p.id.clone(),
            parents,
            func,
        });
    }

    for a in graph.artifacts.iter().filter(|a| !a.input) {
        let p = graph.generator(&a.id).expect("validated");
        equations.push(Equation {
            id: a.id.clone(),
            parents: vec![p.to_string()],
            func: FnSpec::Builtin(Builtin::Copy),
        });
        sigma.insert(a.id.clone(), a.value);
    }

    let model = CausalModel::new(domain.clone(), exogenous, equations)?;
    let inconsistent_at = model.violated_equations(&sigma)?;
    Ok(Translation {
        situation: CausalSituation {
            model,
            valuation: sigma,
        },
        inconsistent_at,
    })
}

/// Makes each listed exogenous variable `x` endogenous, with equation
/// `x := U_x` over a fresh exogenous `U_x` carrying the old value.
/// Lets input artifacts take part in actual-cause queries while the
/// context stays fixed.
pub fn endogenize_inputs(
    situation: &CausalSituation,
    inputs: &[String],
) -> Result<CausalSituation, TranslateError> {
    let model = &situation.model;
    let lifted: BTreeSet<&str> = inputs.iter().map(String::as_str).collect();
    let mut exogenous = Vec::new();
    let mut equations = Vec::new();
    let mut valuation = situation.valuation.clone();
    for u in model.exogenous() {
        if !lifted.contains(u.as_str()) {
            exogenous.push(u.clone());
            continue;
        }
        let ctx = input_context_name(u);
        if model.slot(&ctx).is_some() {
            return Err(TranslateError::NameClash(ctx));
        }
        let v = *valuation.get(u).ok_or_else(|| CausalError::Incomplete(u.clone()))?;
        valuation.insert(ctx.clone(), v);
        exogenous.push(ctx.clone());
        equations.push(Equation {
            id: u.clone(),
            parents: vec![ctx],
            func: FnSpec::Builtin(Builtin::Copy),
        });
    }
    equations.extend(model.equations().iter().cloned());
    let model = CausalModel::new(model.domain().clone(), exogenous, equations)?;
    Ok(CausalSituation { model, valuation })
}

/// The situation used for cause analysis of a graph: `(M_G, sigma_G)` with
/// the input artifacts made endogenous.
pub fn cause_situation(
    graph: &ProvGraph,
    interp: &Interpretation,
    opts: TranslationOptions,
) -> Result<Translation, TranslateError> {
    let t = to_causal(graph, interp, opts)?;
    Ok(Translation {
        situation: endogenize_inputs(&t.situation, &graph.inputs)?,
        inconsistent_at: t.inconsistent_at,
    })
}

/// True iff solving `M_G` at the recorded input labels reproduces every
/// artifact label.
pub fn round_trip(graph: &ProvGraph, interp: &Interpretation) -> bool {
    let Ok(t) = to_causal(graph, interp, TranslationOptions::default()) else {
        return false;
    };
    let Ok(solved) = t.situation.model.solve(&t.situation.context()) else {
        return false;
    };
    graph
        .artifacts
        .iter()
        .all(|a| solved.get(&a.id) == Some(&a.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::fixtures;
    use crate::provgraph::evaluate;

    #[test]
    fn cake_translation_is_consistent() {
        let (g, i) = fixtures::cake();
        let e = evaluate(&g, &i, &[Value(1); 6]).unwrap();
        let g = g.relabeled(&e.values);
        let t = to_causal(&g, &i, TranslationOptions::default()).unwrap();
        assert!(t.is_consistent());
        assert_eq!(t.situation.value("cake"), Some(Value(1)));
        assert_eq!(t.situation.model.exogenous().len(), 6);
        assert_eq!(t.situation.model.equations().len(), 8);
        assert!(round_trip(&g, &i));
    }

    #[test]
    fn hand_edited_label_is_flagged() {
        let (mut g, i) = fixtures::cake();
        g.artifacts.iter_mut().find(|a| a.id == "cake").unwrap().value = Value(0);
        let t = to_causal(&g, &i, TranslationOptions::default()).unwrap();
        assert_eq!(t.inconsistent_at, vec!["cake".to_string()]);
        assert!(!t.situation.is_consistent());
        assert_eq!(t.situation.value("cake"), Some(Value(0)), "label kept");
        assert!(!round_trip(&g, &i));
    }

    #[test]
    fn fault_terms_add_one_exogenous_per_process() {
        let (g, i) = fixtures::cake();
        let t = to_causal(&g, &i, TranslationOptions::with_faults()).unwrap();
        let m = &t.situation.model;
        assert_eq!(m.exogenous().len(), 6 + 4);
        assert!(m.equation("mixProcess").unwrap().parents.contains(&"U_mixProcess".to_string()));
        assert!(t.is_consistent());
    }

    #[test]
    fn xor_combiner_needs_bool() {
        let (mut g, i) = fixtures::or_gate();
        g.domain = Domain::Mod(3);
        let i2 = crate::provgraph::Interpretation::new().with("or", 2, FnSpec::Builtin(Builtin::Add));
        assert!(matches!(
            to_causal(&g, &i2, TranslationOptions::with_faults()),
            Err(TranslateError::Combiner(_))
        ));
        let opts = TranslationOptions {
            fault_terms: true,
            fault_combiner: Builtin::Add,
        };
        assert!(to_causal(&g, &i2, opts).is_ok());
        let _ = i;
    }

    #[test]
    fn causal_graph_mirrors_edges() {
        let (g, i) = fixtures::cake();
        let m = to_causal(&g, &i, TranslationOptions::default()).unwrap().situation.model;
        for u in &g.used {
            assert!(m.equation(&u.process).unwrap().parents.contains(&u.artifact));
        }
        for e in m.equations() {
            if let Some(a) = g.artifact(&e.id) {
                assert_eq!(e.parents, vec![g.generator(&a.id).unwrap().to_string()]);
            }
        }
    }

    #[test]
    fn endogenized_inputs_keep_values() {
        let (g, i) = fixtures::cake();
        let t = cause_situation(&g, &i, TranslationOptions::default()).unwrap();
        let m = &t.situation.model;
        assert!(m.is_endogenous("water"));
        assert!(m.is_exogenous("U_water"));
        assert!(t.situation.is_consistent());
        assert_eq!(m.solve(&t.situation.context()).unwrap(), t.situation.valuation);
    }
}
