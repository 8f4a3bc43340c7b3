//! Python bindings. Graphs, interpretations and models are passed as
//! JSON text in the same formats the CLI reads; values are labels.

use std::collections::BTreeMap;

use provcause::approx::{self, Budget, Level, Mode};
use provcause::causal::read_model;
use provcause::hpcause::{is_actual_cause as actual_cause, CauseQuery};
use provcause::opmrules::{self, Status};
use provcause::provgraph::{evaluate as eval_graph, read_graph, read_interpretation};
use provcause::slp::{self, Semantics};
use provcause::translate::{cause_situation, TranslationOptions};
use provcause::{CausalSituation, Domain, Value};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn from_json<'py>(py: Python<'py>, v: &impl ToString) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

fn values(domain: &Domain, given: BTreeMap<String, String>) -> PyResult<BTreeMap<String, Value>> {
    given
        .into_iter()
        .map(|(k, v)| Ok((k, domain.parse(&v).map_err(err)?)))
        .collect()
}

fn options(faults: bool) -> TranslationOptions {
    if faults {
        TranslationOptions::with_faults()
    } else {
        TranslationOptions::default()
    }
}

/// Evaluates a graph; `inputs` defaults to the recorded input labels.
/// Returns `{artifact or process: label}` for every node.
#[pyfunction]
#[pyo3(signature = (graph, interp, inputs=None))]
fn evaluate(graph: &str, interp: &str, inputs: Option<BTreeMap<String, String>>) -> PyResult<BTreeMap<String, String>> {
    let g = read_graph(graph.as_bytes()).map_err(err)?;
    let i = read_interpretation(interp.as_bytes(), &g.domain).map_err(err)?;
    let u = match inputs {
        Some(given) => {
            let given = values(&g.domain, given)?;
            g.inputs
                .iter()
                .map(|n| given.get(n).copied().ok_or_else(|| err(format!("missing value for input `{n}`"))))
                .collect::<PyResult<Vec<_>>>()?
        }
        None => g.input_labels(),
    };
    let e = eval_graph(&g, &i, &u).map_err(err)?;
    Ok(e.values.iter().map(|(k, v)| (k.clone(), g.domain.label(*v))).collect())
}

/// `(relation, from, to)` triples derived by the inference rules.
#[pyfunction]
fn infer(graph: &str) -> PyResult<Vec<(String, String, String)>> {
    let g = read_graph(graph.as_bytes()).map_err(err)?;
    Ok(opmrules::infer(&g)
        .triples()
        .into_iter()
        .map(|(r, a, b)| (r.name().to_string(), a.to_string(), b.to_string()))
        .collect())
}

/// Classifies every derived edge as sound or spurious.
#[pyfunction]
#[pyo3(signature = (graph, interp, max_cause_size=3, faults=false))]
fn audit<'py>(
    py: Python<'py>,
    graph: &str,
    interp: &str,
    max_cause_size: usize,
    faults: bool,
) -> PyResult<(Vec<Bound<'py, PyAny>>, usize, usize)> {
    let g = read_graph(graph.as_bytes()).map_err(err)?;
    let i = read_interpretation(interp.as_bytes(), &g.domain).map_err(err)?;
    let report = opmrules::audit(&g, &i, options(faults), max_cause_size).map_err(err)?;
    let s = cause_situation(&g, &i, options(faults)).map_err(err)?.situation;
    let rows = report
        .rows_json(&s)
        .iter()
        .map(|r| from_json(py, r))
        .collect::<PyResult<_>>()?;
    Ok((rows, report.count(Status::Spurious), report.count(Status::Sound)))
}

/// Actual-cause verdict for `candidate` on `effect` in a model file.
/// Exogenous variables missing from `context` are 0.
#[pyfunction]
#[pyo3(signature = (model, candidate, effect, context=None))]
fn is_actual_cause<'py>(
    py: Python<'py>,
    model: &str,
    candidate: BTreeMap<String, String>,
    effect: (String, String),
    context: Option<BTreeMap<String, String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let m = read_model(model.as_bytes()).map_err(err)?;
    let d = m.domain().clone();
    let mut ctx: BTreeMap<String, Value> = m.exogenous().iter().map(|u| (u.clone(), Value(0))).collect();
    ctx.extend(values(&d, context.unwrap_or_default())?);
    let s = CausalSituation::from_context(m, &ctx).map_err(err)?;
    let query = CauseQuery {
        candidate: values(&d, candidate)?.into_iter().collect(),
        target: (effect.0, d.parse(&effect.1).map_err(err)?),
    };
    from_json(py, &actual_cause(&s, &query).map_err(err)?.to_json(&d))
}

/// Runs a program on input labels given in declaration order.
#[pyfunction]
#[pyo3(signature = (program, inputs, domain="mod:7"))]
fn run_program(program: &str, inputs: Vec<String>, domain: &str) -> PyResult<String> {
    let p = slp::parse(program).map_err(err)?;
    let d: Domain = domain.parse().map_err(err)?;
    let u = inputs.iter().map(|v| d.parse(v).map_err(err)).collect::<PyResult<Vec<_>>>()?;
    Ok(d.label(slp::run(&p, &d, &u).map_err(err)?.value))
}

/// Exhaustive approximation verdict with its first counterexample.
#[pyfunction]
#[pyo3(signature = (program, semantics="trace", mode="causal", level="local", domain="mod:7"))]
fn check_approximation<'py>(
    py: Python<'py>,
    program: &str,
    semantics: &str,
    mode: &str,
    level: &str,
    domain: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let p = slp::parse(program).map_err(err)?;
    let d: Domain = domain.parse().map_err(err)?;
    let sem: Semantics = semantics.parse().map_err(err)?;
    let mode: Mode = mode.parse().map_err(err)?;
    let level: Level = level.parse().map_err(err)?;
    let v = py
        .detach(|| approx::check(&p, &d, sem, mode, level, &Budget::default()))
        .map_err(err)?;
    from_json(py, &v.to_json(&p, &d))
}

#[pymodule]
#[pyo3(name = "provcause")]
fn provcause_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(infer, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(is_actual_cause, m)?)?;
    m.add_function(wrap_pyfunction!(run_program, m)?)?;
    m.add_function(wrap_pyfunction!(check_approximation, m)?)?;
    Ok(())
}
