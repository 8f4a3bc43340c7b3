//! Deterministic acyclic structural causal models.
//!
//! A model has exogenous inputs `U`, endogenous variables `V`, and one
//! structural equation per endogenous variable over an explicit parent list.
//! Models are values: [`CausalModel::intervene`] returns a new model.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Domain, Value};
use crate::func::{FnError, FnRepr, FnSpec};
use crate::provgraph::FormatError;

/// Assignment of values to named variables. Total or partial depending on use.
pub type Valuation = BTreeMap<String, Value>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CausalError {
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("`{var}` has unknown parent `{parent}`")]
    UnknownParent { var: String, parent: String },
    #[error("causal graph has a cycle through {}", .0.join(", "))]
    Cycle(Vec<String>),
    #[error("function of `{var}`: {source}")]
    BadFunction { var: String, source: FnError },
    #[error("no value for exogenous variable `{0}`")]
    MissingContext(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("cannot intervene on exogenous variable `{0}`")]
    ExogenousIntervention(String),
    #[error("value for `{0}` is outside the domain")]
    OutOfDomain(String),
    #[error("valuation does not cover `{0}`")]
    Incomplete(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equation {
    pub id: String,
    pub parents: Vec<String>,
    pub func: FnSpec,
}

impl Equation {
    pub fn new(id: impl Into<String>, parents: &[&str], func: FnSpec) -> Self {
        Equation {
            id: id.into(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            func,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CausalModel {
    domain: Domain,
    exogenous: Vec<String>,
    equations: Vec<Equation>,
    /// Slot of every variable: exogenous first, then endogenous in declaration order.
    slot: HashMap<String, usize>,
    parent_slots: Vec<Vec<usize>>,
    /// Equation indices in topological order.
    order: Vec<usize>,
}

impl PartialEq for CausalModel {
    /// Equality up to declaration order.
    fn eq(&self, other: &Self) -> bool {
        fn sorted(m: &CausalModel) -> (Vec<&String>, Vec<&Equation>) {
            let mut exo: Vec<&String> = m.exogenous.iter().collect();
            exo.sort();
            let mut eqs: Vec<&Equation> = m.equations.iter().collect();
            eqs.sort_by(|a, b| a.id.cmp(&b.id));
            (exo, eqs)
        }
        self.domain == other.domain && sorted(self) == sorted(other)
    }
}

impl Eq for CausalModel {}

impl CausalModel {
    pub fn new(
        domain: Domain,
        exogenous: Vec<String>,
        equations: Vec<Equation>,
    ) -> Result<Self, CausalError> {
        let mut slot = HashMap::new();
        for name in exogenous.iter().chain(equations.iter().map(|e| &e.id)) {
            if slot.insert(name.clone(), slot.len()).is_some() {
                return Err(CausalError::DuplicateVariable(name.clone()));
            }
        }
        let mut parent_slots = Vec::with_capacity(equations.len());
        for eq in &equations {
            // Parents are an argument list; one variable may fill several ports.
            let mut slots = Vec::with_capacity(eq.parents.len());
            for p in &eq.parents {
                slots.push(*slot.get(p).ok_or_else(|| CausalError::UnknownParent {
                    var: eq.id.clone(),
                    parent: p.clone(),
                })?);
            }
            eq.func
                .check(&domain, eq.parents.len())
                .map_err(|source| CausalError::BadFunction {
                    var: eq.id.clone(),
                    source,
                })?;
            parent_slots.push(slots);
        }
        let order = topological(exogenous.len(), &parent_slots).map_err(|stuck| {
            CausalError::Cycle(stuck.into_iter().map(|i| equations[i].id.clone()).collect())
        })?;
        Ok(CausalModel {
            domain,
            exogenous,
            equations,
            slot,
            parent_slots,
            order,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn exogenous(&self) -> &[String] {
        &self.exogenous
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn endogenous(&self) -> impl Iterator<Item = &str> {
        self.equations.iter().map(|e| e.id.as_str())
    }

    pub fn equation(&self, id: &str) -> Option<&Equation> {
        self.endogenous_index(id).map(|i| &self.equations[i])
    }

    pub fn is_exogenous(&self, name: &str) -> bool {
        matches!(self.slot.get(name), Some(&s) if s < self.exogenous.len())
    }

    pub fn is_endogenous(&self, name: &str) -> bool {
        self.endogenous_index(name).is_some()
    }

    /// Index of an endogenous variable in declaration order.
    pub fn endogenous_index(&self, name: &str) -> Option<usize> {
        let s = *self.slot.get(name)?;
        s.checked_sub(self.exogenous.len())
    }

    /// Slot of any variable in the vectors returned by [`Self::solve_slots`].
    pub fn slot(&self, name: &str) -> Option<usize> {
        self.slot.get(name).copied()
    }

    pub fn slot_count(&self) -> usize {
        self.exogenous.len() + self.equations.len()
    }

    pub fn name_of_slot(&self, s: usize) -> &str {
        let n = self.exogenous.len();
        if s < n {
            &self.exogenous[s]
        } else {
            &self.equations[s - n].id
        }
    }

    /// Endogenous indices in a topological order.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Parent slots of endogenous variable `i`.
    pub fn parent_slots(&self, i: usize) -> &[usize] {
        &self.parent_slots[i]
    }

    /// All variables (either kind) with a directed path to `name` in the causal graph.
    pub fn ancestors(&self, name: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![name.to_string()];
        while let Some(v) = stack.pop() {
            if let Some(eq) = self.equation(&v) {
                for p in &eq.parents {
                    if out.insert(p.clone()) {
                        stack.push(p.clone());
                    }
                }
            }
        }
        out
    }

    pub fn descendants(&self, name: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut frontier = vec![name.to_string()];
        while let Some(v) = frontier.pop() {
            for eq in &self.equations {
                if eq.parents.contains(&v) && out.insert(eq.id.clone()) {
                    frontier.push(eq.id.clone());
                }
            }
        }
        out
    }

    fn context_slots(&self, context: &Valuation) -> Result<Vec<Value>, CausalError> {
        self.exogenous
            .iter()
            .map(|u| {
                let v = *context
                    .get(u)
                    .ok_or_else(|| CausalError::MissingContext(u.clone()))?;
                if !self.domain.contains(v) {
                    return Err(CausalError::OutOfDomain(u.clone()));
                }
                Ok(v)
            })
            .collect()
    }

    /// Solves the equations with some endogenous variables forced.
    ///
    /// `context` is indexed like [`Self::exogenous`], `forced` like
    /// [`Self::equations`]. Equivalent to solving `intervene(forced)`.
    pub fn solve_slots(&self, context: &[Value], forced: &[Option<Value>]) -> Vec<Value> {
        let n = self.exogenous.len();
        let mut vals = vec![Value(0); self.slot_count()];
        vals[..n].copy_from_slice(context);
        let mut args = Vec::new();
        for &i in &self.order {
            vals[n + i] = match forced.get(i).copied().flatten() {
                Some(v) => v,
                None => {
                    args.clear();
                    args.extend(self.parent_slots[i].iter().map(|&s| vals[s]));
                    self.equations[i].func.apply(&self.domain, &args)
                }
            };
        }
        vals
    }

    fn to_valuation(&self, slots: &[Value]) -> Valuation {
        slots
            .iter()
            .enumerate()
            .map(|(s, v)| (self.name_of_slot(s).to_string(), *v))
            .collect()
    }

    /// The unique valuation consistent with the model that extends `context`.
    pub fn solve(&self, context: &Valuation) -> Result<Valuation, CausalError> {
        let ctx = self.context_slots(context)?;
        Ok(self.to_valuation(&self.solve_slots(&ctx, &[])))
    }

    /// `M_[X:=x]`: each set variable gets no parents and a constant equation.
    pub fn intervene(&self, settings: &Valuation) -> Result<CausalModel, CausalError> {
        for (name, v) in settings {
            if self.is_exogenous(name) {
                return Err(CausalError::ExogenousIntervention(name.clone()));
            }
            if !self.is_endogenous(name) {
                return Err(CausalError::UnknownVariable(name.clone()));
            }
            if !self.domain.contains(*v) {
                return Err(CausalError::OutOfDomain(name.clone()));
            }
        }
        let equations = self
            .equations
            .iter()
            .map(|eq| match settings.get(&eq.id) {
                Some(v) => Equation {
                    id: eq.id.clone(),
                    parents: vec![],
                    func: FnSpec::constant(*v),
                },
                None => eq.clone(),
            })
            .collect();
        CausalModel::new(self.domain.clone(), self.exogenous.clone(), equations)
    }

    /// Endogenous variables whose equation does not hold under `valuation`.
    pub fn violated_equations(&self, valuation: &Valuation) -> Result<Vec<String>, CausalError> {
        let mut vals = Vec::with_capacity(self.slot_count());
        for s in 0..self.slot_count() {
            let name = self.name_of_slot(s);
            let v = *valuation
                .get(name)
                .ok_or_else(|| CausalError::Incomplete(name.to_string()))?;
            vals.push(v);
        }
        let n = self.exogenous.len();
        Ok(self
            .equations
            .iter()
            .enumerate()
            .filter(|(i, eq)| {
                let args: Vec<Value> = self.parent_slots[*i].iter().map(|&s| vals[s]).collect();
                eq.func.apply(&self.domain, &args) != vals[n + i]
            })
            .map(|(_, eq)| eq.id.clone())
            .collect())
    }

    pub fn is_consistent(&self, valuation: &Valuation) -> Result<bool, CausalError> {
        Ok(self.violated_equations(valuation)?.is_empty())
    }

    /// Declared parents the equation never actually depends on.
    pub fn constant_parent_lint(&self) -> Vec<(String, String)> {
        self.equations
            .iter()
            .flat_map(|eq| {
                let arity = eq.parents.len();
                eq.parents
                    .iter()
                    .enumerate()
                    .filter(move |(i, _)| eq.func.ignores_argument(&self.domain, arity, *i))
                    .map(move |(_, p)| (eq.id.clone(), p.clone()))
            })
            .collect()
    }

    pub fn causal_function(&self) -> CausalFunction<'_> {
        CausalFunction { model: self }
    }
}

/// Kahn's algorithm over endogenous equations; on failure returns the stuck ones.
fn topological(n_exo: usize, parent_slots: &[Vec<usize>]) -> Result<Vec<usize>, Vec<usize>> {
    let m = parent_slots.len();
    let mut done = vec![false; m];
    let mut order = Vec::with_capacity(m);
    loop {
        let before = order.len();
        for i in 0..m {
            if !done[i] && parent_slots[i].iter().all(|&s| s < n_exo || done[s - n_exo]) {
                done[i] = true;
                order.push(i);
            }
        }
        if order.len() == m {
            return Ok(order);
        }
        if order.len() == before {
            return Err((0..m).filter(|&i| !done[i]).collect());
        }
    }
}

/// `[[M]]`: for each partial valuation `tau`, a map from contexts to valuations.
#[derive(Debug, Clone, Copy)]
pub struct CausalFunction<'a> {
    model: &'a CausalModel,
}

impl CausalFunction<'_> {
    pub fn eval(&self, tau: &Valuation, context: &Valuation) -> Result<Valuation, CausalError> {
        self.model.intervene(tau)?.solve(context)
    }
}

/// A model with a total valuation over all of its variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalSituation {
    pub model: CausalModel,
    pub valuation: Valuation,
}

impl CausalSituation {
    /// Situation obtained by solving the model in `context`.
    pub fn from_context(model: CausalModel, context: &Valuation) -> Result<Self, CausalError> {
        let valuation = model.solve(context)?;
        Ok(CausalSituation { model, valuation })
    }

    pub fn is_consistent(&self) -> bool {
        self.model.is_consistent(&self.valuation).unwrap_or(false)
    }

    pub fn context(&self) -> Valuation {
        self.model
            .exogenous()
            .iter()
            .filter_map(|u| self.valuation.get(u).map(|v| (u.clone(), *v)))
            .collect()
    }

    pub fn value(&self, name: &str) -> Option<Value> {
        self.valuation.get(name).copied()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    domain: Domain,
    exogenous: Vec<String>,
    endogenous: Vec<EquationEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EquationEntry {
    id: String,
    parents: Vec<String>,
    #[serde(rename = "fn")]
    func: FnRepr,
}

pub fn read_model(bytes: &[u8]) -> Result<CausalModel, FormatError> {
    let file: ModelFile = serde_json::from_slice(bytes)?;
    let equations = file
        .endogenous
        .into_iter()
        .map(|e| {
            let func = FnSpec::from_repr(&e.func, &file.domain, e.parents.len())
                .map_err(|err| FormatError::Schema(format!("`{}`: {err}", e.id)))?;
            Ok(Equation {
                id: e.id,
                parents: e.parents,
                func,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    CausalModel::new(file.domain, file.exogenous, equations)
        .map_err(|e| FormatError::Schema(e.to_string()))
}

pub fn write_model(model: &CausalModel) -> String {
    let file = ModelFile {
        domain: model.domain.clone(),
        exogenous: model.exogenous.clone(),
        endogenous: model
            .equations
            .iter()
            .map(|e| EquationEntry {
                id: e.id.clone(),
                parents: e.parents.clone(),
                func: e.func.to_repr(&model.domain, e.parents.len()),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

/// Valuation sidecar: `{"values": {...}, "consistent": bool}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValuationFile {
    pub values: BTreeMap<String, String>,
    pub consistent: bool,
}

impl ValuationFile {
    pub fn new(situation: &CausalSituation) -> Self {
        let d = situation.model.domain();
        ValuationFile {
            values: situation
                .valuation
                .iter()
                .map(|(k, v)| (k.clone(), d.label(*v)))
                .collect(),
            consistent: situation.is_consistent(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::func::Builtin;

    fn val(pairs: &[(&str, u32)]) -> Valuation {
        pairs.iter().map(|(k, v)| (k.to_string(), Value(*v))).collect()
    }

    fn zero_context(m: &CausalModel) -> Valuation {
        m.exogenous().iter().map(|u| (u.clone(), Value(0))).collect()
    }

    #[test]
    fn cake_model_solves() {
        let m = fixtures::cake_model();
        let s = m.solve(&zero_context(&m)).unwrap();
        assert_eq!(s["Cake"], Value(1));
        let mut ctx = zero_context(&m);
        ctx.insert("U3".into(), Value(1));
        let s = m.solve(&ctx).unwrap();
        assert_eq!(s["Bake"], Value(0));
        assert_eq!(s["Cake"], Value(0));
    }

    #[test]
    fn missing_context_is_an_error() {
        let m = fixtures::cake_model();
        assert_eq!(
            m.solve(&Valuation::new()),
            Err(CausalError::MissingContext("U1".into()))
        );
    }

    #[test]
    fn empty_endogenous_returns_context() {
        let m = CausalModel::new(Domain::Bool, vec!["u".into()], vec![]).unwrap();
        let ctx = val(&[("u", 1)]);
        assert_eq!(m.solve(&ctx).unwrap(), ctx);
    }

    #[test]
    fn intervening_on_mix() {
        let m = fixtures::cake_model();
        let forced = m.intervene(&val(&[("Mix", 0)])).unwrap();
        let s = forced.solve(&zero_context(&m)).unwrap();
        assert_eq!((s["Batter"], s["Bake"], s["Cake"]), (Value(0), Value(0), Value(0)));
        assert!(m.equation("Mix").unwrap().parents.len() == 6, "original untouched");
        assert_eq!(m.intervene(&Valuation::new()).unwrap(), m);
        let once = m.intervene(&val(&[("Mix", 0)])).unwrap();
        assert_eq!(once.intervene(&val(&[("Mix", 0)])).unwrap(), once);
    }

    #[test]
    fn intervention_errors() {
        let m = fixtures::cake_model();
        assert_eq!(
            m.intervene(&val(&[("U1", 0)])),
            Err(CausalError::ExogenousIntervention("U1".into()))
        );
        assert_eq!(
            m.intervene(&val(&[("Nope", 0)])),
            Err(CausalError::UnknownVariable("Nope".into()))
        );
    }

    #[test]
    fn consistency() {
        let m = fixtures::cake_model();
        let mut s = m.solve(&zero_context(&m)).unwrap();
        assert!(m.is_consistent(&s).unwrap());
        s.insert("Cake".into(), Value(0));
        assert_eq!(m.violated_equations(&s).unwrap(), vec!["Cake".to_string()]);
        let c = CausalModel::new(
            Domain::Bool,
            vec![],
            vec![Equation::new("a", &[], FnSpec::constant(Value(1)))],
        )
        .unwrap();
        assert!(c.is_consistent(&val(&[("a", 1)])).unwrap());
    }

    #[test]
    fn causal_function_containment() {
        let m = fixtures::cake_model();
        let f = m.causal_function();
        let ctx = zero_context(&m);
        assert_eq!(f.eval(&Valuation::new(), &ctx).unwrap()["Cake"], Value(1));
        assert_eq!(f.eval(&val(&[("Mix", 0)]), &ctx).unwrap()["Mix"], Value(0));
        let mut bad = ctx.clone();
        bad.insert("U4".into(), Value(1));
        assert_eq!(f.eval(&val(&[("Cake", 1)]), &bad).unwrap()["Cake"], Value(1));
    }

    #[test]
    fn construction_errors() {
        let cyc = CausalModel::new(
            Domain::Bool,
            vec![],
            vec![
                Equation::new("a", &["b"], FnSpec::Builtin(Builtin::Copy)),
                Equation::new("b", &["a"], FnSpec::Builtin(Builtin::Copy)),
            ],
        );
        assert!(matches!(cyc, Err(CausalError::Cycle(v)) if v.len() == 2));
        let unknown = CausalModel::new(
            Domain::Bool,
            vec![],
            vec![Equation::new("a", &["zz"], FnSpec::Builtin(Builtin::Copy))],
        );
        assert!(matches!(unknown, Err(CausalError::UnknownParent { .. })));
        let arity = CausalModel::new(
            Domain::Bool,
            vec!["u".into()],
            vec![Equation::new("a", &["u"], FnSpec::Builtin(Builtin::Not)), Equation::new("b", &["u", "a"], FnSpec::Builtin(Builtin::Not))],
        );
        assert!(matches!(arity, Err(CausalError::BadFunction { .. })));
    }

    #[test]
    fn lint_flags_constant_parents() {
        let m = CausalModel::new(
            Domain::Bool,
            vec!["u".into()],
            vec![
                Equation::new("x", &["u"], FnSpec::Builtin(Builtin::Copy)),
                Equation::new("out", &["x"], FnSpec::constant(Value(1))),
            ],
        )
        .unwrap();
        assert_eq!(m.constant_parent_lint(), vec![("out".into(), "x".into())]);
    }

    #[test]
    fn model_file_roundtrip() {
        let m = fixtures::cake_model();
        let text = write_model(&m);
        assert_eq!(read_model(text.as_bytes()).unwrap(), m);
    }
}
