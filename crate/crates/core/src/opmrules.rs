//! The OPM inference rules and an audit of the derived edges against
//! actual causation in `(M_G, sigma_G)`.
//!
//! ```text
//! x wasDerivedFrom y   :- x wasGeneratedBy p, p used y
//! p wasTriggeredBy q   :- p used x, x wasGeneratedBy q
//! x wasDerivedFrom+ y  :- x wasDerivedFrom y ; x wasDerivedFrom z, z wasDerivedFrom+ y
//! p wasTriggeredBy+ q  :- p wasTriggeredBy q ; p wasTriggeredBy r, r wasTriggeredBy+ q
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::json;
use thiserror::Error;

use crate::causal::CausalSituation;
use crate::hpcause::{ActualCause, CauseSearch, HpError};
use crate::provgraph::{Interpretation, ProvGraph};
use crate::translate::{cause_situation, TranslateError, TranslationOptions};

pub type Pair = (String, String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Used,
    WasGeneratedBy,
    WasDerivedFrom,
    WasTriggeredBy,
    WasDerivedFromPlus,
    WasTriggeredByPlus,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Used,
        Relation::WasGeneratedBy,
        Relation::WasDerivedFrom,
        Relation::WasTriggeredBy,
        Relation::WasDerivedFromPlus,
        Relation::WasTriggeredByPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Used => "used",
            Relation::WasGeneratedBy => "wasGeneratedBy",
            Relation::WasDerivedFrom => "wasDerivedFrom",
            Relation::WasTriggeredBy => "wasTriggeredBy",
            Relation::WasDerivedFromPlus => "wasDerivedFrom+",
            Relation::WasTriggeredByPlus => "wasTriggeredBy+",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Base facts and the least fixpoint of the rules.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeBase {
    pub used: BTreeSet<Pair>,
    pub was_generated_by: BTreeSet<Pair>,
    pub was_derived_from: BTreeSet<Pair>,
    pub was_triggered_by: BTreeSet<Pair>,
    pub was_derived_from_plus: BTreeSet<Pair>,
    pub was_triggered_by_plus: BTreeSet<Pair>,
    /// Semi-naive rounds needed for each closure, the last one adding nothing.
    pub rounds: (usize, usize),
}

impl EdgeBase {
    pub fn relation(&self, r: Relation) -> &BTreeSet<Pair> {
        match r {
            Relation::Used => &self.used,
            Relation::WasGeneratedBy => &self.was_generated_by,
            Relation::WasDerivedFrom => &self.was_derived_from,
            Relation::WasTriggeredBy => &self.was_triggered_by,
            Relation::WasDerivedFromPlus => &self.was_derived_from_plus,
            Relation::WasTriggeredByPlus => &self.was_triggered_by_plus,
        }
    }

    pub fn holds(&self, r: Relation, from: &str, to: &str) -> bool {
        self.relation(r).contains(&(from.to_string(), to.to_string()))
    }

    /// All facts as sorted `(relation, from, to)` triples.
    pub fn triples(&self) -> Vec<(Relation, &str, &str)> {
        Relation::ALL
            .iter()
            .flat_map(|&r| self.relation(r).iter().map(move |(a, b)| (r, a.as_str(), b.as_str())))
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut lines: Vec<String> = self
            .triples()
            .into_iter()
            .map(|(r, a, b)| format!("{r}\t{a}\t{b}"))
            .collect();
        lines.sort();
        lines.into_iter().map(|l| l + "\n").collect()
    }
}

/// `{(a, c) | (a, b) in left, (b, c) in right}`.
fn join(left: &BTreeSet<Pair>, right: &BTreeSet<Pair>) -> BTreeSet<Pair> {
    let mut by_first: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (b, c) in right {
        by_first.entry(b).or_default().push(c);
    }
    let mut out = BTreeSet::new();
    for (a, b) in left {
        for c in by_first.get(b.as_str()).into_iter().flatten() {
            out.insert((a.clone(), c.to_string()));
        }
    }
    out
}

/// Semi-naive closure: only pairs new in the previous round are extended.
fn closure(step: &BTreeSet<Pair>) -> (BTreeSet<Pair>, usize) {
    let mut all = step.clone();
    let mut delta = step.clone();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let fresh: BTreeSet<Pair> = join(step, &delta).difference(&all).cloned().collect();
        if fresh.is_empty() {
            return (all, rounds);
        }
        all.extend(fresh.iter().cloned());
        delta = fresh;
    }
}

pub fn infer(graph: &ProvGraph) -> EdgeBase {
    let used: BTreeSet<Pair> = graph
        .used
        .iter()
        .map(|u| (u.process.clone(), u.artifact.clone()))
        .collect();
    let was_generated_by: BTreeSet<Pair> = graph
        .generated
        .iter()
        .map(|g| (g.artifact.clone(), g.process.clone()))
        .collect();
    let was_derived_from = join(&was_generated_by, &used);
    let was_triggered_by = join(&used, &was_generated_by);
    let (was_derived_from_plus, r1) = closure(&was_derived_from);
    let (was_triggered_by_plus, r2) = closure(&was_triggered_by);
    EdgeBase {
        used,
        was_generated_by,
        was_derived_from,
        was_triggered_by,
        was_derived_from_plus,
        was_triggered_by_plus,
        rounds: (r1, r2),
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error("recorded labels disagree with the interpretation at {}", .0.join(", "))]
    Inconsistent(Vec<String>),
    #[error("maximum cause size must be at least 1")]
    ZeroMaxSize,
    #[error(transparent)]
    Cause(#[from] HpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Sound,
    Spurious,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Sound => "sound",
            Status::Spurious => "spurious",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRow {
    pub relation: Relation,
    pub from: String,
    pub to: String,
    pub status: Status,
    /// For sound edges: an actual cause of `from` that mentions `to`.
    pub witness: Option<ActualCause>,
    /// For an immediate edge refuted by an intermediate cause: that node.
    pub between: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub max_cause_size: usize,
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn count(&self, status: Status) -> usize {
        self.rows.iter().filter(|r| r.status == status).count()
    }

    pub fn summary(&self) -> String {
        format!(
            "spurious={} sound={}",
            self.count(Status::Spurious),
            self.count(Status::Sound)
        )
    }

    pub fn rows_json(&self, situation: &CausalSituation) -> Vec<serde_json::Value> {
        let d = situation.model.domain();
        self.rows
            .iter()
            .map(|r| {
                let mut row = json!({
                    "relation": r.relation.name(),
                    "from": r.from,
                    "to": r.to,
                    "status": r.status.name(),
                });
                if let Some(c) = &r.witness {
                    let mut w = c.witness.to_json(d);
                    w["cause"] = c
                        .cause
                        .iter()
                        .map(|(k, v)| (k.clone(), json!(d.label(*v))))
                        .collect::<serde_json::Map<_, _>>()
                        .into();
                    row["witness"] = w;
                }
                if let Some(z) = &r.between {
                    row["between"] = json!(z);
                }
                row
            })
            .collect()
    }
}

/// Actual causes of each node's recorded value, computed on demand.
pub struct CauseOracle {
    situation: CausalSituation,
    max_cause_size: usize,
    causes: BTreeMap<String, Vec<ActualCause>>,
}

impl CauseOracle {
    /// Builds `(M_G, sigma_G)` with the input artifacts made endogenous,
    /// refusing graphs whose labels are inconsistent.
    pub fn new(
        graph: &ProvGraph,
        interp: &Interpretation,
        opts: TranslationOptions,
        max_cause_size: usize,
    ) -> Result<Self, AuditError> {
        if max_cause_size == 0 {
            return Err(AuditError::ZeroMaxSize);
        }
        let t = cause_situation(graph, interp, opts)?;
        if !t.inconsistent_at.is_empty() {
            return Err(AuditError::Inconsistent(t.inconsistent_at));
        }
        Ok(CauseOracle {
            situation: t.situation,
            max_cause_size,
            causes: BTreeMap::new(),
        })
    }

    pub fn situation(&self) -> &CausalSituation {
        &self.situation
    }

    pub fn causes_of(&mut self, node: &str) -> Result<&[ActualCause], AuditError> {
        if !self.causes.contains_key(node) {
            let target = (node.to_string(), self.situation.valuation[node]);
            let found = CauseSearch::new(&self.situation, &target)?.actual_causes(self.max_cause_size)?;
            self.causes.insert(node.to_string(), found);
        }
        Ok(&self.causes[node])
    }

    /// An actual cause of `effect` mentioning `part`, if any.
    pub fn cause_with(&mut self, effect: &str, part: &str) -> Result<Option<ActualCause>, AuditError> {
        Ok(self
            .causes_of(effect)?
            .iter()
            .find(|c| c.cause.iter().any(|(n, _)| n == part))
            .cloned())
    }

    pub fn part_of(&mut self, part: &str, effect: &str) -> Result<bool, AuditError> {
        Ok(self.cause_with(effect, part)?.is_some())
    }
}

/// Nodes strictly between `x` and `y` on some directed path, among `kind`.
fn strictly_between(plus: &BTreeSet<Pair>, x: &str, y: &str) -> Vec<String> {
    plus.iter()
        .filter(|(a, z)| a == x && z != y && plus.contains(&(z.clone(), y.to_string())))
        .map(|(_, z)| z.clone())
        .collect()
}

pub fn audit(
    graph: &ProvGraph,
    interp: &Interpretation,
    opts: TranslationOptions,
    max_cause_size: usize,
) -> Result<AuditReport, AuditError> {
    let mut oracle = CauseOracle::new(graph, interp, opts, max_cause_size)?;
    audit_with(graph, &mut oracle)
}

pub fn audit_with(graph: &ProvGraph, oracle: &mut CauseOracle) -> Result<AuditReport, AuditError> {
    let edges = infer(graph);
    let mut rows = Vec::new();
    let families = [
        (Relation::WasDerivedFrom, Relation::WasDerivedFromPlus),
        (Relation::WasTriggeredBy, Relation::WasTriggeredByPlus),
    ];
    for (direct, plus) in families {
        let closed = edges.relation(plus);
        for (x, y) in closed {
            let immediate = edges.relation(direct).contains(&(x.clone(), y.clone()));
            let witness = oracle.cause_with(x, y)?;
            let mut between = None;
            if immediate && witness.is_some() {
                for z in strictly_between(closed, x, y) {
                    if oracle.part_of(&z, x)? && oracle.part_of(y, &z)? {
                        between = Some(z);
                        break;
                    }
                }
            }
            let status = if witness.is_some() && between.is_none() {
                Status::Sound
            } else {
                Status::Spurious
            };
            rows.push(AuditRow {
                relation: if immediate { direct } else { plus },
                from: x.clone(),
                to: y.clone(),
                status,
                witness: if status == Status::Sound { witness } else { None },
                between,
            });
        }
    }
    Ok(AuditReport {
        max_cause_size: oracle.max_cause_size,
        rows,
    })
}

/// Both directions of `x wasDerivedFrom+ y <=> y is part of an actual cause of x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjectureReport {
    pub max_cause_size: usize,
    /// Derived by the rules, but no actual cause.
    pub derived_not_caused: Vec<Pair>,
    /// Part of an actual cause, but not derived.
    pub caused_not_derived: Vec<Pair>,
}

impl ConjectureReport {
    pub fn holds(&self) -> bool {
        self.derived_not_caused.is_empty() && self.caused_not_derived.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "maxCauseSize": self.max_cause_size,
            "derivedNotCaused": self.derived_not_caused,
            "causedNotDerived": self.caused_not_derived,
            "holds": self.holds(),
        })
    }
}

pub fn check_conjecture(
    graph: &ProvGraph,
    interp: &Interpretation,
    opts: TranslationOptions,
    max_cause_size: usize,
) -> Result<ConjectureReport, AuditError> {
    let mut oracle = CauseOracle::new(graph, interp, opts, max_cause_size)?;
    let plus = infer(graph).was_derived_from_plus;
    let artifacts: BTreeSet<&str> = graph.artifacts.iter().map(|a| a.id.as_str()).collect();
    let mut derived_not_caused = Vec::new();
    let mut caused_not_derived = Vec::new();
    for &x in &artifacts {
        let parts: BTreeSet<String> = oracle
            .causes_of(x)?
            .iter()
            .flat_map(|c| c.cause.iter().map(|(n, _)| n.clone()))
            .filter(|n| artifacts.contains(n.as_str()))
            .collect();
        for y in &parts {
            if !plus.contains(&(x.to_string(), y.clone())) {
                caused_not_derived.push((x.to_string(), y.clone()));
            }
        }
        for (_, y) in plus.range((x.to_string(), String::new())..).take_while(|(a, _)| a == x) {
            if !parts.contains(y) {
                derived_not_caused.push((x.to_string(), y.clone()));
            }
        }
    }
    Ok(ConjectureReport {
        max_cause_size,
        derived_not_caused,
        caused_not_derived,
    })
}
