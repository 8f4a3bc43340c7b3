//! Halpern–Pearl weak and actual causes, decided by exhaustive search.
//!
//! The exogenous context is fixed from the situation's valuation. Candidate
//! sets `X` are ordered by declaration order; the witness returned is the
//! first `(W, x', w')` found when `W` ranges over subsets by size and then
//! lexicographically, and `x'` then `w'` range over value tuples in domain
//! order.
//!
//! Two reductions keep the search tractable and do not change any verdict
//! or witness:
//! - `W` and `Z` only range over strict ancestors of `Y`; the rest cannot
//!   influence `Y`, and a witness using them has a smaller one without.
//! - In condition 2(b), `Z` only ranges over descendants of `X ∪ W`; every
//!   other variable keeps its actual value under any such intervention.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::causal::{CausalModel, CausalSituation, Valuation};
use crate::domain::{Domain, Value};

/// A single primitive event `X = x`.
pub type Literal = (String, Value);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HpError {
    #[error("`{0}` is not an endogenous variable")]
    NotEndogenous(String),
    #[error("candidate cause is empty")]
    EmptyCandidate,
    #[error("`{0}` appears twice in the candidate cause")]
    RepeatedCandidate(String),
    #[error("target `{0}` is also part of the candidate cause")]
    TargetInCandidate(String),
    #[error("`{var}` is {actual} in the situation, not {claimed}")]
    ValueMismatch {
        var: String,
        claimed: String,
        actual: String,
    },
    #[error("situation is inconsistent at {}", .0.join(", "))]
    Inconsistent(Vec<String>),
    #[error("situation does not assign `{0}`")]
    Incomplete(String),
    #[error("maximum cause size must be at least 1")]
    ZeroMaxSize,
    #[error("model has {0} endogenous variables; at most 64 are supported")]
    TooLarge(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CauseQuery {
    pub candidate: Vec<Literal>,
    pub target: Literal,
}

impl CauseQuery {
    pub fn new(candidate: &[(&str, Value)], target: (&str, Value)) -> Self {
        CauseQuery {
            candidate: candidate.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
            target: (target.0.to_string(), target.1),
        }
    }
}

/// The contingency `(W, x', w')` that makes `X = x` a weak cause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub w: Vec<String>,
    pub x_prime: Valuation,
    pub w_prime: Valuation,
}

impl Witness {
    pub fn to_json(&self, domain: &Domain) -> serde_json::Value {
        let labels = |v: &Valuation| -> serde_json::Map<String, serde_json::Value> {
            v.iter().map(|(k, x)| (k.clone(), json!(domain.label(*x)))).collect()
        };
        json!({
            "W": self.w,
            "xPrime": labels(&self.x_prime),
            "wPrime": labels(&self.w_prime),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CauseVerdict {
    pub weak: bool,
    pub actual: bool,
    pub witness: Option<Witness>,
    /// A proper subset of the candidate that is already a weak cause.
    pub failing_subset: Option<Vec<Literal>>,
}

impl CauseVerdict {
    pub fn to_json(&self, domain: &Domain) -> serde_json::Value {
        let mut out = json!({ "weak": self.weak, "actual": self.actual });
        if let Some(w) = &self.witness {
            out["witness"] = w.to_json(domain);
        }
        if let Some(s) = &self.failing_subset {
            out["failingSubset"] = s
                .iter()
                .map(|(k, v)| (k.clone(), json!(domain.label(*v))))
                .collect::<serde_json::Map<_, _>>()
                .into();
        }
        out
    }
}

/// An actual cause found by enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActualCause {
    pub cause: Vec<Literal>,
    pub witness: Witness,
}

#[derive(Debug, Clone)]
struct RawWitness {
    w: Vec<usize>,
    x_prime: Vec<Value>,
    w_prime: Vec<Value>,
}

type Mask = u64;

fn bit(i: usize) -> Mask {
    1 << i
}

fn members(mask: Mask) -> Vec<usize> {
    (0..64).filter(|&i| mask & bit(i) != 0).collect()
}

fn mask_of(idx: &[usize]) -> Mask {
    idx.iter().fold(0, |m, &i| m | bit(i))
}

/// All `k`-subsets of `pool` in lexicographic order.
fn combinations(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(k);
    fn go(pool: &[usize], start: usize, k: usize, pick: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pick.len() == k {
            out.push(pick.clone());
            return;
        }
        for i in start..pool.len() {
            if pool.len() - i < k - pick.len() {
                break;
            }
            pick.push(pool[i]);
            go(pool, i + 1, k, pick, out);
            pick.pop();
        }
    }
    go(pool, 0, k, &mut pick, &mut out);
    out
}

/// Below this many `W` sets per size level the search stays sequential.
const PAR_THRESHOLD: usize = 32;

/// Cause search against one fixed target `Y = y`, with weak-cause verdicts
/// memoized per candidate set.
pub struct CauseSearch<'a> {
    model: &'a CausalModel,
    n_exo: usize,
    sigma: Vec<Value>,
    target: usize,
    y: Value,
    /// Strict endogenous ancestors of the target.
    anc: Mask,
    /// Descendants of each endogenous variable, itself included.
    desc: Vec<Mask>,
    /// Topological order restricted to the ancestors and the target.
    order: Vec<usize>,
    memo: Mutex<HashMap<Mask, Option<RawWitness>>>,
}

struct Scratch {
    vals: Vec<Value>,
    args: Vec<Value>,
    forced: Vec<Option<Value>>,
}

impl<'a> CauseSearch<'a> {
    pub fn new(situation: &'a CausalSituation, target: &Literal) -> Result<Self, HpError> {
        let model = &situation.model;
        let m = model.equations().len();
        if m > 64 {
            return Err(HpError::TooLarge(m));
        }
        let violated = model
            .violated_equations(&situation.valuation)
            .map_err(|e| match e {
                crate::causal::CausalError::Incomplete(v) => HpError::Incomplete(v),
                other => HpError::Incomplete(other.to_string()),
            })?;
        if !violated.is_empty() {
            return Err(HpError::Inconsistent(violated));
        }
        let sigma: Vec<Value> = (0..model.slot_count())
            .map(|s| situation.valuation[model.name_of_slot(s)])
            .collect();
        let n_exo = model.exogenous().len();
        let t = check_literal(model, &sigma, target)?;

        let mut desc = vec![0; m];
        for &i in model.topological_order().iter().rev() {
            let mut d = bit(i);
            for (j, dj) in desc.iter().enumerate() {
                if model.parent_slots(j).contains(&(n_exo + i)) {
                    d |= dj;
                }
            }
            desc[i] = d;
        }
        let anc = (0..m).filter(|&i| i != t && desc[i] & bit(t) != 0).fold(0, |a, i| a | bit(i));
        let order = model
            .topological_order()
            .iter()
            .copied()
            .filter(|&i| i == t || anc & bit(i) != 0)
            .collect();
        Ok(CauseSearch {
            model,
            n_exo,
            y: sigma[n_exo + t],
            sigma,
            target: t,
            anc,
            desc,
            order,
            memo: Mutex::new(HashMap::new()),
        })
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            vals: self.sigma.clone(),
            args: Vec::new(),
            forced: vec![None; self.desc.len()],
        }
    }

    /// Value of the target under the interventions in `s.forced`.
    fn eval(&self, s: &mut Scratch) -> Value {
        let d = self.model.domain();
        let eqs = self.model.equations();
        for &i in &self.order {
            let v = match s.forced[i] {
                Some(v) => v,
                None => {
                    s.args.clear();
                    s.args.extend(self.model.parent_slots(i).iter().map(|&p| s.vals[p]));
                    eqs[i].func.apply(d, &s.args)
                }
            };
            s.vals[self.n_exo + i] = v;
        }
        s.vals[self.n_exo + self.target]
    }

    fn actual_value(&self, i: usize) -> Value {
        self.sigma[self.n_exo + i]
    }

    /// Condition 2(b) for `X = x`, `W = w'`.
    fn holds_under_all_z(&self, s: &mut Scratch, x: &[usize], w: &[usize], w_prime: &[Value]) -> bool {
        let fixed = mask_of(x) | mask_of(w);
        let reach = members(fixed).iter().fold(0, |r, &i| r | self.desc[i]);
        let zpool = members(reach & self.anc & !fixed);
        s.forced.iter_mut().for_each(|f| *f = None);
        for &i in x {
            s.forced[i] = Some(self.actual_value(i));
        }
        for (&i, &v) in w.iter().zip(w_prime) {
            s.forced[i] = Some(v);
        }
        for zmask in 0u64..(1u64 << zpool.len()) {
            for (k, &i) in zpool.iter().enumerate() {
                s.forced[i] = (zmask & bit(k) != 0).then(|| self.actual_value(i));
            }
            if self.eval(s) != self.y {
                return false;
            }
        }
        true
    }

    fn try_w(&self, x: &[usize], w: &[usize]) -> Option<RawWitness> {
        let d = self.model.domain();
        let mut s = self.scratch();
        let mut b_memo: HashMap<usize, bool> = HashMap::new();
        for x_prime in d.tuples(x.len()) {
            for (wi, w_prime) in d.tuples(w.len()).enumerate() {
                s.forced.iter_mut().for_each(|f| *f = None);
                for (&i, &v) in x.iter().zip(&x_prime) {
                    s.forced[i] = Some(v);
                }
                for (&i, &v) in w.iter().zip(&w_prime) {
                    s.forced[i] = Some(v);
                }
                if self.eval(&mut s) == self.y {
                    continue;
                }
                let ok = match b_memo.get(&wi) {
                    Some(&ok) => ok,
                    None => {
                        let ok = self.holds_under_all_z(&mut s, x, w, &w_prime);
                        b_memo.insert(wi, ok);
                        ok
                    }
                };
                if ok {
                    return Some(RawWitness {
                        w: w.to_vec(),
                        x_prime,
                        w_prime,
                    });
                }
            }
        }
        None
    }

    /// Weak-cause search for the candidate set `x` (sorted endogenous indices).
    fn weak_raw(&self, x: &[usize]) -> Option<RawWitness> {
        let key = mask_of(x);
        if let Some(hit) = self.memo.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let found = if key & self.anc == 0 {
            None
        } else {
            let pool = members(self.anc & !key);
            (0..=pool.len()).find_map(|k| {
                let ws = combinations(&pool, k);
                if ws.len() >= PAR_THRESHOLD {
                    ws.par_iter().find_map_first(|w| self.try_w(x, w))
                } else {
                    ws.iter().find_map(|w| self.try_w(x, w))
                }
            })
        };
        self.memo.lock().unwrap().insert(key, found.clone());
        found
    }

    fn witness(&self, x: &[usize], raw: RawWitness) -> Witness {
        let name = |i: usize| self.model.equations()[i].id.clone();
        Witness {
            w: raw.w.iter().map(|&i| name(i)).collect(),
            x_prime: x.iter().map(|&i| name(i)).zip(raw.x_prime).collect(),
            w_prime: raw.w.iter().map(|&i| name(i)).zip(raw.w_prime).collect(),
        }
    }

    fn literals(&self, x: &[usize]) -> Vec<Literal> {
        x.iter()
            .map(|&i| (self.model.equations()[i].id.clone(), self.actual_value(i)))
            .collect()
    }

    fn candidate_indices(&self, candidate: &[Literal]) -> Result<Vec<usize>, HpError> {
        if candidate.is_empty() {
            return Err(HpError::EmptyCandidate);
        }
        let mut idx = Vec::with_capacity(candidate.len());
        for lit in candidate {
            let i = check_literal(self.model, &self.sigma, lit)?;
            if i == self.target {
                return Err(HpError::TargetInCandidate(lit.0.clone()));
            }
            if idx.contains(&i) {
                return Err(HpError::RepeatedCandidate(lit.0.clone()));
            }
            idx.push(i);
        }
        idx.sort_unstable();
        Ok(idx)
    }

    pub fn weak(&self, candidate: &[Literal]) -> Result<Option<Witness>, HpError> {
        let x = self.candidate_indices(candidate)?;
        Ok(self.weak_raw(&x).map(|r| self.witness(&x, r)))
    }

    pub fn actual(&self, candidate: &[Literal]) -> Result<CauseVerdict, HpError> {
        let x = self.candidate_indices(candidate)?;
        let witness = self.weak_raw(&x).map(|r| self.witness(&x, r));
        let failing = (1..x.len())
            .flat_map(|k| combinations(&x, k))
            .find(|s| self.weak_raw(s).is_some());
        Ok(CauseVerdict {
            weak: witness.is_some(),
            actual: witness.is_some() && failing.is_none(),
            witness,
            failing_subset: failing.map(|s| self.literals(&s)),
        })
    }

    /// Every actual cause with at most `max_size` conjuncts, ordered by size
    /// and then lexicographically by declaration order.
    pub fn actual_causes(&self, max_size: usize) -> Result<Vec<ActualCause>, HpError> {
        if max_size == 0 {
            return Err(HpError::ZeroMaxSize);
        }
        // Actual causes only mention ancestors of the target: any other
        // conjunct could be dropped, leaving a smaller weak cause.
        let pool = members(self.anc);
        let mut covered: BTreeSet<Mask> = BTreeSet::new();
        let mut out = Vec::new();
        for k in 1..=max_size.min(pool.len()) {
            let level = combinations(&pool, k);
            let found: Vec<(Mask, Option<Option<RawWitness>>)> = level
                .par_iter()
                .map(|x| {
                    let m = mask_of(x);
                    let dominated = x.len() > 1 && x.iter().any(|&i| covered.contains(&(m & !bit(i))));
                    (m, (!dominated).then(|| self.weak_raw(x)))
                })
                .collect();
            for (x, (m, verdict)) in level.iter().zip(found) {
                match verdict {
                    None => {
                        covered.insert(m);
                    }
                    Some(Some(raw)) => {
                        covered.insert(m);
                        out.push(ActualCause {
                            cause: self.literals(x),
                            witness: self.witness(x, raw),
                        });
                    }
                    Some(None) => {}
                }
            }
        }
        Ok(out)
    }

    /// Variables occurring in some actual cause of size at most `max_size`.
    pub fn part_of_set(&self, max_size: usize) -> Result<BTreeSet<String>, HpError> {
        Ok(self
            .actual_causes(max_size)?
            .into_iter()
            .flat_map(|c| c.cause.into_iter().map(|(n, _)| n))
            .collect())
    }
}

/// Checks that `lit` names an endogenous variable at its actual value.
fn check_literal(model: &CausalModel, sigma: &[Value], lit: &Literal) -> Result<usize, HpError> {
    let i = model
        .endogenous_index(&lit.0)
        .ok_or_else(|| HpError::NotEndogenous(lit.0.clone()))?;
    let actual = sigma[model.exogenous().len() + i];
    if actual != lit.1 {
        let d = model.domain();
        return Err(HpError::ValueMismatch {
            var: lit.0.clone(),
            claimed: if d.contains(lit.1) { d.label(lit.1) } else { lit.1 .0.to_string() },
            actual: d.label(actual),
        });
    }
    Ok(i)
}

pub fn is_weak_cause(situation: &CausalSituation, query: &CauseQuery) -> Result<Option<Witness>, HpError> {
    CauseSearch::new(situation, &query.target)?.weak(&query.candidate)
}

pub fn is_actual_cause(situation: &CausalSituation, query: &CauseQuery) -> Result<CauseVerdict, HpError> {
    CauseSearch::new(situation, &query.target)?.actual(&query.candidate)
}

pub fn enumerate_actual_causes(
    situation: &CausalSituation,
    target: &Literal,
    max_size: usize,
) -> Result<Vec<ActualCause>, HpError> {
    CauseSearch::new(situation, target)?.actual_causes(max_size)
}

pub fn is_part_of_actual_cause(
    situation: &CausalSituation,
    x: &Literal,
    target: &Literal,
    max_size: usize,
) -> Result<bool, HpError> {
    let search = CauseSearch::new(situation, target)?;
    check_literal(&situation.model, &search.sigma, x)?;
    Ok(search.part_of_set(max_size)?.contains(&x.0))
}
