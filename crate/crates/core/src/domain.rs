//! Finite value domains.
//!
//! Every value in the toolkit is an index into an explicitly enumerable
//! domain, so all semantic checks can be decided by exhaustion.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A data value, stored as its index in the owning [`Domain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value(pub u32);

impl Value {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("modulus must be at least 2, got {0}")]
    BadModulus(u32),
    #[error("enumeration domain needs at least one symbol")]
    EmptyEnum,
    #[error("duplicate symbol `{0}` in enumeration domain")]
    DuplicateSymbol(String),
    #[error("`{value}` is not a value of domain {domain}")]
    NotInDomain { value: String, domain: String },
    #[error("domain {0} is not numeric")]
    NotNumeric(String),
}

/// The set `D` of data values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DomainRepr", into = "DomainRepr")]
pub enum Domain {
    Bool,
    Mod(u32),
    Enum(Vec<String>),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum DomainRepr {
    Bool {},
    Mod { m: u32 },
    Enum { values: Vec<String> },
}

impl TryFrom<DomainRepr> for Domain {
    type Error = DomainError;

    fn try_from(repr: DomainRepr) -> Result<Self, Self::Error> {
        match repr {
            DomainRepr::Bool {} => Ok(Domain::Bool),
            DomainRepr::Mod { m } => Domain::modulo(m),
            DomainRepr::Enum { values } => Domain::symbols(values),
        }
    }
}

impl From<Domain> for DomainRepr {
    fn from(d: Domain) -> Self {
        match d {
            Domain::Bool => DomainRepr::Bool {},
            Domain::Mod(m) => DomainRepr::Mod { m },
            Domain::Enum(values) => DomainRepr::Enum { values },
        }
    }
}

impl Domain {
    pub fn modulo(m: u32) -> Result<Self, DomainError> {
        if m < 2 {
            return Err(DomainError::BadModulus(m));
        }
        Ok(Domain::Mod(m))
    }

    pub fn symbols<S: Into<String>>(values: impl IntoIterator<Item = S>) -> Result<Self, DomainError> {
        let values: Vec<String> = values.into_iter().map(Into::into).collect();
        if values.is_empty() {
            return Err(DomainError::EmptyEnum);
        }
        for (i, v) in values.iter().enumerate() {
            if values[..i].contains(v) {
                return Err(DomainError::DuplicateSymbol(v.clone()));
            }
        }
        Ok(Domain::Enum(values))
    }

    pub fn size(&self) -> u32 {
        match self {
            Domain::Bool => 2,
            Domain::Mod(m) => *m,
            Domain::Enum(vs) => vs.len() as u32,
        }
    }

    /// Booleans count as integers modulo 2.
    pub fn is_numeric(&self) -> bool {
        !matches!(self, Domain::Enum(_))
    }

    pub fn values(&self) -> impl Iterator<Item = Value> + Clone {
        (0..self.size()).map(Value)
    }

    pub fn contains(&self, v: Value) -> bool {
        v.0 < self.size()
    }

    pub fn parse(&self, s: &str) -> Result<Value, DomainError> {
        let s = s.trim();
        let found = match self {
            Domain::Bool => match s {
                "0" | "false" => Some(Value(0)),
                "1" | "true" => Some(Value(1)),
                _ => None,
            },
            Domain::Mod(m) => s.parse::<u32>().ok().filter(|k| k < m).map(Value),
            Domain::Enum(vs) => vs.iter().position(|v| v == s).map(|i| Value(i as u32)),
        };
        found.ok_or_else(|| DomainError::NotInDomain {
            value: s.to_string(),
            domain: self.to_string(),
        })
    }

    pub fn label(&self, v: Value) -> String {
        match self {
            Domain::Bool | Domain::Mod(_) => v.0.to_string(),
            Domain::Enum(vs) => vs[v.index()].clone(),
        }
    }

    /// Integer literal reduced modulo `|D|`.
    pub fn from_int(&self, k: i64) -> Result<Value, DomainError> {
        if !self.is_numeric() {
            return Err(DomainError::NotNumeric(self.to_string()));
        }
        Ok(Value(k.rem_euclid(self.size() as i64) as u32))
    }

    /// `|D|^n`, or `None` on overflow.
    pub fn tuple_count(&self, n: usize) -> Option<u64> {
        (self.size() as u64).checked_pow(n.try_into().ok()?)
    }

    /// All tuples of `D^n` in lexicographic order (first position most significant).
    pub fn tuples(&self, n: usize) -> Tuples {
        Tuples {
            size: self.size(),
            current: Some(vec![Value(0); n]),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Bool => write!(f, "bool"),
            Domain::Mod(m) => write!(f, "mod:{m}"),
            Domain::Enum(vs) => write!(f, "enum:{}", vs.join("|")),
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = DomainError;

    /// Accepts `bool`, `mod:M` and `enum:a|b|c`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DomainError::NotInDomain {
            value: s.to_string(),
            domain: "domain syntax".to_string(),
        };
        if s == "bool" {
            return Ok(Domain::Bool);
        }
        if let Some(m) = s.strip_prefix("mod:") {
            return Domain::modulo(m.parse().map_err(|_| bad())?);
        }
        if let Some(vs) = s.strip_prefix("enum:") {
            return Domain::symbols(vs.split('|'));
        }
        Err(bad())
    }
}

/// Odometer over `D^n`.
#[derive(Debug, Clone)]
pub struct Tuples {
    size: u32,
    current: Option<Vec<Value>>,
}

impl Iterator for Tuples {
    type Item = Vec<Value>;

    fn next(&mut self) -> Option<Vec<Value>> {
        let out = self.current.clone()?;
        let mut next = out.clone();
        let mut i = next.len();
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i].0 + 1 < self.size {
                next[i].0 += 1;
                self.current = Some(next);
                break;
            }
            next[i] = Value(0);
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_forms() {
        let d: Domain = serde_json::from_str(r#"{"kind":"mod","m":7}"#).unwrap();
        assert_eq!(d, Domain::Mod(7));
        let d: Domain = serde_json::from_str(r#"{"kind":"enum","values":["lo","hi"]}"#).unwrap();
        assert_eq!(d.size(), 2);
        assert_eq!(serde_json::to_string(&Domain::Bool).unwrap(), r#"{"kind":"bool"}"#);
        assert!(serde_json::from_str::<Domain>(r#"{"kind":"mod","m":1}"#).is_err());
        assert!(serde_json::from_str::<Domain>(r#"{"kind":"enum","values":[]}"#).is_err());
        assert!(serde_json::from_str::<Domain>(r#"{"kind":"bool","m":3}"#).is_err());
    }

    #[test]
    fn parse_and_label() {
        let d = Domain::Mod(5);
        assert_eq!(d.parse("4").unwrap(), Value(4));
        assert!(d.parse("5").is_err());
        assert_eq!(d.from_int(-1).unwrap(), Value(4));
        assert_eq!(Domain::Bool.parse("true").unwrap(), Value(1));
        let e = Domain::symbols(["a", "b"]).unwrap();
        assert_eq!(e.label(Value(1)), "b");
        assert!(e.from_int(1).is_err());
    }

    #[test]
    fn tuples_enumerate_in_order() {
        let all: Vec<_> = Domain::Mod(3).tuples(2).collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[1], vec![Value(0), Value(1)]);
        assert_eq!(all[8], vec![Value(2), Value(2)]);
        assert_eq!(Domain::Bool.tuples(0).count(), 1);
    }

    #[test]
    fn from_str_roundtrip() {
        for s in ["bool", "mod:7", "enum:a|b"] {
            let d: Domain = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
    }
}
