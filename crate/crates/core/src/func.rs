//! Total functions over a finite domain: named builtins and explicit tables.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Domain, DomainError, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FnError {
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("builtin `{name}` does not accept arity {arity}")]
    BadArity { name: String, arity: usize },
    #[error("builtin `{name}` is not defined over domain {domain}")]
    WrongDomain { name: String, domain: String },
    #[error("table row {row} has {got} cells, expected {expected}")]
    RowWidth { row: usize, got: usize, expected: usize },
    #[error("table row {row} duplicates an earlier argument tuple")]
    DuplicateRow { row: usize },
    #[error("table has {got} rows, expected |D|^arity = {expected}")]
    RowCount { got: usize, expected: usize },
    #[error("table is too large for arity {0}")]
    TooLarge(usize),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    And,
    Or,
    Not,
    Xor,
    Add,
    Mul,
    Copy,
    /// Ignores its arguments.
    Const(Value),
}

impl Builtin {
    pub fn parse(name: &str, domain: &Domain) -> Result<Self, FnError> {
        Ok(match name {
            "and" => Builtin::And,
            "or" => Builtin::Or,
            "not" => Builtin::Not,
            "xor" => Builtin::Xor,
            "add" | "add-mod" => Builtin::Add,
            "mul" | "mul-mod" => Builtin::Mul,
            "copy" => Builtin::Copy,
            _ => match name.strip_prefix("const-") {
                Some(k) => Builtin::Const(domain.parse(k)?),
                None => return Err(FnError::UnknownBuiltin(name.to_string())),
            },
        })
    }

    pub fn name(&self, domain: &Domain) -> String {
        match self {
            Builtin::And => "and".into(),
            Builtin::Or => "or".into(),
            Builtin::Not => "not".into(),
            Builtin::Xor => "xor".into(),
            Builtin::Add => "add-mod".into(),
            Builtin::Mul => "mul-mod".into(),
            Builtin::Copy => "copy".into(),
            Builtin::Const(v) => format!("const-{}", domain.label(*v)),
        }
    }

    /// Checks that this builtin is a total function `D^arity -> D`.
    pub fn check(&self, domain: &Domain, arity: usize) -> Result<(), FnError> {
        let name = self.name(domain);
        let domain_ok = match self {
            Builtin::And | Builtin::Or | Builtin::Not | Builtin::Xor => *domain == Domain::Bool,
            Builtin::Add | Builtin::Mul => domain.is_numeric(),
            Builtin::Copy => true,
            Builtin::Const(v) => domain.contains(*v),
        };
        if !domain_ok {
            return Err(FnError::WrongDomain {
                name,
                domain: domain.to_string(),
            });
        }
        let arity_ok = match self {
            Builtin::Not | Builtin::Copy => arity == 1,
            Builtin::Const(_) => true,
            _ => arity >= 1,
        };
        if !arity_ok {
            return Err(FnError::BadArity { name, arity });
        }
        Ok(())
    }

    pub fn apply(&self, domain: &Domain, args: &[Value]) -> Value {
        let m = domain.size() as u64;
        match self {
            Builtin::And => Value(args.iter().all(|v| v.0 != 0) as u32),
            Builtin::Or => Value(args.iter().any(|v| v.0 != 0) as u32),
            Builtin::Not => Value((args[0].0 == 0) as u32),
            Builtin::Xor => Value(args.iter().fold(0, |acc, v| acc ^ (v.0 & 1))),
            Builtin::Add => Value((args.iter().map(|v| v.0 as u64).sum::<u64>() % m) as u32),
            Builtin::Mul => Value(args.iter().fold(1u64, |acc, v| acc * v.0 as u64 % m) as u32),
            Builtin::Copy => args[0],
            Builtin::Const(v) => *v,
        }
    }
}

/// Dense lookup table indexed by the argument tuple read as a base-`|D|` number.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Table {
    arity: usize,
    outputs: Vec<Value>,
}

impl Table {
    pub fn from_rows(domain: &Domain, arity: usize, rows: &[Vec<String>]) -> Result<Self, FnError> {
        let expected = domain
            .tuple_count(arity)
            .filter(|n| *n <= 1 << 24)
            .ok_or(FnError::TooLarge(arity))? as usize;
        let mut outputs: Vec<Option<Value>> = vec![None; expected];
        for (row, cells) in rows.iter().enumerate() {
            if cells.len() != arity + 1 {
                return Err(FnError::RowWidth {
                    row,
                    got: cells.len(),
                    expected: arity + 1,
                });
            }
            let args = cells[..arity]
                .iter()
                .map(|c| domain.parse(c))
                .collect::<Result<Vec<_>, _>>()?;
            let out = domain.parse(&cells[arity])?;
            let slot = &mut outputs[index_of(domain, &args)];
            if slot.is_some() {
                return Err(FnError::DuplicateRow { row });
            }
            *slot = Some(out);
        }
        if rows.len() != expected {
            return Err(FnError::RowCount {
                got: rows.len(),
                expected,
            });
        }
        Ok(Table {
            arity,
            outputs: outputs.into_iter().map(|o| o.unwrap()).collect(),
        })
    }

    /// Tabulates an arbitrary function over `D^arity`.
    pub fn tabulate(domain: &Domain, arity: usize, f: impl Fn(&[Value]) -> Value) -> Self {
        Table {
            arity,
            outputs: domain.tuples(arity).map(|t| f(&t)).collect(),
        }
    }

    /// Outputs listed in the order of [`Domain::tuples`].
    pub fn from_outputs(domain: &Domain, arity: usize, outputs: Vec<Value>) -> Result<Self, FnError> {
        let expected = domain.tuple_count(arity).ok_or(FnError::TooLarge(arity))? as usize;
        if outputs.len() != expected {
            return Err(FnError::RowCount {
                got: outputs.len(),
                expected,
            });
        }
        Ok(Table { arity, outputs })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn outputs(&self) -> &[Value] {
        &self.outputs
    }

    pub fn lookup(&self, domain: &Domain, args: &[Value]) -> Value {
        self.outputs[index_of(domain, args)]
    }

    pub fn rows(&self, domain: &Domain) -> Vec<Vec<String>> {
        domain
            .tuples(self.arity)
            .zip(&self.outputs)
            .map(|(args, out)| {
                args.iter()
                    .chain(std::iter::once(out))
                    .map(|v| domain.label(*v))
                    .collect()
            })
            .collect()
    }
}

fn index_of(domain: &Domain, args: &[Value]) -> usize {
    let m = domain.size() as usize;
    args.iter().fold(0, |acc, v| acc * m + v.index())
}

/// A total function `D^arity -> D`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FnSpec {
    Builtin(Builtin),
    Table(Table),
    /// `combiner(base(args[..n-1]), args[n-1])`: a function with an extra
    /// trailing fault argument. Serialized as a table.
    Faulted { base: Box<FnSpec>, combiner: Builtin },
}

/// On-disk form: `{"builtin": name}` or `{"table": rows}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FnRepr {
    Builtin(BuiltinRepr),
    Table(TableRepr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinRepr {
    pub builtin: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRepr {
    pub table: Vec<Vec<String>>,
}

impl FnSpec {
    pub fn constant(v: Value) -> Self {
        FnSpec::Builtin(Builtin::Const(v))
    }

    pub fn from_repr(repr: &FnRepr, domain: &Domain, arity: usize) -> Result<Self, FnError> {
        let spec = match repr {
            FnRepr::Builtin(b) => FnSpec::Builtin(Builtin::parse(&b.builtin, domain)?),
            FnRepr::Table(t) => FnSpec::Table(Table::from_rows(domain, arity, &t.table)?),
        };
        spec.check(domain, arity)?;
        Ok(spec)
    }

    pub fn to_repr(&self, domain: &Domain, arity: usize) -> FnRepr {
        match self {
            FnSpec::Builtin(b) => FnRepr::Builtin(BuiltinRepr {
                builtin: b.name(domain),
            }),
            FnSpec::Table(t) => FnRepr::Table(TableRepr {
                table: t.rows(domain),
            }),
            FnSpec::Faulted { .. } => FnRepr::Table(TableRepr {
                table: Table::tabulate(domain, arity, |args| self.apply(domain, args)).rows(domain),
            }),
        }
    }

    pub fn check(&self, domain: &Domain, arity: usize) -> Result<(), FnError> {
        match self {
            FnSpec::Builtin(b) => b.check(domain, arity),
            FnSpec::Table(t) if t.arity == arity => Ok(()),
            FnSpec::Table(_) => Err(FnError::BadArity {
                name: "table".into(),
                arity,
            }),
            FnSpec::Faulted { base, combiner } => {
                if arity == 0 {
                    return Err(FnError::BadArity {
                        name: "faulted".into(),
                        arity,
                    });
                }
                base.check(domain, arity - 1)?;
                combiner.check(domain, 2)
            }
        }
    }

    pub fn apply(&self, domain: &Domain, args: &[Value]) -> Value {
        match self {
            FnSpec::Builtin(b) => b.apply(domain, args),
            FnSpec::Table(t) => t.lookup(domain, args),
            FnSpec::Faulted { base, combiner } => {
                let (fault, rest) = args.split_last().expect("faulted function has a fault argument");
                let inner = base.apply(domain, rest);
                combiner.apply(domain, &[inner, *fault])
            }
        }
    }

    /// True if the output never depends on argument `i`.
    pub fn ignores_argument(&self, domain: &Domain, arity: usize, i: usize) -> bool {
        domain.tuples(arity).all(|mut args| {
            let base = self.apply(domain, &args);
            domain.values().all(|v| {
                args[i] = v;
                self.apply(domain, &args) == base
            })
        })
    }
}
