//! A small straight-line language with bounded loops and input-guarded
//! conditionals, its interpreter, and three provenance semantics.
//!
//! ```text
//! program   := "input" IDENT ("," IDENT)* ";" stmt* "return" IDENT [";"]
//! stmt      := IDENT ":=" rhs ";" | "repeat" IDENT "{" stmt* "}"
//! rhs       := OP "(" atom ("," atom)* ")" | atom | "if" IDENT "then" rhs "else" rhs
//! atom      := IDENT | INT
//! ```
//!
//! The `;` before a closing `}` may be omitted, and `#` starts a comment.
//! Guards and repeat counts must be inputs. A variable assigned inside a
//! loop is versioned: its assignment instances in a run are named `v@0`,
//! `v@1`, ... in execution order, counting any assignment before the loop.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::domain::{Domain, Value};
use crate::func::{Builtin, FnSpec};
use crate::provgraph::{Artifact, Generated, Interpretation, Process, ProvGraph, Used};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: `{var}` is used before it is assigned")]
    UseBeforeAssign { pos: Pos, var: String },
    #[error("{pos}: `{var}` controls a {what} but is not an input")]
    NonInputControl { pos: Pos, var: String, what: &'static str },
    #[error("{pos}: `{var}` is already assigned; reassignment is only allowed inside repeat")]
    Reassignment { pos: Pos, var: String },
    #[error("{pos}: input `{var}` cannot be assigned")]
    AssignsInput { pos: Pos, var: String },
    #[error("{pos}: input `{var}` declared twice")]
    DuplicateInput { pos: Pos, var: String },
    #[error("{pos}: unknown operator `{op}`")]
    UnknownOp { pos: Pos, op: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Var(String),
    Int(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rhs {
    Call { op: String, args: Vec<Atom>, pos: Pos },
    Atom(Atom),
    If { guard: String, then: Box<Rhs>, otherwise: Box<Rhs> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign { var: String, rhs: Rhs, pos: Pos },
    Repeat { count: String, body: Vec<Stmt>, pos: Pos },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub inputs: Vec<String>,
    pub body: Vec<Stmt>,
    pub result: String,
    /// Variables assigned somewhere inside a loop.
    versioned: BTreeSet<String>,
}

const OPS: [&str; 9] = ["and", "or", "not", "xor", "add", "add-mod", "mul", "mul-mod", "copy"];
const KEYWORDS: [&str; 6] = ["input", "return", "repeat", "if", "then", "else"];

// ---------------------------------------------------------------- lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Assign,
    Semi,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(k) => write!(f, "`{k}`"),
            Tok::Assign => f.write_str("`:=`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        let start = i;
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '-') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            Tok::Int(s.parse().map_err(|_| ParseError::Syntax {
                pos,
                message: format!("integer literal `{s}` is too large"),
            })?)
        } else if c == ':' && chars.get(i + 1) == Some(&'=') {
            i += 2;
            Tok::Assign
        } else {
            i += 1;
            match c {
                ';' => Tok::Semi,
                ',' => Tok::Comma,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                _ => {
                    return Err(ParseError::Syntax {
                        pos,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            }
        };
        col += i - start;
        out.push((tok, pos));
    }
    out.push((Tok::Eof, Pos { line, column: col }));
    Ok(out)
}

// ---------------------------------------------------------------- parser

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    inputs: Vec<String>,
    /// Scopes of assigned variables, innermost last.
    scopes: Vec<BTreeSet<String>>,
    loop_depth: usize,
    versioned: BTreeSet<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            message: format!("expected {expected}, found {}", self.peek()),
        })
    }

    fn expect(&mut self, want: Tok) -> Result<Pos, ParseError> {
        if *self.peek() == want {
            Ok(self.bump().1)
        } else {
            self.error(&want.to_string())
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let pos = self.bump().1;
                Ok((s, pos))
            }
            _ => self.error("an identifier"),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos, ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => Ok(self.bump().1),
            _ => self.error(&format!("`{kw}`")),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn defined(&self, var: &str) -> bool {
        self.inputs.iter().any(|i| i == var) || self.scopes.iter().any(|s| s.contains(var))
    }

    fn use_var(&self, var: &str, pos: Pos) -> Result<(), ParseError> {
        if self.defined(var) {
            Ok(())
        } else {
            Err(ParseError::UseBeforeAssign { pos, var: var.into() })
        }
    }

    fn control(&self, var: &str, pos: Pos, what: &'static str) -> Result<(), ParseError> {
        self.use_var(var, pos)?;
        if self.inputs.iter().any(|i| i == var) {
            Ok(())
        } else {
            Err(ParseError::NonInputControl { pos, var: var.into(), what })
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        self.keyword("input")?;
        loop {
            let (name, pos) = self.ident()?;
            if self.inputs.contains(&name) {
                return Err(ParseError::DuplicateInput { pos, var: name });
            }
            self.inputs.push(name);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::Semi)?;
        let body = self.stmts()?;
        self.keyword("return")?;
        let (result, pos) = self.ident()?;
        self.use_var(&result, pos)?;
        if *self.peek() == Tok::Semi {
            self.bump();
        }
        if *self.peek() != Tok::Eof {
            return self.error("end of input");
        }
        Ok(Program {
            inputs: std::mem::take(&mut self.inputs),
            body,
            result,
            versioned: std::mem::take(&mut self.versioned),
        })
    }

    fn stmts(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        while !self.at_keyword("return") && !matches!(self.peek(), Tok::RBrace | Tok::Eof) {
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.at_keyword("repeat") {
            let pos = self.bump().1;
            let (count, cpos) = self.ident()?;
            self.control(&count, cpos, "repeat")?;
            self.expect(Tok::LBrace)?;
            self.loop_depth += 1;
            self.scopes.push(BTreeSet::new());
            let body = self.stmts()?;
            self.scopes.pop();
            self.loop_depth -= 1;
            self.expect(Tok::RBrace)?;
            if *self.peek() == Tok::Semi {
                self.bump();
            }
            return Ok(Stmt::Repeat { count, body, pos });
        }
        let (var, pos) = self.ident()?;
        self.expect(Tok::Assign)?;
        let rhs = self.rhs()?;
        if *self.peek() == Tok::RBrace && self.loop_depth > 0 {
            // `;` is optional before a closing brace
        } else {
            self.expect(Tok::Semi)?;
        }
        if self.inputs.contains(&var) {
            return Err(ParseError::AssignsInput { pos, var });
        }
        if self.defined(&var) && self.loop_depth == 0 {
            return Err(ParseError::Reassignment { pos, var });
        }
        if self.loop_depth > 0 {
            self.versioned.insert(var.clone());
        }
        self.scopes.last_mut().expect("a scope is open").insert(var.clone());
        Ok(Stmt::Assign { var, rhs, pos })
    }

    fn rhs(&mut self) -> Result<Rhs, ParseError> {
        if self.at_keyword("if") {
            self.bump();
            let (guard, gpos) = self.ident()?;
            self.control(&guard, gpos, "conditional")?;
            self.keyword("then")?;
            let then = self.rhs()?;
            self.keyword("else")?;
            let otherwise = self.rhs()?;
            return Ok(Rhs::If {
                guard,
                then: Box::new(then),
                otherwise: Box::new(otherwise),
            });
        }
        let is_call = matches!(self.peek(), Tok::Ident(_)) && self.toks[self.at + 1].0 == Tok::LParen;
        if is_call {
            let (op, pos) = match self.bump() {
                (Tok::Ident(s), p) => (s, p),
                _ => unreachable!(),
            };
            if !OPS.contains(&op.as_str()) {
                return Err(ParseError::UnknownOp { pos, op });
            }
            self.expect(Tok::LParen)?;
            let mut args = vec![self.atom()?];
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.atom()?);
            }
            self.expect(Tok::RParen)?;
            return Ok(Rhs::Call { op, args, pos });
        }
        Ok(Rhs::Atom(self.atom()?))
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        if let Tok::Int(k) = *self.peek() {
            self.bump();
            return Ok(Atom::Int(k));
        }
        let (v, pos) = self.ident()?;
        self.use_var(&v, pos)?;
        Ok(Atom::Var(v))
    }
}

pub fn parse(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
        inputs: Vec::new(),
        scopes: vec![BTreeSet::new()],
        loop_depth: 0,
        versioned: BTreeSet::new(),
    };
    p.program()
}

impl Program {
    /// True if the program has a loop or a conditional.
    pub fn has_control(&self) -> bool {
        fn rhs_has_if(r: &Rhs) -> bool {
            matches!(r, Rhs::If { .. })
        }
        fn walk(body: &[Stmt]) -> bool {
            body.iter().any(|s| match s {
                Stmt::Repeat { .. } => true,
                Stmt::Assign { rhs, .. } => rhs_has_if(rhs),
            })
        }
        walk(&self.body)
    }

    pub fn is_versioned(&self, var: &str) -> bool {
        self.versioned.contains(var)
    }
}

// ---------------------------------------------------------------- interpreter

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RunError {
    #[error("expected {expected} inputs, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("value for input `{0}` is outside the domain")]
    OutOfDomain(String),
    #[error("`{op}` at {pos}: {message}")]
    Op { op: String, pos: Pos, message: String },
    #[error("integer literal needs a numeric domain, not {0}")]
    Literal(Domain),
    #[error("repeat count `{0}` needs a numeric domain")]
    Count(String),
    #[error("intervention names `{0}`, which this run does not assign")]
    UnknownVariable(String),
    #[error("intervention value for `{0}` is outside the domain")]
    InterventionOutOfDomain(String),
}

/// An argument of an executed operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    /// An input or an earlier instance, by name.
    Var(String),
    Const(Value),
}

/// One executed assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub var: String,
    pub op: Builtin,
    pub args: Vec<Arg>,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub inputs: Vec<(String, Value)>,
    pub instances: Vec<Instance>,
    /// Name of the input or instance holding the result.
    pub result: String,
    pub value: Value,
}

impl Run {
    /// Inputs and instances with their values.
    pub fn valuation(&self) -> BTreeMap<String, Value> {
        self.inputs
            .iter()
            .cloned()
            .chain(self.instances.iter().map(|i| (i.name.clone(), i.value)))
            .collect()
    }

    pub fn instance_names(&self) -> Vec<&str> {
        self.instances.iter().map(|i| i.name.as_str()).collect()
    }
}

fn resolve_op(op: &str) -> Builtin {
    match op {
        "and" => Builtin::And,
        "or" => Builtin::Or,
        "not" => Builtin::Not,
        "xor" => Builtin::Xor,
        "add" | "add-mod" => Builtin::Add,
        "mul" | "mul-mod" => Builtin::Mul,
        _ => Builtin::Copy,
    }
}

struct Interp<'a> {
    domain: &'a Domain,
    program: &'a Program,
    tau: &'a BTreeMap<String, Value>,
    env: HashMap<String, (String, Value)>,
    counters: HashMap<String, usize>,
    instances: Vec<Instance>,
}

impl Interp<'_> {
    fn input_value(&self, var: &str) -> Value {
        self.env[var].1
    }

    fn atom(&self, a: &Atom) -> Result<(Arg, Value), RunError> {
        match a {
            Atom::Var(v) => {
                let (name, val) = self.env[v].clone();
                Ok((Arg::Var(name), val))
            }
            Atom::Int(k) => {
                let v = self
                    .domain
                    .from_int(*k)
                    .map_err(|_| RunError::Literal(self.domain.clone()))?;
                Ok((Arg::Const(v), v))
            }
        }
    }

    fn rhs(&self, r: &Rhs) -> Result<(Builtin, Vec<Arg>, Value), RunError> {
        match r {
            Rhs::If { guard, then, otherwise } => {
                if self.input_value(guard) != Value(0) {
                    self.rhs(then)
                } else {
                    self.rhs(otherwise)
                }
            }
            Rhs::Atom(a @ Atom::Var(_)) => {
                let (arg, v) = self.atom(a)?;
                Ok((Builtin::Copy, vec![arg], v))
            }
            Rhs::Atom(a @ Atom::Int(_)) => {
                let (_, v) = self.atom(a)?;
                Ok((Builtin::Const(v), vec![], v))
            }
            Rhs::Call { op, args, pos } => {
                let b = resolve_op(op);
                b.check(self.domain, args.len()).map_err(|e| RunError::Op {
                    op: op.clone(),
                    pos: *pos,
                    message: e.to_string(),
                })?;
                let mut out = Vec::with_capacity(args.len());
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    let (arg, v) = self.atom(a)?;
                    out.push(arg);
                    vals.push(v);
                }
                Ok((b, out, b.apply(self.domain, &vals)))
            }
        }
    }

    fn block(&mut self, body: &[Stmt]) -> Result<(), RunError> {
        for s in body {
            match s {
                Stmt::Assign { var, rhs, .. } => {
                    let (op, args, computed) = self.rhs(rhs)?;
                    let name = if self.program.is_versioned(var) {
                        let k = self.counters.entry(var.clone()).or_insert(0);
                        *k += 1;
                        format!("{var}@{}", *k - 1)
                    } else {
                        var.clone()
                    };
                    let value = self.tau.get(&name).copied().unwrap_or(computed);
                    self.env.insert(var.clone(), (name.clone(), value));
                    self.instances.push(Instance {
                        name,
                        var: var.clone(),
                        op,
                        args,
                        value,
                    });
                }
                Stmt::Repeat { count, body, .. } => {
                    if !self.domain.is_numeric() {
                        return Err(RunError::Count(count.clone()));
                    }
                    for _ in 0..self.input_value(count).0 {
                        self.block(body)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs the program with the instances named in `tau` forced to the given
/// values at their assignment point.
pub fn run_forced(
    program: &Program,
    domain: &Domain,
    inputs: &[Value],
    tau: &BTreeMap<String, Value>,
) -> Result<Run, RunError> {
    if inputs.len() != program.inputs.len() {
        return Err(RunError::InputCount {
            expected: program.inputs.len(),
            got: inputs.len(),
        });
    }
    for (name, v) in program.inputs.iter().zip(inputs) {
        if !domain.contains(*v) {
            return Err(RunError::OutOfDomain(name.clone()));
        }
    }
    for (name, v) in tau {
        if !domain.contains(*v) {
            return Err(RunError::InterventionOutOfDomain(name.clone()));
        }
    }
    let mut it = Interp {
        domain,
        program,
        tau,
        env: program
            .inputs
            .iter()
            .zip(inputs)
            .map(|(n, v)| (n.clone(), (n.clone(), *v)))
            .collect(),
        counters: HashMap::new(),
        instances: Vec::new(),
    };
    it.block(&program.body)?;
    if let Some(unknown) = tau.keys().find(|k| !it.instances.iter().any(|i| &i.name == *k)) {
        return Err(RunError::UnknownVariable(unknown.clone()));
    }
    let (result, value) = it.env[&program.result].clone();
    Ok(Run {
        inputs: program.inputs.iter().cloned().zip(inputs.iter().copied()).collect(),
        instances: it.instances,
        result,
        value,
    })
}

pub fn run(program: &Program, domain: &Domain, inputs: &[Value]) -> Result<Run, RunError> {
    run_forced(program, domain, inputs, &BTreeMap::new())
}

/// `f_tau(u)`: the full valuation of the run at `inputs` under `tau`.
pub fn reference_causal_function(
    program: &Program,
    domain: &Domain,
    inputs: &[Value],
    tau: &BTreeMap<String, Value>,
) -> Result<BTreeMap<String, Value>, RunError> {
    Ok(run_forced(program, domain, inputs, tau)?.valuation())
}

// ---------------------------------------------------------------- semantics

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Semantics {
    Trivial,
    Trace,
    Static,
}

impl Semantics {
    pub const ALL: [Semantics; 3] = [Semantics::Trivial, Semantics::Trace, Semantics::Static];

    pub fn name(self) -> &'static str {
        match self {
            Semantics::Trivial => "trivial",
            Semantics::Trace => "trace",
            Semantics::Static => "static",
        }
    }
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Semantics {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Semantics::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown semantics `{s}` (trivial, trace, static)"))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmitError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("static semantics needs a program without loops or conditionals")]
    NotStatic,
}

/// Process name for an operation: the operator and its arity, like `add/2`.
pub fn op_name(op: Builtin, domain: &Domain, arity: usize) -> String {
    let base = match op {
        Builtin::And => "and".to_string(),
        Builtin::Or => "or".to_string(),
        Builtin::Not => "not".to_string(),
        Builtin::Xor => "xor".to_string(),
        Builtin::Add => "add".to_string(),
        Builtin::Mul => "mul".to_string(),
        Builtin::Copy => "copy".to_string(),
        Builtin::Const(v) => format!("const-{}", domain.label(v)),
    };
    format!("{base}/{arity}")
}

pub fn process_id(artifact: &str) -> String {
    format!("p:{artifact}")
}

#[derive(Default)]
struct GraphBuilder {
    artifacts: Vec<Artifact>,
    processes: Vec<Process>,
    used: Vec<Used>,
    generated: Vec<Generated>,
    interp: Interpretation,
}

impl GraphBuilder {
    fn step(&mut self, domain: &Domain, out: &str, op: Builtin, args: &[String], value: Value) {
        let pid = process_id(out);
        let name = op_name(op, domain, args.len());
        for (i, a) in args.iter().enumerate() {
            self.used.push(Used {
                process: pid.clone(),
                artifact: a.clone(),
                port: i as u32 + 1,
            });
        }
        self.generated.push(Generated {
            artifact: out.to_string(),
            process: pid.clone(),
        });
        self.artifacts.push(Artifact {
            id: out.to_string(),
            value,
            input: false,
        });
        self.interp.insert(name.clone(), args.len(), FnSpec::Builtin(op));
        self.processes.push(Process { id: pid, name });
    }

    fn finish(self, domain: &Domain, run: &Run, result: String) -> (ProvGraph, Interpretation) {
        let mut artifacts: Vec<Artifact> = run
            .inputs
            .iter()
            .map(|(n, v)| Artifact {
                id: n.clone(),
                value: *v,
                input: true,
            })
            .collect();
        artifacts.extend(self.artifacts);
        let graph = ProvGraph {
            domain: domain.clone(),
            artifacts,
            processes: self.processes,
            used: self.used,
            generated: self.generated,
            result,
            inputs: run.inputs.iter().map(|(n, _)| n.clone()).collect(),
        };
        (graph, self.interp)
    }
}

/// The unrolled run as a graph: one process per executed operation, and
/// one constant process per literal argument.
fn trace_graph(domain: &Domain, run: &Run) -> (ProvGraph, Interpretation) {
    let mut b = GraphBuilder::default();
    for inst in &run.instances {
        let mut args = Vec::with_capacity(inst.args.len());
        for (i, a) in inst.args.iter().enumerate() {
            match a {
                Arg::Var(n) => args.push(n.clone()),
                Arg::Const(v) => {
                    let c = format!("{}#{}", inst.name, i + 1);
                    b.step(domain, &c, Builtin::Const(*v), &[], *v);
                    args.push(c);
                }
            }
        }
        b.step(domain, &inst.name, inst.op, &args, inst.value);
    }
    b.finish(domain, run, run.result.clone())
}

/// Name of the result artifact in trivial graphs.
pub fn trivial_result_name(run: &Run) -> String {
    if run.instances.iter().any(|i| i.name == run.result) {
        run.result.clone()
    } else {
        format!("{}@out", run.result)
    }
}

pub fn emit_run(domain: &Domain, run: &Run, semantics: Semantics) -> (ProvGraph, Interpretation) {
    match semantics {
        Semantics::Trivial => {
            let mut b = GraphBuilder::default();
            let name = trivial_result_name(run);
            b.step(domain, &name, Builtin::Const(run.value), &[], run.value);
            b.finish(domain, run, name)
        }
        Semantics::Trace | Semantics::Static => trace_graph(domain, run),
    }
}

/// `P(u)`: the provenance graph the semantics records for a run at `inputs`.
pub fn emit(
    program: &Program,
    domain: &Domain,
    semantics: Semantics,
    inputs: &[Value],
) -> Result<(ProvGraph, Interpretation), EmitError> {
    if semantics == Semantics::Static && program.has_control() {
        return Err(EmitError::NotStatic);
    }
    let r = run(program, domain, inputs)?;
    Ok(emit_run(domain, &r, semantics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::provgraph::{evaluate, validate};

    fn vals(xs: &[u32]) -> Vec<Value> {
        xs.iter().map(|&x| Value(x)).collect()
    }

    #[test]
    fn parses_the_fixtures() {
        let p = parse(fixtures::INCR_PROGRAM).unwrap();
        assert_eq!(p.inputs, vec!["x"]);
        assert_eq!(p.body.len(), 2);
        let p = parse(fixtures::POWER_PROGRAM).unwrap();
        assert_eq!(p.inputs, vec!["u", "x", "y"]);
        assert!(p.has_control());
        assert!(p.is_versioned("acc") && !p.is_versioned("s"));
    }

    #[test]
    fn parse_errors_carry_positions() {
        assert_eq!(
            parse("input x;\ny := if y then 1 else 2; return y"),
            Err(ParseError::UseBeforeAssign {
                pos: Pos { line: 2, column: 9 },
                var: "y".into()
            })
        );
        assert!(matches!(
            parse("input x; y := add(x, 1); z := if y then 1 else 2; return z"),
            Err(ParseError::NonInputControl { what: "conditional", .. })
        ));
        assert!(matches!(
            parse("input x; y := 1; repeat y { z := 2 } return x"),
            Err(ParseError::NonInputControl { what: "repeat", .. })
        ));
        assert!(matches!(
            parse("input x; y := 1; y := 2; return y"),
            Err(ParseError::Reassignment { .. })
        ));
        assert!(matches!(parse("input x; x := 1; return x"), Err(ParseError::AssignsInput { .. })));
        assert!(matches!(parse("input x; y := pow(x, 2); return y"), Err(ParseError::UnknownOp { .. })));
        assert!(matches!(
            parse("input x; repeat x { t := 1 } return t"),
            Err(ParseError::UseBeforeAssign { .. })
        ));
        let Err(ParseError::Syntax { pos, .. }) = parse("input x;\n  y = 1; return y") else {
            panic!("expected a syntax error");
        };
        assert_eq!(pos, Pos { line: 2, column: 5 });
    }

    #[test]
    fn runs() {
        let d = Domain::Mod(7);
        let p = parse(fixtures::POWER_PROGRAM).unwrap();
        assert_eq!(run(&p, &d, &vals(&[2, 1, 2])).unwrap().value, Value(2));
        let r = run(&p, &d, &vals(&[2, 1, 2])).unwrap();
        assert_eq!(r.instance_names(), ["s", "acc@0", "acc@1", "acc@2"]);
        assert_eq!(r.result, "acc@2");
        let p = parse(fixtures::INCR_PROGRAM).unwrap();
        assert_eq!(run(&p, &Domain::Mod(97), &vals(&[3])).unwrap().value, Value(8));
        let id = parse("input x; return x").unwrap();
        for x in 0..5 {
            assert_eq!(run(&id, &Domain::Mod(5), &vals(&[x])).unwrap().value, Value(x));
        }
    }

    #[test]
    fn forcing() {
        let p = parse(fixtures::INCR_PROGRAM).unwrap();
        let d = Domain::Mod(97);
        let tau = [("y".to_string(), Value(10))].into();
        let f = reference_causal_function(&p, &d, &vals(&[3]), &tau).unwrap();
        assert_eq!(f["z"], Value(20));
        assert_eq!(f["y"], Value(10));
        assert_eq!(
            reference_causal_function(&p, &d, &vals(&[3]), &BTreeMap::new()).unwrap(),
            run(&p, &d, &vals(&[3])).unwrap().valuation()
        );
        let p = parse(fixtures::POWER_PROGRAM).unwrap();
        let tau = [("acc@1".to_string(), Value(0))].into();
        let r = run_forced(&p, &Domain::Mod(7), &vals(&[2, 1, 2]), &tau).unwrap();
        assert_eq!(r.value, Value(0));
        let bad = [("acc@5".to_string(), Value(0))].into();
        assert!(matches!(
            run_forced(&p, &Domain::Mod(7), &vals(&[2, 1, 2]), &bad),
            Err(RunError::UnknownVariable(_))
        ));
    }

    #[test]
    fn conditionals_follow_the_guard() {
        let p = parse("input g, x; z := if g then add(x, 1) else mul(x, 3); return z").unwrap();
        let d = Domain::Mod(5);
        assert_eq!(run(&p, &d, &vals(&[1, 2])).unwrap().value, Value(3));
        assert_eq!(run(&p, &d, &vals(&[0, 2])).unwrap().value, Value(1));
    }

    #[test]
    fn emitted_graphs() {
        let d = Domain::Mod(7);
        let p = parse(fixtures::POWER_PROGRAM).unwrap();
        let (g, i) = emit(&p, &d, Semantics::Trivial, &vals(&[2, 1, 2])).unwrap();
        assert!(validate(&g, &i).is_valid());
        assert_eq!(g.artifact(&g.result).unwrap().value, Value(2));
        assert!(g.used.is_empty());

        let (g, i) = emit(&p, &d, Semantics::Trace, &vals(&[2, 1, 2])).unwrap();
        assert!(validate(&g, &i).is_valid());
        let names: Vec<&str> = g.processes.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["add/2", "const-1/0", "mul/2", "mul/2"]);
        let uses: Vec<(&str, &str)> = g
            .uses_of("p:acc@2")
            .iter()
            .map(|u| (u.process.as_str(), u.artifact.as_str()))
            .collect();
        assert_eq!(uses, [("p:acc@2", "acc@1"), ("p:acc@2", "s")]);
        for u in d.tuples(3) {
            let e = evaluate(&g, &i, &u).unwrap();
            let s = (u[1].0 + u[2].0) % 7;
            assert_eq!(e.result, Value(s * s % 7));
        }

        assert_eq!(emit(&p, &d, Semantics::Static, &vals(&[2, 1, 2])), Err(EmitError::NotStatic));
        let p = parse(fixtures::INCR_PROGRAM).unwrap();
        let (g, i) = emit(&p, &Domain::Mod(97), Semantics::Static, &vals(&[3])).unwrap();
        assert!(validate(&g, &i).is_valid());
        let ops: Vec<&str> = g
            .processes
            .iter()
            .filter(|p| !p.name.starts_with("const"))
            .map(|p| p.name.as_str())
            .collect();
        assert_eq!(ops, ["add/2", "mul/2"]);
        let (h, _) = emit(&p, &Domain::Mod(97), Semantics::Static, &vals(&[50])).unwrap();
        assert_eq!(g.used, h.used);
    }
}
