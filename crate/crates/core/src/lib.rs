//! Causal semantics for provenance graphs.
//!
//! Provenance graphs are read as structural causal models; actual causes
//! are decided by exhaustive search; the OPM inference rules are run and
//! audited against those causes; and provenance semantics for small
//! straight-line programs are scored by how well they approximate the
//! program, functionally and under interventions.

pub mod approx;
pub mod causal;
pub mod cli;
pub mod domain;
pub mod fixtures;
pub mod func;
pub mod gen;
pub mod hpcause;
pub mod opmrules;
pub mod provgraph;
pub mod slp;
pub mod translate;

pub use causal::{CausalModel, CausalSituation, Equation, Valuation};
pub use domain::{Domain, Value};
pub use func::{Builtin, FnSpec};
pub use provgraph::{Interpretation, ProvGraph};
