mod support;

use provcause::approx::{check_causal, power, Budget, Level, Mode};
use provcause::fixtures;
use provcause::provgraph::evaluate;
use provcause::slp::{emit, parse, run, Program, Semantics};
use provcause::Domain;
use support::naive_first_failure;

fn cases() -> Vec<(&'static str, Program, Domain)> {
    vec![
        ("incr", parse(fixtures::INCR_PROGRAM).unwrap(), Domain::Mod(5)),
        ("power", parse(fixtures::POWER_PROGRAM).unwrap(), Domain::Mod(3)),
        ("select", parse(fixtures::SELECT_PROGRAM).unwrap(), Domain::Mod(3)),
        ("affine", parse(fixtures::AFFINE_PROGRAM).unwrap(), Domain::Mod(3)),
        (
            "gate",
            parse("input a, b; c := and(a, b); d := if a then not(c) else or(b, 1); return d").unwrap(),
            Domain::Bool,
        ),
    ]
}

fn semantics_for(p: &Program) -> Vec<Semantics> {
    Semantics::ALL
        .into_iter()
        .filter(|s| *s != Semantics::Static || !p.has_control())
        .collect()
}

#[test]
fn local_search_finds_the_first_failure() {
    for (name, p, d) in cases() {
        for sem in semantics_for(&p) {
            let v = check_causal(&p, &d, sem, Level::Local, &Budget::default()).unwrap();
            let naive = d
                .tuples(p.inputs.len())
                .find_map(|u| naive_first_failure(&p, &d, sem, &u, &u).map(|f| (u, f)));
            match (v.counterexample, naive) {
                (None, None) => {}
                (Some(c), Some((u, (tau, var, e, g)))) => {
                    assert_eq!((c.u, c.tau, c.variable, c.expected, c.got), (u, tau, var, e, g), "{name} {sem}")
                }
                (c, n) => panic!("{name} {sem}: search {c:?}, naive {n:?}"),
            }
        }
    }
}

#[test]
fn causal_power_matches_exhaustive_interventions() {
    for (name, p, d) in cases() {
        for sem in semantics_for(&p) {
            let rel = power(&p, &d, sem, Mode::Causal, &Budget::default()).unwrap();
            for (i, u) in rel.tuples.iter().enumerate() {
                for (j, w) in rel.tuples.iter().enumerate() {
                    let naive = naive_first_failure(&p, &d, sem, u, w).is_none();
                    assert_eq!(rel.contains(i, j), naive, "{name} {sem} {u:?} {w:?}");
                }
            }
            let g = check_causal(&p, &d, sem, Level::Global, &Budget::default()).unwrap();
            assert_eq!(g.pass, rel.is_total(), "{name} {sem}");
            if let Some(c) = g.counterexample {
                let i = rel.tuples.iter().position(|t| *t == c.u).unwrap();
                let j = rel.tuples.iter().position(|t| *t == c.u_prime).unwrap();
                let n = rel.tuples.len();
                let first_missing = (0..n * n).find(|k| !rel.contains(k / n, k % n));
                assert_eq!(first_missing, Some(i * n + j), "{name} {sem}");
            }
        }
    }
}

#[test]
fn functional_power_matches_direct_evaluation() {
    for (name, p, d) in cases() {
        for sem in semantics_for(&p) {
            let rel = power(&p, &d, sem, Mode::Functional, &Budget::default()).unwrap();
            for (i, u) in rel.tuples.iter().enumerate() {
                let (g, interp) = emit(&p, &d, sem, u).unwrap();
                for (j, w) in rel.tuples.iter().enumerate() {
                    let agrees = evaluate(&g, &interp, w).unwrap().result == run(&p, &d, w).unwrap().value;
                    assert_eq!(rel.contains(i, j), agrees, "{name} {sem} {u:?} {w:?}");
                }
            }
        }
    }
}
