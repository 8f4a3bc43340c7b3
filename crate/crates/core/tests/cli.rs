use std::path::PathBuf;
use std::process::Command;

use provcause::cli;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

/// `(exit code, stdout, stderr)` of an in-process invocation.
fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("provcause").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn eval_prints_the_result() {
    let (code, out, _) = run(&[
        "eval",
        &fixture("cake.json"),
        "--interp",
        &fixture("cake-ops.json"),
        "--inputs",
        "water=1,sugar=1,eggs=1,flour=1,butter=1,pan=1",
    ]);
    assert_eq!((code, out.as_str()), (0, "cake=1\n"));
    let (_, out, _) = run(&[
        "eval",
        &fixture("cake.json"),
        "--interp",
        &fixture("cake-ops.json"),
        "--inputs",
        "water=0,sugar=1,eggs=1,flour=1,butter=1,pan=1",
        "--format",
        "json",
    ]);
    let v = json(&out);
    assert_eq!(v["result"]["cake"], "0");
    assert_eq!(v["values"]["mix"], "0");
}

#[test]
fn eval_rejects_partial_inputs() {
    let (code, _, err) = run(&[
        "eval",
        &fixture("cake.json"),
        "--interp",
        &fixture("cake-ops.json"),
        "--inputs",
        "water=1",
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("missing value for input"), "{err}");
}

#[test]
fn cause_on_the_cake_model() {
    let (code, out, _) = run(&[
        "cause",
        &fixture("cake-model.json"),
        "--effect",
        "Cake=1",
        "--candidate",
        "Water=1",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!((v["weak"].as_bool(), v["actual"].as_bool()), (Some(true), Some(true)));
    assert_eq!(v["witness"]["xPrime"]["Water"], "0");

    let (code, out, _) = run(&[
        "cause",
        &fixture("cake-model.json"),
        "--effect",
        "Cake",
        "--candidate",
        "Water=1,Sugar=1",
    ]);
    assert_eq!(code, 1);
    assert_eq!(json(&out)["failingSubset"]["Water"], "1");
}

#[test]
fn causes_on_a_graph() {
    let (code, out, _) = run(&[
        "causes",
        &fixture("or.json"),
        "--interp",
        &fixture("or-ops.json"),
        "--effect",
        "out",
        "--max-cause-size",
        "2",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["maxCauseSize"], 2);
    assert!(!v["causes"].as_array().unwrap().is_empty());
}

#[test]
fn audit_strict_fails_on_the_const_gate() {
    let (code, out, _) = run(&[
        "audit",
        &fixture("constgate.json"),
        "--interp",
        &fixture("constgate-ops.json"),
        "--strict",
    ]);
    assert_eq!(code, 1);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(*lines.last().unwrap(), "spurious=1 sound=0");
    assert_eq!(json(lines[0])["status"], "spurious");
    let (code, _, _) = run(&["audit", &fixture("cake.json"), "--interp", &fixture("cake-ops.json"), "--strict"]);
    assert_eq!(code, 0);
}

#[test]
fn infer_emits_sorted_triples() {
    let (code, out, _) = run(&["infer", &fixture("cake.json")]);
    assert_eq!(code, 0);
    assert!(out.contains("wasDerivedFrom+\tcake\twater\n"));
    let lines: Vec<&str> = out.lines().collect();
    let mut sorted = lines.clone();
    sorted.sort();
    assert_eq!(lines, sorted);
}

#[test]
fn to_causal_round_trips_through_intervene() {
    let dir = std::env::temp_dir().join(format!("provcause-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let sidecar = dir.join("valuation.json");
    let (code, model, _) = run(&[
        "to-causal",
        &fixture("cake.json"),
        "--interp",
        &fixture("cake-ops.json"),
        "--valuation-out",
        sidecar.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let side = json(&std::fs::read_to_string(&sidecar).unwrap());
    assert_eq!(side["consistent"], true);
    let model_path = dir.join("model.json");
    std::fs::write(&model_path, model).unwrap();
    let (code, out, _) = run(&[
        "intervene",
        model_path.to_str().unwrap(),
        "--set",
        "mix=0",
        "--context",
        "water=1,sugar=1,eggs=1,flour=1,butter=1,pan=1",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!((v["mix"].as_str(), v["cake"].as_str()), (Some("0"), Some("0")));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn approx_verdicts_and_exit_codes() {
    let incr = fixture("incr.slp");
    let (code, out, _) = run(&["approx", &incr, "--domain", "mod:97", "--semantics", "trivial", "--inputs", "x=3", "--set", "y=10"]);
    assert_eq!(code, 1);
    let c = &json(&out)["counterexample"];
    assert_eq!((c["variable"].as_str(), c["expected"].as_str(), c["got"].as_str()), (Some("z"), Some("20"), Some("8")));
    let (code, _, _) = run(&["approx", &incr, "--domain", "mod:97", "--semantics", "trace", "--level", "local"]);
    assert_eq!(code, 0);
    let (code, out, _) = run(&["approx", &incr, "--domain", "mod:97", "--semantics", "trivial", "--mode", "functional", "--level", "global"]);
    assert_eq!(code, 1);
    assert_eq!(json(&out)["pass"], false);
    let (code, _, err) = run(&["approx", &fixture("power.slp"), "--semantics", "static"]);
    assert_eq!(code, 2);
    assert!(err.contains("static semantics"), "{err}");
    let (code, _, err) = run(&["approx", &incr, "--domain", "mod:97", "--budget", "10"]);
    assert_eq!(code, 2);
    assert!(err.contains("budget"), "{err}");
}

#[test]
fn power_dump_and_compare() {
    let p = fixture("power.slp");
    let (code, out, _) = run(&["power", &p, "--domain", "mod:3", "--semantics", "trace", "--dump"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 27 * 9);
    assert!(lines.contains(&"2,0,1\t2,1,1"));
    let (_, out, _) = run(&["compare", &p, "--domain", "mod:3", "--semantics", "trivial", "--against", "trace"]);
    assert_eq!(json(&out)["ordering"], "A<=B");
}

#[test]
fn trace_emits_a_graph_that_evaluates() {
    let dir = std::env::temp_dir().join(format!("provcause-trace-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let ops = dir.join("ops.json");
    let (code, graph, _) = run(&["trace", &fixture("power.slp"), "--inputs", "u=2,x=1,y=2", "--interp-out", ops.to_str().unwrap()]);
    assert_eq!(code, 0);
    let g = dir.join("g.json");
    std::fs::write(&g, graph).unwrap();
    let (code, out, _) = run(&["eval", g.to_str().unwrap(), "--interp", ops.to_str().unwrap()]);
    assert_eq!((code, out.as_str()), (0, "acc@2=2\n"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn conjecture_on_random_models_is_reproducible() {
    let args = ["conjecture", "--seed", "7", "--count", "10", "--strict"];
    let (code, first, _) = run(&args);
    let (_, second, _) = run(&args);
    assert_eq!(first, second);
    let v = json(&first);
    assert_eq!(v["causedNotDerived"], 0);
    assert_eq!(code, if v["derivedNotCaused"] == 0 { 0 } else { 1 });
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["audit", "x.json", "--bogus"]).0, 2);
    assert_eq!(run(&["validate", "/nonexistent.json", "--interp", "/nonexistent.json"]).0, 2);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("audit"));
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_provcause");
    let status = Command::new(bin)
        .args(["audit", &fixture("constgate.json"), "--interp", &fixture("constgate-ops.json"), "--strict"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&status.stdout).contains("spurious=1"));
    let status = Command::new(bin).arg("nope").output().unwrap();
    assert_eq!(status.status.code(), Some(2));
}
