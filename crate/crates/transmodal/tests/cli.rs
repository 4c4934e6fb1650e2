//! The command-line interface, driven in-process: exit codes, JSON output
//! and file round-trips.

use std::path::PathBuf;

use serde_json::Value;
use transmodal::cli::{run_with, EXIT_FALSE, EXIT_TRUE, EXIT_UNKNOWN, EXIT_USAGE};

struct Run {
    code: i32,
    out: String,
    err: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(self.out.trim()).unwrap_or_else(|e| panic!("{e}: {}", self.out))
    }
}

fn run(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(
        std::iter::once("transmodal").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

/// A scratch directory unique to this test binary and test.
fn scratch(test: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("transmodal-cli-{}-{test}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn derive_reports_countermodels() {
    let r = run(&["--json", "derive", "--logic", "K4", "[]x0 -> x0"]);
    assert_eq!(r.code, EXIT_FALSE);
    let v = r.json();
    assert_eq!(v["derivable"], false);
    assert_eq!(v["countermodel"]["model"]["points"].as_array().unwrap().len(), 1);
    let r = run(&["derive", "--logic", "S4", "--premises", "[]x0", "[][]x0 & x0"]);
    assert_eq!(r.code, EXIT_TRUE);
}

#[test]
fn errors_are_reported_in_the_requested_form() {
    let r = run(&["derive", "--logic", "K4", "x0 &"]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.err.starts_with("error:"), "{}", r.err);
    let r = run(&["--json", "derive", "--logic", "K4", "x0 &"]);
    assert_eq!(r.code, EXIT_USAGE);
    let v = r.json();
    assert_eq!(v["verdict"], "error");
    assert!(v["reason"].as_str().unwrap().contains("syntax error"));
    assert_eq!(
        run(&["--json", "derive", "--logic", "K5", "x0"]).json()["verdict"],
        "error"
    );
    assert_eq!(run(&["no-such-command"]).code, EXIT_USAGE);
    assert_eq!(run(&["--help"]).code, EXIT_TRUE);
}

#[test]
fn admissibility_verdicts() {
    let r = run(&[
        "admissible",
        "--logic",
        "S4.3",
        "--premises",
        "[]x0 | []x1",
        "--conclusions",
        "x0; x1",
    ]);
    assert_eq!(r.code, EXIT_FALSE);
    let r = run(&["admissible", "--logic", "S5", "--premises", "p0"]);
    assert_eq!(r.code, EXIT_TRUE);
    let r = run(&[
        "--json",
        "admissible",
        "--logic",
        "K4",
        "--premises",
        "p0",
        "--cap",
        "3",
    ]);
    assert_eq!(r.code, EXIT_UNKNOWN);
    assert_eq!(run(&["unifiable", "--logic", "K4", "x0 <-> p0"]).code, EXIT_TRUE);
    assert_eq!(run(&["unifiable", "--logic", "S5", "[]p0 | []~p0"]).code, EXIT_FALSE);
}

#[test]
fn translations_print_formulas() {
    let r = run(&["translate", "--kind", "gmt", "x0 -> x1"]);
    assert_eq!(r.code, EXIT_TRUE);
    assert!(transmodal::syntax::parse(r.out.trim()).is_ok(), "{}", r.out);
    let r = run(&["translate", "--kind", "relativize", "--r", "p1", "[]x0"]);
    assert_eq!(r.code, EXIT_TRUE);
    assert!(r.out.contains("p1"));
}

#[test]
fn frames_round_trip_through_files() {
    let dir = scratch("frames");
    let model = dir.join("model.json");
    let r = run(&[
        "--json",
        "oracle",
        "refute",
        "--logic",
        "S4",
        "--cap",
        "3",
        "[]<>x0 -> <>[]x0",
    ]);
    assert_eq!(r.code, EXIT_FALSE);
    let v = r.json();
    let cm = &v["countermodel"];
    let frame = serde_json::json!({
        "points": cm["points"], "order": cm["order"], "params": cm["params"], "vars": cm["vars"]
    });
    std::fs::write(&model, frame.to_string()).unwrap();
    let root = cm["root"].as_u64().unwrap().to_string();
    let r = run(&[
        "frame",
        "check",
        "--in",
        path_str(&model),
        "--point",
        &root,
        "[]<>x0 -> <>[]x0",
    ]);
    assert_eq!(r.code, EXIT_FALSE, "{}{}", r.out, r.err);
    let r = run(&["--json", "frame", "analyze", "--in", path_str(&model)]);
    assert_eq!(r.code, EXIT_TRUE, "{}", r.err);
    let r = run(&[
        "--json",
        "frame",
        "transform",
        "--in",
        path_str(&model),
        "--op",
        "skeleton",
    ]);
    assert_eq!(r.code, EXIT_TRUE, "{}", r.err);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn universal_frames_and_enumeration() {
    let r = run(&[
        "--json",
        "universal",
        "--logic",
        "K4",
        "--params",
        "p0",
        "--stages",
        "1",
    ]);
    assert_eq!(r.code, EXIT_TRUE);
    let v = r.json();
    assert_eq!(v["clusters"].as_array().unwrap().len(), 5);
    assert_eq!(v["cluster_of"].as_array().unwrap().len(), 6);
    let r = run(&[
        "universal",
        "--logic",
        "K4",
        "--params",
        "p0",
        "--stages",
        "3",
        "--budget",
        "100",
    ]);
    assert_eq!(r.code, EXIT_UNKNOWN);
    let r = run(&["oracle", "enumerate", "--max", "2", "--logic", "GL"]);
    assert_eq!(r.code, EXIT_TRUE);
    assert!(r.out.contains("3 frames"), "{}", r.out);
}

#[test]
fn reduce_writes_instances() {
    let dir = scratch("reduce");
    let src = dir.join("sentence.json");
    let dst = dir.join("instance.json");
    std::fs::write(&src, r#"{"n":1,"m":1,"pattern":"sigma2","matrix":"X.t0"}"#).unwrap();
    let r = run(&[
        "reduce",
        "--family",
        "nexp",
        "--in",
        path_str(&src),
        "--out",
        path_str(&dst),
    ]);
    assert_eq!(r.code, EXIT_TRUE, "{}", r.err);
    let inst: Value = serde_json::from_str(&std::fs::read_to_string(&dst).unwrap()).unwrap();
    assert_eq!(inst["family"], "nexp");
    assert_eq!(inst["witness"]["kind"], "substitution");
    let xi = transmodal::syntax::parse(inst["xi"].as_str().unwrap()).unwrap();
    assert_eq!(inst["stats"]["xi_size"].as_u64().unwrap(), xi.size());
    // The QBF families reject a third-order sentence, and unknown families fail.
    assert_eq!(
        run(&["reduce", "--family", "qbf", "--in", path_str(&src)]).code,
        EXIT_USAGE
    );
    let r = run(&["--json", "reduce", "--family", "bogus", "--in", path_str(&src)]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.json()["reason"].as_str().unwrap().contains("bogus"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn bench_verifies_small_batches() {
    for family in ["qbf", "psp1par", "nexp"] {
        let r = run(&["bench", "--family", family, "--count", "3", "--d", "1", "--verify"]);
        assert_eq!(r.code, EXIT_TRUE, "{family}: {}", r.out);
        assert!(r.out.contains("0 disagreements"), "{}", r.out);
    }
    // Families without a complete decision procedure stay undecided.
    let r = run(&["bench", "--family", "conexp", "--count", "3", "--verify"]);
    assert_eq!(r.code, EXIT_UNKNOWN, "{}", r.out);
    assert!(r.out.contains("0 disagreements, 3 undecided"), "{}", r.out);
}
