use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde_json::Value;

use qmt_cli::document::{matrix_to_doc, InstrumentDoc};
use qmt_cli::scenario::{Analysis, InstrumentDef, StateDef, Tolerances};
use qmt_cli::{load_instrument, parse_scenario, persist_instrument, run, serialize_scenario, Scenario};
use qmt_core::montecarlo::empirical_qq;
use qmt_core::models::random_unsharp;
use qmt_core::random;

const SCENARIO: &str = r#"{
  "dim": 2,
  "seed": 11,
  "states": [
    {"kind": "vector", "name": "plus", "amplitudes": [[0.7071067811865476, 0], [0.7071067811865476, 0]]},
    {"kind": "maximally_mixed", "name": "mixed"}
  ],
  "instruments": [
    {"kind": "lueders", "name": "Z", "observable": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]]},
    {"kind": "wang_busemeyer_pair", "names": ["A", "B"], "theta": 0.6283},
    {"kind": "trivial_noninvasive", "name": "T", "weights": [0.25, 0.75]},
    {"kind": "random_unsharp", "name": "U", "outcomes": 2, "seed": 3}
  ],
  "analyses": [
    {"kind": "classify", "instrument": "U"},
    {"kind": "effects", "a": "A", "b": "B", "state": "plus"},
    {"kind": "probabilities", "instrument": "Z", "state": "plus"},
    {"kind": "simulate", "sequence": ["A", "B"], "state": "plus", "trials": 2000}
  ]
}"#;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qmt(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("qmt").chain(args.iter().copied()), &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn json(o: &Outcome) -> Value {
    assert_eq!(o.code, 0, "stderr: {}", o.stderr);
    serde_json::from_str(&o.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn classify_reports_a_taxon_per_instrument() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", SCENARIO);
    let v = json(&qmt(&["classify", "--scenario", &s]));
    let classes = v["classes"].as_object().unwrap();
    assert_eq!(classes.keys().collect::<Vec<_>>(), ["A", "B", "T", "U", "Z"]);
    assert_eq!(classes["Z"]["taxon"], "P");
    assert_eq!(classes["U"]["taxon"], "Unsharp");
    assert_eq!(v["provenance"]["seed"], 11);
}

#[test]
fn report_runs_every_analysis_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", SCENARIO);
    let first = qmt(&["report", "--scenario", &s]);
    let v = json(&first);
    let analyses = v["analyses"].as_array().unwrap();
    assert_eq!(analyses.len(), 4);
    let effects = &analyses[1]["result"];
    assert!(effects["qoe"]["max_abs_deviation"].as_f64().unwrap() > 0.01);
    assert!(effects["qq"]["q"].as_f64().unwrap().abs() <= 1e-10);
    let p = analyses[2]["result"]["probabilities"].as_array().unwrap();
    assert!((p[0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(analyses[3]["result"]["n"], 2000);
    assert_eq!(qmt(&["report", "--scenario", &s]).stdout, first.stdout);

    let overridden = json(&qmt(&["report", "--scenario", &s, "--trials", "500", "--seed", "4"]));
    assert_eq!(overridden["analyses"][3]["result"]["n"], 500);
    assert_eq!(overridden["provenance"]["seed"], 4);
}

#[test]
fn out_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", SCENARIO);
    let target = dir.path().join("r.json");
    let o = qmt(&["classify", "--scenario", &s, "--out", target.to_str().unwrap()]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(target).unwrap()).unwrap();
    assert!(v["classes"].is_object());
}

#[test]
fn qq_matches_the_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let csv = "order,a_answer,b_answer,count\nAB,y,y,120\nAB,y,n,80\nAB,n,y,60\nAB,n,n,140\nBA,y,y,150\nBA,y,n,50\nBA,n,y,70\nBA,n,n,130\n";
    let d = write(dir.path(), "poll.csv", csv);
    let v = json(&qmt(&["qq", "--data", &d]));
    let est = empirical_qq(&[[120, 80], [60, 140]], &[[150, 50], [70, 130]]).unwrap();
    assert_eq!(v["q_hat"].as_f64().unwrap(), est.q_hat);
    assert_eq!(v["q_se"].as_f64().unwrap(), est.q_se);
    assert_eq!(v["z"].as_f64().unwrap(), est.z);
}

#[test]
fn simulate_counts_sum_to_trials() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", SCENARIO);
    let v = json(&qmt(&["simulate", "--scenario", &s, "--sequence", "A,B,Z", "--state", "mixed", "--trials", "3000"]));
    let cells = v["simulation"]["cells"].as_array().unwrap();
    let total: u64 = cells.iter().map(|c| c["count"].as_u64().unwrap()).sum();
    assert_eq!(total, 3000);
    for c in cells {
        let (f, p) = (c["frequency"].as_f64().unwrap(), c["probability"].as_f64().unwrap());
        assert!((f - p).abs() < 0.05);
    }
}

#[test]
fn search_reports_feasible_points() {
    let v = json(&qmt(&["search", "--family", "projective2", "--require", "qoe>=0.1", "--restarts", "4", "--seed", "2"]));
    assert_eq!(v["feasible"], true);
    assert_eq!(v["family"], "projective2");
    assert!(v["diagnostics"]["qoe_deviation"].as_f64().unwrap() >= 0.1);
}

#[test]
fn search_with_a_fixed_state() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", SCENARIO);
    let v = json(&qmt(&[
        "search", "--family", "projective2", "--require", "qoe>=0.1", "--restarts", "4", "--scenario", &s, "--state", "plus",
    ]));
    assert_eq!(v["feasible"], true);
    assert_eq!(v["params"].as_array().unwrap().len(), 8);
}

#[test]
fn infeasible_search_is_not_an_error() {
    let v = json(&qmt(&["search", "--family", "projective2", "--require", "qoe>=2", "--restarts", "1", "--max-iters", "50"]));
    assert_eq!(v["feasible"], false);
    assert_eq!(v["status"], "no feasible point within budget");
}

#[test]
fn validate_and_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", SCENARIO);
    let v = json(&qmt(&["validate", "--scenario", &s]));
    assert_eq!(v["valid"], true);
    let exported = qmt(&["export", "--scenario", &s, "--name", "U"]);
    let i = write(dir.path(), "u.json", &exported.stdout);
    let v = json(&qmt(&["validate", "--instrument", &i]));
    assert_eq!(v["instruments"][&i]["passed"], true);
    let loaded = load_instrument(&exported.stdout).unwrap();
    assert_eq!(loaded, random_unsharp(2, 2, 3).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qmt(&["--help"]).code, 0);
    assert_eq!(qmt(&["--version"]).code, 0);
    assert_eq!(qmt(&["frobnicate"]).code, 1);
    assert_eq!(qmt(&["classify"]).code, 1);
    let missing = qmt(&["classify", "--scenario", "/nonexistent/s.json"]);
    assert_eq!(missing.code, 1);
    assert!(missing.stderr.contains("/nonexistent/s.json"));

    let truncated = write(dir.path(), "t.json", &SCENARIO[..200]);
    let o = qmt(&["classify", "--scenario", &truncated]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("parse error"));

    let bad_state = write(
        dir.path(),
        "b.json",
        r#"{"dim": 2, "states": [{"kind": "density", "name": "rho1", "matrix": [[[0.7, 0], [0, 0]], [[0, 0], [0.7, 0]]]}]}"#,
    );
    let o = qmt(&["report", "--scenario", &bad_state]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("rho1"));

    let negative = write(dir.path(), "n.csv", "order,a_answer,b_answer,count\nAB,y,y,-3\n");
    assert_eq!(qmt(&["qq", "--data", &negative]).code, 2);

    let empty_arm = write(dir.path(), "e.csv", "order,a_answer,b_answer,count\nAB,y,y,3\n");
    assert_eq!(qmt(&["qq", "--data", &empty_arm]).code, 3);

    assert_eq!(qmt(&["search", "--family", "hexagon", "--require", "qoe>=0.1"]).code, 1);
    assert_eq!(qmt(&["search", "--family", "ok4", "--require", "qoe>>1"]).code, 1);
    assert_eq!(qmt(&["search", "--family", "ok4", "--require", "qoe>=0.1", "--restarts", "0"]).code, 3);
}

fn random_scenario(seed: u64) -> Scenario {
    let mut rng = random::rng(seed);
    let dim = rng.random_range(2..=4);
    let mut states = vec![
        StateDef::Density {
            name: "rho".into(),
            matrix: matrix_to_doc(random::state(dim, &mut rng).matrix()),
        },
        StateDef::Basis {
            name: "e".into(),
            index: rng.random_range(0..dim),
        },
    ];
    if rng.random_bool(0.5) {
        states.push(StateDef::MaximallyMixed { name: "mixed".into() });
    }
    let unsharp = random_unsharp(dim, rng.random_range(2..=3), rng.random()).unwrap();
    let doc = InstrumentDoc::from_instrument(&unsharp);
    let instruments = vec![
        InstrumentDef::Kraus {
            name: "K".into(),
            outcomes: doc.outcomes.clone(),
            kraus: doc.kraus.clone(),
        },
        InstrumentDef::Lueders {
            name: "L".into(),
            observable: matrix_to_doc(random::hermitian(dim, &mut rng).matrix()),
        },
        InstrumentDef::RandomUnsharp {
            name: "R".into(),
            outcomes: 2,
            seed: rng.random(),
        },
        InstrumentDef::Identity {
            name: "I".into(),
            outcome: rng.random_range(-3.0..3.0),
        },
    ];
    let analyses = vec![
        Analysis::Qoe {
            a: "K".into(),
            b: "L".into(),
            state: "rho".into(),
        },
        Analysis::Simulate {
            sequence: vec!["R".into(), "K".into()],
            state: "e".into(),
            trials: rng.random_range(1..10_000),
        },
    ];
    Scenario {
        dim,
        seed: rng.random(),
        tolerances: Tolerances {
            tol: rng.random_range(1e-12..1e-6),
            classify: rng.random_range(1e-12..1e-6),
        },
        states,
        instruments,
        analyses,
    }
}

#[test]
fn scenarios_round_trip() {
    for seed in 0..100 {
        let s = random_scenario(seed);
        let text = serialize_scenario(&s);
        let back = parse_scenario(&text).unwrap();
        assert_eq!(back, s, "seed {seed}");
        assert_eq!(serialize_scenario(&back), text);
    }
}

#[test]
fn instruments_round_trip() {
    let mut rng = random::rng(99);
    for k in 0..100 {
        let dim = rng.random_range(2..=5);
        let inst = random_unsharp(dim, rng.random_range(2..=4), k).unwrap();
        let text = persist_instrument(&inst);
        let back = load_instrument(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(persist_instrument(&back), text);
    }
}
