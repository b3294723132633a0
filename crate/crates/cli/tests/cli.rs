use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use agler_core::opmodel::kv_tuple;
use agler_core::wire::{self, ColligationDoc, KernelDoc, TupleDoc};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agler-lab")).args(args).arg("--quiet").output().expect("binary runs")
}

fn run_json(args: &[&str]) -> (i32, Value) {
    let out = run(args);
    let doc = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}); stderr: {}", String::from_utf8_lossy(&out.stderr)));
    (out.status.code().unwrap(), doc)
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("a number")
}

#[test]
fn example_kv_emits_the_boundary_tuple() {
    let (code, doc) = run_json(&["example", "kv"]);
    assert_eq!(code, 0);
    assert_eq!(doc["schema"], "agler-lab/1");
    let tuple: TupleDoc = serde_json::from_value(doc["tuple"].clone()).unwrap();
    assert_eq!((tuple.d, tuple.q), (3, 6));
    let emitted = tuple.to_tuple().unwrap();
    for (a, b) in emitted.matrices().iter().zip(kv_tuple().matrices()) {
        assert_eq!(a, b);
    }
    // T_j e₀ = e_{j+1} and the last row carries 2/√6 on the diagonal slot.
    let t1 = &tuple.matrices[0];
    assert_eq!(t1[1][0], [1.0, 0.0]);
    assert!((t1[5][1][0] - 2.0 / 6f64.sqrt()).abs() < 1e-15);
    assert_eq!(doc["commutant_dimension"], 1);
    assert!(f(&doc["max_commutator"]) <= 1e-15);
    assert!((f(&doc["polynomial_norm"]) - 27f64.sqrt()).abs() < 1e-12);
    assert!(f(&doc["polynomial_norm_at_0_999"]) > 1.01 * f(&doc["torus_grid_max"]));
    assert_eq!(doc["dilation"]["monomials_checked"], 35);
}

#[test]
fn example_parrott_and_gkvw() {
    let (code, doc) = run_json(&["example", "parrott"]);
    assert_eq!(code, 0);
    assert_eq!(f(&doc["max_commutator"]), 0.0);
    assert!(f(&doc["anticommutator"]) < 1e-12);
    assert!(f(&doc["rigidity"]) > 0.0);
    assert_eq!(doc["brehmer_classical"]["brehmer"], true);
    assert_eq!(doc["brehmer_full"]["brehmer"], false);

    let (code, doc) = run_json(&["example", "gkvw"]);
    assert_eq!(code, 0);
    assert_eq!(doc["commutant_dimension"], 1);
    assert_eq!(doc["vectors"].as_array().unwrap().len(), 3);
}

#[test]
fn realize_shift_round_trips() {
    let input = fixture("shift_disk.json");
    let (code, doc) = run_json(&["realize", "--input", input.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(doc["status"], "feasible");
    let r = &doc["realization"];
    assert!(f(&r["round_trip_residual"]) < 1e-7);

    // Feed the emitted colligation to `eval` at the sample points.
    let dir = tempfile::tempdir().unwrap();
    let eval_input = dir.path().join("eval.json");
    let problem: Value = serde_json::from_str(&std::fs::read_to_string(&input).unwrap()).unwrap();
    let eval_doc = serde_json::json!({ "colligation": r["colligation"], "at": problem["points"] });
    std::fs::write(&eval_input, eval_doc.to_string()).unwrap();
    let (code, evald) = run_json(&["eval", "--input", eval_input.to_str().unwrap()]);
    assert_eq!(code, 0);
    for (value, point) in evald["values"].as_array().unwrap().iter().zip(problem["points"].as_array().unwrap()) {
        let w = &value[0][0];
        let z = &point[0];
        assert!((f(&w[0]) - f(&z[0])).abs() < 1e-7 && (f(&w[1]) - f(&z[1])).abs() < 1e-7);
    }
    let coll: ColligationDoc = serde_json::from_value(r["colligation"].clone()).unwrap();
    assert!(coll.to_colligation().unwrap().unitarity_defect() < 1e-8);
}

#[test]
fn norm_below_the_value_exits_with_a_witness() {
    let input = fixture("below_norm.json");
    let (code, doc) = run_json(&["norm", "--input", input.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(doc["status"], "infeasible");
    let witness = &doc["witness"];
    assert!(f(&witness["pairing"]) < 0.0);
    let kernel: KernelDoc = serde_json::from_value(witness["kernel"].clone()).unwrap();
    assert!(kernel.to_kernel().is_ok());
    assert_eq!(witness["admissibility"]["admissible"], true);
}

#[test]
fn norm_bisection_of_the_shift() {
    let input = fixture("shift_disk.json");
    let (code, doc) = run_json(&["norm", "--input", input.to_str().unwrap(), "--tol", "1e-5"]);
    assert_eq!(code, 0);
    assert!(f(&doc["lo"]) <= 1.0 + 1e-9 && f(&doc["hi"]) >= 1.0 - 1e-9);
    assert!(f(&doc["hi"]) - f(&doc["lo"]) <= 1e-5);
}

#[test]
fn pick_on_the_bidisk() {
    let input = fixture("bidisk_pick.json");
    let (code, doc) = run_json(&["pick", "--input", input.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(f(&doc["interpolant"]["node_residual"]) < 1e-7);
    assert_eq!(doc["interpolant"]["values"].as_array().unwrap().len(), 1);
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("bidisk_pick.json");
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "4", "4"].iter().enumerate() {
        let path = dir.path().join(format!("out{k}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_agler-lab"))
            .args(["pick", "--quiet", "--input", input.to_str().unwrap(), "--output", path.to_str().unwrap()])
            .env("AGLER_LAB_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn random_vn_suite_is_seeded() {
    let (code, a) = run_json(&["vn", "--count", "40", "--seed", "7"]);
    assert_eq!(code, 0);
    assert_eq!(a["holds"], true);
    assert_eq!(a["seed"], 7);
    let (_, b) = run_json(&["vn", "--count", "40", "--seed", "7"]);
    assert_eq!(a, b);
}

#[test]
fn brehmer_and_check_kernel_on_emitted_documents() {
    let (_, parrott) = run_json(&["example", "parrott"]);
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("brehmer.json");
    let doc = serde_json::json!({ "tuple": parrott["tuple"], "preordering": [[1, 1, 1]] });
    std::fs::write(&input, doc.to_string()).unwrap();
    let (code, report) = run_json(&["brehmer", "--input", input.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(report["brehmer"], false);
    assert!((f(&report["margins"][0]["min_eigenvalue"]) + 2.0).abs() < 1e-12);

    let (_, norm) = run_json(&["norm", "--input", fixture("below_norm.json").to_str().unwrap()]);
    let input = dir.path().join("kernel.json");
    let doc = serde_json::json!({ "kernel": norm["witness"]["kernel"], "preordering": [[1]] });
    std::fs::write(&input, doc.to_string()).unwrap();
    let (code, report) = run_json(&["check-kernel", "--input", input.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(report["admissible"], true);
}

#[test]
fn aux_reports_the_extension() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("aux.json");
    let doc = serde_json::json!({
        "points": [[[0.1, 0.0], [0.2, 0.1]], [[-0.3, 0.2], [0.0, 0.4]], [[0.5, 0.0], [0.1, -0.2]]],
        "lambda": [1, 1],
        "preordering": [[1, 1]],
        "kernel": null
    });
    std::fs::write(&input, doc.to_string()).unwrap();
    let (code, report) = run_json(&["aux", "--input", input.to_str().unwrap()]);
    assert_eq!(code, 0);
    let ext = &report["extension"];
    assert!(f(&ext["g_norm"]) <= 1.0 + 1e-9);
    assert!(f(&ext["compressed_residual"]) < 1e-8);
}

#[test]
fn malformed_input_exits_one_with_a_location() {
    let out = run(&["decompose", "--input", fixture("malformed.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("colour") && err.contains("line 5"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        run(&["decompose", "--feas-tol=-1", "--input", fixture("shift_disk.json").to_str().unwrap()]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["decompose", "--input", "/nonexistent/problem.json"]).status.code(), Some(1));
}

#[test]
fn emitted_floats_round_trip() {
    let (_, doc) = run_json(&["example", "kv"]);
    let text = wire::to_json(&doc).unwrap();
    let back: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc, back);
}
