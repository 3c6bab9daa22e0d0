//! End-to-end tests of the command-line interface: exit codes, report
//! shapes against the shipped schemas, and byte stability of `--json`.

mod common;

use std::path::PathBuf;
use std::process::{Command, Output};

use common::{load_schema, validate};
use serde_json::Value;

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn rbcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbcheck"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

#[test]
fn exit_codes_holds_violated_error() {
    let out = rbcheck(&[
        "liveness",
        &fixture("not_regular.tpl"),
        "--spec",
        &fixture("nob_infa1.spec"),
    ]);
    assert_eq!(out.status.code(), Some(0));

    let out = rbcheck(&[
        "liveness",
        &fixture("not_regular.tpl"),
        "--spec",
        &fixture("infa1_infb.spec"),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tpl");
    std::fs::write(&bad, "system rb\nk 2\nstate p init\nedge p a.9 p\n").unwrap();
    let out = rbcheck(&["unwind", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of range"));
}

#[test]
fn verdict_json_validates_and_is_byte_stable() {
    let args = [
        "liveness",
        &fixture("not_regular.tpl"),
        "--spec",
        &fixture("infa1_infb.spec"),
        "--json",
    ];
    let out1 = rbcheck(&args);
    let out2 = rbcheck(&args);
    assert_eq!(out1.stdout, out2.stdout, "--json output must be byte-stable");
    let v = stdout_json(&out1);
    validate(&load_schema("verdict.schema.json"), &v).unwrap();
    assert_eq!(v["status"], "violated");
    assert_eq!(v["realized_at_n"], 2);
    assert_eq!(v["stats"]["ms"], 0, "timings stay zeroed without --timings");
}

#[test]
fn safety_verdict_validates() {
    let out = rbcheck(&[
        "safety",
        &fixture("not_regular_mutated.tpl"),
        "--spec",
        &fixture("two_a2_no_b.spec"),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    validate(&load_schema("verdict.schema.json"), &v).unwrap();
    assert_eq!(v["counterexample"]["cycle"].as_array().unwrap().len(), 0);
}

#[test]
fn unwind_and_classify_reports_validate() {
    let out = rbcheck(&["unwind", &fixture("not_regular.tpl"), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    validate(&load_schema("unwinding.schema.json"), &v).unwrap();
    assert_eq!(v["n"], 0);
    assert_eq!(v["r"], 1);

    let out = rbcheck(&["classify", &fixture("not_regular.tpl"), "--json"]);
    let v = stdout_json(&out);
    validate(&load_schema("classification.schema.json"), &v).unwrap();
    for (_, entry) in v.as_object().unwrap() {
        assert_eq!(entry["color"], "orange");
    }

    // restriction to one edge
    let out = rbcheck(&[
        "classify",
        &fixture("not_regular.tpl"),
        "--edge",
        "p:a.1:p@comp0",
        "--json",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v.as_object().unwrap().len(), 1);

    let out = rbcheck(&[
        "classify",
        &fixture("not_regular.tpl"),
        "--edge",
        "p:z.1:p@comp0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn alphabet_mismatch_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.spec");
    std::fs::write(
        &spec,
        "spec nbw\nstate s init accepting\ntrans s (_ zz.1 _) s\n",
    )
    .unwrap();
    let out = rbcheck(&[
        "liveness",
        &fixture("not_regular.tpl"),
        "--spec",
        spec.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown action"));
}

#[test]
fn reduce_emits_parseable_template_and_map() {
    let dir = tempfile::tempdir().unwrap();
    let tpl = dir.path().join("out.tpl");
    let map = dir.path().join("out.map.json");
    let out = rbcheck(&[
        "reduce",
        &fixture("single_clock.tpl"),
        "-o",
        tpl.to_str().unwrap(),
        "--map",
        map.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&tpl).unwrap();
    let t = rbcheck::parse::parse_template(&text).unwrap();
    assert_eq!(t.states.len(), 3);
    assert!(t.validate(true).is_empty());
    let map_json: Value =
        serde_json::from_str(&std::fs::read_to_string(&map).unwrap()).unwrap();
    validate(&load_schema("relabel_map.schema.json"), &map_json).unwrap();

    // reduce rejects rb inputs
    let out = rbcheck(&[
        "reduce",
        &fixture("not_regular.tpl"),
        "-o",
        tpl.to_str().unwrap(),
        "--map",
        map.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn timed_inputs_are_auto_reduced_with_letter_translation() {
    // ticks are broadcasts and `a` fires at clock value 1, so infinitely
    // many a.1 with infinitely many ticks is genuinely possible: violated
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("inf_a_b.spec");
    std::fs::write(
        &spec,
        "spec nbw\nstate s0 init\nstate s1\nstate s2 accepting\n\
         trans s0 (_ a.2 _) s0\ntrans s0 (_ b _) s0\ntrans s0 (_ a.1 _) s1\n\
         trans s1 (_ a.1 _) s1\ntrans s1 (_ a.2 _) s1\ntrans s1 (_ b _) s2\n\
         trans s2 (_ a.1 _) s1\ntrans s2 (_ a.2 _) s0\ntrans s2 (_ b _) s0\n",
    )
    .unwrap();
    let out = rbcheck(&[
        "liveness",
        &fixture("single_clock.tpl"),
        "--spec",
        spec.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["status"], "violated");
    assert!(v["realized_at_n"].is_u64());

    // a.1 with no prior tick is impossible (the guard needs clock value 1)
    let spec2 = dir.path().join("a_first.spec");
    std::fs::write(
        &spec2,
        "spec nfw\nstate s0 init\nstate s1 accepting\ntrans s0 (_ a.1 _) s1\n",
    )
    .unwrap();
    let out = rbcheck(&[
        "safety",
        &fixture("single_clock.tpl"),
        "--spec",
        spec2.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn oracle_reports_validate() {
    let out = rbcheck(&[
        "oracle",
        "pseudo-cycle",
        &fixture("three_state.tpl"),
        "--edge",
        "q:c.1:r@comp0",
        "--n",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    validate(&load_schema("oracle_pseudo_cycle.schema.json"), &v).unwrap();
    assert_eq!(v["found"], true);
    assert_eq!(v["broadcasts"], 0);

    let out = rbcheck(&[
        "oracle",
        "exec-fin",
        &fixture("not_regular.tpl"),
        "--n",
        "2",
        "--max-len",
        "4",
    ]);
    let v = stdout_json(&out);
    validate(&load_schema("oracle_exec_fin.schema.json"), &v).unwrap();
    assert!(v["words"].as_array().unwrap().len() > 3);

    let out = rbcheck(&[
        "oracle",
        "realize",
        &fixture("not_regular.tpl"),
        "--cycle",
        "p:a.2:q,q:b:p",
    ]);
    let v = stdout_json(&out);
    validate(&load_schema("oracle_realize.schema.json"), &v).unwrap();
    assert_eq!(v["realized_at_n"], 2);

    let out = rbcheck(&[
        "oracle",
        "loading",
        &fixture("not_regular.tpl"),
        "--broadcasts",
        "1",
        "--n-target",
        "2",
        "--max-n",
        "6",
    ]);
    let v = stdout_json(&out);
    validate(&load_schema("oracle_loading.schema.json"), &v).unwrap();
    assert_eq!(v["found"], true);

    let out = rbcheck(&[
        "oracle",
        "enumerate",
        &fixture("not_regular.tpl"),
        "--n",
        "2",
    ]);
    let v = stdout_json(&out);
    validate(&load_schema("oracle_enumerate.schema.json"), &v).unwrap();
    assert_eq!(v["states"], 3);

    // unknown edge ids are usage errors
    let out = rbcheck(&[
        "oracle",
        "pseudo-cycle",
        &fixture("three_state.tpl"),
        "--edge",
        "q:c.1:r@comp9",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn manifest_records_inputs_and_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest: PathBuf = dir.path().join("run.json");
    let out = rbcheck(&[
        "liveness",
        &fixture("not_regular.tpl"),
        "--spec",
        &fixture("nob_infa1.spec"),
        "--spec",
        &fixture("infa1_infb.spec"),
        "--manifest",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1)); // one of the two specs is violated
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    validate(&load_schema("manifest.schema.json"), &v).unwrap();
    assert_eq!(v["inputs"].as_array().unwrap().len(), 3);
    assert_eq!(v["verdicts"].as_array().unwrap().len(), 2);
    assert_eq!(v["tool"], "rbcheck");
}

#[test]
fn budget_env_override_is_accepted() {
    let out = Command::new(env!("CARGO_BIN_EXE_rbcheck"))
        .args([
            "oracle",
            "realize",
            &fixture("not_regular.tpl"),
            "--cycle",
            "p:b:p",
        ])
        .env("RBCHECK_BUDGET_MS", "10000")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["realized_at_n"], 1);
}
