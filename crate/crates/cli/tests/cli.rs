use std::fs;
use std::path::Path;
use std::process::Command;

use sigchain::checker::CheckReport;
use sigchain::requirements::TransformReport;
use sigchain::tracegen::{Injection, Sidecar};
use sigchain::{SystemModel, Trace};

fn fixture(rel: &str) -> String {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    root.join(rel).to_string_lossy().into_owned()
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn sigchain(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_sigchain")).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn read(path: &str) -> String {
    fs::read_to_string(path).unwrap()
}

fn tmp(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

#[test]
fn measure_matches_golden() {
    let run = sigchain(&[
        "measure",
        "--model",
        &fixture("models/resampling.json"),
        "--trace",
        &fixture("traces/resampling.json"),
        "--subject",
        "act:0",
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.stdout, read(&fixture("golden/resampling.measure.json")));
}

#[test]
fn measure_values_follow_construction() {
    // The hand-built trace reads every other 5 ms sample and spends 1, 2
    // and 1 ms on the three hops with zero delays.
    let run = sigchain(&[
        "measure",
        "--model",
        &fixture("models/resampling.json"),
        "--trace",
        &fixture("traces/resampling.json"),
        "--subject",
        "act:0",
    ]);
    let v: serde_json::Value = serde_json::from_str(&run.stdout).unwrap();
    let path = &v["paths"][0];
    assert_eq!(path["chains"], 4);
    for (series, expected) in [("latency", 4_000_000), ("data_age", 4_000_000), ("sampling_rate", 10_000_000)] {
        assert_eq!(path[series]["bounds"]["lower_ns"], expected, "{series}");
        assert_eq!(path[series]["bounds"]["upper_ns"], expected, "{series}");
    }
    assert_eq!(v["event_distance"]["values"].as_array().unwrap().len(), 3);
}

#[test]
fn measure_text_has_one_row_per_property() {
    let run = sigchain(&[
        "measure",
        "--model",
        &fixture("models/fusion.json"),
        "--trace",
        &fixture("golden/fusion_seed7.trace.json"),
        "--subject",
        "fusion:0",
        "--pair",
        "fusion:1",
        "--format",
        "text",
    ]);
    assert_eq!(run.code, 0);
    let rows: Vec<&str> = run.stdout.lines().skip(1).collect();
    let names: Vec<&str> = rows.iter().map(|r| r.split_whitespace().next().unwrap()).collect();
    assert_eq!(names, ["event_distance", "latency", "age", "sampling_rate", "synchronicity"]);
}

#[test]
fn synchronicity_golden() {
    let run = sigchain(&[
        "measure",
        "--model",
        &fixture("models/fusion.json"),
        "--trace",
        &fixture("golden/fusion_seed7.trace.json"),
        "--subject",
        "fusion:0",
        "--pair",
        "fusion:1",
    ]);
    assert_eq!(run.stdout, read(&fixture("golden/fusion_seed7.measure.json")));
    // Both inputs are read in one activation, so ζ = (h_rad + 0) - (h_cam + 2 ms).
    let sidecar = Sidecar::from_json(&read(&fixture("golden/fusion_seed7.sidecar.json"))).unwrap();
    let h = |path: &str, k: u64| sidecar.chains.iter().find(|c| c.path == path && c.k == k).unwrap().h_ns.ns();
    let v: serde_json::Value = serde_json::from_str(&run.stdout).unwrap();
    let values = v["pairs"][0]["synchronicity"]["values"].as_array().unwrap();
    assert_eq!(values.len(), 5);
    for entry in values {
        let k = entry["k"].as_u64().unwrap();
        assert_eq!(entry["value_ns"], h("rad", k) - h("cam", k) - 2_000_000);
    }
}

#[test]
fn missing_trace_names_the_path() {
    let missing = "/definitely/not/here/trace.json";
    let run = sigchain(&["measure", "--model", &fixture("models/sense.json"), "--trace", missing, "--subject", "ctrl:1"]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains(missing), "{}", run.stderr);
}

#[test]
fn transform_matches_golden() {
    for name in ["sense", "resampling"] {
        let run = sigchain(&[
            "transform",
            "--model",
            &fixture(&format!("models/{name}.json")),
            "--requirements",
            &fixture(&format!("requirements/{name}.json")),
        ]);
        assert_eq!(run.code, 0, "{name}: {}", run.stderr);
        let golden = read(&fixture(&format!("golden/{name}.constraints.json")));
        assert_eq!(run.stdout, golden, "{name}");
        let parsed = TransformReport::from_json(&golden).unwrap();
        assert_eq!(parsed.to_json() + "\n", golden);
    }
}

#[test]
fn transform_edge_cases() {
    let empty = sigchain(&[
        "transform",
        "--model",
        &fixture("models/sense.json"),
        "--requirements",
        &fixture("requirements/empty.json"),
    ]);
    assert_eq!(empty.code, 0);
    let report = TransformReport::from_json(&empty.stdout).unwrap();
    assert!(report.constraints.is_empty() && report.diagnostics.is_empty());

    let unknown = sigchain(&[
        "transform",
        "--model",
        &fixture("models/sense.json"),
        "--requirements",
        &fixture("requirements/unknown_subject.json"),
        "--format",
        "text",
    ]);
    assert_eq!(unknown.code, 1);
    assert!(unknown.stdout.contains("nowhere:3"), "{}", unknown.stdout);
}

#[test]
fn check_passing_fixture() {
    let run = sigchain(&[
        "check",
        "--model",
        &fixture("models/sense.json"),
        "--trace",
        &fixture("golden/sense_seed42.trace.json"),
        "--requirements",
        &fixture("requirements/sense.json"),
    ]);
    assert_eq!(run.code, 0, "{}", run.stdout);
    let report = CheckReport::from_json(&run.stdout).unwrap();
    assert!(report.agreements.iter().all(|a| a.agree));
    assert_eq!(report.to_json() + "\n", run.stdout);
}

#[test]
fn check_with_stored_constraints() {
    let run = sigchain(&[
        "check",
        "--model",
        &fixture("models/resampling.json"),
        "--trace",
        &fixture("traces/resampling.json"),
        "--requirements",
        &fixture("requirements/resampling.json"),
        "--constraints",
        &fixture("golden/resampling.constraints.json"),
    ]);
    assert_eq!(run.code, 0, "{}", run.stdout);
}

#[test]
fn check_injected_fixture_reports_recorded_k() {
    let injection: Injection = serde_json::from_str(&read(&fixture("golden/sense_age_injected.injection.json"))).unwrap();
    let run = sigchain(&[
        "check",
        "--model",
        &fixture("models/sense.json"),
        "--trace",
        &fixture("golden/sense_age_injected.trace.json"),
        "--requirements",
        &fixture("requirements/sense.json"),
    ]);
    assert_eq!(run.code, 1);
    let report = CheckReport::from_json(&run.stdout).unwrap();
    let age = report.verdicts.iter().find(|v| v.id == "age").unwrap();
    assert_eq!(age.verdict.violating_indices(), [injection.k]);
    let latency = report.verdicts.iter().find(|v| v.id == "age/sense").unwrap();
    assert_eq!(latency.verdict.violating_indices(), [injection.k]);
}

#[test]
fn chainless_trace_policy() {
    let args = |strict: bool| {
        let mut a = vec![
            "check".to_string(),
            "--model".into(),
            fixture("models/sense.json"),
            "--trace".into(),
            fixture("traces/chainless.json"),
            "--requirements".into(),
            fixture("requirements/sense.json"),
        ];
        if strict {
            a.push("--strict-inconclusive".into());
        }
        a
    };
    let strict = args(true);
    let lenient = args(false);
    assert_eq!(sigchain(&strict.iter().map(String::as_str).collect::<Vec<_>>()).code, 2);
    assert_eq!(sigchain(&lenient.iter().map(String::as_str).collect::<Vec<_>>()).code, 0);
}

#[test]
fn generate_seed_42_is_golden() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, sidecar) = (tmp(&dir, "t.json"), tmp(&dir, "s.json"));
    for _ in 0..2 {
        let run = sigchain(&[
            "generate",
            "--model",
            &fixture("models/sense.json"),
            "--genspec",
            &fixture("genspec/sense.json"),
            "--trace-out",
            &trace,
            "--sidecar-out",
            &sidecar,
        ]);
        assert_eq!(run.code, 0, "{}", run.stderr);
        assert_eq!(fs::read(&trace).unwrap(), fs::read(fixture("golden/sense_seed42.trace.json")).unwrap());
        assert_eq!(fs::read(&sidecar).unwrap(), fs::read(fixture("golden/sense_seed42.sidecar.json")).unwrap());
    }
}

#[test]
fn generate_rejects_jitter_at_period() {
    let run = sigchain(&[
        "generate",
        "--model",
        &fixture("models/sense.json"),
        "--genspec",
        &fixture("genspec/bad_jitter.json"),
    ]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("jitter"), "{}", run.stderr);
}

#[test]
fn drawn_seed_is_printed_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tmp(&dir, "spec.json");
    let mut v: serde_json::Value = serde_json::from_str(&read(&fixture("genspec/sense.json"))).unwrap();
    v.as_object_mut().unwrap().remove("seed");
    fs::write(&spec, v.to_string()).unwrap();

    let first = sigchain(&["generate", "--model", &fixture("models/sense.json"), "--genspec", &spec]);
    assert_eq!(first.code, 0);
    let seed = first.stderr.trim().strip_prefix("seed: ").expect("seed is printed");
    let again = sigchain(&["generate", "--model", &fixture("models/sense.json"), "--genspec", &spec, "--seed", seed]);
    assert_eq!(again.stdout, first.stdout);
    assert!(again.stderr.is_empty());
}

#[test]
fn sidecar_agrees_with_measure() {
    let sidecar = Sidecar::from_json(&read(&fixture("golden/sense_seed42.sidecar.json"))).unwrap();
    let run = sigchain(&[
        "measure",
        "--model",
        &fixture("models/sense.json"),
        "--trace",
        &fixture("golden/sense_seed42.trace.json"),
        "--subject",
        "ctrl:1",
    ]);
    let v: serde_json::Value = serde_json::from_str(&run.stdout).unwrap();
    let latencies = v["paths"][0]["latency"]["values"].as_array().unwrap();
    let ages = v["paths"][0]["data_age"]["values"].as_array().unwrap();
    assert_eq!(latencies.len(), sidecar.chains.len());
    for ((h, a), truth) in latencies.iter().zip(ages).zip(&sidecar.chains) {
        assert_eq!(h["k"], truth.k);
        assert_eq!(h["value_ns"], truth.h_ns.ns());
        assert_eq!(a["value_ns"], truth.a_ns.ns());
    }
}

fn pipeline(model: &str, genspec: &str, requirements: &str, extra: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    let trace = tmp(&dir, "trace.json");
    let constraints = tmp(&dir, "constraints.json");
    let gen = sigchain(&["generate", "--model", model, "--genspec", genspec, "--trace-out", &trace]);
    assert_eq!(gen.code, 0, "{}", gen.stderr);
    let parsed = SystemModel::from_json(&read(model)).unwrap();
    let reloaded = Trace::from_json(&read(&trace), &parsed).unwrap();
    assert_eq!(reloaded.to_json() + "\n", read(&trace));

    for subject in parsed.paths().iter().map(|p| p.subject().to_string()) {
        let m = sigchain(&["measure", "--model", model, "--trace", &trace, "--subject", &subject]);
        assert_eq!(m.code, 0, "{}", m.stderr);
    }
    let t = sigchain(&["transform", "--model", model, "--requirements", requirements, "-o", &constraints]);
    assert_eq!(t.code, 0, "{}", t.stderr);
    let mut args = vec!["check", "--model", model, "--trace", &trace, "--requirements", requirements];
    args.extend(["--constraints", &constraints]);
    args.extend(extra);
    let c = sigchain(&args);
    assert_eq!(c.code, 0, "{}", c.stdout);
}

#[test]
fn pipeline_closure() {
    pipeline(
        &fixture("models/sense.json"),
        &fixture("genspec/sense.json"),
        &fixture("requirements/sense.json"),
        &[],
    );
    pipeline(
        &fixture("models/fusion.json"),
        &fixture("genspec/fusion.json"),
        &fixture("requirements/fusion.json"),
        &[],
    );
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(sigchain(&["measure"]).code, 2);
    assert_eq!(sigchain(&["nonsense"]).code, 2);
    let run = sigchain(&[
        "generate",
        "--model",
        &fixture("models/sense.json"),
        "--genspec",
        &fixture("genspec/sense.json"),
        "--inject",
        "frequency",
        "--inject-subject",
        "ctrl:1",
        "--inject-magnitude-ns",
        "1",
    ]);
    assert_eq!(run.code, 2);
    assert_eq!(sigchain(&["--help"]).code, 0);
}
