//! Drives the compiled `testkit` binary against the shipped suites and
//! against throwaway suites in temp directories.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .and_then(Path::parent)
        .expect("crate lives two levels below the repo root")
        .to_path_buf()
}

fn testkit(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_testkit"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout_json(output: &Output) -> Value {
    let text = String::from_utf8_lossy(&output.stdout);
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {text}"))
}

#[test]
fn full_suite_run_passes_and_renders_json() {
    let output = testkit(&workspace_root(), &["run", "--report", "json"]);
    let report = stdout_json(&output);

    assert_eq!(output.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    assert_eq!(report["exit_code"], 0);
    assert!(report.get("gate_stopped_at").is_none(), "clean run must not report a gate");

    let layers = report["layers"].as_array().unwrap();
    let names: Vec<&str> = layers.iter().map(|l| l["layer"].as_str().unwrap()).collect();
    assert_eq!(names, ["unit", "integration", "acceptance"]);
    for layer in layers {
        assert_eq!(layer["counts"]["failed"], 0);
        assert_eq!(layer["counts"]["errored"], 0);
        assert_eq!(layer["counts"]["skipped"], 0);
        for case in layer["cases"].as_array().unwrap() {
            assert_eq!(case["status"], "passed", "case: {}", case["name"]);
        }
    }
}

#[test]
fn layer_filter_runs_single_layer() {
    let output =
        testkit(&workspace_root(), &["run", "suites", "--layer", "unit", "--report", "json"]);
    assert_eq!(output.status.code(), Some(0));

    let report = stdout_json(&output);
    let layers = report["layers"].as_array().unwrap();
    assert_eq!(layers.len(), 1);
    assert_eq!(layers[0]["layer"], "unit");
    assert!(!layers[0]["cases"].as_array().unwrap().is_empty());
}

#[test]
fn name_filter_selects_matching_cases() {
    let output =
        testkit(&workspace_root(), &["run", "suites", "--name", "events", "--report", "json"]);
    assert_eq!(output.status.code(), Some(0));

    let report = stdout_json(&output);
    let case_names: Vec<String> = report["layers"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|l| l["cases"].as_array().unwrap())
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(case_names, ["events-search", "events-search-de", "events-search-zh"]);
}

#[test]
fn malformed_case_file_exits_two_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let unit = dir.path().join("unit");
    std::fs::create_dir(&unit).unwrap();
    std::fs::write(unit.join("broken.case.json"), "{ definitely not json").unwrap();

    let output = testkit(dir.path(), &["run", "unit"]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.starts_with("testkit:"), "stderr: {stderr}");
    assert!(stderr.contains("broken.case.json"), "stderr: {stderr}");
}

#[test]
fn failing_suite_gates_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["unit", "acceptance"] {
        std::fs::create_dir(dir.path().join(sub)).unwrap();
    }
    std::fs::write(
        dir.path().join("unit/expect-zeppelin.case.json"),
        r#"{
            "name": "expect-zeppelin",
            "user_inputs": ["say hello"],
            "mock_script": [{"text": ["hello"]}],
            "assertions": [{"reply_contains": "zeppelin"}]
        }"#,
    )
    .unwrap();
    std::fs::write(
        dir.path().join("acceptance/never-reached.case.json"),
        r#"{
            "name": "never-reached",
            "user_inputs": ["say done"],
            "mock_script": [{"text": ["done"]}],
            "assertions": [{"reply_contains": "done"}]
        }"#,
    )
    .unwrap();

    let output = testkit(dir.path(), &["run", ".", "--report", "json"]);
    assert_eq!(output.status.code(), Some(1));

    let report = stdout_json(&output);
    assert_eq!(report["exit_code"], 1);
    assert_eq!(report["gate_stopped_at"], "unit");
    let layers = report["layers"].as_array().unwrap();
    assert_eq!(layers[0]["counts"]["failed"], 1);
    assert_eq!(layers[1]["counts"]["skipped"], 1);
    assert_eq!(layers[1]["cases"][0]["status"], "skipped");

    // The failing assertion is spelled out in the report.
    let assertions = layers[0]["cases"][0]["assertions"].as_array().unwrap();
    assert!(assertions.iter().any(|a| {
        a["passed"] == false && a["expectation_text"].as_str().unwrap().contains("zeppelin")
    }));
}

#[test]
fn trace_dir_mirrors_finished_turns() {
    let trace_dir = tempfile::tempdir().unwrap();
    let trace_path = trace_dir.path().to_str().unwrap();
    let output = testkit(
        &workspace_root(),
        &["run", "suites/unit/vehicle-status.case.json", "--trace-dir", trace_path],
    );
    assert_eq!(output.status.code(), Some(0));

    let mirrored: Vec<PathBuf> = std::fs::read_dir(trace_dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some())
        .collect();
    assert_eq!(mirrored.len(), 1, "one conversation, one mirror file");
    assert!(mirrored[0].file_name().unwrap().to_str().unwrap().ends_with(".spans.jsonl"));

    let content = std::fs::read_to_string(&mirrored[0]).unwrap();
    let lines: Vec<&str> = content.lines().collect();
    // root span + model call + tool call + final model call
    assert_eq!(lines.len(), 4);
    for line in lines {
        let span: Value = serde_json::from_str(line).expect("every line is one JSON span");
        assert!(span["span_id"].is_string());
    }
}

#[test]
fn out_flag_writes_report_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let output = testkit(
        &workspace_root(),
        &[
            "run",
            "suites/unit/vehicle-status.case.json",
            "--report",
            "json",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert_eq!(output.status.code(), Some(0));
    assert!(output.stdout.is_empty(), "report goes to the file, not stdout");

    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["exit_code"], 0);
    assert_eq!(report["layers"][0]["cases"][0]["name"], "vehicle-status");
}

#[test]
fn unwritable_out_path_is_a_config_error() {
    let output = testkit(
        &workspace_root(),
        &[
            "run",
            "suites/unit/vehicle-status.case.json",
            "--out",
            "/nonexistent-dir/report.txt",
        ],
    );
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("cannot write"));
}

#[test]
fn validate_docs_accepts_repo_layout() {
    let output = testkit(&workspace_root(), &["validate-docs"]);
    assert_eq!(
        output.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(String::from_utf8_lossy(&output.stdout).contains("docs ok"));
}

#[test]
fn validate_docs_flags_dangling_reference() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("docs/scenarios")).unwrap();
    std::fs::create_dir_all(dir.path().join("suites/unit")).unwrap();
    std::fs::write(
        dir.path().join("docs/scenarios/ghost.md"),
        "# Ghost scenario\n\n- case: `ghost-case`\n",
    )
    .unwrap();

    let output = testkit(dir.path(), &["validate-docs"]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("ghost-case"), "stderr: {stderr}");
}
