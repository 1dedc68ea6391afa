use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_crowdgen");

fn run(dir: &Path, args: &[&str], stdin: Option<&[u8]>) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("CROWDGEN_DATA_DIR", dir.join("data"))
        .env_remove("CROWDGEN_CONFIG")
        .env_remove("CROWDGEN_LLM_KEY")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or_default()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn error_line(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with("{\"error\"")).expect("error line");
    serde_json::from_str(line).unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    std::fs::write(dir.join(name), serde_json::to_vec(v).unwrap()).unwrap();
    name.to_string()
}

#[test]
fn reason_prints_json() {
    let d = tempfile::tempdir().unwrap();
    let t = write(d.path(), "t.json", &json!({ "name": "image_adjust_hue", "description": "Experiment with different hues" }));
    let args = ["reason", "--task-file", &t, "--mode", "withlib30", "--k", "10", "--backend", "oracle", "--seed", "1"];
    let out = run(d.path(), &args, None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["k"], 10);
    assert_eq!(v["recommendations"].as_object().unwrap().len(), 3);
    let again = run(d.path(), &args, None);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn library_validate_reports_paths() {
    let d = tempfile::tempdir().unwrap();
    let lib: Value = serde_json::from_str(crowdgen_core::fixtures::LIBRARY_JSON).unwrap();
    let good = write(d.path(), "good.json", &lib);
    let out = run(d.path(), &["library", "validate", &good], None);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["responses"], 720);

    let mut bad = lib.clone();
    bad["tasks"][1]["responses"]["efficiency"][4]["widget"] = json!("knob");
    let bad = write(d.path(), "bad.json", &bad);
    let out = run(d.path(), &["library", "validate", &bad], None);
    assert_eq!(out.status.code(), Some(2));
    let e = error_line(&out);
    assert_eq!(e["error"]["code"], "validation");
    assert_eq!(e["error"]["exit_code"], 2);
    assert!(e["error"]["details"][0].as_str().unwrap().starts_with("tasks[1].responses.efficiency[4].widget"));

    let out = run(d.path(), &["library", "validate", "missing.json"], None);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_line(&out)["error"]["code"], "io");
}

#[test]
fn library_subset() {
    let d = tempfile::tempdir().unwrap();
    let lib: Value = serde_json::from_str(crowdgen_core::fixtures::LIBRARY_JSON).unwrap();
    let p = write(d.path(), "lib.json", &lib);
    let out = run(d.path(), &["library", "subset", &p, "--mode", "withlib10", "--seed", "3"], None);
    assert!(out.status.success());
    let sub = crowdgen_core::load_library_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(sub.total_responses(), 240);
    let out = run(d.path(), &["library", "subset", &p, "--mode", "withlib31"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_pipes_into_analyze() {
    let d = tempfile::tempdir().unwrap();
    let sim = run(d.path(), &["study", "simulate", "--p", "0.8", "--n", "78", "--seed", "42"], None);
    assert!(sim.status.success());
    assert_eq!(sim.stdout.iter().filter(|b| **b == b'\n').count(), 78 * 18);
    let out = run(d.path(), &["study", "analyze", "--group-by", "aspect-pair"], Some(&sim.stdout));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "aspect,left,right,count_left,count_right,chi2,p,stars");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 18);
    for r in &rows {
        let stars = r.rsplit(',').next().unwrap();
        assert!(matches!(stars, "0" | "1" | "2" | "3"), "{r}");
    }
    assert!(rows.iter().any(|r| r.contains("withlib30,withoutlib") && r.ends_with(",3")));

    let out = run(d.path(), &["study", "analyze"], Some(b"{not json}\n"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn study_plan_cli() {
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), &["study", "plan", "--n", "2", "--seed", "1"], None);
    assert!(out.status.success());
    let plan: crowdgen_core::study::StudyPlan = serde_json::from_slice(&out.stdout).unwrap();
    assert!(plan.participants.iter().all(|p| p.presentations() == 18));
    let p = write(d.path(), "plan.json", &serde_json::to_value(&plan).unwrap());
    let sim = run(d.path(), &["study", "simulate", "--plan", &p, "--p", "0.5", "--seed", "9"], None);
    assert_eq!(sim.stdout.iter().filter(|b| **b == b'\n').count(), 36);
    assert_eq!(run(d.path(), &["study", "plan", "--n", "0"], None).status.code(), Some(2));
}

#[test]
fn widgets_emit_and_apply() {
    let d = tempfile::tempdir().unwrap();
    let t = write(d.path(), "t.json", &json!({ "name": "image_adjust_hue", "description": "Experiment with different hues" }));
    let out = run(d.path(), &["widgets", "--task-file", &t, "--kinds", "slider,dropdown"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(d.path().join("specs.json"), &out.stdout).unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["specs"].as_array().unwrap().len(), 2);

    let top = run(d.path(), &["widgets", "--task-file", &t, "--seed", "2"], None);
    assert!(top.status.success());
    let v: Value = serde_json::from_slice(&top.stdout).unwrap();
    assert!((1..=3).contains(&v["specs"].as_array().unwrap().len()));

    let code = run(d.path(), &["emit", "--specs", "specs.json"], None);
    assert!(code.status.success());
    let text = String::from_utf8(code.stdout).unwrap();
    assert!(text.contains("min=0.0, max=1.0, step=0.01"));
    assert!(text.contains("options=[0.0, 0.2, 0.4, 0.6, 0.8]"));
    let prompt = run(d.path(), &["emit", "--specs", "specs.json", "--prompt"], None);
    let p: Value = serde_json::from_slice(&prompt.stdout).unwrap();
    assert!(p["system"].as_str().unwrap().contains("widget_type"));
    let bad = run(d.path(), &["emit", "--specs", "specs.json", "--template", "react"], None);
    assert_eq!(bad.status.code(), Some(2));

    let mismatch = run(d.path(), &["widgets", "--task-file", &t, "--kinds", "click_on_image"], None);
    assert_eq!(mismatch.status.code(), Some(2));
    assert_eq!(error_line(&mismatch)["error"]["code"], "unprocessable");

    let out = run(d.path(), &["apply", "--op", r#"{"op":"hue","h":0.2}"#, "--output", "out.png"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written = crowdgen_core::imaging::ImageBuffer::decode_png(&std::fs::read(d.path().join("out.png")).unwrap()).unwrap();
    let golden = crowdgen_core::imaging::ImageBuffer::decode_png(crowdgen_core::fixtures::PHOTO64_HUE020_PNG).unwrap();
    assert_eq!(written, golden);
    let out = run(d.path(), &["apply", "--op", r#"{"op":"exposure","ev":9}"#, "--output", "x.png"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn llm_backend_failure_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let cfg = "[reasoner]\nkind = \"llm\"\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\nmax_retries = 0\ntimeout_secs = 2\n";
    std::fs::write(d.path().join("engine.toml"), cfg).unwrap();
    let out = run(d.path(), &["--config", "engine.toml", "reason", "--task", "Adjust the hue", "--k", "1"], None);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_line(&out)["error"]["code"], "backend");
}

#[test]
fn bad_config_exits_2() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("engine.toml"), "k = 0\n").unwrap();
    let out = run(d.path(), &["--config", "engine.toml", "reason", "--task", "Adjust the hue"], None);
    assert_eq!(out.status.code(), Some(2));
}
