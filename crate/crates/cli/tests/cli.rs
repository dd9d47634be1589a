use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_autoevolute"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn solve_into(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("solution.json");
    let o = run(&[
        "solve",
        "--kappa",
        "0.69",
        "--a",
        "0.67",
        "--b3",
        "-0.2",
        "--target",
        "1/3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn eval_prints_csv() {
    let o = run(&["eval", "--kappa", "1", "--a", "0.3", "--samples", "256"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("t,x,y,z"));
    assert_eq!(lines.len(), 258);
}

#[test]
fn eval_writes_json_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = run(&["eval", "--kappa", "1", "--a", "0.3", "--evolute", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["role"], "evolute");
}

#[test]
fn solve_verify_export_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let doc = solve_into(dir.path());
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&doc).unwrap()).unwrap();
    assert!(value["solve"]["converged"].as_bool().unwrap());
    assert!(value["solve"]["residual_norm"].as_f64().unwrap() < 1e-10);
    assert!(value["closure_gap"].as_f64().unwrap() < 1e-7);
    assert!(value["verification"]["passed"].as_bool().unwrap());

    let report = dir.path().join("report.json");
    let o = run(&["verify", "--curve", doc.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(report.exists());

    let csv = dir.path().join("c.csv");
    let obj = dir.path().join("t.obj");
    let o = run(&[
        "export",
        "--curve",
        doc.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--obj",
        obj.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(&obj).unwrap().lines().any(|l| l.starts_with("f ")));
    assert!(std::fs::read_to_string(&csv).unwrap().lines().count() > 1000);
}

#[test]
fn corrupted_document_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let doc = solve_into(dir.path());
    let mut value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&doc).unwrap()).unwrap();
    let samples = value["samples"].as_array_mut().unwrap();
    let n = samples.len();
    for s in samples.iter_mut().skip(n / 3).take(5) {
        let x = s["position"][0].as_f64().unwrap();
        s["position"][0] = serde_json::json!(x + 1e-3);
    }
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, value.to_string()).unwrap();
    let o = run(&["verify", "--curve", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn scan_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.toml");
    std::fs::write(&cfg, "target = \"1/3\"\n[scan]\ngrid_kappa = 6\ngrid_a = 6\nb3_values = [0.0]\n").unwrap();
    let out = dir.path().join("scan.json");
    let o = run(&["--config", cfg.to_str().unwrap(), "scan", "--top", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v.to_string().contains("kappa"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["solve", "--target", "2/4"][..],
        &["eval", "--form", "cubic"][..],
        &["solve", "--target", "1/33"][..],
        &["eval", "--harmonic", "2:0.1"][..],
        &["frobnicate"][..],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["verify", "--curve", "/nonexistent.json"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn serve_answers_over_http() {
    let mut child = bin()
        .env("RUST_LOG", "info")
        .args(["serve", "--port", "0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let stderr = child.stderr.take().unwrap();
    let addr = BufReader::new(stderr)
        .lines()
        .map_while(Result::ok)
        .find_map(|l| l.split("http://").nth(1).map(str::to_string))
        .unwrap();

    let post = |body: &str| {
        let mut s = TcpStream::connect(&addr).unwrap();
        write!(
            s,
            "POST /api HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        let mut reply = String::new();
        s.read_to_string(&mut reply).unwrap();
        let (_, json) = reply.split_once("\r\n\r\n").unwrap();
        serde_json::from_str::<serde_json::Value>(json).unwrap()
    };
    let opened = post(r#"{"kind":"open","payload":{"kappa":0.69,"a":0.67,"b3":-0.2,"target":{"p":1,"q":3}}}"#);
    assert_eq!(opened["ok"], true);
    let id = opened["session"].as_str().unwrap().to_string();
    let curve = post(&format!(r#"{{"kind":"get_curve","session":"{id}","payload":{{"samples":64}}}}"#));
    assert_eq!(curve["payload"]["samples"].as_array().unwrap().len(), 64);
    let bad = post("not json");
    assert_eq!(bad["error"]["code"], "MalformedRequest");
    child.kill().unwrap();
    child.wait().unwrap();
}

#[test]
fn family_from_solved_document() {
    let dir = tempfile::tempdir().unwrap();
    let doc = solve_into(dir.path());
    let out = dir.path().join("family.json");
    let o = run(&[
        "family",
        "--curve",
        doc.to_str().unwrap(),
        "--b3-min",
        "-0.3",
        "--b3-max",
        "-0.1",
        "--step",
        "0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let members = v["members"].as_array().unwrap();
    assert_eq!(members.len(), 5);
    assert!(members.iter().all(|m| m["residual_norm"].as_f64().unwrap() < 1e-10));
}

#[test]
fn export_follows_config_table() {
    let dir = tempfile::tempdir().unwrap();
    let doc = solve_into(dir.path());
    let out_dir = dir.path().join("exports");
    let cfg = dir.path().join("job.toml");
    std::fs::write(
        &cfg,
        format!(
            "output_dir = {:?}\n[export]\ncsv = true\njson = false\nobj = true\nevolute = true\nring_size = 6\n",
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "export", "--curve", doc.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["solution.csv", "solution.obj", "solution_evolute.csv"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    assert!(!out_dir.join("solution.json").exists());
}
