use std::time::{Duration, Instant};

use autoevolute::closure::NewtonOptions;
use autoevolute::service::{JobPhase, JobStatus, Response, Service};
use autoevolute::{newton_solve, CurveParams, RationalAngle, VelocityForm};
use serde_json::{json, Value};

fn call(svc: &Service, kind: &str, session: Option<&str>, payload: Value) -> Response {
    let text = json!({ "kind": kind, "session": session, "payload": payload }).to_string();
    serde_json::from_str(&svc.handle_json(&text)).unwrap()
}

fn open(svc: &Service, payload: Value) -> String {
    let r = call(svc, "open", None, payload);
    assert!(r.ok, "{r:?}");
    r.session.unwrap()
}

fn rough() -> Value {
    json!({ "kappa": 0.69, "a": 0.67, "b3": -0.2, "form": "sqrt", "target": { "p": 1, "q": 3 } })
}

fn wait(svc: &Service, id: &str) -> JobStatus {
    let deadline = Instant::now() + Duration::from_secs(60);
    loop {
        let r = call(svc, "status", Some(id), Value::Null);
        let job: JobStatus = serde_json::from_value(r.payload["solver"].clone()).unwrap();
        if job.state != JobPhase::Running {
            return job;
        }
        assert!(Instant::now() < deadline, "job did not finish");
        std::thread::sleep(Duration::from_millis(10));
    }
}

#[test]
fn solve_streams_trace_and_adopts_result() {
    let svc = Service::new();
    let id = open(&svc, rough());
    let r = call(&svc, "solve", Some(&id), Value::Null);
    assert!(r.ok);
    let job = wait(&svc, &id);
    assert_eq!(job.state, JobPhase::Done, "{:?}", job.reason);
    let result = job.result.unwrap();
    assert!(result.converged && result.residual_norm < 1e-10);
    assert_eq!(job.trace.len(), result.iterations + 1);
    assert_eq!(job.trace.last().unwrap().norm, result.residual_norm);

    let status = call(&svc, "status", Some(&id), Value::Null);
    assert_eq!(status.payload["params"]["kappa"].as_f64().unwrap(), result.params.kappa);

    let again = call(&svc, "solve", Some(&id), Value::Null);
    assert!(again.ok);
    let job = wait(&svc, &id);
    assert!(job.result.unwrap().iterations <= 1);
}

#[test]
fn converged_params_need_no_work() {
    let target = RationalAngle::new(1, 3).unwrap();
    let start = CurveParams::base(0.69, 0.67, -0.2, VelocityForm::Sqrt).unwrap();
    let s = newton_solve(&start, target, &NewtonOptions::default()).unwrap();
    let svc = Service::new();
    let id = open(
        &svc,
        json!({ "kappa": s.params.kappa(), "a": s.params.a(), "b3": -0.2, "form": "sqrt", "target": { "p": 1, "q": 3 } }),
    );
    call(&svc, "solve", Some(&id), Value::Null);
    let job = wait(&svc, &id);
    let result = job.result.unwrap();
    assert!(result.converged);
    assert!(result.iterations <= 1);
}

#[test]
fn second_job_is_refused_and_previews_keep_flowing() {
    let svc = Service::new();
    let id = open(&svc, rough());
    let fam = call(&svc, "get_family", Some(&id), json!({ "b3_min": -0.3, "b3_max": 0.1, "step": 0.02 }));
    assert!(fam.ok, "{fam:?}");
    let second = call(&svc, "solve", Some(&id), Value::Null);
    assert!(!second.ok);
    assert_eq!(second.error.unwrap().code, "AlreadyRunning");

    let started = Instant::now();
    let preview = call(&svc, "get_curve", Some(&id), json!({ "samples": 1024 }));
    assert!(preview.ok);
    assert_eq!(preview.payload["samples"].as_array().unwrap().len(), 1024);
    assert!(started.elapsed() < Duration::from_secs(5));

    let job = wait(&svc, &id);
    assert_eq!(job.state, JobPhase::Done, "{:?}", job.reason);
    assert!(job.members.len() >= 2);
    let mut b3: Vec<f64> = job.members.iter().map(|m| m.b3).collect();
    b3.sort_by(f64::total_cmp);
    assert!(b3.first().unwrap() <= &-0.29 && b3.last().unwrap() >= &0.09);
    assert!(job.members.iter().all(|m| m.residual_norm < 1e-10));
}

#[test]
fn sessions_are_independent() {
    let svc = Service::new();
    let a = open(&svc, rough());
    let b = open(&svc, Value::Null);
    call(&svc, "solve", Some(&a), Value::Null);
    let r = call(&svc, "solve", Some(&b), Value::Null);
    assert!(r.ok);
    wait(&svc, &a);
    let job_b = wait(&svc, &b);
    // the default helix is nowhere near closed
    assert_eq!(job_b.state, JobPhase::Failed);
    assert!(job_b.reason.is_some());
    assert_eq!(svc.session_count(), 2);
}

#[test]
fn mesh_has_expected_shape() {
    let svc = Service::new();
    let id = open(&svc, rough());
    let r = call(&svc, "get_mesh", Some(&id), json!({ "ring_size": 8, "samples": 64 }));
    assert!(r.ok, "{r:?}");
    let p = &r.payload;
    assert_eq!(p["periods"], 3);
    assert!((p["radius"].as_f64().unwrap() - 0.5 / 0.69).abs() < 1e-15);
    let verts = p["vertices"].as_array().unwrap().len();
    assert_eq!(verts, p["rings"].as_u64().unwrap() as usize * 8);
    assert_eq!(p["normals"].as_array().unwrap().len(), verts);
    for f in p["faces"].as_array().unwrap() {
        for i in f.as_array().unwrap() {
            assert!((i.as_u64().unwrap() as usize) < verts);
        }
    }
    let bad = call(&svc, "get_mesh", Some(&id), json!({ "ring_size": 2 }));
    assert_eq!(bad.error.unwrap().code, "MalformedRequest");
}

#[test]
fn set_params_returns_preview_residuals() {
    let svc = Service::new();
    let id = open(&svc, Value::Null);
    let r = call(&svc, "set_params", Some(&id), rough());
    assert!(r.ok);
    let norm = r.payload["residuals"]["d"].as_f64().unwrap().hypot(r.payload["residuals"]["angle_defect"].as_f64().unwrap());
    assert!(norm < 0.3);
}

#[test]
fn garbage_never_panics() {
    let svc = Service::new();
    for text in ["", "{", "[]", "null", r#"{"kind": 3}"#, r#"{"kind": "get_curve", "session": "s1"}"#] {
        let r: Response = serde_json::from_str(&svc.handle_json(text)).unwrap();
        assert!(!r.ok);
        assert!(r.error.is_some());
    }
}
