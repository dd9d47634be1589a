//! Session-based request handling for interactive front ends.
//!
//! Requests and responses are JSON documents in a `{kind, session, payload}`
//! envelope; the transport (see the CLI's `serve`) only moves strings. Preview
//! requests are pure and cached, solves and family continuations run on a
//! background thread, one per session at a time.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::closure::{
    closure_residuals_with, continuation_observed, newton_solve_observed, symmetry_lines_from,
    ContinuationOptions, NewtonOptions, RationalAngle, SolveResult, TraceEntry, Truncation,
    PREVIEW_TOL,
};
use crate::frenet::{integrate_with, FrenetSample, IntegrateOptions, SampledCurve};
use crate::geometry::{evolute, midpoint_curve, tube_mesh};
use crate::io::{FamilyMemberDoc, LineDoc, ParamsDoc, SampleDoc, SolveDoc};
use crate::profile::CurveParams;

const MAX_SAMPLES: usize = 1 << 16;
const MAX_CACHE: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("malformed request: {0}")]
    MalformedRequest(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("a solver job is already running for this session")]
    AlreadyRunning,
    #[error("evaluation failed: {0}")]
    Evaluation(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::MalformedRequest(_) => "MalformedRequest",
            Self::UnknownSession(_) => "UnknownSession",
            Self::AlreadyRunning => "AlreadyRunning",
            Self::Evaluation(_) => "EvaluationFailed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub kind: String,
    #[serde(default)]
    pub session: Option<String>,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub ok: bool,
    pub kind: String,
    pub session: Option<String>,
    #[serde(default)]
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetParams {
    #[serde(flatten)]
    params: ParamsDoc,
    #[serde(default)]
    target: Option<RationalAngle>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GetCurve {
    #[serde(default = "default_samples")]
    samples: usize,
}

fn default_samples() -> usize {
    256
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GetMesh {
    #[serde(default = "default_ring")]
    ring_size: usize,
    /// Samples per period along the center curve.
    #[serde(default = "default_mesh_samples")]
    samples: usize,
    /// Defaults to the rotation order of the session target.
    #[serde(default)]
    periods: Option<u32>,
}

fn default_ring() -> usize {
    16
}

fn default_mesh_samples() -> usize {
    128
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GetFamily {
    b3_min: f64,
    b3_max: f64,
    step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Solve,
    Family,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JobPhase {
    #[default]
    Idle,
    Running,
    Done,
    Failed,
}

/// Solver state as reported by `status`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct JobStatus {
    pub job: Option<JobKind>,
    pub state: JobPhase,
    pub trace: Vec<TraceEntry>,
    pub result: Option<SolveDoc>,
    pub members: Vec<FamilyMemberDoc>,
    pub truncated: Vec<Truncation>,
    pub reason: Option<String>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum CacheKey {
    Curve(Vec<u64>, usize),
    Mesh(Vec<u64>, usize, usize, u32),
}

struct SessionState {
    params: CurveParams,
    target: RationalAngle,
    /// Bumped on every `set_params`.
    version: u64,
    cache: HashMap<CacheKey, Arc<Value>>,
}

struct Session {
    state: Mutex<SessionState>,
    job: Arc<Mutex<JobStatus>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// In-memory session registry.
pub struct Service {
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    next_id: AtomicU64,
    newton: NewtonOptions,
}

impl Default for Service {
    fn default() -> Self {
        Self::new()
    }
}

fn params_key(p: &CurveParams) -> Vec<u64> {
    let mut key = vec![
        p.kappa().to_bits(),
        p.profile().amplitude().to_bits(),
        p.profile().form() as u64,
    ];
    for h in p.profile().harmonics() {
        key.push(h.order as u64);
        key.push(h.weight.to_bits());
    }
    key
}

fn parse<T: for<'de> Deserialize<'de>>(payload: &Value) -> Result<T, ServiceError> {
    let payload = if payload.is_null() { json!({}) } else { payload.clone() };
    serde_json::from_value(payload).map_err(|e| ServiceError::MalformedRequest(e.to_string()))
}

fn default_params() -> CurveParams {
    CurveParams::base(1.0, 0.0, 0.0, Default::default()).expect("helix parameters are valid")
}

fn preview_residuals(params: &CurveParams, target: RationalAngle) -> Value {
    match closure_residuals_with(params, target, PREVIEW_TOL) {
        Ok(r) => json!({
            "d": r.d,
            "angle_defect": r.angle_defect,
            "angle_measured": r.angle_measured,
            "norm": r.norm(),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn sample_curve(params: &CurveParams, periods: u32, per_period: usize) -> Result<SampledCurve, ServiceError> {
    let opts = IntegrateOptions {
        tol: PREVIEW_TOL,
        resolution: per_period,
        symmetry_points: false,
        include_end: true,
        ..IntegrateOptions::default()
    };
    integrate_with(
        params,
        0.0,
        TAU * periods as f64,
        &FrenetSample::initial(params, 0.0),
        &opts,
    )
    .map_err(|e| ServiceError::Evaluation(e.to_string()))
}

impl Service {
    pub fn new() -> Self {
        Self::with_newton(NewtonOptions::default())
    }

    pub fn with_newton(newton: NewtonOptions) -> Self {
        Self {
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            newton,
        }
    }

    pub fn session_count(&self) -> usize {
        lock(&self.sessions).len()
    }

    /// Parses a request document, dispatches it and serializes the response.
    /// Never fails: malformed input yields an error response.
    pub fn handle_json(&self, text: &str) -> String {
        let response = match serde_json::from_str::<Request>(text) {
            Ok(req) => self.handle(&req),
            Err(e) => error_response(String::new(), None, ServiceError::MalformedRequest(e.to_string())),
        };
        serde_json::to_string(&response).expect("responses serialize")
    }

    pub fn handle(&self, req: &Request) -> Response {
        let result = match req.kind.as_str() {
            "open" => self.open(&req.payload),
            _ => self.session(req).and_then(|(id, s)| {
                match req.kind.as_str() {
                    "set_params" => self.set_params(&s, &req.payload),
                    "get_curve" => self.get_curve(&s, &req.payload),
                    "get_mesh" => self.get_mesh(&s, &req.payload),
                    "solve" => self.solve(&s),
                    "status" => self.status(&s),
                    "get_family" => self.get_family(&s, &req.payload),
                    "close" => {
                        lock(&self.sessions).remove(&id);
                        Ok(json!({ "closed": true }))
                    }
                    other => Err(ServiceError::MalformedRequest(format!("unknown kind `{other}`"))),
                }
                .map(|payload| (id, payload))
            }),
        };
        match result {
            Ok((id, payload)) => Response {
                ok: true,
                kind: req.kind.clone(),
                session: Some(id),
                payload,
                error: None,
            },
            Err(e) => error_response(req.kind.clone(), req.session.clone(), e),
        }
    }

    fn session(&self, req: &Request) -> Result<(String, Arc<Session>), ServiceError> {
        let id = req
            .session
            .clone()
            .ok_or_else(|| ServiceError::MalformedRequest("missing session".into()))?;
        let s = lock(&self.sessions)
            .get(&id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.clone()))?;
        Ok((id, s))
    }

    fn open(&self, payload: &Value) -> Result<(String, Value), ServiceError> {
        let mut state = SessionState {
            params: default_params(),
            target: RationalAngle::new(1, 3).expect("1/3 is valid"),
            version: 0,
            cache: HashMap::new(),
        };
        if !payload.is_null() {
            let sp: SetParams = parse(payload)?;
            apply(&mut state, sp)?;
        }
        let n = self.next_id.fetch_add(1, Ordering::Relaxed);
        let id = format!("s{n:08x}");
        let residuals = preview_residuals(&state.params, state.target);
        let session = Arc::new(Session {
            state: Mutex::new(state),
            job: Arc::new(Mutex::new(JobStatus::default())),
        });
        lock(&self.sessions).insert(id.clone(), session);
        Ok((id, json!({ "residuals": residuals })))
    }

    fn set_params(&self, s: &Session, payload: &Value) -> Result<Value, ServiceError> {
        let sp: SetParams = parse(payload)?;
        let (params, target) = {
            let mut st = lock(&s.state);
            apply(&mut st, sp)?;
            (st.params.clone(), st.target)
        };
        Ok(json!({
            "params": ParamsDoc::from_params(&params),
            "target": target,
            "residuals": preview_residuals(&params, target),
        }))
    }

    fn snapshot(s: &Session) -> (CurveParams, RationalAngle, u64) {
        let st = lock(&s.state);
        (st.params.clone(), st.target, st.version)
    }

    fn cached(s: &Session, key: CacheKey, make: impl FnOnce() -> Result<Value, ServiceError>) -> Result<Value, ServiceError> {
        if let Some(v) = lock(&s.state).cache.get(&key) {
            return Ok((**v).clone());
        }
        // computed outside the lock so previews never wait on each other
        let value = Arc::new(make()?);
        let mut st = lock(&s.state);
        if st.cache.len() >= MAX_CACHE {
            st.cache.clear();
        }
        let entry = st.cache.entry(key).or_insert(value);
        Ok((**entry).clone())
    }

    fn get_curve(&self, s: &Session, payload: &Value) -> Result<Value, ServiceError> {
        let req: GetCurve = parse(payload)?;
        if !(4..=MAX_SAMPLES).contains(&req.samples) {
            return Err(ServiceError::MalformedRequest(format!(
                "samples must lie in [4, {MAX_SAMPLES}]"
            )));
        }
        let (params, target, _) = Self::snapshot(s);
        let key = CacheKey::Curve(params_key(&params), req.samples);
        let mut out = Self::cached(s, key, || {
            let mut curve = sample_curve(&params, 1, req.samples)?;
            curve.samples.pop();
            let ev = evolute(&curve);
            let lines = symmetry_lines_from(&params, &FrenetSample::initial(&params, 0.0), 2, PREVIEW_TOL)
                .map_err(|e| ServiceError::Evaluation(e.to_string()))?;
            Ok(json!({
                "params": ParamsDoc::from_params(&params),
                "samples": curve.samples.iter().map(SampleDoc::from).collect::<Vec<_>>(),
                "evolute": ev.samples.iter().map(|e| [e.position.x, e.position.y, e.position.z]).collect::<Vec<_>>(),
                "symmetry_lines": lines.iter().map(LineDoc::from).collect::<Vec<_>>(),
            }))
        })?;
        out["target"] = json!(target);
        out["residuals"] = preview_residuals(&params, target);
        Ok(out)
    }

    fn get_mesh(&self, s: &Session, payload: &Value) -> Result<Value, ServiceError> {
        let req: GetMesh = parse(payload)?;
        if req.ring_size < 3 || !(4..=MAX_SAMPLES).contains(&req.samples) {
            return Err(ServiceError::MalformedRequest(
                "ring_size must be at least 3 and samples in [4, 65536]".into(),
            ));
        }
        let (params, target, _) = Self::snapshot(s);
        let periods = req.periods.unwrap_or_else(|| target.rotation_order()).clamp(1, 64);
        let key = CacheKey::Mesh(params_key(&params), req.ring_size, req.samples, periods);
        Self::cached(s, key, || {
            let curve = sample_curve(&params, periods, req.samples)?;
            let mid = midpoint_curve(&curve);
            let mesh = tube_mesh(&mid, 0.5 / params.kappa(), req.ring_size)
                .map_err(|e| ServiceError::Evaluation(e.to_string()))?;
            let v3 = |v: &crate::Vec3| [v.x, v.y, v.z];
            Ok(json!({
                "radius": 0.5 / params.kappa(),
                "periods": periods,
                "rings": mesh.rings,
                "ring_size": mesh.ring_size,
                "closed": mesh.closed,
                "radius_too_large": mesh.radius_too_large,
                "vertices": mesh.vertices.iter().map(v3).collect::<Vec<_>>(),
                "normals": mesh.normals.iter().map(v3).collect::<Vec<_>>(),
                "faces": mesh.faces,
            }))
        })
    }

    /// Marks the session busy, or reports `AlreadyRunning`.
    fn claim(s: &Session, kind: JobKind) -> Result<(), ServiceError> {
        let mut job = lock(&s.job);
        if job.state == JobPhase::Running {
            return Err(ServiceError::AlreadyRunning);
        }
        *job = JobStatus {
            job: Some(kind),
            state: JobPhase::Running,
            ..JobStatus::default()
        };
        Ok(())
    }

    fn solve(&self, s: &Arc<Session>) -> Result<Value, ServiceError> {
        Self::claim(s, JobKind::Solve)?;
        let (params, target, version) = Self::snapshot(s);
        let session = Arc::clone(s);
        let opts = self.newton;
        std::thread::spawn(move || {
            let job = Arc::clone(&session.job);
            let mut observer = |e: &TraceEntry| lock(&job).trace.push(*e);
            let outcome = newton_solve_observed(&params, target, &opts, &mut observer);
            finish_solve(&session, version, outcome.map_err(|e| e.to_string()));
        });
        Ok(json!({ "state": JobPhase::Running }))
    }

    fn get_family(&self, s: &Arc<Session>, payload: &Value) -> Result<Value, ServiceError> {
        let req: GetFamily = parse(payload)?;
        if !(req.b3_min <= req.b3_max && req.step > 0.0 && req.step.is_finite()) {
            return Err(ServiceError::MalformedRequest("need b3_min <= b3_max and step > 0".into()));
        }
        Self::claim(s, JobKind::Family)?;
        let (params, target, _) = Self::snapshot(s);
        let session = Arc::clone(s);
        let newton = self.newton;
        std::thread::spawn(move || {
            let job = Arc::clone(&session.job);
            // a converged session returns from Newton without iterating
            let start = newton_solve_observed(&params, target, &newton, &mut |e| lock(&job).trace.push(*e));
            let start = match start {
                Ok(r) => r,
                Err(e) => return fail(&job, format!("start point: {e}")),
            };
            lock(&job).members.push(FamilyMemberDoc::from(&start));
            let opts = ContinuationOptions {
                newton,
                ..ContinuationOptions::default()
            };
            let mut observer = |m: &SolveResult| lock(&job).members.push(FamilyMemberDoc::from(m));
            match continuation_observed(&start, (req.b3_min, req.b3_max), req.step, &opts, &mut observer) {
                Ok(family) => {
                    let mut j = lock(&job);
                    j.members = family.members.iter().map(FamilyMemberDoc::from).collect();
                    j.truncated = family.truncated;
                    j.result = Some(SolveDoc::from(&start));
                    j.state = JobPhase::Done;
                }
                Err(e) => fail(&job, e.to_string()),
            }
        });
        Ok(json!({ "state": JobPhase::Running }))
    }

    fn status(&self, s: &Session) -> Result<Value, ServiceError> {
        let (params, target, _) = Self::snapshot(s);
        let job = lock(&s.job).clone();
        Ok(json!({
            "params": ParamsDoc::from_params(&params),
            "target": target,
            "solver": job,
        }))
    }
}

fn fail(job: &Mutex<JobStatus>, reason: String) {
    let mut j = lock(job);
    j.state = JobPhase::Failed;
    j.reason = Some(reason);
}

fn finish_solve(session: &Session, version: u64, outcome: Result<SolveResult, String>) {
    match outcome {
        Ok(result) => {
            {
                // adopt the solution unless the parameters moved meanwhile
                let mut st = lock(&session.state);
                if st.version == version {
                    st.params = result.params.clone();
                }
            }
            let mut j = lock(&session.job);
            j.trace = result.trace.clone();
            j.result = Some(SolveDoc::from(&result));
            j.state = JobPhase::Done;
        }
        Err(reason) => fail(&session.job, reason),
    }
}

fn apply(state: &mut SessionState, sp: SetParams) -> Result<(), ServiceError> {
    let params = sp
        .params
        .to_params()
        .map_err(|e| ServiceError::MalformedRequest(e.to_string()))?;
    state.params = params;
    if let Some(t) = sp.target {
        state.target = t;
    }
    state.version += 1;
    Ok(())
}

fn error_response(kind: String, session: Option<String>, e: ServiceError) -> Response {
    Response {
        ok: false,
        kind,
        session,
        payload: Value::Null,
        error: Some(ErrorBody {
            code: e.code().to_string(),
            message: e.to_string(),
        }),
    }
}
