//! Closing curves through their symmetry normals.
//!
//! Since `v` and `tau` are even about every `t* = pi/2 + n pi`, the half-turn
//! about the principal normal line at `t*` maps the curve onto itself. Two
//! consecutive symmetry lines therefore generate the whole curve: their
//! composition is a screw motion that advances the parameter by `2 pi`. The
//! curve closes when the two lines meet (the screw degenerates to a rotation)
//! and the angle between them is a rational multiple of `pi`.
//!
//! The residual pair is `(d, angle_defect)`: `d` is the normalized coplanarity
//! scalar of the two lines, `angle_defect` the difference between the line
//! angle and the target.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frenet::{
    integrate_stops, integrate_with, symmetry_parameter, FrenetError, FrenetSample,
    IntegrateOptions, SampledCurve, Vec3,
};
use crate::geometry::{diameter, hausdorff};
use crate::par;
use crate::profile::{CurveParams, ProfileError, VelocityForm};

/// Parallel-line cutoff for the coplanarity scalar.
const PARALLEL_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosureError {
    #[error(transparent)]
    Integration(#[from] FrenetError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("invalid rational angle {p}/{q}: need 0 < p < q and gcd(p, q) = 1")]
    InvalidTarget { p: i64, q: i64 },
    #[error("residual norm {norm:.3e} is above the rough-closing threshold {threshold}")]
    NotRoughlyClosed { norm: f64, threshold: f64 },
    #[error("Newton iteration did not converge (residual norm {:.3e} after {} iterations)", .0.residual_norm, .0.iterations)]
    NoConvergence(Box<SolveResult>),
    #[error("Jacobian is singular (condition estimate {condition:.3e})")]
    SingularJacobian { condition: f64 },
    #[error("continuation must start from a converged solution")]
    StartNotConverged,
    #[error("parameters are not near a closed solution (residual norm {norm:.3e})")]
    NotNearConverged { norm: f64 },
    #[error("symmetry lines do not meet in a common point (spread {spread:.3e} relative to diameter)")]
    NoAxis { spread: f64 },
    #[error("need at least {0} symmetry lines")]
    TooFewLines(usize),
    #[error("invalid scan: {0}")]
    InvalidScan(String),
}

/// The angle `pi p / q` between consecutive symmetry lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RationalAngleRepr", into = "RationalAngleRepr")]
pub struct RationalAngle {
    p: i64,
    q: i64,
}

#[derive(Serialize, Deserialize)]
struct RationalAngleRepr {
    p: i64,
    q: i64,
}

impl TryFrom<RationalAngleRepr> for RationalAngle {
    type Error = ClosureError;
    fn try_from(r: RationalAngleRepr) -> Result<Self, Self::Error> {
        RationalAngle::new(r.p, r.q)
    }
}

impl From<RationalAngle> for RationalAngleRepr {
    fn from(r: RationalAngle) -> Self {
        RationalAngleRepr { p: r.p, q: r.q }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl RationalAngle {
    pub fn new(p: i64, q: i64) -> Result<Self, ClosureError> {
        if q <= 0 || p <= 0 || p >= q || gcd(p, q) != 1 {
            return Err(ClosureError::InvalidTarget { p, q });
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    pub fn value(&self) -> f64 {
        PI * self.p as f64 / self.q as f64
    }

    /// Unoriented line angle in `[0, pi/2]`; `pi p / q` and `pi (q - p) / q`
    /// describe the same pair of lines.
    pub fn line_angle(&self) -> f64 {
        let v = self.value();
        v.min(PI - v)
    }

    /// Number of `2 pi` periods after which the curve closes.
    pub fn rotation_order(&self) -> u32 {
        self.q as u32
    }
}

impl std::fmt::Display for RationalAngle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

impl std::str::FromStr for RationalAngle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (p, q) = s
            .split_once('/')
            .ok_or_else(|| format!("expected p/q, got `{s}`"))?;
        let p: i64 = p.trim().parse().map_err(|e| format!("bad numerator: {e}"))?;
        let q: i64 = q.trim().parse().map_err(|e| format!("bad denominator: {e}"))?;
        RationalAngle::new(p, q).map_err(|e| e.to_string())
    }
}

/// Principal-normal line at a symmetry parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryLine {
    pub index: i64,
    pub t_star: f64,
    pub base: Vec3,
    pub direction: Vec3,
}

impl SymmetryLine {
    pub fn from_sample(index: i64, sample: &FrenetSample) -> Self {
        Self {
            index,
            t_star: sample.t,
            base: sample.position,
            direction: sample.normal.normalize(),
        }
    }

    /// Half-turn about this line.
    pub fn half_turn(&self, p: &Vec3) -> Vec3 {
        let r = p - self.base;
        self.base + self.direction * (2.0 * self.direction.dot(&r)) - r
    }

    pub fn distance_to(&self, p: &Vec3) -> f64 {
        let r = p - self.base;
        (r - self.direction * self.direction.dot(&r)).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureResiduals {
    /// Normalized coplanarity scalar; zero iff the lines meet.
    pub d: f64,
    pub angle_defect: f64,
    /// Line angle in `[0, pi/2]`.
    pub angle_measured: f64,
    pub target: RationalAngle,
}

impl ClosureResiduals {
    pub fn norm(&self) -> f64 {
        self.d.hypot(self.angle_defect)
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.d, self.angle_defect)
    }
}

/// Residuals of two symmetry lines with respect to `target`.
pub fn residuals_from_lines(l0: &SymmetryLine, l1: &SymmetryLine, target: RationalAngle) -> ClosureResiduals {
    let w = l1.base - l0.base;
    let cross = l0.direction.cross(&l1.direction);
    let cross_norm = cross.norm();
    let w_norm = w.norm();
    let d = if w_norm == 0.0 {
        0.0
    } else if cross_norm > PARALLEL_EPS {
        w.dot(&cross) / (w_norm * cross_norm)
    } else {
        // parallel lines: their distance, relative to the base separation
        let n = l0.direction;
        (w - n * n.dot(&w)).norm() / w_norm
    };
    let angle_measured = l0.direction.dot(&l1.direction).abs().min(1.0).acos();
    ClosureResiduals {
        d,
        angle_defect: angle_measured - target.line_angle(),
        angle_measured,
        target,
    }
}

/// Default integrator tolerance for solver-grade residuals.
pub const SOLVE_INTEGRATOR_TOL: f64 = 1e-12;
/// Integrator tolerance for scans and previews.
pub const PREVIEW_TOL: f64 = 1e-7;

/// Symmetry lines `n = 0..count` from the canonical start frame.
pub fn symmetry_lines(params: &CurveParams, count: usize, tol: f64) -> Result<Vec<SymmetryLine>, ClosureError> {
    symmetry_lines_from(params, &FrenetSample::initial(params, 0.0), count, tol)
}

/// Symmetry lines `n = 0..count` starting from `init` at `init.t <= pi/2`.
pub fn symmetry_lines_from(
    params: &CurveParams,
    init: &FrenetSample,
    count: usize,
    tol: f64,
) -> Result<Vec<SymmetryLine>, ClosureError> {
    if count < 2 {
        return Err(ClosureError::TooFewLines(2));
    }
    let stops: Vec<f64> = (0..count as i64).map(symmetry_parameter).collect();
    let opts = IntegrateOptions {
        tol,
        ..IntegrateOptions::default()
    };
    let samples = integrate_stops(params, init, &stops, &opts)?;
    Ok(samples[1..]
        .iter()
        .enumerate()
        .map(|(n, s)| SymmetryLine::from_sample(n as i64, s))
        .collect())
}

pub fn closure_residuals(params: &CurveParams, target: RationalAngle) -> Result<ClosureResiduals, ClosureError> {
    closure_residuals_with(params, target, SOLVE_INTEGRATOR_TOL)
}

pub fn closure_residuals_with(
    params: &CurveParams,
    target: RationalAngle,
    tol: f64,
) -> Result<ClosureResiduals, ClosureError> {
    let lines = symmetry_lines(params, 2, tol)?;
    Ok(residuals_from_lines(&lines[0], &lines[1], target))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Convergence threshold on the residual norm.
    pub tol: f64,
    pub max_iter: usize,
    pub integrator_tol: f64,
    /// Relative central-difference step per parameter.
    pub fd_step: f64,
    pub max_halvings: u32,
    /// Newton only starts below this residual norm.
    pub rough_threshold: f64,
    pub max_condition: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 30,
            integrator_tol: SOLVE_INTEGRATOR_TOL,
            fd_step: 1e-6,
            max_halvings: 8,
            rough_threshold: 0.3,
            max_condition: 1e12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub kappa: f64,
    pub a: f64,
    pub d: f64,
    pub angle_defect: f64,
    pub norm: f64,
    /// Damping factor of the accepted step (1 for a full Newton step).
    pub step_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub params: CurveParams,
    pub target: RationalAngle,
    pub residuals: ClosureResiduals,
    pub residual_norm: f64,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
}

fn trace_entry(iteration: usize, params: &CurveParams, r: &ClosureResiduals, step_scale: f64) -> TraceEntry {
    TraceEntry {
        iteration,
        kappa: params.kappa(),
        a: params.a(),
        d: r.d,
        angle_defect: r.angle_defect,
        norm: r.norm(),
        step_scale,
    }
}

fn fd_step(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1e-3)
}

/// Central-difference Jacobian of `(d, angle_defect)` with respect to `(kappa, a)`.
fn jacobian(
    params: &CurveParams,
    target: RationalAngle,
    opts: &NewtonOptions,
) -> Result<Matrix2<f64>, ClosureError> {
    let (kappa, a) = (params.kappa(), params.a());
    let (hk, ha) = (fd_step(kappa, opts.fd_step), fd_step(a, opts.fd_step));
    let probes = [(kappa + hk, a), (kappa - hk, a), (kappa, a + ha), (kappa, a - ha)];
    let evals = par::map(&probes, |&(k, a)| {
        let p = params.with_kappa_a(k, a)?;
        closure_residuals_with(&p, target, opts.integrator_tol).map(|r| r.as_vector())
    });
    let mut cols = Vec::with_capacity(4);
    for e in evals {
        cols.push(e?);
    }
    let dk = (cols[0] - cols[1]) / (2.0 * hk);
    let da = (cols[2] - cols[3]) / (2.0 * ha);
    Ok(Matrix2::from_columns(&[dk, da]))
}

fn condition(j: &Matrix2<f64>) -> f64 {
    let sv = j.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo == 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Damped Newton iteration on `(d, angle_defect)` over `(kappa, a)`.
pub fn newton_solve(
    initial: &CurveParams,
    target: RationalAngle,
    opts: &NewtonOptions,
) -> Result<SolveResult, ClosureError> {
    newton_solve_observed(initial, target, opts, &mut |_| {})
}

/// As [`newton_solve`], reporting every accepted iterate to `observer`.
pub fn newton_solve_observed(
    initial: &CurveParams,
    target: RationalAngle,
    opts: &NewtonOptions,
    observer: &mut dyn FnMut(&TraceEntry),
) -> Result<SolveResult, ClosureError> {
    let mut params = initial.clone();
    let mut res = closure_residuals_with(&params, target, opts.integrator_tol)?;
    let mut norm = res.norm();
    if !(norm <= opts.rough_threshold) {
        return Err(ClosureError::NotRoughlyClosed {
            norm,
            threshold: opts.rough_threshold,
        });
    }
    let mut trace = vec![trace_entry(0, &params, &res, 0.0)];
    observer(&trace[0]);
    let mut iterations = 0;
    let finish = |params: CurveParams, res: ClosureResiduals, trace: Vec<TraceEntry>, iterations, converged| SolveResult {
        params,
        target,
        residual_norm: res.norm(),
        residuals: res,
        iterations,
        trace,
        converged,
    };

    while norm >= opts.tol {
        if iterations >= opts.max_iter {
            return Err(ClosureError::NoConvergence(Box::new(finish(
                params, res, trace, iterations, false,
            ))));
        }
        let j = jacobian(&params, target, opts)?;
        let cond = condition(&j);
        if !(cond <= opts.max_condition) {
            return Err(ClosureError::SingularJacobian { condition: cond });
        }
        let delta = j
            .lu()
            .solve(&(-res.as_vector()))
            .ok_or(ClosureError::SingularJacobian { condition: cond })?;
        iterations += 1;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let k = params.kappa() + scale * delta[0];
            let a = params.a() + scale * delta[1];
            if k > 0.0 {
                if let Ok(trial) = params.with_kappa_a(k, a) {
                    if let Ok(r) = closure_residuals_with(&trial, target, opts.integrator_tol) {
                        if r.norm() < norm {
                            accepted = Some((trial, r));
                            break;
                        }
                    }
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((p, r)) => {
                params = p;
                res = r;
                norm = r.norm();
                let entry = trace_entry(iterations, &params, &res, scale);
                observer(&entry);
                trace.push(entry);
                log::debug!("newton {iterations}: |F| = {norm:.3e} (scale {scale})");
            }
            None => {
                return Err(ClosureError::NoConvergence(Box::new(finish(
                    params, res, trace, iterations, false,
                ))));
            }
        }
    }
    Ok(finish(params, res, trace, iterations, true))
}

/// Coarse scan settings for the rough-closing step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub form: VelocityForm,
    pub b3: f64,
    pub extra: Vec<crate::profile::Harmonic>,
    pub kappa_range: (f64, f64),
    pub a_range: (f64, f64),
    pub grid: (usize, usize),
    pub target: RationalAngle,
    pub tol: f64,
}

impl ScanSpec {
    pub fn new(form: VelocityForm, b3: f64, target: RationalAngle) -> Self {
        Self {
            form,
            b3,
            extra: Vec::new(),
            kappa_range: (0.5, 3.0),
            a_range: (0.1, 1.5),
            grid: (16, 16),
            target,
            tol: PREVIEW_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanCandidate {
    pub kappa: f64,
    pub a: f64,
    pub b3: f64,
    pub cell: (usize, usize),
    /// `None` when the integration failed; such cells rank last.
    pub residuals: Option<ClosureResiduals>,
    pub norm: f64,
}

impl ScanCandidate {
    pub fn params(&self, spec: &ScanSpec) -> Result<CurveParams, ClosureError> {
        let profile = crate::profile::FourierOddProfile::with_extra(self.a, self.b3, &spec.extra, spec.form)?;
        Ok(CurveParams::new(self.kappa, profile)?)
    }
}

fn lerp(range: (f64, f64), i: usize, n: usize) -> f64 {
    if n <= 1 {
        range.0
    } else {
        range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64
    }
}

/// Evaluates the residuals on a `kappa x a` grid and ranks all cells by
/// residual norm (ties broken by cell index).
pub fn grid_scan(spec: &ScanSpec) -> Result<Vec<ScanCandidate>, ClosureError> {
    let (nk, na) = spec.grid;
    if nk < 4 || na < 4 {
        return Err(ClosureError::InvalidScan(format!(
            "grid {nk}x{na} is smaller than 4x4"
        )));
    }
    let finite = [spec.kappa_range.0, spec.kappa_range.1, spec.a_range.0, spec.a_range.1];
    if finite.iter().any(|x| !x.is_finite()) || spec.kappa_range.0 <= 0.0 {
        return Err(ClosureError::InvalidScan(
            "ranges must be finite and kappa positive".into(),
        ));
    }
    let cells: Vec<(usize, usize)> = (0..nk).flat_map(|i| (0..na).map(move |j| (i, j))).collect();
    let mut out = par::map(&cells, |&(i, j)| {
        let kappa = lerp(spec.kappa_range, i, nk);
        let a = lerp(spec.a_range, j, na);
        let residuals = crate::profile::FourierOddProfile::with_extra(a, spec.b3, &spec.extra, spec.form)
            .ok()
            .and_then(|p| CurveParams::new(kappa, p).ok())
            .and_then(|p| closure_residuals_with(&p, spec.target, spec.tol).ok());
        let norm = residuals.map_or(f64::INFINITY, |r| r.norm());
        ScanCandidate {
            kappa,
            a,
            b3: spec.b3,
            cell: (i, j),
            residuals,
            norm,
        }
    });
    out.sort_by(|x, y| {
        x.norm
            .total_cmp(&y.norm)
            .then_with(|| x.cell.cmp(&y.cell))
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    /// Smallest step as a fraction of the nominal step.
    pub min_step_ratio: f64,
    pub newton: NewtonOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            min_step_ratio: 1.0 / 64.0,
            newton: NewtonOptions::default(),
        }
    }
}

/// Where a branch of the family stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// +1 toward larger `b3`, -1 toward smaller.
    pub direction: i8,
    pub last_good_b3: f64,
    pub failed_b3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    /// Converged members ordered by increasing `b3`.
    pub members: Vec<SolveResult>,
    /// Non-empty when the family is truncated (FamilyTruncated).
    pub truncated: Vec<Truncation>,
}

impl Family {
    pub fn is_truncated(&self) -> bool {
        !self.truncated.is_empty()
    }
}

/// Traces closed solutions across `b3_range`, warm-starting every solve from
/// the previous member and halving the step on failure.
pub fn continuation(
    start: &SolveResult,
    b3_range: (f64, f64),
    step: f64,
    opts: &ContinuationOptions,
) -> Result<Family, ClosureError> {
    continuation_observed(start, b3_range, step, opts, &mut |_| {})
}

/// As [`continuation`], reporting each new member to `observer` as soon as it
/// converges (the increasing branch first).
pub fn continuation_observed(
    start: &SolveResult,
    b3_range: (f64, f64),
    step: f64,
    opts: &ContinuationOptions,
    observer: &mut dyn FnMut(&SolveResult),
) -> Result<Family, ClosureError> {
    if !start.converged {
        return Err(ClosureError::StartNotConverged);
    }
    let (lo, hi) = (b3_range.0.min(b3_range.1), b3_range.0.max(b3_range.1));
    let mut up = Vec::new();
    let mut down = Vec::new();
    let mut truncated = Vec::new();
    if step > 0.0 {
        for (dir, bound, out) in [(1i8, hi, &mut up), (-1i8, lo, &mut down)] {
            if let Some(t) = continue_branch(start, dir, bound, step, opts, out, observer) {
                truncated.push(t);
            }
        }
    }
    let mut members: Vec<SolveResult> = down.into_iter().rev().collect();
    members.push(start.clone());
    members.extend(up);
    Ok(Family { members, truncated })
}

fn continue_branch(
    start: &SolveResult,
    dir: i8,
    bound: f64,
    step: f64,
    opts: &ContinuationOptions,
    out: &mut Vec<SolveResult>,
    observer: &mut dyn FnMut(&SolveResult),
) -> Option<Truncation> {
    let sign = dir as f64;
    let min_step = step * opts.min_step_ratio;
    let mut h = step;
    let mut current = start.clone();
    let mut previous: Option<SolveResult> = None;
    loop {
        let b3 = current.params.b3();
        if (bound - b3) * sign <= 1e-12 {
            return None;
        }
        let next_b3 = if (bound - b3) * sign < h { bound } else { b3 + sign * h };
        // secant predictor in (kappa, a) when two members are known
        let mut guess = current.params.with_b3(next_b3);
        if let Some(prev) = &previous {
            let db = prev.params.b3() - b3;
            if db != 0.0 {
                let f = (next_b3 - b3) / (b3 - prev.params.b3());
                let k = current.params.kappa() + f * (current.params.kappa() - prev.params.kappa());
                let a = current.params.a() + f * (current.params.a() - prev.params.a());
                if let Ok(p) = guess.with_kappa_a(k, a) {
                    guess = p;
                }
            }
        }
        match newton_solve(&guess, current.target, &opts.newton) {
            Ok(sol) => {
                observer(&sol);
                out.push(sol.clone());
                previous = Some(std::mem::replace(&mut current, sol));
                h = (h * 2.0).min(step);
            }
            Err(e) => {
                log::debug!("continuation step to b3 = {next_b3} failed: {e}");
                h *= 0.5;
                if h < min_step * (1.0 - 1e-12) {
                    return Some(Truncation {
                        direction: dir,
                        last_good_b3: b3,
                        failed_b3: next_b3,
                    });
                }
            }
        }
    }
}

/// A curve integrated over enough periods to close.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedCurve {
    pub curve: SampledCurve,
    pub target: RationalAngle,
    /// `|end - start| / diameter`.
    pub closure_gap: f64,
    /// Number of `2 pi` periods integrated.
    pub rotation_order: u32,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssembleOptions {
    pub tol: f64,
    /// Samples per `2 pi`.
    pub resolution: usize,
    /// Largest residual norm accepted as "near converged".
    pub max_residual: f64,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            tol: SOLVE_INTEGRATOR_TOL,
            resolution: 1024,
            max_residual: 1e-6,
        }
    }
}

/// Integrates `rotation_order` periods from the canonical start.
pub fn assemble_closed_curve(
    params: &CurveParams,
    target: RationalAngle,
    opts: &AssembleOptions,
) -> Result<ClosedCurve, ClosureError> {
    let residual_norm = closure_residuals_with(params, target, opts.tol)?.norm();
    if !(residual_norm <= opts.max_residual) {
        return Err(ClosureError::NotNearConverged { norm: residual_norm });
    }
    let order = target.rotation_order();
    let curve = integrate_periods(params, order, opts)?;
    let diam = curve.diameter();
    let closure_gap = (curve.last().position - curve.first().position).norm() / diam;
    Ok(ClosedCurve {
        curve,
        target,
        closure_gap,
        rotation_order: order,
        residual_norm,
    })
}

fn integrate_periods(params: &CurveParams, periods: u32, opts: &AssembleOptions) -> Result<SampledCurve, FrenetError> {
    let io = IntegrateOptions::with_tol(opts.tol, opts.resolution);
    integrate_with(
        params,
        0.0,
        TAU * periods as f64,
        &FrenetSample::initial(params, 0.0),
        &io,
    )
}

/// Hausdorff distance, relative to the diameter, between the first traversal
/// and a second traversal obtained by integrating twice as many periods.
pub fn retrace_distance(closed: &ClosedCurve, opts: &AssembleOptions) -> Result<f64, ClosureError> {
    let doubled = integrate_periods(&closed.curve.params, 2 * closed.rotation_order, opts)?;
    let split = TAU * closed.rotation_order as f64;
    let first: Vec<Vec3> = doubled.samples.iter().filter(|s| s.t <= split).map(|s| s.position).collect();
    let second: Vec<Vec3> = doubled.samples.iter().filter(|s| s.t >= split).map(|s| s.position).collect();
    Ok(hausdorff(&first, &second) / diameter(&first))
}

/// Winding counts of a closed curve about its symmetry axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub rotation_order: u32,
    /// Turns of the projection around the axis.
    pub winding_axis: i64,
    /// Half the number of sign changes of `rho - mean(rho)`: a heuristic for
    /// the meridional winding of a torus knot.
    pub winding_meridian_hint: i64,
    pub center: Vec3,
    pub axis: Vec3,
}

/// Axis = normal of the plane through all symmetry lines, through their
/// common point.
pub fn classify(closed: &ClosedCurve) -> Result<Classification, ClosureError> {
    let curve = &closed.curve;
    let lines: Vec<SymmetryLine> = curve
        .samples
        .iter()
        .filter_map(|s| {
            let n = (s.t / PI - 0.5).round();
            (symmetry_parameter(n as i64) == s.t).then(|| SymmetryLine::from_sample(n as i64, s))
        })
        .collect();
    if lines.len() < 2 {
        return Err(ClosureError::TooFewLines(2));
    }
    let mut m = Matrix3::zeros();
    let mut rhs = Vec3::zeros();
    for l in &lines {
        let proj = Matrix3::identity() - l.direction * l.direction.transpose();
        m += proj;
        rhs += proj * l.base;
    }
    let center = m
        .lu()
        .solve(&rhs)
        .ok_or(ClosureError::NoAxis { spread: f64::INFINITY })?;
    let diam = curve.diameter();
    let spread = lines.iter().map(|l| l.distance_to(&center)).fold(0.0, f64::max) / diam;
    if !(spread <= 1e-5) {
        return Err(ClosureError::NoAxis { spread });
    }
    // smallest principal direction of the line directions
    let mut scatter = Matrix3::zeros();
    for l in &lines {
        scatter += l.direction * l.direction.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let axis = eig.eigenvectors.column(imin).into_owned().normalize();
    let mut c = classify_points(&curve.positions(), &center, &axis);
    c.rotation_order = closed.rotation_order;
    Ok(c)
}

/// Winding counts of a closed point sequence about the line `center + s axis`.
pub fn classify_points(points: &[Vec3], center: &Vec3, axis: &Vec3) -> Classification {
    let axis = axis.normalize();
    let seed = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (seed - axis * axis.dot(&seed)).normalize();
    let e2 = axis.cross(&e1);
    let planar: Vec<(f64, f64)> = points
        .iter()
        .map(|p| {
            let r = p - center;
            (r.dot(&e1), r.dot(&e2))
        })
        .collect();
    let mut total = 0.0;
    for w in planar.windows(2) {
        let a0 = w[0].1.atan2(w[0].0);
        let a1 = w[1].1.atan2(w[1].0);
        let mut da = a1 - a0;
        if da > PI {
            da -= TAU;
        } else if da < -PI {
            da += TAU;
        }
        total += da;
    }
    let rho: Vec<f64> = planar.iter().map(|(x, y)| x.hypot(*y)).collect();
    let mean = rho.iter().sum::<f64>() / rho.len() as f64;
    // cyclic sign changes; the closing point duplicates the first
    let signs: Vec<f64> = rho[..rho.len().saturating_sub(1)]
        .iter()
        .map(|r| r - mean)
        .filter(|x| *x != 0.0)
        .collect();
    let mut changes = 0;
    for i in 0..signs.len() {
        let next = signs[(i + 1) % signs.len()];
        if signs[i].signum() != next.signum() {
            changes += 1;
        }
    }
    Classification {
        rotation_order: 0,
        winding_axis: (total / TAU).round().abs() as i64,
        winding_meridian_hint: changes / 2,
        center: *center,
        axis,
    }
}
