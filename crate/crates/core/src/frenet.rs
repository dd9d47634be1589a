//! Integration of the modified Frenet system
//!
//! ```text
//! c' = v T
//! T' = kappa v N
//! N' = -kappa v T + (kappa / v) B
//! B' = -(kappa / v) N
//! ```
//!
//! together with the arc lengths of the curve (`s' = v`) and of its evolute
//! (`s_tilde' = 1 / v`). The integrator is an embedded Dormand-Prince 5(4) pair
//! with a PI step-size controller. Steps never cross an output time: every
//! emitted sample is an accepted step endpoint, and the frame is projected back
//! to an orthonormal right-handed triple after each accepted step.

use std::f64::consts::{PI, TAU};

use nalgebra::{SVector, Vector3};
use thiserror::Error;

use crate::profile::CurveParams;

pub type Vec3 = Vector3<f64>;

const STATE_DIM: usize = 14;
type State = SVector<f64, STATE_DIM>;

/// Smallest step the controller may take before giving up.
pub const MIN_STEP: f64 = 1e-14;
const MAX_STEP: f64 = 0.5;
pub const MIN_TOL: f64 = 1e-13;
pub const MAX_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrenetError {
    #[error("step size underflow at t = {t} (h = {h:e}); parameters are likely pathological")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("degenerate frame: vector norm {norm:e} below 1e-6")]
    DegenerateFrame { norm: f64 },
    #[error("frame is not right-handed (det = {det})")]
    LeftHanded { det: f64 },
    #[error("tolerance {0:e} outside [1e-13, 1e-3]")]
    InvalidTolerance(f64),
    #[error("output resolution must be positive")]
    InvalidResolution,
    #[error("non-finite state encountered at t = {0}")]
    NonFinite(f64),
    #[error("step limit of {steps} reached at t = {t}; parameters are likely pathological")]
    StepLimit { t: f64, steps: usize },
}

/// Position, Frenet frame and scalar data at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrenetSample {
    pub t: f64,
    pub position: Vec3,
    pub tangent: Vec3,
    pub normal: Vec3,
    pub binormal: Vec3,
    /// Speed `|dc/dt|`.
    pub v: f64,
    pub tau: f64,
    /// Accumulated arc length of the curve.
    pub s: f64,
    /// Accumulated arc length of the evolute.
    pub s_tilde: f64,
}

impl FrenetSample {
    /// Canonical start: origin, identity frame.
    pub fn initial(params: &CurveParams, t: f64) -> Self {
        Self {
            t,
            position: Vec3::zeros(),
            tangent: Vec3::x(),
            normal: Vec3::y(),
            binormal: Vec3::z(),
            v: params.v(t),
            tau: params.tau(t),
            s: 0.0,
            s_tilde: 0.0,
        }
    }

    /// Largest deviation of the frame from orthonormality.
    pub fn orthonormality_defect(&self) -> f64 {
        let (t, n, b) = (&self.tangent, &self.normal, &self.binormal);
        [
            (t.norm() - 1.0).abs(),
            (n.norm() - 1.0).abs(),
            (b.norm() - 1.0).abs(),
            t.dot(n).abs(),
            n.dot(b).abs(),
            t.dot(b).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn frame_det(&self) -> f64 {
        self.tangent.dot(&self.normal.cross(&self.binormal))
    }

    fn to_state(self) -> State {
        let mut y = State::zeros();
        y.fixed_rows_mut::<3>(0).copy_from(&self.position);
        y.fixed_rows_mut::<3>(3).copy_from(&self.tangent);
        y.fixed_rows_mut::<3>(6).copy_from(&self.normal);
        y.fixed_rows_mut::<3>(9).copy_from(&self.binormal);
        y[12] = self.s;
        y[13] = self.s_tilde;
        y
    }

    fn from_state(params: &CurveParams, t: f64, y: &State) -> Self {
        let v = params.v(t);
        Self {
            t,
            position: y.fixed_rows::<3>(0).into_owned(),
            tangent: y.fixed_rows::<3>(3).into_owned(),
            normal: y.fixed_rows::<3>(6).into_owned(),
            binormal: y.fixed_rows::<3>(9).into_owned(),
            v,
            tau: params.kappa() / (v * v),
            s: y[12],
            s_tilde: y[13],
        }
    }
}

/// Time derivative of every integrated field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrenetDerivative {
    pub position: Vec3,
    pub tangent: Vec3,
    pub normal: Vec3,
    pub binormal: Vec3,
    pub s: f64,
    pub s_tilde: f64,
}

pub fn ode_rhs(params: &CurveParams, t: f64, state: &FrenetSample) -> FrenetDerivative {
    let kappa = params.kappa();
    let v = params.v(t);
    let kv = kappa * v;
    let kv_inv = kappa / v;
    FrenetDerivative {
        position: state.tangent * v,
        tangent: state.normal * kv,
        normal: state.binormal * kv_inv - state.tangent * kv,
        binormal: -state.normal * kv_inv,
        s: v,
        s_tilde: 1.0 / v,
    }
}

fn rhs(params: &CurveParams, t: f64, y: &State) -> State {
    let kappa = params.kappa();
    let v = params.v(t);
    let kv = kappa * v;
    let kv_inv = kappa / v;
    let mut dy = State::zeros();
    for i in 0..3 {
        let tan = y[3 + i];
        let nor = y[6 + i];
        let bin = y[9 + i];
        dy[i] = v * tan;
        dy[3 + i] = kv * nor;
        dy[6 + i] = kv_inv * bin - kv * tan;
        dy[9 + i] = -kv_inv * nor;
    }
    dy[12] = v;
    dy[13] = 1.0 / v;
    dy
}

/// Projects the frame onto the nearest right-handed orthonormal frame by
/// modified Gram-Schmidt in T, N order, then `B = T x N`.
pub fn renormalize_frame(state: &FrenetSample) -> Result<FrenetSample, FrenetError> {
    let norm = state
        .tangent
        .norm()
        .min(state.normal.norm())
        .min(state.binormal.norm());
    if norm < 1e-6 || !norm.is_finite() {
        return Err(FrenetError::DegenerateFrame { norm });
    }
    let det = state.frame_det();
    if det <= 0.0 {
        return Err(FrenetError::LeftHanded { det });
    }
    let tangent = state.tangent / state.tangent.norm();
    let n = state.normal - tangent * tangent.dot(&state.normal);
    let n_norm = n.norm();
    if n_norm < 1e-6 {
        return Err(FrenetError::DegenerateFrame { norm: n_norm });
    }
    let normal = n / n_norm;
    Ok(FrenetSample {
        tangent,
        normal,
        binormal: tangent.cross(&normal),
        ..*state
    })
}

/// Parameter value of the `n`-th symmetry point, `pi/2 + n pi`.
pub fn symmetry_parameter(n: i64) -> f64 {
    (n as f64 + 0.5) * PI
}

/// Which part of a construction a sampled curve represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveRole {
    Curve,
    Evolute,
    Midpoint,
}

/// Samples with strictly monotone `t` covering `periods` spans of `2 pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    pub params: CurveParams,
    pub samples: Vec<FrenetSample>,
    pub periods: u32,
    pub role: CurveRole,
}

impl SampledCurve {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn kappa(&self) -> f64 {
        self.params.kappa()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.samples.iter().map(|s| s.position).collect()
    }

    pub fn first(&self) -> &FrenetSample {
        &self.samples[0]
    }

    pub fn last(&self) -> &FrenetSample {
        &self.samples[self.samples.len() - 1]
    }

    /// Largest pairwise distance between sample positions.
    pub fn diameter(&self) -> f64 {
        crate::geometry::diameter(&self.positions())
    }

    /// Index of the sample whose parameter equals `t` exactly, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.samples
            .binary_search_by(|s| s.t.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
            .ok()
            .or_else(|| {
                // decreasing parameter (backward integration)
                self.samples.iter().position(|s| s.t == t)
            })
    }
}

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub tol: f64,
    /// Output samples per `2 pi` of parameter.
    pub resolution: usize,
    /// Land exactly on every `pi/2 + n pi` inside the interval.
    pub symmetry_points: bool,
    /// Include the final parameter value as a sample.
    pub include_end: bool,
    /// Project the frame after each accepted step.
    pub renormalize: bool,
    /// Upper bound on attempted steps.
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            resolution: 1024,
            symmetry_points: true,
            include_end: true,
            renormalize: true,
            max_steps: 2_000_000,
        }
    }
}

impl IntegrateOptions {
    pub fn with_tol(tol: f64, resolution: usize) -> Self {
        Self {
            tol,
            resolution,
            ..Self::default()
        }
    }
}

/// Integrates from `init` (at `t0`) to `t1`, emitting samples on a uniform grid of
/// `out_resolution` samples per `2 pi`, on every symmetry parameter and at both ends.
pub fn integrate(
    params: &CurveParams,
    t0: f64,
    t1: f64,
    init: &FrenetSample,
    tol: f64,
    out_resolution: usize,
) -> Result<SampledCurve, FrenetError> {
    integrate_with(
        params,
        t0,
        t1,
        init,
        &IntegrateOptions::with_tol(tol, out_resolution),
    )
}

pub fn integrate_with(
    params: &CurveParams,
    t0: f64,
    t1: f64,
    init: &FrenetSample,
    opts: &IntegrateOptions,
) -> Result<SampledCurve, FrenetError> {
    if opts.resolution == 0 {
        return Err(FrenetError::InvalidResolution);
    }
    let stops = output_grid(t0, t1, opts);
    let mut start = *init;
    start.t = t0;
    let samples = integrate_stops(params, &start, &stops, opts)?;
    let periods = ((t1 - t0).abs() / TAU - 1e-9).ceil().max(1.0) as u32;
    Ok(SampledCurve {
        params: params.clone(),
        samples,
        periods,
        role: CurveRole::Curve,
    })
}

/// Output times for `[t0, t1]` (either direction), excluding `t0` itself.
fn output_grid(t0: f64, t1: f64, opts: &IntegrateOptions) -> Vec<f64> {
    let span = t1 - t0;
    if span == 0.0 {
        return Vec::new();
    }
    let dir = span.signum();
    let dt = TAU / opts.resolution as f64;
    let count = (span.abs() / dt + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (1..=count).map(|k| t0 + dir * dt * k as f64).collect();
    let mut exact: Vec<f64> = Vec::new();
    if opts.symmetry_points {
        let (lo, hi) = if dir > 0.0 { (t0, t1) } else { (t1, t0) };
        let mut n = ((lo - 0.5 * PI) / PI).floor() as i64;
        loop {
            let ts = symmetry_parameter(n);
            if ts > hi {
                break;
            }
            if ts > lo && ts < hi {
                exact.push(ts);
            }
            n += 1;
        }
    }
    if opts.include_end {
        exact.push(t1);
    }
    // Exact times replace grid points that round to them.
    let merge = 1e-9 * dt;
    grid.retain(|g| exact.iter().all(|e| (g - e).abs() > merge));
    grid.retain(|g| (g - t1) * dir < 0.0);
    grid.extend(exact);
    grid.sort_by(|a, b| (a * dir).partial_cmp(&(b * dir)).unwrap());
    grid.dedup();
    grid
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// B5 - B4
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One trial step. Returns the fifth-order solution and the scaled error norm.
fn dopri_step(params: &CurveParams, t: f64, y: &State, k1: &State, h: f64, tol: f64) -> (State, f64) {
    let mut k = [State::zeros(); 7];
    k[0] = *k1;
    for stage in 1..7 {
        let mut yi = *y;
        for (j, kj) in k.iter().enumerate().take(stage) {
            let a = A[stage][j];
            if a != 0.0 {
                yi += kj * (h * a);
            }
        }
        k[stage] = rhs(params, t + C[stage] * h, &yi);
    }
    let mut y5 = *y;
    let mut err = State::zeros();
    for i in 0..7 {
        if B5[i] != 0.0 {
            y5 += k[i] * (h * B5[i]);
        }
        if E[i] != 0.0 {
            err += k[i] * (h * E[i]);
        }
    }
    let mut acc = 0.0;
    for i in 0..STATE_DIM {
        let sc = tol * (1.0 + y[i].abs().max(y5[i].abs()));
        let r = err[i] / sc;
        acc += r * r;
    }
    (y5, (acc / STATE_DIM as f64).sqrt())
}

/// Integrates from `start` through every time in `stops` (monotone in the
/// direction of travel), returning `start` followed by one sample per stop.
pub fn integrate_stops(
    params: &CurveParams,
    start: &FrenetSample,
    stops: &[f64],
    opts: &IntegrateOptions,
) -> Result<Vec<FrenetSample>, FrenetError> {
    let tol = opts.tol;
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(FrenetError::InvalidTolerance(tol));
    }
    let mut out = Vec::with_capacity(stops.len() + 1);
    let mut t = start.t;
    let mut first = *start;
    first.v = params.v(t);
    first.tau = params.tau(t);
    out.push(first);
    let Some(&last_stop) = stops.last() else {
        return Ok(out);
    };
    let dir = (last_stop - t).signum();
    let mut y = first.to_state();
    let mut k1 = rhs(params, t, &y);
    let mut h = dir * tol.powf(0.2).clamp(1e-4, 0.1);
    let mut err_old: f64 = 1e-4;
    const SAFETY: f64 = 0.9;
    const BETA: f64 = 0.04;
    const EXPO: f64 = 0.2 - BETA * 0.75;
    let mut steps = 0usize;

    for &stop in stops {
        while (stop - t) * dir > 0.0 {
            let remaining = stop - t;
            let landing = h.abs() >= remaining.abs() * (1.0 - 1e-12);
            let step = if landing { remaining } else { h };
            if step.abs() < MIN_STEP && !landing {
                return Err(FrenetError::StepSizeUnderflow { t, h: step });
            }
            steps += 1;
            if steps > opts.max_steps {
                return Err(FrenetError::StepLimit { t, steps: opts.max_steps });
            }
            let (y_new, err) = dopri_step(params, t, &y, &k1, step, tol);
            if !err.is_finite() {
                return Err(FrenetError::NonFinite(t));
            }
            let fac11 = err.powf(EXPO);
            if err <= 1.0 {
                let fac = (fac11 / err_old.powf(BETA) / SAFETY).clamp(0.1, 5.0);
                // a truncated landing step keeps the previous proposal as its base
                let base = if landing { h } else { step };
                err_old = err.max(1e-4);
                t = if landing { stop } else { t + step };
                y = y_new;
                if opts.renormalize {
                    let sample = renormalize_frame(&FrenetSample::from_state(params, t, &y))?;
                    y = sample.to_state();
                }
                k1 = rhs(params, t, &y);
                h = dir * (base / fac).abs().min(MAX_STEP);
            } else {
                h = step / (fac11 / SAFETY).min(5.0);
                if h.abs() < MIN_STEP {
                    return Err(FrenetError::StepSizeUnderflow { t, h });
                }
            }
        }
        out.push(FrenetSample::from_state(params, t, &y));
    }
    Ok(out)
}

/// Samples at the given symmetry indices only, starting from the canonical frame at `t = 0`.
pub fn samples_at_symmetry_points(
    params: &CurveParams,
    indices: std::ops::Range<i64>,
    tol: f64,
) -> Result<Vec<FrenetSample>, FrenetError> {
    let stops: Vec<f64> = indices.map(symmetry_parameter).collect();
    let opts = IntegrateOptions {
        tol,
        ..IntegrateOptions::default()
    };
    let start = FrenetSample::initial(params, 0.0);
    let mut out = integrate_stops(params, &start, &stops, &opts)?;
    out.remove(0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::VelocityForm;

    fn helix() -> CurveParams {
        CurveParams::base(1.0, 0.0, 0.0, VelocityForm::Sqrt).unwrap()
    }

    #[test]
    fn rhs_helix_identity_frame() {
        let p = helix();
        let s = FrenetSample::initial(&p, 0.3);
        let d = ode_rhs(&p, 0.3, &s);
        assert_eq!(d.position, Vec3::x());
        assert_eq!(d.tangent, Vec3::y());
        assert_eq!(d.normal, Vec3::z() - Vec3::x());
        assert_eq!(d.binormal, -Vec3::y());
        assert_eq!((d.s, d.s_tilde), (1.0, 1.0));
    }

    #[test]
    fn rhs_scalar_substitution() {
        // h = 0.75 gives v = sqrt(1.5625) - 0.75 = 0.5 in the sqrt form
        let p = CurveParams::base(2.0, 0.75, 0.0, VelocityForm::Sqrt).unwrap();
        let t = std::f64::consts::FRAC_PI_2;
        assert!((p.v(t) - 0.5).abs() < 1e-15);
        let s = FrenetSample::initial(&p, t);
        let d = ode_rhs(&p, t, &s);
        assert!((d.tangent - Vec3::y()).norm() < 1e-14);
        assert!((d.binormal + 4.0 * Vec3::y()).norm() < 1e-14);
        // T . T' vanishes for an orthonormal frame
        assert_eq!(s.tangent.dot(&d.tangent), 0.0);
    }

    #[test]
    fn renormalize_fixed_point() {
        let p = helix();
        let s = FrenetSample::initial(&p, 0.0);
        let r = renormalize_frame(&s).unwrap();
        assert!((r.tangent - s.tangent).norm() < 1e-15);
        assert!((r.normal - s.normal).norm() < 1e-15);
        assert!((r.binormal - s.binormal).norm() < 1e-15);
    }

    #[test]
    fn renormalize_scaled_tangent() {
        let p = helix();
        let mut s = FrenetSample::initial(&p, 0.0);
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.2, 1.1);
        s.tangent = rot * Vec3::x() * 1.001;
        s.normal = rot * Vec3::y();
        s.binormal = rot * Vec3::z();
        let r = renormalize_frame(&s).unwrap();
        assert!(r.orthonormality_defect() < 1e-15);
        assert!((r.frame_det() - 1.0).abs() < 1e-15);
        assert!(r.tangent.angle(&s.tangent) < 2e-3);
    }

    #[test]
    fn renormalize_rejects_left_handed_and_degenerate() {
        let p = helix();
        let mut s = FrenetSample::initial(&p, 0.0);
        s.binormal = -s.binormal;
        assert!(matches!(
            renormalize_frame(&s),
            Err(FrenetError::LeftHanded { .. })
        ));
        let mut d = FrenetSample::initial(&p, 0.0);
        d.normal *= 1e-8;
        assert!(matches!(
            renormalize_frame(&d),
            Err(FrenetError::DegenerateFrame { .. })
        ));
    }

    #[test]
    fn zero_length_interval() {
        let p = helix();
        let init = FrenetSample::initial(&p, 1.0);
        let c = integrate(&p, 1.0, 1.0, &init, 1e-10, 64).unwrap();
        assert_eq!(c.samples.len(), 1);
        assert_eq!(c.samples[0], init);
    }

    #[test]
    fn grid_contains_endpoints_and_symmetry_points() {
        let p = CurveParams::base(1.0, 0.5, 0.1, VelocityForm::Exp).unwrap();
        let init = FrenetSample::initial(&p, 0.0);
        let c = integrate(&p, 0.0, TAU, &init, 1e-8, 256).unwrap();
        assert_eq!(c.samples.len(), 257);
        assert_eq!(c.first().t, 0.0);
        assert_eq!(c.last().t, TAU);
        assert!(c.index_of(symmetry_parameter(0)).is_some());
        assert!(c.index_of(symmetry_parameter(1)).is_some());
        let dt = TAU / 256.0;
        for w in c.samples.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!(w[1].t - w[0].t <= dt * (1.0 + 1e-9));
        }
        // resolution not divisible by four: symmetry points are inserted
        let c = integrate(&p, 0.0, TAU, &init, 1e-8, 10).unwrap();
        assert_eq!(c.samples.len(), 13);
        assert!(c.index_of(symmetry_parameter(1)).is_some());
    }

    #[test]
    fn rejects_bad_tolerance() {
        let p = helix();
        let init = FrenetSample::initial(&p, 0.0);
        assert_eq!(
            integrate(&p, 0.0, 1.0, &init, 1e-2, 16).unwrap_err(),
            FrenetError::InvalidTolerance(1e-2)
        );
        assert_eq!(
            integrate(&p, 0.0, 1.0, &init, 1e-8, 0).unwrap_err(),
            FrenetError::InvalidResolution
        );
    }

    #[test]
    fn symmetry_parameters_are_exact() {
        assert_eq!(symmetry_parameter(0), std::f64::consts::FRAC_PI_2);
        assert_eq!(symmetry_parameter(1), 1.5 * PI);
        assert_eq!(symmetry_parameter(-1), -std::f64::consts::FRAC_PI_2);
    }
}
