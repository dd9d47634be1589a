//! Checks that certify a sampled curve as a closed constant-curvature
//! autoevolute. Every check returns a [`Report`] carrying the metric, the
//! threshold it was compared against and the worst offending samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::{ClosedCurve, SymmetryLine};
use crate::frenet::{symmetry_parameter, SampledCurve, Vec3};
use crate::geometry::{
    canal_geodesic_defect, diameter, golden_section, evolute, numeric_invariants, resample_by_arclength, rigid_registration,
    CurveInterpolator, GeometryError,
};
use crate::par;
use crate::profile::CurveParams;
use crate::quadrature;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("curve is not closed (gap {gap:.3e} relative to diameter)")]
    NotClosed { gap: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    pub index: usize,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub check: String,
    /// NaN (null in JSON) when the check could not be evaluated.
    #[serde(with = "nullable")]
    pub metric: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Up to five samples with the largest deviation.
    pub worst: Vec<Offender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl Report {
    fn new(check: &str, metric: f64, threshold: f64, mut offenders: Vec<Offender>) -> Self {
        offenders.sort_by(|a, b| b.value.total_cmp(&a.value));
        offenders.truncate(5);
        Self {
            check: check.to_string(),
            metric,
            threshold,
            passed: metric <= threshold,
            worst: offenders,
            note: None,
        }
    }

    fn insufficient(check: &str, threshold: f64, note: String) -> Self {
        Self {
            check: check.to_string(),
            metric: f64::NAN,
            threshold,
            passed: false,
            worst: Vec::new(),
            note: Some(note),
        }
    }

    fn with_note(mut self, note: String) -> Self {
        self.note = Some(note);
        self
    }
}

fn max_of(offenders: &[Offender]) -> f64 {
    offenders.iter().map(|o| o.value).fold(0.0, f64::max)
}

/// Max relative deviation of the finite-difference curvature from `kappa`.
pub fn verify_constant_curvature(curve: &SampledCurve, tol: f64) -> Report {
    const CHECK: &str = "constant_curvature";
    if curve.len() < 64 {
        return Report::insufficient(CHECK, tol, format!("insufficient data: {} samples", curve.len()));
    }
    let kappa = curve.kappa();
    match numeric_invariants(curve) {
        Ok(inv) => {
            let off: Vec<Offender> = inv
                .iter()
                .map(|i| Offender {
                    index: i.index,
                    t: i.t,
                    value: (i.kappa - kappa).abs() / kappa,
                })
                .collect();
            Report::new(CHECK, max_of(&off), tol, off)
        }
        Err(e) => Report::insufficient(CHECK, tol, format!("insufficient data: {e}")),
    }
}

/// `tau * tau_tilde = kappa^2` and `kappa_tilde = kappa`, both from finite
/// differences of the two position sequences on a shared parameter grid.
pub fn verify_torsion_reciprocity(curve: &SampledCurve, evolute_curve: &SampledCurve, tol: f64) -> Report {
    const CHECK: &str = "torsion_reciprocity";
    let (Ok(a), Ok(b)) = (numeric_invariants(curve), numeric_invariants(evolute_curve)) else {
        return Report::insufficient(CHECK, tol, "insufficient data".into());
    };
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.t != y.t) {
        return Report::insufficient(CHECK, tol, "parameter grids differ".into());
    }
    let kappa = curve.kappa();
    let k2 = kappa * kappa;
    let product: Vec<Offender> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| Offender {
            index: x.index,
            t: x.t,
            value: (x.tau * y.tau - k2).abs() / k2,
        })
        .collect();
    let curvature: Vec<Offender> = b
        .iter()
        .map(|y| Offender {
            index: y.index,
            t: y.t,
            value: (y.kappa - kappa).abs() / kappa,
        })
        .collect();
    let (mp, mk) = (max_of(&product), max_of(&curvature));
    let mut off = product;
    off.extend(curvature);
    Report::new(CHECK, mp.max(mk), tol, off).with_note(format!(
        "max |tau tau_tilde - kappa^2| / kappa^2 = {mp:.3e}; max |kappa_tilde - kappa| / kappa = {mk:.3e}"
    ))
}

fn closure_gap(curve: &SampledCurve) -> f64 {
    let d = curve.diameter();
    if d == 0.0 {
        return f64::INFINITY;
    }
    (curve.last().position - curve.first().position).norm() / d
}

/// Outcome of the cyclic-shift congruence search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongruenceReport {
    pub report: Report,
    /// Best shift in units of the resampling step (fractional after refinement).
    pub best_shift: f64,
    pub reversed: bool,
    pub rmsd: f64,
    pub diameter: f64,
}

/// Cyclic resampling of a closed curve: `n` points `L / n` apart in arc length.
struct CyclicCurve<'a> {
    interp: CurveInterpolator<'a>,
    s0: f64,
    length: f64,
}

impl<'a> CyclicCurve<'a> {
    fn new(curve: &'a SampledCurve) -> Self {
        Self {
            interp: CurveInterpolator::new(curve),
            s0: curve.first().s,
            length: curve.last().s - curve.first().s,
        }
    }

    fn at(&self, s: f64) -> Vec3 {
        self.interp.at_s(self.s0 + s.rem_euclid(self.length)).position
    }

    fn points(&self, n: usize, shift: f64, reversed: bool) -> Vec<Vec3> {
        let ds = self.length / n as f64;
        (0..n)
            .map(|i| {
                let k = if reversed { shift - i as f64 } else { shift + i as f64 };
                self.at(k * ds)
            })
            .collect()
    }
}

fn rmsd(a: &[Vec3], b: &[Vec3]) -> f64 {
    rigid_registration(a, b).map_or(f64::INFINITY, |r| r.rmsd)
}

/// Resamples both closed curves to `n` points by arc length, searches all
/// cyclic shifts in both orientations for the best rigid registration, then
/// refines the shift continuously. Passes iff `rmsd <= tol * diameter`.
pub fn verify_congruence(
    c: &SampledCurve,
    c_tilde: &SampledCurve,
    n: usize,
    tol: f64,
) -> Result<CongruenceReport, VerifyError> {
    for curve in [c, c_tilde] {
        let gap = closure_gap(curve);
        if !(gap < 1e-5) {
            return Err(VerifyError::NotClosed { gap });
        }
    }
    if n < 3 {
        return Err(GeometryError::TooFewSamples { needed: 3, got: n }.into());
    }
    // reject non-monotone arc lengths up front
    resample_by_arclength(c, 2)?;
    resample_by_arclength(c_tilde, 2)?;
    let a_cyc = CyclicCurve::new(c);
    let b_cyc = CyclicCurve::new(c_tilde);
    let a = a_cyc.points(n, 0.0, false);
    let b_fwd = b_cyc.points(n, 0.0, false);
    let b_rev = b_cyc.points(n, 0.0, true);

    let candidates: Vec<(usize, bool)> = (0..n).flat_map(|j| [(j, false), (j, true)]).collect();
    let scores = par::map(&candidates, |&(j, rev)| {
        let src = if rev { &b_rev } else { &b_fwd };
        let shifted: Vec<Vec3> = (0..n).map(|i| src[(i + j) % n]).collect();
        rmsd(&a, &shifted)
    });
    let (best_idx, _) = scores
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(&y.0)))
        .expect("at least one shift");
    let (j, reversed) = candidates[best_idx];
    // b_rev[i] sits at arc position -i, so shift j there means position -(i + j)
    let base = if reversed { -(j as f64) } else { j as f64 };
    let eval = |sigma: f64| rmsd(&a, &b_cyc.points(n, base + sigma, reversed));
    let sigma = golden_section(eval, -1.0, 1.0, 1e-10);
    let best = eval(sigma).min(scores[best_idx]);
    let sigma = if eval(sigma) <= scores[best_idx] { sigma } else { 0.0 };
    let diam = diameter(&a);
    let report = Report::new("congruence", best / diam, tol, Vec::new()).with_note(format!(
        "rmsd {best:.3e} over {n} points, shift {:.6} ({})",
        base + sigma,
        if reversed { "reversed" } else { "forward" }
    ));
    Ok(CongruenceReport {
        report,
        best_shift: base + sigma,
        reversed,
        rmsd: best,
        diameter: diam,
    })
}

/// Invariant-signature comparison: the torsion of `c` and of `c_tilde` as
/// functions of arc length, both sampled at `n` equally spaced points, compared
/// under every cyclic shift and both orientations. Metric is the smallest max
/// deviation relative to `kappa`. Diagnostic only; registration is authoritative.
pub fn signature_congruence(
    c: &SampledCurve,
    c_tilde: &SampledCurve,
    n: usize,
    tol: f64,
) -> Result<Report, VerifyError> {
    for curve in [c, c_tilde] {
        let gap = closure_gap(curve);
        if !(gap < 1e-5) {
            return Err(VerifyError::NotClosed { gap });
        }
    }
    if n < 3 {
        return Err(GeometryError::TooFewSamples { needed: 3, got: n }.into());
    }
    let signature = |curve: &SampledCurve| -> Vec<f64> {
        let cyc = CyclicCurve::new(curve);
        let ds = cyc.length / n as f64;
        (0..n)
            .map(|i| cyc.interp.at_s(cyc.s0 + i as f64 * ds).tau)
            .collect()
    };
    let (a, b) = (signature(c), signature(c_tilde));
    let kappa = c.kappa();
    let shifts: Vec<(usize, bool)> = (0..n).flat_map(|j| [(j, false), (j, true)]).collect();
    let scores = par::map(&shifts, |&(j, rev)| {
        (0..n)
            .map(|i| {
                let k = if rev { (j + n - i % n) % n } else { (i + j) % n };
                (a[i] - b[k]).abs() / kappa
            })
            .fold(0.0, f64::max)
    });
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Report::new("signature_congruence", best, tol, Vec::new()))
}

/// Applies the half-turn about `line` to the sample at `t* + u` and compares
/// with the curve at `t* - u`. Closed curves are treated as periodic.
pub fn verify_symmetry(curve: &SampledCurve, line: &SymmetryLine, tol: f64) -> Report {
    const CHECK: &str = "symmetry";
    if curve.len() < 2 {
        return Report::insufficient(CHECK, tol, "insufficient data".into());
    }
    let interp = CurveInterpolator::new(curve);
    let (t_first, t_last) = (curve.first().t, curve.last().t);
    let span = t_last - t_first;
    let periodic = closure_gap(curve) < 1e-5;
    let diam = curve.diameter();
    let off: Vec<Offender> = curve
        .samples
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let mirror = 2.0 * line.t_star - s.t;
            let mirror = if periodic {
                t_first + (mirror - t_first).rem_euclid(span)
            } else if mirror < t_first || mirror > t_last {
                return None;
            } else {
                mirror
            };
            let expected = interp.position_at_t(mirror);
            Some(Offender {
                index: i,
                t: s.t,
                value: (line.half_turn(&s.position) - expected).norm() / diam,
            })
        })
        .collect();
    if off.is_empty() {
        return Report::insufficient(CHECK, tol, "no samples with a mirror partner".into());
    }
    Report::new(CHECK, max_of(&off), tol, off)
}

/// `|int v - int 1/v| / int v` over one period, by Gauss-Legendre quadrature,
/// together with the pointwise defect `|v(t) v(t + pi) - 1|` on the quadrature
/// nodes. The integral alone cannot see a sine-only even harmonic, whose
/// contributions to both integrals cancel.
pub fn verify_arclength_balance(params: &CurveParams, tol: f64) -> Report {
    use std::f64::consts::PI;
    const PANELS: usize = 64;
    let tau = std::f64::consts::TAU;
    let length = quadrature::integrate(|t| params.v(t), 0.0, tau, PANELS);
    let evolute_length = quadrature::integrate(|t| 1.0 / params.v(t), 0.0, tau, PANELS);
    let imbalance = (length - evolute_length).abs() / length;
    let (nodes, _) = quadrature::gauss_legendre(10);
    let width = tau / PANELS as f64;
    let off: Vec<Offender> = (0..PANELS)
        .flat_map(|p| {
            let mid = (p as f64 + 0.5) * width;
            nodes.iter().map(move |x| mid + 0.5 * width * x).collect::<Vec<_>>()
        })
        .enumerate()
        .map(|(i, t)| Offender {
            index: i,
            t,
            value: (params.v(t) * params.v(t + PI) - 1.0).abs(),
        })
        .collect();
    let reciprocity = max_of(&off);
    Report::new("arclength_balance", imbalance.max(reciprocity), tol, off).with_note(format!(
        "curve length {length:.15} vs evolute length {evolute_length:.15} per period \
         (imbalance {imbalance:.3e}); max |v(t) v(t+pi) - 1| = {reciprocity:.3e}"
    ))
}

/// `|c - m| = |c_tilde - m| = 1 / (2 kappa)` with `m = (c + c_tilde) / 2`, and
/// `N` parallel to `c - m`.
pub fn verify_canal_incidence(c: &SampledCurve, c_tilde: &SampledCurve, kappa: f64, tol: f64) -> Report {
    const CHECK: &str = "canal_incidence";
    if c.len() != c_tilde.len() || c.samples.iter().zip(&c_tilde.samples).any(|(a, b)| a.t != b.t) {
        return Report::insufficient(CHECK, tol, "parameter grids differ".into());
    }
    let radius = 0.5 / kappa;
    let off: Vec<Offender> = c
        .samples
        .iter()
        .zip(&c_tilde.samples)
        .enumerate()
        .map(|(i, (a, b))| {
            let m = (a.position + b.position) * 0.5;
            let ra = a.position - m;
            let rb = b.position - m;
            let angle = a.normal.cross(&ra).norm().atan2(a.normal.dot(&ra).abs());
            let value = ((ra.norm() - radius).abs())
                .max((rb.norm() - radius).abs())
                .max(angle);
            Offender { index: i, t: a.t, value }
        })
        .collect();
    Report::new(CHECK, max_of(&off), tol, off)
}

/// Angle between `N` and the canal surface normal at the foot point on `m`.
pub fn verify_canal_geodesic(curve: &SampledCurve, tol: f64) -> Report {
    let defect = canal_geodesic_defect(curve);
    if defect.is_nan() {
        return Report::insufficient("canal_geodesic", tol, "insufficient data".into());
    }
    Report::new("canal_geodesic", defect, tol, Vec::new())
}

/// Default thresholds of the full suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteTolerances {
    pub curvature: f64,
    pub reciprocity: f64,
    pub congruence: f64,
    pub congruence_points: usize,
    pub signature: f64,
    pub symmetry: f64,
    pub balance: f64,
    pub canal: f64,
    pub geodesic: f64,
}

impl Default for SuiteTolerances {
    fn default() -> Self {
        Self {
            curvature: 1e-4,
            reciprocity: 1e-3,
            congruence: 1e-5,
            congruence_points: 1024,
            signature: 1e-6,
            symmetry: 1e-7,
            balance: 1e-10,
            canal: 1e-12,
            geodesic: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub passed: bool,
    pub reports: Vec<Report>,
}

/// Symmetry lines read from samples sitting exactly on `pi/2 + n pi`.
pub fn lines_in_curve(curve: &SampledCurve) -> Vec<SymmetryLine> {
    curve
        .samples
        .iter()
        .filter_map(|s| {
            let n = (s.t / std::f64::consts::PI - 0.5).round() as i64;
            (symmetry_parameter(n) == s.t).then(|| SymmetryLine::from_sample(n, s))
        })
        .collect()
}

/// Runs every check on a closed curve.
pub fn verify_suite(closed: &ClosedCurve, tol: &SuiteTolerances) -> SuiteReport {
    verify_sampled(&closed.curve, tol)
}

pub fn verify_sampled(curve: &SampledCurve, tol: &SuiteTolerances) -> SuiteReport {
    let ev = evolute(curve);
    let mut reports = vec![
        verify_constant_curvature(curve, tol.curvature),
        verify_torsion_reciprocity(curve, &ev, tol.reciprocity),
    ];
    match verify_congruence(curve, &ev, tol.congruence_points, tol.congruence) {
        Ok(c) => reports.push(c.report),
        Err(e) => reports.push(Report::insufficient("congruence", tol.congruence, e.to_string())),
    }
    match signature_congruence(curve, &ev, tol.congruence_points, tol.signature) {
        Ok(r) => reports.push(r),
        Err(e) => reports.push(Report::insufficient("signature_congruence", tol.signature, e.to_string())),
    }
    let lines = lines_in_curve(curve);
    if lines.is_empty() {
        reports.push(Report::insufficient("symmetry", tol.symmetry, "no symmetry samples".into()));
    }
    let sym: Vec<Report> = par::map(&lines, |l| verify_symmetry(curve, l, tol.symmetry));
    if let Some(worst) = sym.into_iter().max_by(|a, b| a.metric.total_cmp(&b.metric)) {
        let count = lines.len();
        let note = format!("worst of {count} symmetry lines");
        reports.push(worst.with_note(note));
    }
    reports.push(verify_arclength_balance(&curve.params, tol.balance));
    reports.push(verify_canal_incidence(curve, &ev, curve.kappa(), tol.canal));
    reports.push(verify_canal_geodesic(curve, tol.geodesic));
    SuiteReport {
        passed: reports.iter().all(|r| r.passed),
        reports,
    }
}
