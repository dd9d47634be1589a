//! Geometric objects derived from a sampled curve: evolute, midpoint curve,
//! osculating circles, numerical invariants, arc-length resampling, rigid
//! registration and tube meshes around the midpoint curve.

use nalgebra::{Matrix3, Rotation3, UnitVector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frenet::{CurveRole, FrenetSample, SampledCurve, Vec3};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("arc length is not strictly increasing at sample {0}")]
    NonMonotoneArclength(usize),
    #[error("point sets differ in size ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("ring size must be at least 3")]
    RingTooSmall,
    #[error("radius must be positive")]
    InvalidRadius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle3D {
    pub center: Vec3,
    pub radius: f64,
    pub plane_normal: Vec3,
}

impl Circle3D {
    /// Point at angle `phi`, starting from `start_dir` (projected into the plane).
    pub fn point(&self, start_dir: &Vec3, phi: f64) -> Vec3 {
        let u = (start_dir - self.plane_normal * self.plane_normal.dot(start_dir)).normalize();
        let w = self.plane_normal.cross(&u);
        self.center + (u * phi.cos() + w * phi.sin()) * self.radius
    }
}

/// Maximum pairwise distance.
pub fn diameter(points: &[Vec3]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    par::max_range(n, |i| {
        let p = points[i];
        points[i + 1..]
            .iter()
            .map(|q| (p - q).norm_squared())
            .fold(0.0, f64::max)
    })
    .sqrt()
}

/// Symmetric Hausdorff distance between two point sets.
pub fn hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    fn directed(a: &[Vec3], b: &[Vec3]) -> f64 {
        par::max_range(a.len(), |i| {
            b.iter()
                .map(|q| (a[i] - q).norm_squared())
                .fold(f64::INFINITY, f64::min)
        })
        .sqrt()
    }
    directed(a, b).max(directed(b, a))
}

/// Curve of osculating-circle centers `c + N / kappa`, with the frame
/// `(B, -N, T)`, speed `1 / v` and torsion `kappa^2 / tau`.
pub fn evolute(curve: &SampledCurve) -> SampledCurve {
    let kappa = curve.kappa();
    let samples = curve
        .samples
        .iter()
        .map(|s| {
            // sign(tau) = +1: tau = kappa / v^2 > 0 for every profile
            debug_assert!(s.tau > 0.0);
            FrenetSample {
                t: s.t,
                position: s.position + s.normal / kappa,
                tangent: s.binormal,
                normal: -s.normal,
                binormal: s.tangent,
                v: 1.0 / s.v,
                tau: kappa * kappa / s.tau,
                s: s.s_tilde,
                s_tilde: s.s,
            }
        })
        .collect();
    let role = match curve.role {
        CurveRole::Evolute => CurveRole::Curve,
        _ => CurveRole::Evolute,
    };
    SampledCurve {
        params: curve.params.clone(),
        samples,
        periods: curve.periods,
        role,
    }
}

/// `m = (c + c_tilde) / 2 = c + N / (2 kappa)`. Frames are copied from `c` and
/// are not the Frenet frames of `m`.
pub fn midpoint_curve(curve: &SampledCurve) -> SampledCurve {
    let half = 0.5 / curve.kappa();
    let samples = curve
        .samples
        .iter()
        .map(|s| FrenetSample {
            position: s.position + s.normal * half,
            ..*s
        })
        .collect();
    SampledCurve {
        params: curve.params.clone(),
        samples,
        periods: curve.periods,
        role: CurveRole::Midpoint,
    }
}

pub fn osculating_circle(sample: &FrenetSample, kappa: f64) -> Circle3D {
    Circle3D {
        center: sample.position + sample.normal / kappa,
        radius: 1.0 / kappa,
        plane_normal: sample.binormal,
    }
}

/// Finite-difference weights for derivatives `0..=order` at `x0` over the nodes
/// `xs` (Fornberg's recursion). `w[m][j]` weights node `j` for derivative `m`.
pub fn fd_weights(x0: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Curvature and torsion estimated from positions alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericInvariant {
    pub index: usize,
    pub t: f64,
    pub kappa: f64,
    pub tau: f64,
}

const STENCIL_HALF: usize = 3;

/// `kappa = |c' x c''| / |c'|^3`, `tau = det(c', c'', c''') / |c' x c''|^2`, with
/// derivatives in `t` from seven-point finite differences. The three samples
/// at each end are skipped, as are samples crowding a neighbor (closer than half
/// the median spacing, e.g. an inserted symmetry point).
pub fn numeric_invariants(curve: &SampledCurve) -> Result<Vec<NumericInvariant>, GeometryError> {
    let needed = 2 * STENCIL_HALF + 1;
    if curve.len() < needed {
        return Err(GeometryError::TooFewSamples {
            needed,
            got: curve.len(),
        });
    }
    let kept = well_spaced(&curve.samples);
    if kept.len() < needed {
        return Err(GeometryError::TooFewSamples {
            needed,
            got: kept.len(),
        });
    }
    let out = par::map_range(kept.len() - 2 * STENCIL_HALF, |k| {
        let center = kept[k + STENCIL_HALF];
        let idx = &kept[k..k + needed];
        let t0 = curve.samples[center].t;
        let h = (curve.samples[idx[needed - 1]].t - curve.samples[idx[0]].t) / (needed - 1) as f64;
        let xs: Vec<f64> = idx.iter().map(|&i| (curve.samples[i].t - t0) / h).collect();
        let w = fd_weights(0.0, &xs, 3);
        let mut d = [Vec3::zeros(); 4];
        for (m, dm) in d.iter_mut().enumerate().skip(1) {
            for (j, &i) in idx.iter().enumerate() {
                *dm += curve.samples[i].position * w[m][j];
            }
            *dm /= h.powi(m as i32);
        }
        let cross = d[1].cross(&d[2]);
        let speed = d[1].norm();
        NumericInvariant {
            index: center,
            t: t0,
            kappa: cross.norm() / speed.powi(3),
            tau: cross.dot(&d[3]) / cross.norm_squared(),
        }
    });
    Ok(out)
}

fn well_spaced(samples: &[FrenetSample]) -> Vec<usize> {
    let mut gaps: Vec<f64> = samples.windows(2).map(|w| (w[1].t - w[0].t).abs()).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = gaps.get(gaps.len() / 2).copied().unwrap_or(0.0);
    let mut kept = vec![0];
    for i in 1..samples.len() {
        let prev = samples[*kept.last().unwrap()].t;
        if (samples[i].t - prev).abs() >= 0.5 * median {
            kept.push(i);
        } else if i == samples.len() - 1 {
            // keep the true endpoint
            *kept.last_mut().unwrap() = i;
        }
    }
    kept
}

/// Piecewise cubic Hermite evaluation of a sampled curve using the Frenet
/// derivative data carried by every sample (`c' = v T`, `T' = kappa v N`, ...).
/// Valid for curves and evolutes; midpoint curves do not satisfy `c' = v T`.
pub struct CurveInterpolator<'a> {
    curve: &'a SampledCurve,
}

fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, u: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * p0
        + (u3 - 2.0 * u2 + u) * m0
        + (-2.0 * u3 + 3.0 * u2) * p1
        + (u3 - u2) * m1
}

fn hermite3(p0: &Vec3, p1: &Vec3, m0: &Vec3, m1: &Vec3, u: f64) -> Vec3 {
    Vec3::new(
        hermite(p0.x, p1.x, m0.x, m1.x, u),
        hermite(p0.y, p1.y, m0.y, m1.y, u),
        hermite(p0.z, p1.z, m0.z, m1.z, u),
    )
}

struct Derivs {
    position: Vec3,
    tangent: Vec3,
    normal: Vec3,
    s: f64,
    s_tilde: f64,
}

impl<'a> CurveInterpolator<'a> {
    pub fn new(curve: &'a SampledCurve) -> Self {
        Self { curve }
    }

    fn derivs(&self, s: &FrenetSample) -> Derivs {
        let kv = self.curve.kappa() * s.v;
        let tv = s.tau * s.v;
        Derivs {
            position: s.tangent * s.v,
            tangent: s.normal * kv,
            normal: s.binormal * tv - s.tangent * kv,
            s: s.v,
            s_tilde: tv / self.curve.kappa(),
        }
    }

    fn scalar_slope(&self, i: usize, f: impl Fn(&FrenetSample) -> f64) -> f64 {
        let s = &self.curve.samples;
        let n = s.len();
        if n < 2 {
            return 0.0;
        }
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        (f(&s[b]) - f(&s[a])) / (s[b].t - s[a].t)
    }

    /// Segment index containing `t` (clamped to the sampled range).
    fn segment(&self, t: f64) -> usize {
        let s = &self.curve.samples;
        let forward = s[s.len() - 1].t >= s[0].t;
        let idx = s.partition_point(|x| if forward { x.t <= t } else { x.t >= t });
        idx.clamp(1, s.len() - 1) - 1
    }

    /// Sample at parameter `t` inside segment `i` (`u` in `[0, 1]`).
    fn eval_segment(&self, i: usize, u: f64) -> FrenetSample {
        let s = &self.curve.samples;
        let (a, b) = (&s[i], &s[i + 1]);
        let dt = b.t - a.t;
        let (da, db) = (self.derivs(a), self.derivs(b));
        let tangent = hermite3(&a.tangent, &b.tangent, &(da.tangent * dt), &(db.tangent * dt), u);
        let normal = hermite3(&a.normal, &b.normal, &(da.normal * dt), &(db.normal * dt), u);
        let t_unit = tangent.normalize();
        let n_unit = (normal - t_unit * t_unit.dot(&normal)).normalize();
        let slope_v = (self.scalar_slope(i, |x| x.v), self.scalar_slope(i + 1, |x| x.v));
        let slope_tau = (
            self.scalar_slope(i, |x| x.tau),
            self.scalar_slope(i + 1, |x| x.tau),
        );
        FrenetSample {
            t: a.t + u * dt,
            position: hermite3(
                &a.position,
                &b.position,
                &(da.position * dt),
                &(db.position * dt),
                u,
            ),
            tangent: t_unit,
            normal: n_unit,
            binormal: t_unit.cross(&n_unit),
            v: hermite(a.v, b.v, slope_v.0 * dt, slope_v.1 * dt, u),
            tau: hermite(a.tau, b.tau, slope_tau.0 * dt, slope_tau.1 * dt, u),
            s: hermite(a.s, b.s, da.s * dt, db.s * dt, u),
            s_tilde: hermite(a.s_tilde, b.s_tilde, da.s_tilde * dt, db.s_tilde * dt, u),
        }
    }

    pub fn at_t(&self, t: f64) -> FrenetSample {
        let s = &self.curve.samples;
        if s.len() == 1 {
            return s[0];
        }
        let i = self.segment(t);
        let u = (t - s[i].t) / (s[i + 1].t - s[i].t);
        let mut out = self.eval_segment(i, u);
        out.t = t;
        out
    }

    pub fn position_at_t(&self, t: f64) -> Vec3 {
        self.at_t(t).position
    }

    /// Sample at accumulated arc length `target` (requires monotone `s`).
    pub fn at_s(&self, target: f64) -> FrenetSample {
        let s = &self.curve.samples;
        let idx = s.partition_point(|x| x.s <= target);
        let i = idx.clamp(1, s.len() - 1) - 1;
        let (a, b) = (&s[i], &s[i + 1]);
        if target <= a.s {
            return if i == 0 { *a } else { self.eval_segment(i, 0.0) };
        }
        if target >= b.s {
            return *b;
        }
        let dt = b.t - a.t;
        let (ma, mb) = (a.v * dt, b.v * dt);
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut u = (target - a.s) / (b.s - a.s);
        for _ in 0..60 {
            let f = hermite(a.s, b.s, ma, mb, u) - target;
            if f.abs() <= 1e-15 * (1.0 + target.abs()) {
                break;
            }
            if f > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            // derivative of the Hermite cubic in u
            let u2 = u * u;
            let df = (6.0 * u2 - 6.0 * u) * a.s
                + (3.0 * u2 - 4.0 * u + 1.0) * ma
                + (-6.0 * u2 + 6.0 * u) * b.s
                + (3.0 * u2 - 2.0 * u) * mb;
            let next = u - f / df;
            u = if df > 0.0 && next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
        }
        self.eval_segment(i, u)
    }
}

fn check_monotone_s(curve: &SampledCurve) -> Result<(), GeometryError> {
    for (i, w) in curve.samples.windows(2).enumerate() {
        if !(w[1].s > w[0].s) {
            return Err(GeometryError::NonMonotoneArclength(i + 1));
        }
    }
    Ok(())
}

/// `n` samples equally spaced in arc length, endpoints included.
pub fn resample_by_arclength(curve: &SampledCurve, n: usize) -> Result<SampledCurve, GeometryError> {
    if curve.len() < 2 || n < 2 {
        return Err(GeometryError::TooFewSamples {
            needed: 2,
            got: curve.len().min(n),
        });
    }
    check_monotone_s(curve)?;
    let interp = CurveInterpolator::new(curve);
    let (s0, s1) = (curve.first().s, curve.last().s);
    let mut samples: Vec<FrenetSample> = (0..n)
        .map(|k| {
            if k == 0 {
                *curve.first()
            } else if k == n - 1 {
                *curve.last()
            } else {
                interp.at_s(s0 + (s1 - s0) * k as f64 / (n - 1) as f64)
            }
        })
        .collect();
    samples.dedup_by(|b, a| b.t == a.t && b.s == a.s);
    Ok(SampledCurve {
        params: curve.params.clone(),
        samples,
        periods: curve.periods,
        role: curve.role,
    })
}

/// Rigid transform `B ~ R A + t` minimizing the RMS distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Registration {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub rmsd: f64,
    /// All points of `A` (nearly) collinear: the rotation about that line is arbitrary.
    pub degenerate: bool,
}

impl Registration {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / points.len() as f64
}

/// Kabsch solution restricted to proper rotations.
pub fn rigid_registration(a: &[Vec3], b: &[Vec3]) -> Result<Registration, GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::SizeMismatch(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Err(GeometryError::TooFewSamples {
            needed: 3,
            got: a.len(),
        });
    }
    let ca = centroid(a);
    let cb = centroid(b);
    let mut h = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    for (p, q) in a.iter().zip(b) {
        let pa = p - ca;
        h += pa * (q - cb).transpose();
        scatter += pa * pa.transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    let translation = cb - rotation * ca;
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (rotation * p + translation - q).norm_squared())
        .sum();
    let mut eig = scatter.symmetric_eigenvalues().as_slice().to_vec();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let degenerate = eig[1] <= 1e-12 * eig[0].max(f64::MIN_POSITIVE);
    Ok(Registration {
        rotation,
        translation,
        rmsd: (sum / a.len() as f64).sqrt(),
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeMesh {
    pub vertices: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub rings: usize,
    pub ring_size: usize,
    pub closed: bool,
    /// Radius exceeds the smallest radius of curvature of the center polyline,
    /// so the tube self-intersects.
    pub radius_too_large: bool,
    pub min_center_radius_of_curvature: f64,
}

/// Tube of constant radius around the center positions, swept with
/// rotation-minimizing frames (double reflection). A closed center (first
/// and last points equal) spreads the frame holonomy evenly over the rings so
/// that the last ring coincides with the first.
pub fn tube_mesh(center: &SampledCurve, radius: f64, ring_size: usize) -> Result<TubeMesh, GeometryError> {
    tube_mesh_points(&center.positions(), radius, ring_size)
}

pub fn tube_mesh_points(points: &[Vec3], radius: f64, ring_size: usize) -> Result<TubeMesh, GeometryError> {
    if points.len() < 4 {
        return Err(GeometryError::TooFewSamples {
            needed: 4,
            got: points.len(),
        });
    }
    if ring_size < 3 {
        return Err(GeometryError::RingTooSmall);
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GeometryError::InvalidRadius);
    }
    let n = points.len();
    let scale = diameter(points).max(f64::MIN_POSITIVE);
    let closed = (points[0] - points[n - 1]).norm() <= 1e-6 * scale;
    // unique points when closed
    let m = if closed { n - 1 } else { n };
    let at = |i: isize| -> Vec3 {
        if closed {
            points[i.rem_euclid(m as isize) as usize]
        } else {
            points[i.clamp(0, n as isize - 1) as usize]
        }
    };
    let tangents: Vec<Vec3> = (0..n)
        .map(|i| {
            let i = i as isize;
            (at(i + 1) - at(i - 1)).normalize()
        })
        .collect();

    let mut refs = Vec::with_capacity(n);
    let t0 = tangents[0];
    let seed = if t0.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    refs.push((seed - t0 * t0.dot(&seed)).normalize());
    for i in 0..n - 1 {
        let v1 = points[i + 1] - points[i];
        let c1 = v1.norm_squared();
        let r = refs[i];
        let next = if c1 == 0.0 {
            r
        } else {
            let r_l = r - v1 * (2.0 / c1 * v1.dot(&r));
            let t_l = tangents[i] - v1 * (2.0 / c1 * v1.dot(&tangents[i]));
            let v2 = tangents[i + 1] - t_l;
            let c2 = v2.norm_squared();
            if c2 < 1e-300 {
                r_l
            } else {
                r_l - v2 * (2.0 / c2 * v2.dot(&r_l))
            }
        };
        let tn = tangents[i + 1];
        refs.push((next - tn * tn.dot(&next)).normalize());
    }
    if closed {
        let t_end = tangents[n - 1];
        let r_end = refs[n - 1];
        let r_start = refs[0];
        let holonomy = r_start.cross(&r_end).dot(&t_end).atan2(r_start.dot(&r_end));
        for (i, r) in refs.iter_mut().enumerate() {
            let angle = -holonomy * i as f64 / (n - 1) as f64;
            let axis = UnitVector3::new_normalize(tangents[i]);
            *r = Rotation3::from_axis_angle(&axis, angle) * *r;
        }
    }

    let mut vertices = Vec::with_capacity(n * ring_size);
    let mut normals = Vec::with_capacity(n * ring_size);
    for i in 0..n {
        let r = refs[i];
        let b = tangents[i].cross(&r);
        for j in 0..ring_size {
            let phi = std::f64::consts::TAU * j as f64 / ring_size as f64;
            let dir = r * phi.cos() + b * phi.sin();
            normals.push(dir);
            vertices.push(points[i] + dir * radius);
        }
    }
    let mut faces = Vec::with_capacity(2 * (n - 1) * ring_size);
    for i in 0..n - 1 {
        for j in 0..ring_size {
            let a = (i * ring_size + j) as u32;
            let b = (i * ring_size + (j + 1) % ring_size) as u32;
            let c = ((i + 1) * ring_size + j) as u32;
            let d = ((i + 1) * ring_size + (j + 1) % ring_size) as u32;
            faces.push([a, b, c]);
            faces.push([b, d, c]);
        }
    }
    let min_roc = min_radius_of_curvature(points, closed);
    Ok(TubeMesh {
        vertices,
        normals,
        faces,
        rings: n,
        ring_size,
        closed,
        radius_too_large: radius > min_roc,
        min_center_radius_of_curvature: min_roc,
    })
}

/// Smallest circumradius over consecutive point triples.
fn min_radius_of_curvature(points: &[Vec3], closed: bool) -> f64 {
    let n = points.len();
    let m = if closed { n - 1 } else { n };
    let range: Box<dyn Iterator<Item = usize>> = if closed {
        Box::new(0..m)
    } else {
        Box::new(1..n - 1)
    };
    range
        .map(|i| {
            let p = points[(i + m - 1) % m];
            let q = points[i];
            let r = points[(i + 1) % m];
            let (a, b, c) = ((q - p).norm(), (r - q).norm(), (r - p).norm());
            let area2 = (q - p).cross(&(r - p)).norm();
            if area2 <= 1e-300 {
                f64::INFINITY
            } else {
                a * b * c / (2.0 * area2)
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest angle between the principal normal of `c` and the normal of the
/// canal surface around `m = c + N / (2 kappa)` (zero for a geodesic). The
/// surface normal at `c(t)` points from its foot point on `m`, found by
/// minimizing the distance over the neighbouring parameter interval.
pub fn canal_geodesic_defect(curve: &SampledCurve) -> f64 {
    let s = &curve.samples;
    if s.len() < 3 {
        return f64::NAN;
    }
    let half = 0.5 / curve.kappa();
    let interp = CurveInterpolator::new(curve);
    let m_at = |t: f64| {
        let f = interp.at_t(t);
        f.position + f.normal * half
    };
    let defects = par::map_range(s.len(), |i| {
        let p = s[i].position;
        let lo = s[i.saturating_sub(1)].t;
        let hi = s[(i + 1).min(s.len() - 1)].t;
        let t = golden_section(|t| (p - m_at(t)).norm_squared(), lo, hi, 1e-12 * (1.0 + hi.abs()));
        let r = p - m_at(t);
        s[i].normal.cross(&r).norm().atan2(s[i].normal.dot(&r).abs())
    });
    defects.into_iter().fold(0.0, f64::max)
}

/// Minimizer of a unimodal `f` on `[lo, hi]`.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}
