use std::f64::consts::PI;
use std::sync::OnceLock;

use autoevolute::closure::{
    continuation, grid_scan, newton_solve, residuals_from_lines, retrace_distance, symmetry_lines_from,
    AssembleOptions, ContinuationOptions, NewtonOptions, ScanSpec,
};
use autoevolute::{
    assemble_closed_curve, classify, closure_residuals, symmetry_lines, ClosureError, CurveParams, FrenetSample,
    RationalAngle, SolveResult, SymmetryLine, Vec3, VelocityForm,
};
use nalgebra::{Rotation3, Unit};

fn third() -> RationalAngle {
    RationalAngle::new(1, 3).unwrap()
}

fn solved() -> &'static SolveResult {
    static SOLVED: OnceLock<SolveResult> = OnceLock::new();
    SOLVED.get_or_init(|| {
        let start = CurveParams::base(0.685, 0.68, -0.2, VelocityForm::Sqrt).unwrap();
        newton_solve(&start, third(), &NewtonOptions::default()).unwrap()
    })
}

#[test]
fn helix_lines_meet_axis() {
    for kappa in [1.0, 2.0] {
        let p = CurveParams::base(kappa, 0.0, 0.0, VelocityForm::Sqrt).unwrap();
        let lines = symmetry_lines(&p, 4, 1e-12).unwrap();
        let r = 1.0 / (2.0 * kappa);
        // axis direction of the helix started with the identity frame
        let w = kappa * 2f64.sqrt();
        let axis = Vec3::new(kappa, 0.0, kappa) / w;
        let centre = Vec3::new(0.0, r, 0.0);
        for l in &lines {
            let rel = l.base - centre;
            let radial = rel - axis * axis.dot(&rel);
            assert!((radial.norm() - r).abs() < 1e-9);
            assert!((l.direction + radial / r).norm() < 1e-9, "normal points at the axis");
        }
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), w * PI);
        for pair in lines.windows(2) {
            assert!((rot * pair[0].direction - pair[1].direction).norm() < 1e-9);
        }

        let delta = w * PI;
        let pitch = r;
        let chord = (r * r * (2.0 - 2.0 * delta.cos()) + (pitch * delta).powi(2)).sqrt();
        let expected = pitch * delta / chord;
        let res = closure_residuals(&p, third()).unwrap();
        assert!((res.d.abs() - expected).abs() < 1e-9, "{} vs {expected}", res.d);
        let angle = delta.cos().abs().acos();
        assert!((res.angle_measured - angle).abs() < 1e-9);
    }
}

#[test]
fn residuals_are_smooth_in_kappa() {
    let p = CurveParams::base(1.2, 0.5, 0.1, VelocityForm::Exp).unwrap();
    let q = p.with_kappa_a(1.2 + 1e-6, 0.5).unwrap();
    let r0 = closure_residuals(&p, third()).unwrap();
    let r1 = closure_residuals(&q, third()).unwrap();
    let dd = (r1.d - r0.d).abs();
    let da = (r1.angle_defect - r0.angle_defect).abs();
    assert!(dd < 1e-4 && da < 1e-4, "{dd:e} {da:e}");
    assert!(dd > 0.0 || da > 0.0);
}

#[test]
fn residuals_invariant_under_rigid_motion() {
    let p = CurveParams::base(0.9, 0.7, -0.1, VelocityForm::Sqrt).unwrap();
    let base = closure_residuals(&p, third()).unwrap();
    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(1.0, -2.0, 0.5)), 1.1);
    let init = FrenetSample {
        position: Vec3::new(3.0, -1.0, 7.0),
        tangent: rot * Vec3::x(),
        normal: rot * Vec3::y(),
        binormal: rot * Vec3::z(),
        ..FrenetSample::initial(&p, 0.0)
    };
    let lines = symmetry_lines_from(&p, &init, 2, 1e-12).unwrap();
    let moved = residuals_from_lines(&lines[0], &lines[1], third());
    assert!((moved.d - base.d).abs() < 1e-9);
    assert!((moved.angle_defect - base.angle_defect).abs() < 1e-9);
}

#[test]
fn later_line_pair_matches_first() {
    for p in [
        CurveParams::base(0.9, 0.7, -0.1, VelocityForm::Sqrt).unwrap(),
        CurveParams::base(1.4, 0.3, 0.2, VelocityForm::Exp).unwrap(),
    ] {
        let lines = symmetry_lines(&p, 3, 1e-12).unwrap();
        let a = residuals_from_lines(&lines[0], &lines[1], third());
        let b = residuals_from_lines(&lines[1], &lines[2], third());
        assert!((a.d - b.d).abs() < 1e-8, "{} {}", a.d, b.d);
        assert!((a.angle_measured - b.angle_measured).abs() < 1e-8);
    }
}

#[test]
fn angle_unchanged_by_scaling() {
    let p = CurveParams::base(0.9, 0.7, -0.1, VelocityForm::Sqrt).unwrap();
    let lines = symmetry_lines(&p, 2, 1e-12).unwrap();
    let r = residuals_from_lines(&lines[0], &lines[1], third());
    for lambda in [0.01, 3.0, 250.0] {
        let scaled: Vec<SymmetryLine> = lines
            .iter()
            .map(|l| SymmetryLine { base: l.base * lambda, ..*l })
            .collect();
        let s = residuals_from_lines(&scaled[0], &scaled[1], third());
        assert!((s.angle_measured - r.angle_measured).abs() < 1e-12);
        assert!((s.d - r.d).abs() < 1e-12);
    }
}

#[test]
fn newton_converges_and_trace_decreases() {
    let s = solved();
    assert!(s.converged);
    assert!(s.residual_norm < 1e-10);
    assert!(s.iterations <= 30);
    for w in s.trace.windows(2) {
        assert!(w[1].norm < w[0].norm, "{} !< {}", w[1].norm, w[0].norm);
    }
    assert!(s.residuals.angle_measured >= 0.0 && s.residuals.angle_measured <= PI);
}

#[test]
fn newton_at_fixed_point_takes_at_most_one_step() {
    let s = solved();
    let again = newton_solve(&s.params, third(), &NewtonOptions::default()).unwrap();
    assert!(again.converged);
    assert!(again.iterations <= 1);
    assert!(again.residual_norm < 1e-10);
}

#[test]
fn newton_refuses_far_start() {
    let p = CurveParams::base(2.8, 1.4, 0.0, VelocityForm::Sqrt).unwrap();
    let norm = closure_residuals(&p, third()).unwrap().norm();
    let out = newton_solve(&p, third(), &NewtonOptions::default());
    if norm > 0.3 {
        assert!(matches!(out, Err(ClosureError::NotRoughlyClosed { .. })));
    } else {
        assert!(!matches!(out, Ok(ref r) if !r.converged));
    }
    let helix = CurveParams::base(1.0, 0.0, 0.0, VelocityForm::Sqrt).unwrap();
    assert!(matches!(
        newton_solve(&helix, third(), &NewtonOptions::default()),
        Err(ClosureError::NotRoughlyClosed { .. })
    ));
}

#[test]
fn scan_feeds_newton() {
    let spec = ScanSpec::new(VelocityForm::Sqrt, -0.2, third());
    let ranked = grid_scan(&spec).unwrap();
    assert_eq!(ranked.len(), 256);
    for w in ranked.windows(2) {
        assert!(w[0].norm <= w[1].norm || w[1].norm.is_nan());
    }
    assert!(ranked.iter().any(|c| {
        newton_solve(&c.params(&spec).unwrap(), third(), &NewtonOptions::default())
            .map(|r| r.converged && r.residual_norm < 1e-10)
            .unwrap_or(false)
    }));
    let again = grid_scan(&spec).unwrap();
    assert_eq!(
        ranked.iter().map(|c| c.cell).collect::<Vec<_>>(),
        again.iter().map(|c| c.cell).collect::<Vec<_>>()
    );
}

#[test]
fn scan_cell_holding_solution_ranks_first() {
    let s = solved();
    let (k, a) = (s.params.kappa(), s.params.a());
    let mut spec = ScanSpec::new(VelocityForm::Sqrt, -0.2, third());
    spec.kappa_range = (k - 0.15, k + 0.15);
    spec.a_range = (a - 0.15, a + 0.15);
    spec.grid = (5, 5);
    let ranked = grid_scan(&spec).unwrap();
    assert_eq!(ranked[0].cell, (2, 2));
    assert!(ranked[0].norm < 1e-6);
}

#[test]
fn helix_scan_ranks_by_angle_only() {
    let mut spec = ScanSpec::new(VelocityForm::Sqrt, 0.0, third());
    spec.a_range = (0.0, 0.0);
    spec.grid = (6, 4);
    let ranked = grid_scan(&spec).unwrap();
    for c in &ranked {
        let p = CurveParams::base(c.kappa, 0.0, 0.0, VelocityForm::Sqrt).unwrap();
        let direct = closure_residuals(&p, third()).unwrap();
        let r = c.residuals.unwrap();
        assert!((r.angle_defect - direct.angle_defect).abs() < 1e-5);
    }
    for w in ranked.windows(2) {
        assert!(w[0].norm <= w[1].norm);
    }
}

#[test]
fn continuation_zero_range_is_start() {
    let s = solved();
    let b3 = s.params.b3();
    let fam = continuation(s, (b3, b3), 0.05, &ContinuationOptions::default()).unwrap();
    assert_eq!(fam.members.len(), 1);
    assert_eq!(fam.members[0].params, s.params);
    assert!(!fam.is_truncated());
}

#[test]
fn continuation_is_continuous() {
    let s = solved();
    let b3 = s.params.b3();
    let jump = |step: f64| {
        let fam = continuation(s, (b3 - 2.0 * step, b3 + 2.0 * step), step, &ContinuationOptions::default()).unwrap();
        assert!(!fam.is_truncated());
        assert_eq!(fam.members.len(), 5);
        assert!(fam.members.iter().all(|m| m.converged && m.residual_norm < 1e-10));
        let mut sorted = fam.members.clone();
        sorted.sort_by(|x, y| x.params.b3().total_cmp(&y.params.b3()));
        sorted
            .windows(2)
            .map(|w| {
                (w[1].params.kappa() - w[0].params.kappa())
                    .abs()
                    .max((w[1].params.a() - w[0].params.a()).abs())
            })
            .fold(0.0, f64::max)
    };
    let coarse = jump(0.02);
    let fine = jump(0.005);
    assert!(fine < coarse / 2.0, "{fine} vs {coarse}");
}

#[test]
fn continuation_truncates_at_frontier() {
    let start = CurveParams::base(0.257, 3.10, 1.4, VelocityForm::Sqrt).unwrap();
    let s = newton_solve(&start, third(), &NewtonOptions::default()).unwrap();
    assert!(s.converged);
    let fam = continuation(&s, (1.4, 1.7), 0.05, &ContinuationOptions::default()).unwrap();
    assert!(fam.is_truncated());
    let up = fam.truncated.iter().find(|t| t.direction > 0).unwrap();
    assert!(up.last_good_b3 < up.failed_b3);
    assert!(up.last_good_b3 > 1.4 && up.failed_b3 < 1.7);
    assert!(fam.members.iter().all(|m| m.params.b3() <= up.last_good_b3));
}

#[test]
fn assembled_curve_closes_and_retraces() {
    let s = solved();
    let opts = AssembleOptions::default();
    let closed = assemble_closed_curve(&s.params, third(), &opts).unwrap();
    assert_eq!(closed.rotation_order, 3);
    assert!(closed.closure_gap < 1e-7, "{:e}", closed.closure_gap);
    let retrace = retrace_distance(&closed, &opts).unwrap();
    assert!(retrace < 1e-6, "{retrace:e}");
    let class = classify(&closed).unwrap();
    assert_eq!(class.rotation_order, 3);
    assert!(class.winding_axis.abs() >= 1);
}

#[test]
fn helix_cannot_be_assembled() {
    let helix = CurveParams::base(1.0, 0.0, 0.0, VelocityForm::Sqrt).unwrap();
    assert!(matches!(
        assemble_closed_curve(&helix, third(), &AssembleOptions::default()),
        Err(ClosureError::NotNearConverged { .. })
    ));
}

#[test]
fn scan_is_independent_of_thread_count() {
    let spec = ScanSpec::new(VelocityForm::Exp, 0.1, third());
    let many = grid_scan(&spec).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let one = pool.install(|| grid_scan(&spec).unwrap());
    assert_eq!(many.len(), one.len());
    for (x, y) in many.iter().zip(&one) {
        assert_eq!(x.cell, y.cell);
        assert_eq!(x.norm.to_bits(), y.norm.to_bits());
    }
}
