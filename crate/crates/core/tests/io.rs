use std::f64::consts::TAU;

use autoevolute::geometry::{midpoint_curve, tube_mesh};
use autoevolute::io::{
    curve_from_csv, curve_to_csv, export_curve_csv, export_curve_json, export_mesh_obj, import_curve_csv,
    import_curve_json, CurveDocument, IoError, JobConfig, ParamsDoc, CSV_HEADER,
};
use autoevolute::{integrate, CurveParams, FourierOddProfile, FrenetSample, Harmonic, SampledCurve, VelocityForm};

fn sample_curve() -> SampledCurve {
    let profile = FourierOddProfile::with_extra(0.7, -0.15, &[Harmonic::new(5, 0.05)], VelocityForm::Exp).unwrap();
    let p = CurveParams::new(0.9, profile).unwrap();
    integrate(&p, 0.0, TAU, &FrenetSample::initial(&p, 0.0), 1e-10, 200).unwrap()
}

#[test]
fn csv_file_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/curve.csv");
    let curve = sample_curve();
    export_curve_csv(&curve.samples, &path).unwrap();
    let back = import_curve_csv(&path).unwrap();
    assert_eq!(back, curve.samples);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert_eq!(text.lines().count(), curve.len() + 1);
}

#[test]
fn json_file_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.json");
    let curve = sample_curve();
    export_curve_json(&CurveDocument::from_curve(&curve), &path).unwrap();
    let doc = import_curve_json(&path).unwrap();
    let back = doc.to_curve().unwrap();
    assert_eq!(back.samples, curve.samples);
    assert_eq!(back.params, curve.params);
    assert_eq!(back.periods, curve.periods);
}

#[test]
fn repeated_exports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let curve = sample_curve();
    let mesh = tube_mesh(&midpoint_curve(&curve), 0.5 / curve.kappa(), 12).unwrap();
    for name in ["a", "b"] {
        export_curve_csv(&curve.samples, &dir.path().join(format!("{name}.csv"))).unwrap();
        export_curve_json(&CurveDocument::from_curve(&curve), &dir.path().join(format!("{name}.json"))).unwrap();
        export_mesh_obj(&mesh, &dir.path().join(format!("{name}.obj"))).unwrap();
    }
    for ext in ["csv", "json", "obj"] {
        let a = std::fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
        assert_eq!(a, b, "{ext}");
    }
}

#[test]
fn obj_indices_are_valid() {
    let curve = sample_curve();
    let mesh = tube_mesh(&midpoint_curve(&curve), 0.5 / curve.kappa(), 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tube.obj");
    export_mesh_obj(&mesh, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let verts = text.lines().filter(|l| l.starts_with("v ")).count();
    let normals = text.lines().filter(|l| l.starts_with("vn ")).count();
    assert_eq!(verts, mesh.vertices.len());
    assert_eq!(normals, verts);
    for face in text.lines().filter(|l| l.starts_with("f ")) {
        for corner in face.split_whitespace().skip(1) {
            let (v, n) = corner.split_once("//").unwrap();
            let v: usize = v.parse().unwrap();
            assert!(v >= 1 && v <= verts);
            assert_eq!(n.parse::<usize>().unwrap(), v);
        }
    }
}

#[test]
fn malformed_csv_reports_line() {
    let curve = sample_curve();
    let mut text = curve_to_csv(&curve.samples[..3]);
    text.push_str("1.0,2.0\n");
    match curve_from_csv(&text) {
        Err(IoError::Csv { line, .. }) => assert_eq!(line, 5),
        other => panic!("{other:?}"),
    }
    assert!(matches!(curve_from_csv("x,y\n1,2\n"), Err(IoError::Csv { .. })));
}

#[test]
fn missing_file_names_path() {
    let err = import_curve_json(std::path::Path::new("/nonexistent/curve.json")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/curve.json"));
}

#[test]
fn params_doc_keeps_extra_harmonics() {
    let curve = sample_curve();
    let doc = ParamsDoc::from_params(&curve.params);
    assert_eq!(doc.harmonics.len(), 1);
    assert_eq!(doc.to_params().unwrap(), curve.params);
}

#[test]
fn job_config_from_toml() {
    let cfg = JobConfig::from_toml(
        r#"
form = "exp"
kappa = 0.8
a = 0.6
b3 = -0.1
target = "1/3"

[scan]
grid_kappa = 8
grid_a = 8

[family]
b3_min = -0.3
b3_max = 0.1
"#,
    )
    .unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.params().unwrap().profile().form(), VelocityForm::Exp);
    assert_eq!(cfg.target().unwrap().unwrap().q(), 3);
    assert!(JobConfig::from_toml("bogus = 1").is_err());
    let bad = JobConfig::from_toml("target = \"2/4\"").unwrap();
    assert!(bad.target().is_err());
}
