//! Export formats (CSV, curve JSON, OBJ) and the TOML job configuration.
//!
//! Every text format uses line feeds only and formats floats deterministically,
//! so identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::{
    ClosedCurve, ClosureResiduals, RationalAngle, SolveResult, SymmetryLine, TraceEntry,
};
use crate::frenet::{CurveRole, FrenetSample, SampledCurve, Vec3};
use crate::geometry::TubeMesh;
use crate::profile::{CurveParams, FourierOddProfile, Harmonic, ProfileError, VelocityForm};
use crate::verify::SuiteReport;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

fn read_file(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// CSV

pub const CSV_HEADER: &str = "t,x,y,z,Tx,Ty,Tz,Nx,Ny,Nz,Bx,By,Bz,v,tau,s,s_tilde";

fn sample_row(s: &FrenetSample) -> [f64; 17] {
    let p = &s.position;
    let (t, n, b) = (&s.tangent, &s.normal, &s.binormal);
    [
        s.t, p.x, p.y, p.z, t.x, t.y, t.z, n.x, n.y, n.z, b.x, b.y, b.z, s.v, s.tau, s.s, s.s_tilde,
    ]
}

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_f64(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").expect("writing to a String");
}

pub fn curve_to_csv(samples: &[FrenetSample]) -> String {
    let mut out = String::with_capacity(samples.len() * 17 * 24 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in samples {
        for (i, x) in sample_row(s).iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            fmt_f64(&mut out, *x);
        }
        out.push('\n');
    }
    out
}

pub fn curve_from_csv(text: &str) -> Result<Vec<FrenetSample>, IoError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        _ => {
            return Err(IoError::Csv {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 2;
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| IoError::Csv {
                line: line_no,
                message: e.to_string(),
            })?;
        if vals.len() != 17 {
            return Err(IoError::Csv {
                line: line_no,
                message: format!("expected 17 fields, got {}", vals.len()),
            });
        }
        let v3 = |k: usize| Vec3::new(vals[k], vals[k + 1], vals[k + 2]);
        out.push(FrenetSample {
            t: vals[0],
            position: v3(1),
            tangent: v3(4),
            normal: v3(7),
            binormal: v3(10),
            v: vals[13],
            tau: vals[14],
            s: vals[15],
            s_tilde: vals[16],
        });
    }
    Ok(out)
}

pub fn export_curve_csv(samples: &[FrenetSample], path: &Path) -> Result<(), IoError> {
    write_file(path, &curve_to_csv(samples))
}

pub fn import_curve_csv(path: &Path) -> Result<Vec<FrenetSample>, IoError> {
    curve_from_csv(&read_file(path)?)
}

// ---------------------------------------------------------------------------
// JSON documents

/// Curve parameters as they appear in documents. `harmonics` lists the
/// harmonics beyond the first and third, whose weights are `1` and `b3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDoc {
    pub kappa: f64,
    pub a: f64,
    #[serde(default)]
    pub b3: f64,
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
    #[serde(default)]
    pub form: VelocityForm,
}

impl ParamsDoc {
    pub fn from_params(params: &CurveParams) -> Self {
        Self {
            kappa: params.kappa(),
            a: params.a(),
            b3: params.b3(),
            harmonics: params.profile().extra_harmonics(),
            form: params.profile().form(),
        }
    }

    pub fn to_params(&self) -> Result<CurveParams, ProfileError> {
        let profile = FourierOddProfile::with_extra(self.a, self.b3, &self.harmonics, self.form)?;
        CurveParams::new(self.kappa, profile)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleDoc {
    pub t: f64,
    pub position: [f64; 3],
    pub tangent: [f64; 3],
    pub normal: [f64; 3],
    pub binormal: [f64; 3],
    pub v: f64,
    pub tau: f64,
    pub s: f64,
    pub s_tilde: f64,
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

impl From<&FrenetSample> for SampleDoc {
    fn from(s: &FrenetSample) -> Self {
        Self {
            t: s.t,
            position: arr(&s.position),
            tangent: arr(&s.tangent),
            normal: arr(&s.normal),
            binormal: arr(&s.binormal),
            v: s.v,
            tau: s.tau,
            s: s.s,
            s_tilde: s.s_tilde,
        }
    }
}

impl From<&SampleDoc> for FrenetSample {
    fn from(d: &SampleDoc) -> Self {
        Self {
            t: d.t,
            position: d.position.into(),
            tangent: d.tangent.into(),
            normal: d.normal.into(),
            binormal: d.binormal.into(),
            v: d.v,
            tau: d.tau,
            s: d.s,
            s_tilde: d.s_tilde,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualsDoc {
    pub d: f64,
    pub angle_defect: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_measured: Option<f64>,
}

impl From<&ClosureResiduals> for ResidualsDoc {
    fn from(r: &ClosureResiduals) -> Self {
        Self {
            d: r.d,
            angle_defect: r.angle_defect,
            angle_measured: Some(r.angle_measured),
        }
    }
}

/// Newton summary attached to solved curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDoc {
    pub params: ParamsDoc,
    pub target: RationalAngle,
    pub residuals: ResidualsDoc,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

impl From<&SolveResult> for SolveDoc {
    fn from(r: &SolveResult) -> Self {
        Self {
            params: ParamsDoc::from_params(&r.params),
            target: r.target,
            residuals: (&r.residuals).into(),
            residual_norm: r.residual_norm,
            iterations: r.iterations,
            converged: r.converged,
            trace: r.trace.clone(),
        }
    }
}

/// Self-describing curve export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDocument {
    pub params: ParamsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<RationalAngle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualsDoc>,
    pub role: CurveRole,
    pub periods: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closure_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveDoc>,
    pub samples: Vec<SampleDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<SuiteReport>,
}

impl CurveDocument {
    pub fn from_curve(curve: &SampledCurve) -> Self {
        Self {
            params: ParamsDoc::from_params(&curve.params),
            target: None,
            residuals: None,
            role: curve.role,
            periods: curve.periods,
            closure_gap: None,
            solve: None,
            samples: curve.samples.iter().map(SampleDoc::from).collect(),
            verification: None,
        }
    }

    pub fn from_closed(closed: &ClosedCurve, residuals: Option<&ClosureResiduals>) -> Self {
        Self {
            target: Some(closed.target),
            residuals: residuals.map(ResidualsDoc::from),
            closure_gap: Some(closed.closure_gap),
            ..Self::from_curve(&closed.curve)
        }
    }

    pub fn to_curve(&self) -> Result<SampledCurve, IoError> {
        Ok(SampledCurve {
            params: self.params.to_params()?,
            samples: self.samples.iter().map(FrenetSample::from).collect(),
            periods: self.periods,
            role: self.role,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn export_curve_json(doc: &CurveDocument, path: &Path) -> Result<(), IoError> {
    write_file(path, &doc.to_json())
}

pub fn import_curve_json(path: &Path) -> Result<CurveDocument, IoError> {
    CurveDocument::from_json(&read_file(path)?).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Symmetry line as exported next to a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineDoc {
    pub index: i64,
    pub t_star: f64,
    pub base: [f64; 3],
    pub direction: [f64; 3],
}

impl From<&SymmetryLine> for LineDoc {
    fn from(l: &SymmetryLine) -> Self {
        Self {
            index: l.index,
            t_star: l.t_star,
            base: arr(&l.base),
            direction: arr(&l.direction),
        }
    }
}

/// One member of a continuation family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMemberDoc {
    pub b3: f64,
    pub kappa: f64,
    pub a: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl From<&SolveResult> for FamilyMemberDoc {
    fn from(r: &SolveResult) -> Self {
        Self {
            b3: r.params.b3(),
            kappa: r.params.kappa(),
            a: r.params.a(),
            residual_norm: r.residual_norm,
            iterations: r.iterations,
        }
    }
}

// ---------------------------------------------------------------------------
// OBJ

/// Wavefront OBJ: all `v` lines, then all `vn` lines, then `f i//i j//j k//k`.
pub fn mesh_to_obj(mesh: &TubeMesh) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# tube mesh: {} rings x {} vertices{}",
        mesh.rings,
        mesh.ring_size,
        if mesh.closed { ", closed" } else { "" }
    )
    .unwrap();
    for (tag, list) in [("v", &mesh.vertices), ("vn", &mesh.normals)] {
        for p in list {
            out.push_str(tag);
            for c in p.iter() {
                out.push(' ');
                fmt_f64(&mut out, *c);
            }
            out.push('\n');
        }
    }
    for f in &mesh.faces {
        let [i, j, k] = f.map(|x| x + 1);
        writeln!(out, "f {i}//{i} {j}//{j} {k}//{k}").unwrap();
    }
    out
}

pub fn export_mesh_obj(mesh: &TubeMesh, path: &Path) -> Result<(), IoError> {
    write_file(path, &mesh_to_obj(mesh))
}

// ---------------------------------------------------------------------------
// Job configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub grid_kappa: usize,
    pub grid_a: usize,
    /// `b3` values scanned in turn; empty means the job's own `b3`.
    pub b3_values: Vec<f64>,
    /// Scan candidates handed to Newton, best first.
    pub candidates: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            kappa_min: 0.5,
            kappa_max: 3.0,
            a_min: 0.1,
            a_max: 1.5,
            grid_kappa: 16,
            grid_a: 16,
            b3_values: Vec::new(),
            candidates: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    pub b3_min: f64,
    pub b3_max: f64,
    pub step: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            b3_min: -0.2,
            b3_max: 0.2,
            step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub csv: bool,
    pub json: bool,
    pub obj: bool,
    pub evolute: bool,
    pub ring_size: usize,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            csv: true,
            json: true,
            obj: false,
            evolute: false,
            ring_size: 24,
        }
    }
}

/// A reproducible job. Loaded from TOML; command-line flags override fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    pub form: VelocityForm,
    pub kappa: f64,
    pub a: f64,
    pub b3: f64,
    pub harmonics: Vec<Harmonic>,
    /// Rational angle as `"p/q"`.
    pub target: Option<String>,
    pub tol: f64,
    /// Samples per `2 pi`.
    pub resolution: usize,
    pub periods: f64,
    pub scan: ScanConfig,
    pub family: FamilyConfig,
    pub export: ExportConfig,
    pub output_dir: PathBuf,
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            form: VelocityForm::Sqrt,
            kappa: 1.0,
            a: 0.0,
            b3: 0.0,
            harmonics: Vec::new(),
            target: None,
            tol: 1e-10,
            resolution: 1024,
            periods: 1.0,
            scan: ScanConfig::default(),
            family: FamilyConfig::default(),
            export: ExportConfig::default(),
            output_dir: PathBuf::from("."),
        }
    }
}

impl JobConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::from_toml(&read_file(path)?).map_err(|source| IoError::Toml {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn params(&self) -> Result<CurveParams, IoError> {
        ParamsDoc {
            kappa: self.kappa,
            a: self.a,
            b3: self.b3,
            harmonics: self.harmonics.clone(),
            form: self.form,
        }
        .to_params()
        .map_err(IoError::from)
    }

    pub fn target(&self) -> Result<Option<RationalAngle>, IoError> {
        self.target
            .as_deref()
            .map(|t| t.parse::<RationalAngle>().map_err(IoError::Config))
            .transpose()
    }

    /// Checks every numeric field against its valid range.
    pub fn validate(&self) -> Result<(), IoError> {
        let bad = |m: String| Err(IoError::Config(m));
        self.params()?;
        self.target()?;
        if !(crate::frenet::MIN_TOL..=crate::frenet::MAX_TOL).contains(&self.tol) {
            return bad(format!("tol {} outside [1e-13, 1e-3]", self.tol));
        }
        if self.resolution < 4 {
            return bad(format!("resolution {} below 4", self.resolution));
        }
        if !(self.periods.is_finite() && self.periods > 0.0) {
            return bad(format!("periods {} must be positive", self.periods));
        }
        let s = &self.scan;
        if !(s.kappa_min > 0.0 && s.kappa_min < s.kappa_max && s.kappa_max.is_finite()) {
            return bad(format!("scan kappa range [{}, {}]", s.kappa_min, s.kappa_max));
        }
        if !(s.a_min < s.a_max && s.a_min.is_finite() && s.a_max.is_finite()) {
            return bad(format!("scan a range [{}, {}]", s.a_min, s.a_max));
        }
        if s.grid_kappa < 2 || s.grid_a < 2 {
            return bad("scan grid needs at least 2 x 2 cells".into());
        }
        if s.b3_values.iter().any(|b| !b.is_finite()) {
            return bad("scan b3 values must be finite".into());
        }
        let f = &self.family;
        if !(f.b3_min <= f.b3_max && f.step > 0.0 && f.step.is_finite()) {
            return bad(format!("family range [{}, {}] step {}", f.b3_min, f.b3_max, f.step));
        }
        if self.export.ring_size < 3 {
            return bad("ring_size below 3".into());
        }
        Ok(())
    }
}
