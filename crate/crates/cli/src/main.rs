use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use autoevolute::closure::{
    assemble_closed_curve, classify, closure_residuals_with, continuation, grid_scan, newton_solve,
    AssembleOptions, ContinuationOptions, NewtonOptions, RationalAngle, ScanCandidate, ScanSpec,
    SolveResult,
};
use autoevolute::frenet::{integrate_with, FrenetSample, IntegrateOptions};
use autoevolute::geometry::{evolute, midpoint_curve, tube_mesh};
use autoevolute::io::{
    export_curve_csv, export_curve_json, export_mesh_obj, import_curve_json, CurveDocument,
    FamilyMemberDoc, JobConfig, SolveDoc,
};
use autoevolute::profile::{Harmonic, VelocityForm};
use autoevolute::verify::{verify_sampled, SuiteReport, SuiteTolerances};

mod serve;

#[derive(Parser, Debug)]
#[command(name = "autoevolute", version, about = "Closed constant-curvature curves congruent to their evolutes")]
struct Cli {
    /// Job configuration (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample one curve.
    Eval(EvalArgs),
    /// Coarse residual scan over (kappa, a).
    Scan(ScanArgs),
    /// Close a curve by Newton iteration.
    Solve(SolveArgs),
    /// Continue a solution across b3.
    Family(FamilyArgs),
    /// Run the invariant suites on a curve document.
    Verify(VerifyArgs),
    /// Convert a curve document to CSV / OBJ (defaults from the [export] table).
    Export(ExportArgs),
    /// Start the local session service.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Default)]
struct ParamArgs {
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b3: Option<f64>,
    /// Extra odd harmonic as `k:weight`; repeatable.
    #[arg(long = "harmonic", value_parser = parse_harmonic)]
    harmonics: Vec<Harmonic>,
    #[arg(long)]
    form: Option<VelocityForm>,
    /// Rational angle `p/q`.
    #[arg(long)]
    target: Option<String>,
    /// Integrator tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    periods: Option<f64>,
    /// Samples per period.
    #[arg(long)]
    samples: Option<usize>,
    /// Emit the evolute instead of the curve.
    #[arg(long)]
    evolute: bool,
    /// `.csv` or `.json`; CSV on stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// b3 values to scan; repeatable.
    #[arg(long = "scan-b3", allow_hyphen_values = true)]
    scan_b3: Vec<f64>,
    /// Grid size per axis.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Start from the best scan candidates instead of (kappa, a).
    #[arg(long)]
    from_scan: bool,
    #[arg(long = "scan-b3", allow_hyphen_values = true)]
    scan_b3: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FamilyArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Start from a solved curve document.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    b3_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b3_max: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    curve: PathBuf,
    /// Write the suite report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Canal tube around the midpoint curve.
    #[arg(long)]
    obj: Option<PathBuf>,
    #[arg(long)]
    evolute: bool,
    #[arg(long)]
    ring_size: Option<usize>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8787)]
    port: u16,
}

fn parse_harmonic(s: &str) -> Result<Harmonic, String> {
    let (k, w) = s.split_once(':').ok_or("expected k:weight")?;
    let k: u32 = k.trim().parse().map_err(|e| format!("harmonic order: {e}"))?;
    let w: f64 = w.trim().parse().map_err(|e| format!("harmonic weight: {e}"))?;
    Ok(Harmonic::new(k, w))
}

/// Usage errors exit with 2, failed solves and verifications with 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

enum Outcome {
    Success,
    Failure,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Failure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<JobConfig> {
    match path {
        Some(p) => JobConfig::load(p).map_err(|e| usage(e.to_string())),
        None => Ok(JobConfig::default()),
    }
}

fn apply(cfg: &mut JobConfig, p: &ParamArgs) -> Result<()> {
    if let Some(x) = p.kappa {
        cfg.kappa = x;
    }
    if let Some(x) = p.a {
        cfg.a = x;
    }
    if let Some(x) = p.b3 {
        cfg.b3 = x;
    }
    if !p.harmonics.is_empty() {
        cfg.harmonics = p.harmonics.clone();
    }
    if let Some(f) = p.form {
        cfg.form = f;
    }
    if let Some(t) = &p.target {
        cfg.target = Some(t.clone());
    }
    if let Some(t) = p.tol {
        cfg.tol = t;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))
}

const MAX_TARGET_Q: i64 = 32;

fn require_target(cfg: &JobConfig) -> Result<RationalAngle> {
    let target = cfg
        .target()
        .map_err(|e| usage(e.to_string()))?
        .ok_or_else(|| usage("--target p/q is required"))?;
    if target.q() > MAX_TARGET_Q {
        return Err(usage(format!("target denominator {} exceeds {MAX_TARGET_Q}", target.q())));
    }
    Ok(target)
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Eval(args) => {
            if let Some(p) = args.periods {
                cfg.periods = p;
            }
            if let Some(n) = args.samples {
                cfg.resolution = n;
            }
            apply(&mut cfg, &args.params)?;
            eval(&cfg, args.evolute, args.out.as_deref())
        }
        Command::Scan(args) => {
            if !args.scan_b3.is_empty() {
                cfg.scan.b3_values = args.scan_b3.clone();
            }
            if let Some(g) = args.grid {
                cfg.scan.grid_kappa = g;
                cfg.scan.grid_a = g;
            }
            apply(&mut cfg, &args.params)?;
            scan(&cfg, args.top, args.out.as_deref())
        }
        Command::Solve(args) => {
            if !args.scan_b3.is_empty() {
                cfg.scan.b3_values = args.scan_b3.clone();
            }
            apply(&mut cfg, &args.params)?;
            solve(&cfg, args.from_scan, args.out.as_deref(), args.csv.as_deref())
        }
        Command::Family(args) => {
            if let Some(x) = args.b3_min {
                cfg.family.b3_min = x;
            }
            if let Some(x) = args.b3_max {
                cfg.family.b3_max = x;
            }
            if let Some(x) = args.step {
                cfg.family.step = x;
            }
            if let Some(path) = &args.curve {
                let doc = import_curve_json(path)?;
                cfg.kappa = doc.params.kappa;
                cfg.a = doc.params.a;
                cfg.b3 = doc.params.b3;
                cfg.harmonics = doc.params.harmonics.clone();
                cfg.form = doc.params.form;
                if let Some(t) = doc.target {
                    cfg.target = Some(t.to_string());
                }
            }
            apply(&mut cfg, &args.params)?;
            family(&cfg, args.out.as_deref())
        }
        Command::Verify(args) => verify(&args.curve, args.out.as_deref()),
        Command::Export(args) => {
            if let Some(r) = args.ring_size {
                cfg.export.ring_size = r;
            }
            export(&cfg, &args)
        }
        Command::Serve(args) => {
            serve::run(&args.host, args.port)?;
            Ok(Outcome::Success)
        }
    }
}

fn eval(cfg: &JobConfig, show_evolute: bool, out: Option<&Path>) -> Result<Outcome> {
    let params = cfg.params()?;
    let t1 = std::f64::consts::TAU * cfg.periods;
    let opts = IntegrateOptions::with_tol(cfg.tol, cfg.resolution);
    let mut curve = integrate_with(&params, 0.0, t1, &FrenetSample::initial(&params, 0.0), &opts)?;
    if show_evolute {
        curve = evolute(&curve);
    }
    match out {
        Some(path) if path.extension().is_some_and(|e| e == "json") => {
            export_curve_json(&CurveDocument::from_curve(&curve), path)?;
        }
        Some(path) => export_curve_csv(&curve.samples, path)?,
        None => print!("{}", autoevolute::io::curve_to_csv(&curve.samples)),
    }
    log::info!("{} samples", curve.len());
    Ok(Outcome::Success)
}

fn scan_specs(cfg: &JobConfig, target: RationalAngle) -> Vec<ScanSpec> {
    let b3s = if cfg.scan.b3_values.is_empty() {
        vec![cfg.b3]
    } else {
        cfg.scan.b3_values.clone()
    };
    b3s.into_iter()
        .map(|b3| ScanSpec {
            extra: cfg.harmonics.clone(),
            kappa_range: (cfg.scan.kappa_min, cfg.scan.kappa_max),
            a_range: (cfg.scan.a_min, cfg.scan.a_max),
            grid: (cfg.scan.grid_kappa, cfg.scan.grid_a),
            ..ScanSpec::new(cfg.form, b3, target)
        })
        .collect()
}

fn run_scans(cfg: &JobConfig, target: RationalAngle) -> Result<Vec<(ScanSpec, ScanCandidate)>> {
    let mut all = Vec::new();
    for spec in scan_specs(cfg, target) {
        let found = grid_scan(&spec)?;
        log::info!(
            "scan b3 = {}: best norm {:.3e}",
            spec.b3,
            found.first().map_or(f64::NAN, |c| c.norm)
        );
        all.extend(found.into_iter().map(|c| (spec.clone(), c)));
    }
    all.sort_by(|x, y| x.1.norm.total_cmp(&y.1.norm));
    Ok(all)
}

fn scan(cfg: &JobConfig, top: usize, out: Option<&Path>) -> Result<Outcome> {
    let target = require_target(cfg)?;
    let all = run_scans(cfg, target)?;
    let rows: Vec<serde_json::Value> = all
        .iter()
        .take(top)
        .map(|(_, c)| {
            serde_json::json!({
                "kappa": c.kappa, "a": c.a, "b3": c.b3, "norm": c.norm,
                "d": c.residuals.map(|r| r.d), "angle_defect": c.residuals.map(|r| r.angle_defect),
            })
        })
        .collect();
    let text = serde_json::to_string_pretty(&serde_json::json!({ "target": target, "candidates": rows }))?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| p.display().to_string())?,
        None => println!("{text}"),
    }
    Ok(Outcome::Success)
}

fn solve_from_scan(cfg: &JobConfig, target: RationalAngle) -> Result<Option<SolveResult>> {
    let opts = NewtonOptions::default();
    for (spec, cand) in run_scans(cfg, target)?.iter().take(cfg.scan.candidates) {
        let start = cand.params(spec)?;
        match newton_solve(&start, target, &opts) {
            Ok(r) => return Ok(Some(r)),
            Err(e) => log::info!("candidate kappa={:.4} a={:.4} b3={}: {e}", cand.kappa, cand.a, cand.b3),
        }
    }
    Ok(None)
}

fn solve(cfg: &JobConfig, from_scan: bool, out: Option<&Path>, csv: Option<&Path>) -> Result<Outcome> {
    let target = require_target(cfg)?;
    let result = if from_scan {
        solve_from_scan(cfg, target)?
    } else {
        match newton_solve(&cfg.params()?, target, &NewtonOptions::default()) {
            Ok(r) => Some(r),
            Err(e) => {
                log::error!("{e}");
                None
            }
        }
    };
    let Some(result) = result else {
        log::error!("no convergence for target {target}");
        return Ok(Outcome::Failure);
    };
    log::info!(
        "converged: kappa = {:.12}, a = {:.12}, b3 = {}, |F| = {:.3e} after {} iterations",
        result.params.kappa(),
        result.params.a(),
        result.params.b3(),
        result.residual_norm,
        result.iterations
    );
    let closed = assemble_closed_curve(
        &result.params,
        target,
        &AssembleOptions {
            resolution: cfg.resolution,
            ..AssembleOptions::default()
        },
    )?;
    let report = verify_sampled(&closed.curve, &SuiteTolerances::default());
    log_report(&report);
    if let Ok(c) = classify(&closed) {
        log::info!(
            "winding about axis {}, meridian hint {}",
            c.winding_axis,
            c.winding_meridian_hint
        );
    }
    let mut doc = CurveDocument::from_closed(&closed, Some(&result.residuals));
    doc.solve = Some(SolveDoc::from(&result));
    doc.verification = Some(report);
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join("solution.json"));
    export_curve_json(&doc, &path)?;
    if let Some(p) = csv {
        export_curve_csv(&closed.curve.samples, p)?;
    }
    log::info!("wrote {}", path.display());
    Ok(Outcome::Success)
}

fn family(cfg: &JobConfig, out: Option<&Path>) -> Result<Outcome> {
    let target = require_target(cfg)?;
    let start = match newton_solve(&cfg.params()?, target, &NewtonOptions::default()) {
        Ok(r) => r,
        Err(e) => {
            log::error!("start point does not converge: {e}");
            return Ok(Outcome::Failure);
        }
    };
    let fam = continuation(
        &start,
        (cfg.family.b3_min, cfg.family.b3_max),
        cfg.family.step,
        &ContinuationOptions::default(),
    )?;
    for t in &fam.truncated {
        log::warn!(
            "family truncated: last good b3 = {}, failed at {}",
            t.last_good_b3,
            t.failed_b3
        );
    }
    let members: Vec<FamilyMemberDoc> = fam.members.iter().map(FamilyMemberDoc::from).collect();
    let text = serde_json::to_string_pretty(&serde_json::json!({
        "target": target,
        "form": cfg.form,
        "members": members,
        "truncated": fam.truncated,
    }))?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| p.display().to_string())?,
        None => println!("{text}"),
    }
    Ok(Outcome::Success)
}

fn log_report(report: &SuiteReport) {
    for r in &report.reports {
        let line = format!(
            "{:<20} {} metric {:.3e} threshold {:.1e}",
            r.check,
            if r.passed { "PASS" } else { "FAIL" },
            r.metric,
            r.threshold
        );
        if r.passed {
            log::info!("{line}");
        } else {
            log::warn!("{line}{}", r.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default());
        }
    }
}

fn verify(path: &Path, out: Option<&Path>) -> Result<Outcome> {
    let doc = import_curve_json(path)?;
    let curve = doc.to_curve()?;
    if let Some(target) = doc.target {
        if let Ok(r) = closure_residuals_with(&curve.params, target, autoevolute::closure::SOLVE_INTEGRATOR_TOL) {
            log::info!("closure residual norm {:.3e}", r.norm());
        }
    }
    let report = verify_sampled(&curve, &SuiteTolerances::default());
    log_report(&report);
    if let Some(p) = out {
        let text = serde_json::to_string_pretty(&report)?;
        std::fs::write(p, text + "\n").with_context(|| p.display().to_string())?;
    }
    Ok(if report.passed {
        Outcome::Success
    } else {
        Outcome::Failure
    })
}

fn export(cfg: &JobConfig, args: &ExportArgs) -> Result<Outcome> {
    let doc = import_curve_json(&args.curve)?;
    let curve = doc.to_curve()?;
    if args.csv.is_some() || args.obj.is_some() {
        let curve = if args.evolute { evolute(&curve) } else { curve };
        if let Some(p) = &args.csv {
            export_curve_csv(&curve.samples, p)?;
        }
        if let Some(p) = &args.obj {
            write_tube(&curve, cfg.export.ring_size, p)?;
        }
        return Ok(Outcome::Success);
    }

    // no explicit targets: write what the config's [export] table asks for
    let e = &cfg.export;
    if !(e.csv || e.json || e.obj || e.evolute) {
        return Err(usage("nothing to export: pass --csv and/or --obj, or enable [export] in the config"));
    }
    let stem = args.curve.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
    let dir = &cfg.output_dir;
    if e.csv {
        export_curve_csv(&curve.samples, &dir.join(format!("{stem}.csv")))?;
    }
    if e.json {
        let p = dir.join(format!("{stem}.json"));
        if p != args.curve {
            export_curve_json(&doc, &p)?;
        }
    }
    if e.obj {
        write_tube(&curve, e.ring_size, &dir.join(format!("{stem}.obj")))?;
    }
    if e.evolute {
        export_curve_csv(&evolute(&curve).samples, &dir.join(format!("{stem}_evolute.csv")))?;
    }
    log::info!("wrote exports to {}", dir.display());
    Ok(Outcome::Success)
}

fn write_tube(curve: &autoevolute::SampledCurve, ring_size: usize, path: &Path) -> Result<()> {
    let mid = midpoint_curve(curve);
    let mesh = tube_mesh(&mid, 0.5 / curve.kappa(), ring_size)?;
    if mesh.radius_too_large {
        log::warn!("tube radius exceeds the center curve's radius of curvature");
    }
    export_mesh_obj(&mesh, path)?;
    Ok(())
}
