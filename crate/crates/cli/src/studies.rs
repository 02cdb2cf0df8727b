use crate::{config_err, CliError, SampleGrid, Settings, StudyKind};
use peridyn::analysis::{
    converge_to_navier, interface_blowup, natural_limit_check, sample_grid, star_converges_offinterface,
    star_limit_check, ConvergenceReport,
};
use peridyn::fields::{build_manufactured, ON_INTERFACE_TOL, Manufactured, ManufacturedName, MaterialSpec, PlanarInterface};
use peridyn::operators::{k_apply, k_closed_form, OperatorConfig};
use peridyn::quadrature::{
    ball_volume, fourth_moment_numeric, integrate_ball, k_delta_numeric, second_moment_numeric, BallQuadrature,
    HalfBallQuadrature,
};
use peridyn::solver::{run_solve, write_solution_csv, BoxBounds, SolveConfig, SolveReport, SOLVER_TOL};
use peridyn::tensor::{contract_t3_mat, outer3, Mat3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

/// Tolerances of the embedded checks.
pub mod tol {
    pub const MOMENT: f64 = 1e-10;
    pub const K_DELTA: f64 = 1e-9;
    pub const K_APPLY: f64 = 1e-13;
    pub const EXACT: f64 = 1e-9;
    pub const MIN_SLOPE: f64 = 0.9;
    pub const BLOWUP_SLOPE: f64 = -1.0;
    pub const BLOWUP_SLOPE_TOL: f64 = 0.05;
    pub const LIMIT_REL: f64 = 0.01;
    pub const LIMIT_ABS: f64 = 5e-3;
    pub const OFF_INTERFACE: f64 = 1e-9;
    pub const CONSTANT_PATCH: f64 = 1e-10;
    pub const LINEAR_PATCH: f64 = 1e-8;
    /// Multiple of `h`.
    pub const FLAGSHIP_PATCH: f64 = 5.0;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

pub(crate) fn run_study(s: &Settings) -> Result<Vec<Check>, CliError> {
    fs::create_dir_all(&s.out)?;
    match s.study {
        StudyKind::Moments => moments(s),
        StudyKind::Kdelta => kdelta(s),
        StudyKind::Converge => converge(s),
        StudyKind::Blowup | StudyKind::Natural => interface_study(s),
        StudyKind::Star if s.offinterface => star_offinterface(s),
        StudyKind::Star => interface_study(s),
        StudyKind::Solve => solve(s),
    }
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn interface(s: &Settings) -> Result<PlanarInterface, CliError> {
    Ok(PlanarInterface::new(Vec3::ZERO, s.normal)?)
}

fn case(s: &Settings) -> Result<Manufactured, CliError> {
    let iface = interface(s)?;
    let material = s.material.map(|m| m.build(iface)).transpose()?;
    Ok(build_manufactured(s.field, iface, material)?)
}

fn operator_config(s: &Settings, delta: f64) -> Result<OperatorConfig, CliError> {
    let rule = BallQuadrature::new(s.quad.0, s.quad.1)?;
    Ok(OperatorConfig::new(delta)?.with_rule(Arc::new(rule)))
}

fn short_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn max_abs_diff<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn moments(s: &Settings) -> Result<Vec<Check>, CliError> {
    let rule = BallQuadrature::new(s.quad.0, s.quad.1)?;
    let delta = 1.0;
    let fourth = fourth_moment_numeric(&rule, delta)?;
    let third = integrate_ball(&rule, delta, &Vec3::ZERO, |z| outer3(&z, &z, &z) * (1.0 / z.norm_squared().powi(2)))?;
    let second = second_moment_numeric(&rule, delta)?;
    let kd = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    let mut out = csv_writer(&s.out.join("moments.csv"))?;
    out.write_record(["quantity", "i", "j", "k", "l", "numeric", "exact", "abs_err"])?;
    let mut errs = [0.0f64; 3];
    let idx = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let exact = 2.0 * (kd(i, j) * kd(k, l) + kd(i, k) * kd(j, l) + kd(i, l) * kd(j, k));
                    let num = fourth.0[i][j][k][l];
                    errs[0] = errs[0].max((num - exact).abs());
                    let mut rec = vec!["fourth".to_string()];
                    rec.extend(idx(&[i, j, k, l]));
                    rec.extend([sci(num), sci(exact), sci((num - exact).abs())]);
                    out.write_record(&rec)?;
                }
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let num = third.0[i][j][k];
                errs[1] = errs[1].max(num.abs());
                let mut rec = vec!["third".to_string()];
                rec.extend(idx(&[i, j, k]));
                rec.extend([String::new(), sci(num), sci(0.0), sci(num.abs())]);
                out.write_record(&rec)?;
            }
        }
    }
    let vol = ball_volume(delta);
    for i in 0..3 {
        for j in 0..3 {
            let exact = vol / 3.0 * kd(i, j);
            let num = second.0[i][j];
            errs[2] = errs[2].max((num - exact).abs());
            let mut rec = vec!["second".to_string()];
            rec.extend(idx(&[i, j]));
            rec.extend([String::new(), String::new(), sci(num), sci(exact), sci((num - exact).abs())]);
            out.write_record(&rec)?;
        }
    }
    out.flush()?;

    let checks = vec![
        Check::new("fourth_moment", errs[0] < tol::MOMENT, format!("entries 6/2/0, max error {:.3e} (tol {:e})", errs[0], tol::MOMENT)),
        Check::new("third_moment", errs[1] < tol::MOMENT, format!("vanishes, max |entry| {:.3e} (tol {:e})", errs[1], tol::MOMENT)),
        Check::new("second_moment", errs[2] < tol::MOMENT, format!("|B|/3·I, max error {:.3e} (tol {:e})", errs[2], tol::MOMENT)),
    ];
    write_json(
        &s.out.join("moments.json"),
        &json!({
            "study": "moments",
            "delta": delta,
            "quad": [s.quad.0, s.quad.1],
            "fourth_moment_max_err": errs[0],
            "third_moment_max_abs": errs[1],
            "second_moment_max_err": errs[2],
            "checks": checks,
        }),
    )?;
    Ok(checks)
}

fn kdelta(s: &Settings) -> Result<Vec<Check>, CliError> {
    let n = s.normal.normalized();
    let rule = HalfBallQuadrature::new(s.quad.0, s.quad.1)?;
    let deltas = match &s.series {
        Some(series) => series.deltas().to_vec(),
        None => vec![1.0, 0.1, 0.01],
    };
    let closed = k_closed_form(&n)?;
    let mut out = csv_writer(&s.out.join("kdelta.csv"))?;
    out.write_record(["delta", "i", "j", "k", "delta_k", "closed_form", "abs_err"])?;
    let mut max_err = 0.0f64;
    for d in &deltas {
        let k = k_delta_numeric(&rule, *d, &n)? * *d;
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    let e = (k.0[i][j][l] - closed.0[i][j][l]).abs();
                    max_err = max_err.max(e);
                    out.write_record([sci(*d), i.to_string(), j.to_string(), l.to_string(), sci(k.0[i][j][l]), sci(closed.0[i][j][l]), sci(e)])?;
                }
            }
        }
    }
    out.flush()?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut apply_err = 0.0f64;
    for _ in 0..100 {
        let mut a = Mat3::ZERO;
        a.0.iter_mut().flatten().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        apply_err = apply_err.max(max_abs_diff(&contract_t3_mat(&closed, &a).0, &k_apply(&a, &n)?.0));
    }
    let checks = vec![
        Check::new("k_delta", max_err < tol::K_DELTA, format!("max |δK_δ − K| {:.3e} over δ = {deltas:?} (tol {:e})", max_err, tol::K_DELTA)),
        Check::new("k_apply", apply_err < tol::K_APPLY, format!("max |K:A − K·A| {:.3e} over 100 matrices (tol {:e})", apply_err, tol::K_APPLY)),
    ];
    write_json(
        &s.out.join("kdelta.json"),
        &json!({
            "study": "kdelta",
            "normal": n,
            "deltas": deltas,
            "quad": [s.quad.0, s.quad.1],
            "k_closed_form": closed.0,
            "max_err": max_err,
            "apply_max_err": apply_err,
            "checks": checks,
        }),
    )?;
    Ok(checks)
}

/// Writes `<study>.csv` and `<study>.json` with the checks under `params`.
fn write_report(s: &Settings, mut report: ConvergenceReport, checks: &[Check]) -> Result<(), CliError> {
    report.params.insert("field".into(), json!(s.field));
    report.params.insert("quad".into(), json!([s.quad.0, s.quad.1]));
    report.params.insert("checks".into(), serde_json::to_value(checks)?);
    let name = report.study.clone();
    report.write_csv(BufWriter::new(File::create(s.out.join(format!("{name}.csv")))?))?;
    write_json(&s.out.join(format!("{name}.json")), &report)?;
    Ok(())
}

fn default_sample_grid(is_interface: bool) -> SampleGrid {
    if is_interface {
        SampleGrid { n: 5, lo: -0.5, hi: 0.5 }
    } else {
        SampleGrid { n: 5, lo: 0.0, hi: 1.0 }
    }
}

fn converge(s: &Settings) -> Result<Vec<Check>, CliError> {
    let case = case(s)?;
    let series = s.series();
    let iface = case.material.interface().or(case.field.interface()).copied();
    let grid = s.sample_grid.unwrap_or(default_sample_grid(iface.is_some()));
    let points = sample_grid(grid.n, grid.lo, grid.hi, iface.as_ref(), 2.0 * series.max());
    let cfg = operator_config(s, series.max())?;
    let report = converge_to_navier(&cfg, &series, &case.material, &case.field, &points, s.p)?;
    let worst = report.records.iter().map(|r| r.err_p).fold(0.0, f64::max);
    let norms = report.norms();
    let checks = if worst <= tol::EXACT {
        vec![Check::new("navier_exact", true, format!("max pointwise error {worst:.3e} (tol {:e})", tol::EXACT))]
    } else {
        let monotone = norms.windows(2).all(|w| w[1] < w[0]);
        let slope = report.slope.unwrap_or(f64::NAN);
        vec![
            Check::new("monotone", monotone, format!("L{} errors [{}]", s.p, short_list(&norms))),
            Check::new("rate", slope >= tol::MIN_SLOPE, format!("fitted slope {slope:.4} (need ≥ {})", tol::MIN_SLOPE)),
        ]
    };
    write_report(s, report, &checks)?;
    Ok(checks)
}

/// Point of Γ used by the interface studies.
fn gamma_point(s: &Settings, iface: &PlanarInterface) -> Vec3 {
    iface.project(&s.point)
}

fn limit_check(name: &str, report: &ConvergenceReport, target: Vec3) -> Check {
    let Some(est) = report.limit_estimate else {
        return Check::new(name, false, "no limit estimate".into());
    };
    let err = (est - target).norm();
    let scale = target.norm();
    let (passed, tol_text) = if scale < 1e-12 {
        (err <= tol::LIMIT_ABS, format!("abs tol {:e}", tol::LIMIT_ABS))
    } else {
        (err <= tol::LIMIT_REL * scale, format!("rel tol {}", tol::LIMIT_REL))
    };
    let finest = report.records.last().map(|r| r.value).unwrap_or(Vec3::ZERO);
    Check::new(
        name,
        passed,
        format!(
            "Richardson {:?} vs target {:?}, error {err:.3e} ({tol_text}); finest δ·value {:?}",
            est.0, target.0, finest.0
        ),
    )
}

fn interface_study(s: &Settings) -> Result<Vec<Check>, CliError> {
    let case = case(s)?;
    let series = s.series();
    let iface = *case
        .material
        .interface()
        .or(case.field.interface())
        .ok_or_else(|| config_err(format!("`{}` has no interface", s.field)))?;
    let x = gamma_point(s, &iface);
    let cfg = operator_config(s, series.max())?;
    let (report, checks) = match s.study {
        StudyKind::Blowup => {
            let r = interface_blowup(&cfg, &series, &case.material, &case.field, &x)?;
            let slope = r.slope.unwrap_or(f64::NAN);
            let ok = (slope - tol::BLOWUP_SLOPE).abs() <= tol::BLOWUP_SLOPE_TOL;
            let c = Check::new("blowup_rate", ok, format!("log–log slope {slope:.4} (need −1 ± {})", tol::BLOWUP_SLOPE_TOL));
            (r, vec![c])
        }
        StudyKind::Natural => {
            let r = natural_limit_check(&cfg, &series, &case.material, &case.field, &x)?;
            let target: Vec3 = serde_json::from_value(r.params["target"].clone())?;
            let c = limit_check("natural_limit", &r, target);
            (r, vec![c])
        }
        _ => {
            let r = star_limit_check(&cfg, &series, &case.material, &case.field, &x)?;
            let target: Vec3 = serde_json::from_value(r.params["target"].clone())?;
            let c = limit_check("star_limit", &r, target);
            (r, vec![c])
        }
    };
    write_report(s, report, &checks)?;
    Ok(checks)
}

fn star_offinterface(s: &Settings) -> Result<Vec<Check>, CliError> {
    let case = case(s)?;
    let series = s.series();
    let iface = case.material.interface().or(case.field.interface()).copied();
    let grid = s.sample_grid.unwrap_or(default_sample_grid(true));
    // points on Γ itself are outside the per-side domain
    let points = sample_grid(grid.n, grid.lo, grid.hi, iface.as_ref(), ON_INTERFACE_TOL);
    let cfg = operator_config(s, series.max())?;
    let report = star_converges_offinterface(&cfg, &series, &case.material, &case.field, &points, s.p)?;
    let equal = report.params["star_equals_l"] == Value::Bool(true);
    let mut far_err = 0.0f64;
    let mut far_count = 0usize;
    for r in &report.records {
        let dist = iface.map_or(f64::INFINITY, |g| g.signed_distance(&points[r.point_id]).abs());
        if dist >= 2.0 * r.delta {
            far_err = far_err.max(r.err_p);
            far_count += 1;
        }
    }
    let checks = vec![
        Check::new("star_equals_l", equal, "L* = L bit for bit wherever |s| ≥ δ".into()),
        Check::new(
            "off_interface_navier",
            far_count > 0 && far_err <= tol::OFF_INTERFACE,
            format!("max |L* − N| {far_err:.3e} over {far_count} evaluations at |s| ≥ 2δ (tol {:e})", tol::OFF_INTERFACE),
        ),
    ];
    write_report(s, report, &checks)?;
    Ok(checks)
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    study: &'static str,
    config: &'a SolveConfig,
    #[serde(flatten)]
    report: &'a SolveReport,
    checks: &'a [Check],
}

fn solve(s: &Settings) -> Result<Vec<Check>, CliError> {
    let half = 0.5;
    let cfg = SolveConfig {
        bounds: s.bounds.unwrap_or(BoxBounds { lo: Vec3::new(-half, -half, -half), hi: Vec3::new(half, half, half) }),
        h: s.h.unwrap_or(1.0 / 16.0),
        ratio: s.ratio.unwrap_or(3.0),
        field: s.field.as_str().to_string(),
        material: s.material,
        normal: s.normal,
        b: s.b,
    };
    let run = run_solve(&cfg)?;
    let rep = &run.report;
    let mut checks = vec![Check::new(
        "residual",
        rep.residuals.max() <= SOLVER_TOL,
        format!("max residual {:.3e} (tol {:e}), condition ≈ {:.3e}", rep.residuals.max(), SOLVER_TOL, rep.condition),
    )];
    let homogeneous = matches!(s.material, None | Some(MaterialSpec::Homogeneous(..)));
    let reproduction = match s.field {
        ManufacturedName::Constant => Some(tol::CONSTANT_PATCH),
        ManufacturedName::Linear if homogeneous => Some(tol::LINEAR_PATCH),
        ManufacturedName::PatchJumpZeroTraction => Some(tol::FLAGSHIP_PATCH * cfg.h),
        _ => None,
    };
    if let Some(t) = reproduction {
        checks.push(Check::new("reproduction", rep.max_error <= t, format!("max nodal error {:.3e} (tol {t:e})", rep.max_error)));
    }
    write_solution_csv(&run.grid, &run.solution.u, BufWriter::new(File::create(s.out.join("solve.csv"))?))?;
    write_json(&s.out.join("solve.json"), &SolveOutput { study: "solve", config: &cfg, report: rep, checks: &checks })?;
    Ok(checks)
}
