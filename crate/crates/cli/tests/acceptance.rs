//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero only when a part outside `KNOWN_FAILURES` fails.

use peridyn::analysis::DeltaSeries;
use peridyn::fields::{
    make_manufactured, Material, PiecewiseField, PlanarInterface, QuadraticField, SmoothMaterial,
};
use peridyn::operators::{eval_l, eval_l_star, k_apply, k_closed_form, OperatorConfig};
use peridyn::quadrature::{
    ball_volume, fourth_moment_numeric, half_ball_first_moment, k_delta_numeric, second_moment_numeric,
    BallQuadrature, HalfBallQuadrature,
};
use peridyn::solver::{assemble, build_grid, run_solve, SolveConfig};
use peridyn::tensor::{contract_t3_mat, Mat3, Tensor3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

/// Parts that fail against the stated target; see the README.
const KNOWN_FAILURES: &[&str] = &["8:patch_jump_zero_traction"];

struct Part {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn part(name: &'static str, passed: bool, detail: String) -> Part {
    Part { name, passed, detail }
}

fn peridyn(out: &Path, args: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_peridyn"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn peridyn")
        .status;
    status.code().unwrap_or(-1)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).expect("read report")).expect("parse report")
}

fn vec3(v: &Value) -> Vec3 {
    let a: Vec<f64> = serde_json::from_value(v.clone()).unwrap();
    Vec3::new(a[0], a[1], a[2])
}

/// `(δ, point_id, value, err_p)` rows of a δ-series report.
fn records(report: &Value) -> Vec<(f64, u64, Vec3, f64)> {
    report["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r["delta"].as_f64().unwrap(),
                r["point_id"].as_u64().unwrap(),
                vec3(&r["value"]),
                r["err_p"].as_f64().unwrap(),
            )
        })
        .collect()
}

fn deltas(report: &Value) -> Vec<f64> {
    serde_json::from_value(report["deltas"].clone()).unwrap()
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// First-order extrapolation from the two smallest horizons.
fn richardson_finest(rows: &[(f64, u64, Vec3, f64)], point: u64) -> (Vec3, Vec3) {
    let mut at: Vec<_> = rows.iter().filter(|r| r.1 == point).map(|r| (r.0, r.2)).collect();
    at.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (d1, v1) = at[at.len() - 2];
    let (d2, v2) = at[at.len() - 1];
    ((v2 * d1 - v1 * d2) * (1.0 / (d1 - d2)), v2)
}

fn random_normal(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let r = v.norm();
        if r > 0.1 && r <= 1.0 {
            return v * (1.0 / r);
        }
    }
}

fn kron(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// `(3/32)(n_i δ_jk + n_j δ_ik + n_k δ_ij − n_i n_j n_k)`, from the hemisphere
/// averages of `ω⊗ω⊗ω`.
fn k_oracle(n: &Vec3) -> Tensor3 {
    let mut t = Tensor3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let v = n.0[i] * kron(j, k) + n.0[j] * kron(i, k) + n.0[k] * kron(i, j) - n.0[i] * n.0[j] * n.0[k];
                t.0[i][j][k] = 3.0 / 32.0 * v;
            }
        }
    }
    t
}

fn t3_diff(a: &Tensor3, b: &Tensor3) -> f64 {
    (*a - *b).max_abs()
}

fn criterion_1() -> Vec<Part> {
    let rule = BallQuadrature::new(8, 12).unwrap();
    let c = fourth_moment_numeric(&rule, 1.0).unwrap();
    let mut err4 = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let want = 2.0 * (kron(i, j) * kron(k, l) + kron(i, k) * kron(j, l) + kron(i, l) * kron(j, k));
                    err4 = err4.max((c.0[i][j][k][l] - want).abs());
                }
            }
        }
    }
    let m = second_moment_numeric(&rule, 1.0).unwrap();
    let err2 = (m - Mat3::identity() * (ball_volume(1.0) / 3.0)).max_abs();
    vec![
        part("fourth_moment", err4 < 1e-10, format!("max error {err4:.2e} (tol 1e-10)")),
        part("second_moment", err2 < 1e-10, format!("max error {err2:.2e} (tol 1e-10)")),
    ]
}

fn criterion_2() -> Vec<Part> {
    let rule = HalfBallQuadrature::new(8, 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut err_num, mut err_closed) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let n = random_normal(&mut rng);
        let want = k_oracle(&n);
        err_closed = err_closed.max(t3_diff(&k_closed_form(&n).unwrap(), &want));
        for delta in [1.0, 0.1, 0.01] {
            let k = k_delta_numeric(&rule, delta, &n).unwrap() * delta;
            err_num = err_num.max(t3_diff(&k, &want));
        }
    }
    let mut err_apply = 0.0f64;
    for _ in 0..100 {
        let n = random_normal(&mut rng);
        let mut a = Mat3::ZERO;
        for row in a.0.iter_mut() {
            for e in row.iter_mut() {
                *e = rng.gen_range(-1.0..1.0);
            }
        }
        let k = k_closed_form(&n).unwrap();
        err_apply = err_apply.max((contract_t3_mat(&k, &a) - k_apply(&a, &n).unwrap()).max_abs());
    }
    vec![
        part("k_delta", err_num < 1e-9, format!("δ·K_δ over 20 normals × 3 δ, max error {err_num:.2e} (tol 1e-9)")),
        part("k_closed_form", err_closed < 1e-9, format!("max error {err_closed:.2e} (tol 1e-9)")),
        part("k_apply", err_apply < 1e-13, format!("100 matrices, max error {err_apply:.2e} (tol 1e-13)")),
    ]
}

fn criterion_3() -> Vec<Part> {
    let rule = HalfBallQuadrature::new(8, 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut err = 0.0f64;
    for _ in 0..20 {
        let n = random_normal(&mut rng);
        for delta in [1.0, 0.1] {
            let m = half_ball_first_moment(&rule, delta, &n).unwrap();
            err = err.max((m - n * (9.0 / 8.0)).max_abs());
        }
    }
    vec![part("half_ball_moment", err < 1e-10, format!("max error {err:.2e} (tol 1e-10)"))]
}

fn criterion_4(out: &Path) -> Vec<Part> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut q = Tensor3::ZERO;
    let mut a = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            a.0[i][j] = rng.gen_range(-1.0..1.0);
            for k in 0..3 {
                q.0[i][j][k] = rng.gen_range(-1.0..1.0);
            }
        }
    }
    let field = QuadraticField::new(Vec3::new(0.3, -0.2, 0.1), a, q);
    // symmetrised Hessian as stored by the field
    let hess = |i: usize, j: usize, k: usize| 0.5 * (q.0[i][j][k] + q.0[i][k][j]);
    let (lambda, mu) = (1.7, 0.9);
    let mut want = Vec3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            want.0[i] += mu * hess(i, j, j) + (lambda + mu) * hess(j, j, i);
        }
    }
    let material = Material::Smooth(SmoothMaterial::homogeneous(lambda, mu).unwrap());
    let field = PiecewiseField::smooth(Arc::new(field));
    let mut err = 0.0f64;
    for delta in DeltaSeries::default_series().deltas() {
        let cfg = OperatorConfig::new(*delta).unwrap();
        for _ in 0..4 {
            let x = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            err = err.max((eval_l(&cfg, &material, &field, &x).unwrap() - want).max_abs());
        }
    }
    let code = peridyn(out, &["converge", "--field", "quadratic"]);
    let report = read_json(&out.join("converge.json"));
    let cli_err = records(&report).iter().fold(0.0f64, |m, r| m.max(r.3));
    vec![
        part("random_quadratic", err < 1e-9, format!("max |L u − N u| {err:.2e} over the default series (tol 1e-9)")),
        part(
            "cli_converge",
            code == 0 && cli_err < 1e-9,
            format!("exit {code}, max pointwise error {cli_err:.2e} (tol 1e-9)"),
        ),
    ]
}

fn criterion_5(out: &Path) -> Vec<Part> {
    let code = peridyn(out, &["converge", "--field", "smooth_material_trig", "--material", "smooth-trig"]);
    let report = read_json(&out.join("converge.json"));
    let rows = records(&report);
    let ds = deltas(&report);
    let norms: Vec<f64> = ds
        .iter()
        .map(|d| {
            let errs: Vec<f64> = rows.iter().filter(|r| r.0 == *d).map(|r| r.3 * r.3).collect();
            (errs.iter().sum::<f64>() / errs.len() as f64).sqrt()
        })
        .collect();
    let monotone = norms.windows(2).all(|w| w[1] < w[0]);
    let slope = least_squares_slope(
        &ds.iter().map(|d| d.ln()).collect::<Vec<_>>(),
        &norms.iter().map(|e| e.ln()).collect::<Vec<_>>(),
    );
    let shown: Vec<String> = norms.iter().map(|e| format!("{e:.2e}")).collect();
    vec![part(
        "smooth_media_rate",
        code == 0 && monotone && slope >= 0.9,
        format!("exit {code}, L² errors [{}], slope {slope:.3} (need monotone, ≥ 0.9)", shown.join(", ")),
    )]
}

fn criterion_6(out: &Path) -> Vec<Part> {
    let code = peridyn(out, &["blowup", "--field", "patch_jump_zero_traction"]);
    let report = read_json(&out.join("blowup.json"));
    let rows: Vec<_> = records(&report).into_iter().filter(|r| r.1 == 0).collect();
    let slope = least_squares_slope(
        &rows.iter().map(|r| r.0.ln()).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.2.norm().ln()).collect::<Vec<_>>(),
    );
    vec![part(
        "blowup_rate",
        code == 0 && (slope + 1.0).abs() <= 0.05,
        format!("exit {code}, log–log slope {slope:.4} (need −1 ± 0.05)"),
    )]
}

fn limit_part(name: &'static str, out: &Path, args: &[&str], target: Vec3) -> Part {
    let code = peridyn(out, args);
    let study = args[0];
    let report = read_json(&out.join(format!("{study}.json")));
    let (est, finest) = richardson_finest(&records(&report), 0);
    let err = (est - target).norm();
    let passed = if target.norm() < 1e-12 { err <= 5e-3 } else { err <= 0.01 * target.norm() };
    let tol = if target.norm() < 1e-12 { "abs 5e-3".to_string() } else { "rel 1%".to_string() };
    Part {
        name,
        passed,
        detail: format!(
            "exit {code}, Richardson z {:.6} vs target z {:.6}, error {err:.3e} ({tol}), finest δ·value z {:.6}",
            est.0[2], target.0[2], finest.0[2]
        ),
    }
}

fn criterion_7(out: &Path) -> Vec<Part> {
    let target = Vec3::new(0.0, 0.0, 45.0 / 16.0);
    let mut parts = vec![limit_part(
        "natural_limit",
        out,
        &["natural", "--field", "patch_jump_zero_traction", "--delta-min", "1e-3"],
        target,
    )];
    let case = make_manufactured("patch_jump_zero_traction").unwrap();
    let jump = peridyn::fields::traction_jump(&case.material, &case.field, &Vec3::ZERO).unwrap();
    parts.push(part(
        "traction_continuous",
        jump.max_abs() < 1e-12,
        format!("⟦σ⟧n = {:.1e} while the natural limit is nonzero", jump.max_abs()),
    ));
    parts
}

fn criterion_8(out: &Path) -> Vec<Part> {
    vec![
        limit_part(
            "patch_jump_zero_traction",
            &out.join("patch"),
            &["star", "--field", "patch_jump_zero_traction", "--delta-min", "1e-3"],
            Vec3::ZERO,
        ),
        limit_part(
            "gradient_jump",
            &out.join("gradient"),
            &["star", "--field", "gradient_jump", "--delta-min", "1e-3"],
            Vec3::new(0.0, 0.0, -135.0 / 32.0),
        ),
    ]
}

fn criterion_9(out: &Path) -> Vec<Part> {
    let case = make_manufactured("patch_jump_zero_traction").unwrap();
    let iface = PlanarInterface::horizontal();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut identical, mut total, mut far_err) = (0usize, 0usize, 0.0f64);
    for delta in [0.2, 0.05] {
        let cfg = OperatorConfig::new(delta).unwrap();
        for _ in 0..12 {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let s = sign * rng.gen_range(delta..4.0 * delta);
            let x = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), s);
            let l = eval_l(&cfg, &case.material, &case.field, &x).unwrap();
            let star = eval_l_star(&cfg, &case.material, &case.field, &x).unwrap();
            total += 1;
            if l == star {
                identical += 1;
            }
            // per-side Navier of a piecewise-linear field with constant coefficients is zero
            if iface.signed_distance(&x).abs() >= 2.0 * delta {
                far_err = far_err.max(star.max_abs());
            }
        }
    }
    let code = peridyn(out, &["star", "--offinterface"]);
    vec![
        part("star_equals_l", identical == total, format!("{identical}/{total} points bitwise equal for |s| ≥ δ")),
        part("far_navier", far_err <= 1e-9, format!("max |L* u − N u| {far_err:.2e} at |s| ≥ 2δ (tol 1e-9)")),
        part("cli_offinterface", code == 0, format!("exit {code}")),
    ]
}

fn solve(json: &str) -> f64 {
    let cfg: SolveConfig = serde_json::from_str(json).unwrap();
    run_solve(&cfg).unwrap().report.max_error
}

fn criterion_10() -> Vec<Part> {
    let constant = solve(r#"{"box": {"lo": [0,0,0], "hi": [1,1,1]}, "h": 0.0625, "field": "constant"}"#);
    let linear = solve(
        r#"{"box": {"lo": [0,0,0], "hi": [1,1,1]}, "h": 0.0625, "field": "linear", "material": "homogeneous:2,1"}"#,
    );
    let h = 1.0 / 16.0;
    let patch = solve(
        r#"{"box": {"lo": [-0.5,-0.5,-0.5], "hi": [0.5,0.5,0.5]}, "h": 0.0625, "ratio": 3, "field": "patch_jump_zero_traction"}"#,
    );
    let grid = build_grid(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0), h, 3.0, None).unwrap();
    let case = make_manufactured("trig_smooth").unwrap();
    let opr = assemble(&grid, &case.material);
    let mid = grid.index([8, 8, 8]);
    let row = opr.free.iter().position(|p| *p == mid).unwrap();
    let discrete = opr.apply(&grid.sample(&case.field)).unwrap()[row];
    let cfg = OperatorConfig::new(grid.delta()).unwrap();
    let direct = eval_l(&cfg, &case.material, &case.field, &grid.points[mid]).unwrap();
    let cross = (discrete - direct).max_abs();
    vec![
        part("constant", constant <= 1e-10, format!("max nodal error {constant:.2e} (tol 1e-10)")),
        part("linear", linear <= 1e-8, format!("max nodal error {linear:.2e} (tol 1e-8)")),
        part("patch_17_cubed", patch <= 5.0 * h, format!("max nodal error {patch:.3e} (tol 5h = {:.4})", 5.0 * h)),
        part("cross_validation", cross <= 10.0 * h * h, format!("{cross:.3e} (tol 10h² = {:.4})", 10.0 * h * h)),
    ]
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn criterion_11(out: &Path) -> Vec<Part> {
    let cheap: &[(&str, &[&str])] = &[
        ("moments", &["moments"]),
        ("kdelta", &["kdelta"]),
        ("converge", &["converge", "--field", "trig_smooth", "--delta-series", "0.2,0.1,0.05"]),
        ("blowup", &["blowup", "--delta-series", "0.2,0.1,0.05"]),
        ("natural", &["natural", "--delta-series", "0.2,0.1"]),
        ("star", &["star", "--field", "gradient_jump", "--delta-series", "0.2,0.1", "--quad", "4,6"]),
        ("star_offinterface", &["star", "--offinterface", "--delta-series", "0.1,0.05"]),
        ("solve", &["solve"]),
    ];
    let mut mismatched = Vec::new();
    for (name, args) in cheap {
        let mut runs = Vec::new();
        for (k, threads) in ["1", "8", "8"].iter().enumerate() {
            let dir = out.join(format!("{name}-{k}"));
            let mut full = args.to_vec();
            full.extend(["--threads", threads]);
            let code = peridyn(&dir, &full);
            runs.push((code, csv_files(&dir)));
        }
        let same = runs.iter().all(|r| r.1 == runs[0].1 && !r.1.is_empty() && r.0 != 2);
        if !same {
            mismatched.push(*name);
        }
    }
    vec![part(
        "byte_identical_csv",
        mismatched.is_empty(),
        format!("{} studies × threads 1/8/8, mismatched {:?}", cheap.len(), mismatched),
    )]
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| -> PathBuf { tmp.path().join(name) };
    let criteria: Vec<(u32, Box<dyn Fn() -> Vec<Part>>)> = vec![
        (1, Box::new(criterion_1)),
        (2, Box::new(criterion_2)),
        (3, Box::new(criterion_3)),
        (4, Box::new(|| criterion_4(&dir("c4")))),
        (5, Box::new(|| criterion_5(&dir("c5")))),
        (6, Box::new(|| criterion_6(&dir("c6")))),
        (7, Box::new(|| criterion_7(&dir("c7")))),
        (8, Box::new(|| criterion_8(&dir("c8")))),
        (9, Box::new(|| criterion_9(&dir("c9")))),
        (10, Box::new(criterion_10)),
        (11, Box::new(|| criterion_11(&dir("c11")))),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = Vec::new();
    for (id, run) in &criteria {
        if !only.is_empty() && !only.contains(id) {
            continue;
        }
        let start = Instant::now();
        let parts = run();
        let passed = parts.iter().all(|p| p.passed);
        let details: Vec<String> = parts
            .iter()
            .map(|p| format!("{}{}: {}", if p.passed { "" } else { "[FAIL] " }, p.name, p.detail))
            .collect();
        println!(
            "{} criterion {id} ({:.1}s): {}",
            if passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            details.join("; ")
        );
        for p in parts.iter().filter(|p| !p.passed) {
            let key = format!("{id}:{}", p.name);
            if KNOWN_FAILURES.contains(&key.as_str()) {
                println!("  known failure {key}");
            } else {
                unexpected.push(key);
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
