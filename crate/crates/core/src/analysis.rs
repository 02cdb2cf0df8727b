//! δ-series studies: convergence to the Navier operator, blow-up at the
//! interface, interface limits of `δL` and `δL*`, and the report format they
//! share.

use crate::fields::{common_interface, navier, traction_jump, FieldError, Material, PiecewiseField, PlanarInterface};
use crate::operators::{eval_l, eval_parts, natural_limit_formula, OperatorConfig, OperatorError};
use crate::tensor::Vec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::io::{Read, Write};
use thiserror::Error;

/// Errors below this are treated as exact in rate fits.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid δ-series: {0}")]
    InvalidSeries(String),
    #[error("need at least 3 positive (δ, error) pairs for a rate fit, got {0}")]
    TooFewPairs(usize),
    #[error("sample point {id} is {distance:e} from the interface, closer than 2δ = {limit:e}")]
    NearInterface { id: usize, distance: f64, limit: f64 },
    #[error("no sample points")]
    NoPoints,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed report: {0}")]
    Malformed(String),
}

/// Strictly decreasing positive horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DeltaSeries(Vec<f64>);

impl DeltaSeries {
    pub fn new(deltas: Vec<f64>) -> Result<Self, AnalysisError> {
        if deltas.is_empty() {
            return Err(AnalysisError::InvalidSeries("empty".into()));
        }
        if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(AnalysisError::InvalidSeries("values must be positive and finite".into()));
        }
        if deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(AnalysisError::InvalidSeries("values must be strictly decreasing".into()));
        }
        Ok(Self(deltas))
    }

    /// `{0.1, 0.05, 0.025, 0.0125, 0.00625}`.
    pub fn default_series() -> Self {
        Self::geometric(0.1, 5)
    }

    /// `{first, first/2, …}` with `count` terms.
    pub fn geometric(first: f64, count: usize) -> Self {
        Self((0..count).map(|k| first / f64::powi(2.0, k as i32)).collect())
    }

    /// Five halvings ending at `min`: `{16·min, 8·min, 4·min, 2·min, min}`.
    pub fn ending_at(min: f64) -> Result<Self, AnalysisError> {
        Self::new((0..5).rev().map(|k| min * f64::powi(2.0, k)).collect())
    }

    pub fn deltas(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0[0]
    }

    pub fn min(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

impl TryFrom<Vec<f64>> for DeltaSeries {
    type Error = AnalysisError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<DeltaSeries> for Vec<f64> {
    fn from(s: DeltaSeries) -> Vec<f64> {
        s.0
    }
}

/// One evaluation: the computed vector at a sample point and its error
/// against the study's reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub delta: f64,
    pub point_id: usize,
    pub value: Vec3,
    pub err_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceReport {
    pub study: String,
    pub params: Map<String, Value>,
    pub deltas: Vec<f64>,
    pub records: Vec<Record>,
    /// `None` when the series is exact to tolerance.
    pub slope: Option<f64>,
    pub limit_estimate: Option<Vec3>,
}

pub const CSV_HEADER: [&str; 6] = ["delta", "point_id", "vx", "vy", "vz", "err_p"];

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

impl ConvergenceReport {
    /// Norm exponent `p` stored in `params`, default 2.
    pub fn p(&self) -> f64 {
        self.params.get("p").and_then(Value::as_f64).unwrap_or(2.0)
    }

    /// Records at `deltas[i]`, in point order.
    pub fn records_at(&self, i: usize) -> impl Iterator<Item = &Record> {
        let d = self.deltas[i];
        self.records.iter().filter(move |r| r.delta == d)
    }

    /// Discrete L^p norm of `err_p` per δ over the points flagged as counted.
    pub fn norms(&self) -> Vec<f64> {
        let p = self.p();
        let excluded = self.excluded();
        (0..self.deltas.len())
            .map(|i| {
                let errs: Vec<f64> = self
                    .records_at(i)
                    .filter(|r| !excluded.contains(&(self.deltas[i].to_bits(), r.point_id)))
                    .map(|r| r.err_p)
                    .collect();
                discrete_norm(&errs, p)
            })
            .collect()
    }

    /// `(δ bits, point)` pairs listed under `params.excluded`.
    fn excluded(&self) -> Vec<(u64, usize)> {
        let Some(Value::Array(items)) = self.params.get("excluded") else {
            return Vec::new();
        };
        items
            .iter()
            .filter_map(|v| {
                let pair = v.as_array()?;
                Some((pair.first()?.as_f64()?.to_bits(), pair.get(1)?.as_u64()? as usize))
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), AnalysisError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for r in &self.records {
            out.write_record([
                sci(r.delta),
                r.point_id.to_string(),
                sci(r.value.0[0]),
                sci(r.value.0[1]),
                sci(r.value.0[2]),
                sci(r.err_p),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, AnalysisError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| AnalysisError::Malformed(e.to_string()))
    }

    /// Parses records written by [`ConvergenceReport::write_csv`].
    pub fn read_csv_records<R: Read>(r: R) -> Result<Vec<Record>, AnalysisError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(AnalysisError::Malformed(format!("unexpected header {header:?}")));
        }
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let f = |i: usize| -> Result<f64, AnalysisError> {
                row[i].parse().map_err(|_| AnalysisError::Malformed(format!("bad number `{}`", &row[i])))
            };
            records.push(Record {
                delta: f(0)?,
                point_id: row[1].parse().map_err(|_| AnalysisError::Malformed(format!("bad id `{}`", &row[1])))?,
                value: Vec3::new(f(2)?, f(3)?, f(4)?),
                err_p: f(5)?,
            });
        }
        Ok(records)
    }

    pub fn to_json_string(&self) -> Result<String, AnalysisError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self, AnalysisError> {
        let report: Self = serde_json::from_str(s)?;
        if report.records.iter().any(|r| !report.deltas.contains(&r.delta)) {
            return Err(AnalysisError::Malformed("record δ not in deltas".into()));
        }
        Ok(report)
    }
}

/// `(Σ|e|^p / N)^{1/p}`; the maximum for `p = ∞`.
pub fn discrete_norm(errs: &[f64], p: f64) -> f64 {
    if errs.is_empty() {
        return 0.0;
    }
    if p.is_infinite() {
        return errs.iter().fold(0.0, |m, e| m.max(e.abs()));
    }
    let s: f64 = errs.iter().map(|e| e.abs().powf(p)).sum();
    (s / errs.len() as f64).powf(1.0 / p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateFit {
    Slope(f64),
    /// Every error is below [`EXACT_TOL`].
    Exact,
}

impl RateFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            RateFit::Slope(s) => Some(*s),
            RateFit::Exact => None,
        }
    }
}

/// Least-squares slope of `log e` against `log δ` over the positive errors.
pub fn fit_rate(deltas: &[f64], errors: &[f64]) -> Result<RateFit, AnalysisError> {
    if !errors.is_empty() && errors.iter().all(|e| e.abs() < EXACT_TOL) {
        return Ok(RateFit::Exact);
    }
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .zip(errors)
        .filter(|(d, e)| **d > 0.0 && **e > 0.0 && e.is_finite())
        .map(|(d, e)| (d.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(AnalysisError::TooFewPairs(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(RateFit::Slope(sxy / sxx))
}

/// First-order extrapolation to δ = 0 from `(δ₁, v₁)`, `(δ₂, v₂)`.
pub fn richardson(d1: f64, v1: Vec3, d2: f64, v2: Vec3) -> Vec3 {
    (v2 * d1 - v1 * d2) * (1.0 / (d1 - d2))
}

/// `n³` cell-centred points of the box `[lo, hi]³`, dropping points closer
/// than `exclusion` to `interface`.
pub fn sample_grid(n: usize, lo: f64, hi: f64, interface: Option<&PlanarInterface>, exclusion: f64) -> Vec<Vec3> {
    let h = (hi - lo) / n as f64;
    let mut pts = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let p = Vec3::new(
                    lo + h * (i as f64 + 0.5),
                    lo + h * (j as f64 + 0.5),
                    lo + h * (k as f64 + 0.5),
                );
                if interface.is_none_or(|g| g.signed_distance(&p).abs() >= exclusion) {
                    pts.push(p);
                }
            }
        }
    }
    pts
}

fn base_params(study: &str, series: &DeltaSeries, extra: Value) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("study".into(), json!(study));
    m.insert("deltas".into(), json!(series.deltas()));
    if let Value::Object(e) = extra {
        m.extend(e);
    }
    m
}

fn on_interface(material: &Material, field: &PiecewiseField, x: &Vec3) -> Result<(), AnalysisError> {
    let iface = common_interface(material, field).ok_or(FieldError::NoInterface)?;
    let s = iface.signed_distance(x);
    if s.abs() > crate::fields::ON_INTERFACE_TOL {
        return Err(FieldError::NotOnInterface(s).into());
    }
    Ok(())
}

/// Evaluates `f(cfg_δ, point)` for every (δ, point) pair in a fixed order.
fn sweep<T: Send>(
    cfg: &OperatorConfig,
    series: &DeltaSeries,
    points: &[Vec3],
    f: impl Fn(&OperatorConfig, usize, &Vec3) -> Result<T, AnalysisError> + Sync,
) -> Result<Vec<(f64, usize, T)>, AnalysisError> {
    let cfgs: Vec<OperatorConfig> = series
        .deltas()
        .iter()
        .map(|d| cfg.at_delta(*d))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfgs.len())
        .flat_map(|i| (0..points.len()).map(move |j| (i, j)))
        .collect();
    jobs.par_iter()
        .map(|&(i, j)| Ok((series.deltas()[i], j, f(&cfgs[i], j, &points[j])?)))
        .collect()
}

/// Discrete L^p error between `L` and the Navier operator over `points`.
pub fn converge_to_navier(
    cfg: &OperatorConfig,
    series: &DeltaSeries,
    material: &Material,
    field: &PiecewiseField,
    points: &[Vec3],
    p: f64,
) -> Result<ConvergenceReport, AnalysisError> {
    if points.is_empty() {
        return Err(AnalysisError::NoPoints);
    }
    if let Some(iface) = material.interface() {
        let limit = 2.0 * series.max();
        for (id, x) in points.iter().enumerate() {
            let distance = iface.signed_distance(x).abs();
            if distance < limit {
                return Err(AnalysisError::NearInterface { id, distance, limit });
            }
        }
    }
    let rows = sweep(cfg, series, points, |c, _, x| {
        let side = field.side_of(x);
        let v = eval_l(c, material, field, x)?;
        Ok((v, (v - navier(material, field, x, side)).norm()))
    })?;
    let mut report = ConvergenceReport {
        study: "converge".into(),
        params: base_params("converge", series, json!({ "p": p, "points": points })),
        deltas: series.deltas().to_vec(),
        records: rows
            .into_iter()
            .map(|(delta, point_id, (value, err_p))| Record { delta, point_id, value, err_p })
            .collect(),
        slope: None,
        limit_estimate: None,
    };
    finish_fit(&mut report)?;
    Ok(report)
}

fn finish_fit(report: &mut ConvergenceReport) -> Result<(), AnalysisError> {
    let fit = fit_rate(&report.deltas, &report.norms())?;
    report.slope = fit.slope();
    report.params.insert("exact".into(), json!(fit == RateFit::Exact));
    Ok(())
}

/// `‖L u(x)‖` per δ at a point of Γ, with the log–log slope.
pub fn interface_blowup(
    cfg: &OperatorConfig,
    series: &DeltaSeries,
    material: &Material,
    field: &PiecewiseField,
    x: &Vec3,
) -> Result<ConvergenceReport, AnalysisError> {
    on_interface(material, field, x)?;
    let rows = sweep(cfg, series, std::slice::from_ref(x), |c, _, x| Ok(eval_l(c, material, field, x)?))?;
    let mut report = ConvergenceReport {
        study: "blowup".into(),
        params: base_params("blowup", series, json!({ "p": 2.0, "point": x })),
        deltas: series.deltas().to_vec(),
        records: rows
            .into_iter()
            .map(|(delta, point_id, value)| Record { delta, point_id, value, err_p: value.norm() })
            .collect(),
        slope: None,
        limit_estimate: None,
    };
    finish_fit(&mut report)?;
    Ok(report)
}

/// Shared driver for `δ·(operator)(x) → target` studies.
fn limit_study(
    study: &str,
    series: &DeltaSeries,
    x: &Vec3,
    target: Vec3,
    rows: Vec<(f64, usize, Vec3)>,
) -> Result<ConvergenceReport, AnalysisError> {
    let records: Vec<Record> = rows
        .into_iter()
        .map(|(delta, point_id, v)| {
            let value = v * delta;
            Record { delta, point_id, value, err_p: (value - target).norm() }
        })
        .collect();
    let limit_estimate = match records.len() {
        0 => None,
        1 => Some(records[0].value),
        n => {
            let (a, b) = (&records[n - 2], &records[n - 1]);
            Some(richardson(a.delta, a.value, b.delta, b.value))
        }
    };
    let mut report = ConvergenceReport {
        study: study.into(),
        params: base_params(study, series, json!({ "p": 2.0, "point": x, "target": target })),
        deltas: series.deltas().to_vec(),
        records,
        slope: None,
        limit_estimate,
    };
    // the raw series is kept even when a rate cannot be fitted
    match fit_rate(&report.deltas, &report.norms()) {
        Ok(fit) => {
            report.slope = fit.slope();
            report.params.insert("exact".into(), json!(fit == RateFit::Exact));
        }
        Err(AnalysisError::TooFewPairs(_)) => {
            report.params.insert("exact".into(), json!(false));
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}

/// `δ L u(x)` at `x ∈ Γ` against the natural-condition limit.
pub fn natural_limit_check(
    cfg: &OperatorConfig,
    series: &DeltaSeries,
    material: &Material,
    field: &PiecewiseField,
    x: &Vec3,
) -> Result<ConvergenceReport, AnalysisError> {
    on_interface(material, field, x)?;
    let target = natural_limit_formula(material, field, x)?;
    let rows = sweep(cfg, series, std::slice::from_ref(x), |c, _, x| Ok(eval_l(c, material, field, x)?))?;
    limit_study("natural", series, x, target, rows)
}

/// `δ L* u(x)` at `x ∈ Γ` against `(45/32)⟦σ⟧n`.
pub fn star_limit_check(
    cfg: &OperatorConfig,
    series: &DeltaSeries,
    material: &Material,
    field: &PiecewiseField,
    x: &Vec3,
) -> Result<ConvergenceReport, AnalysisError> {
    on_interface(material, field, x)?;
    let target = traction_jump(material, field, x)? * (45.0 / 32.0);
    let rows = sweep(cfg, series, std::slice::from_ref(x), |c, _, x| {
        Ok(eval_parts(c, material, field, x)?.l_star())
    })?;
    limit_study("star", series, x, target, rows)
}

/// `L*` against the per-side Navier operator away from Γ.
///
/// Points inside `Γ_δ` are recorded with `err_p = ‖L* u‖` (a boundedness
/// record) and listed under `params.excluded`; the norms cover the others,
/// where `L* = L`. `params.star_equals_l` reports whether that identity held
/// bit for bit at every counted point.
pub fn star_converges_offinterface(
    cfg: &OperatorConfig,
    series: &DeltaSeries,
    material: &Material,
    field: &PiecewiseField,
    points: &[Vec3],
    p: f64,
) -> Result<ConvergenceReport, AnalysisError> {
    if points.is_empty() {
        return Err(AnalysisError::NoPoints);
    }
    let rows = sweep(cfg, series, points, |c, _, x| {
        let parts = eval_parts(c, material, field, x)?;
        let star = parts.l_star();
        if parts.in_band {
            return Ok((star, star.norm(), true, true));
        }
        let l = eval_l(c, material, field, x)?;
        let side = field.side_of(x);
        Ok((star, (star - navier(material, field, x, side)).norm(), false, star == l))
    })?;
    let excluded: Vec<Value> = rows
        .iter()
        .filter(|r| r.2 .2)
        .map(|r| json!([r.0, r.1]))
        .collect();
    let star_equals_l = rows.iter().all(|r| r.2 .3);
    let mut report = ConvergenceReport {
        study: "star_offinterface".into(),
        params: base_params(
            "star_offinterface",
            series,
            json!({ "p": p, "points": points, "excluded": excluded, "star_equals_l": star_equals_l }),
        ),
        deltas: series.deltas().to_vec(),
        records: rows
            .into_iter()
            .map(|(delta, point_id, (value, err_p, _, _))| Record { delta, point_id, value, err_p })
            .collect(),
        slope: None,
        limit_estimate: None,
    };
    match fit_rate(&report.deltas, &report.norms()) {
        Ok(fit) => {
            report.slope = fit.slope();
            report.params.insert("exact".into(), json!(fit == RateFit::Exact));
        }
        Err(AnalysisError::TooFewPairs(_)) => {
            report.params.insert("exact".into(), json!(false));
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}
