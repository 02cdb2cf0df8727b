//! Point evaluation of the nonlocal operators: the auxiliary operator `L₀`,
//! the bond part `L_s`, the dilatational part `L_d`, their sum `L`, the
//! interface correction `L_Γ = L₁ + ¼L_d + L₂` and the corrected operator
//! `L* = L + 1_{Γ_δ} L_Γ`.
//!
//! Balls that meet the interface are integrated with rules sliced along it,
//! so piecewise-smooth integrands keep the accuracy of the smooth case.

use crate::fields::{common_interface, FieldError, Material, PiecewiseField, PlanarInterface, ScalarField, SideTag, ON_INTERFACE_TOL};
use crate::quadrature::{ball_volume, BallQuadrature, NodeSet, QuadratureError, UNIT_TOL};
use crate::tensor::{outer, Mat3, Tensor3, Vec3};
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("horizon must be positive and finite (got {0})")]
    InvalidHorizon(f64),
    #[error("weight exponent r = {0} gives a divergent moment (need r < 5)")]
    DivergentMoment(f64),
    #[error("point is outside the extended interface (distance {distance:e}, horizon {delta:e})")]
    OutsideExtendedInterface { distance: f64, delta: f64 },
    #[error("normal must have unit length (|n| = {0})")]
    NonUnitNormal(f64),
    #[error("operator value is not finite")]
    NonFinite,
}

/// The horizon δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Horizon(f64);

impl Horizon {
    pub fn new(delta: f64) -> Result<Self, OperatorError> {
        if delta > 0.0 && delta.is_finite() {
            Ok(Self(delta))
        } else {
            Err(OperatorError::InvalidHorizon(delta))
        }
    }

    pub fn delta(&self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Horizon {
    type Error = OperatorError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Horizon::new(v)
    }
}

impl From<Horizon> for f64 {
    fn from(h: Horizon) -> f64 {
        h.0
    }
}

/// Which expression of `L_d` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdForm {
    /// Single nested integral of `u(z)`, valid away from the domain boundary.
    #[default]
    Reduced,
    /// Both difference terms.
    Full,
}

#[derive(Debug, Clone)]
pub struct OperatorConfig {
    pub horizon: Horizon,
    pub rule: Arc<BallQuadrature>,
    pub ld_form: LdForm,
}

impl OperatorConfig {
    pub fn new(delta: f64) -> Result<Self, OperatorError> {
        Ok(Self {
            horizon: Horizon::new(delta)?,
            rule: Arc::new(BallQuadrature::default()),
            ld_form: LdForm::Reduced,
        })
    }

    pub fn with_rule(mut self, rule: Arc<BallQuadrature>) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_ld_form(mut self, form: LdForm) -> Self {
        self.ld_form = form;
        self
    }

    /// Same rule and form at another horizon.
    pub fn at_delta(&self, delta: f64) -> Result<Self, OperatorError> {
        Ok(Self {
            horizon: Horizon::new(delta)?,
            ..self.clone()
        })
    }

    pub fn delta(&self) -> f64 {
        self.horizon.delta()
    }
}

/// `m = ∫_{B_δ} |ξ|^{2−r} dξ = 4πδ^{5−r}/(5−r)`.
pub fn weight_m(delta: f64, r: f64) -> Result<f64, OperatorError> {
    Horizon::new(delta)?;
    if !(r < 5.0) {
        return Err(OperatorError::DivergentMoment(r));
    }
    Ok(4.0 * PI * delta.powf(5.0 - r) / (5.0 - r))
}

fn check_unit(n: &Vec3) -> Result<(), OperatorError> {
    let len = n.norm();
    if (len - 1.0).abs() <= UNIT_TOL {
        Ok(())
    } else {
        Err(OperatorError::NonUnitNormal(len))
    }
}

fn finite(v: Vec3) -> Result<Vec3, OperatorError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(OperatorError::NonFinite)
    }
}

/// Nodes for `B_δ(center)`, sliced by the planes `{s = σ}` that cross it.
fn ball_nodes<'a>(
    cfg: &'a OperatorConfig,
    iface: Option<&PlanarInterface>,
    center: &Vec3,
    levels: &[f64],
) -> Cow<'a, NodeSet> {
    let Some(iface) = iface else {
        return Cow::Borrowed(cfg.rule.nodes());
    };
    let delta = cfg.delta();
    let s = iface.signed_distance(center);
    let heights: Vec<f64> = levels
        .iter()
        .map(|sigma| (sigma - s) / delta)
        .filter(|t| t.abs() < 1.0)
        .collect();
    if heights.is_empty() {
        Cow::Borrowed(cfg.rule.nodes())
    } else {
        Cow::Owned(cfg.rule.sliced(&iface.normal(), &heights))
    }
}

/// `∫_{B_δ(x)} w(y) (y−x)⊗(y−x)/|y−x|⁴ (v(y) − v(x)) dy`.
fn bond_integral(
    cfg: &OperatorConfig,
    iface: Option<&PlanarInterface>,
    value: impl Fn(&Vec3) -> Vec3,
    x: &Vec3,
    weight: impl Fn(&Vec3) -> f64,
) -> Vec3 {
    let nodes = ball_nodes(cfg, iface, x, &[0.0]);
    let vx = value(x);
    nodes.sum(cfg.delta(), x, |y| {
        let z = y - *x;
        let r2 = z.norm_squared();
        z * (weight(&y) * z.dot(&(value(&y) - vx)) / (r2 * r2))
    })
}

/// `(30/|B_δ|) ∫ (z⊗z/|z|⁴)(v(x+z) − v(x)) dz`.
pub fn eval_l0_vec(cfg: &OperatorConfig, field: &PiecewiseField, x: &Vec3) -> Result<Vec3, OperatorError> {
    let v = bond_integral(cfg, field.interface(), |y| field.value(y), x, |_| 1.0);
    finite(v * (30.0 / ball_volume(cfg.delta())))
}

/// Scalar variant: `(30/|B_δ|) ∫ (z⊗z/|z|⁴)(f(x+z) − f(x)) dz`.
pub fn eval_l0_scalar(cfg: &OperatorConfig, f: &dyn ScalarField, x: &Vec3) -> Result<Mat3, OperatorError> {
    let fx = f.value(x);
    let m = cfg.rule.nodes().integrate(cfg.delta(), x, |y| {
        let z = y - *x;
        let r2 = z.norm_squared();
        outer(&z, &z) * ((f.value(&y) - fx) / (r2 * r2))
    })?;
    Ok(m * (30.0 / ball_volume(cfg.delta())))
}

/// `L_s v(x) = (15/|B_δ|) ∫ (μ(x)+μ(y)) (y−x)⊗(y−x)/|y−x|⁴ (v(y)−v(x)) dy`.
pub fn eval_ls(cfg: &OperatorConfig, material: &Material, field: &PiecewiseField, x: &Vec3) -> Result<Vec3, OperatorError> {
    let iface = common_interface(material, field);
    let mu_x = material.mu_at(x);
    let v = bond_integral(cfg, iface, |y| field.value(y), x, |y| mu_x + material.mu_at(y));
    finite(v * (15.0 / ball_volume(cfg.delta())))
}

/// `L₁ u(x) = −(15/|B_δ|) μ(x) ∫ (y−x)⊗(y−x)/|y−x|⁴ (u(y)−u(x)) dy`.
pub fn eval_l1(cfg: &OperatorConfig, material: &Material, field: &PiecewiseField, x: &Vec3) -> Result<Vec3, OperatorError> {
    let iface = common_interface(material, field);
    let mu_x = material.mu_at(x);
    let v = bond_integral(cfg, iface, |y| field.value(y), x, |_| mu_x);
    finite(v * (-15.0 / ball_volume(cfg.delta())))
}

/// Results of one pass over the nested double integrals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Nested {
    ld: Vec3,
    l2: Vec3,
}

/// Inner integrals `∫_{B_δ(y)} b(z−y)⊗u(z) dz` and `∫_{B_δ(y)} b(z−y) dz`
/// with `b(w) = w/|w|²`.
fn inner_moment(nodes: &NodeSet, delta: f64, field: &PiecewiseField, y: &Vec3) -> (Mat3, Vec3) {
    let mut m = Mat3::ZERO;
    let mut bsum = Vec3::ZERO;
    for (zu, w) in nodes.iter() {
        let wz = *zu * delta;
        let b = wz * (*w / wz.norm_squared());
        let u = field.value(&(*y + wz));
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] += b.0[i] * u.0[j];
            }
        }
        bsum += b;
    }
    let d3 = delta * delta * delta;
    (m * d3, bsum * d3)
}

/// One pass over `B_δ(x) × B_δ(y)` producing `L_d` (in the configured form)
/// and, if `normal` is given, `L₂`.
fn nested(
    cfg: &OperatorConfig,
    material: &Material,
    field: &PiecewiseField,
    x: &Vec3,
    normal: Option<&Vec3>,
) -> Nested {
    let delta = cfg.delta();
    let iface = common_interface(material, field).copied();
    let outer_nodes = ball_nodes(cfg, iface.as_ref(), x, &[-delta, 0.0, delta]);
    let plain = cfg.rule.nodes();
    let (lambda_x, mu_x) = material.lame_at(x);
    let c_x = lambda_x - mu_x;
    let u_x = field.value(x);
    let full = cfg.ld_form == LdForm::Full;

    let mut cache: Option<(f64, NodeSet)> = None;
    let mut ld = Vec3::ZERO;
    let mut l2 = 0.0;
    // pieces of the first term of the full form
    let mut s_vec = Vec3::ZERO;
    let mut t_scalar = 0.0;

    for (zu, w) in outer_nodes.iter() {
        let h = *zu * delta;
        let y = *x + h;
        let a = h * (1.0 / h.norm_squared());
        let (lambda_y, mu_y) = material.lame_at(&y);
        let c_y = lambda_y - mu_y;
        if full {
            s_vec += a * *w;
            t_scalar += *w * a.dot(&(field.value(&y) - u_x));
        }
        if c_y == 0.0 && normal.is_none() {
            continue;
        }
        let s_y = iface.as_ref().map(|i| i.signed_distance(&y));
        let inner_nodes: &NodeSet = match (iface.as_ref(), s_y) {
            (Some(i), Some(s)) if s.abs() < delta => {
                let t = -s / delta;
                let hit = matches!(&cache, Some((tc, _)) if (tc - t).abs() <= 1e-13);
                if !hit {
                    cache = Some((t, cfg.rule.sliced(&i.normal(), &[t])));
                }
                &cache.as_ref().expect("cache filled above").1
            }
            _ => plain,
        };
        let (m, bsum) = inner_moment(inner_nodes, delta, field, &y);
        if c_y != 0.0 {
            let g = if full {
                m.trace() - bsum.dot(&field.value(&y))
            } else {
                m.trace()
            };
            ld += a * (*w * c_y * g);
        }
        if let Some(n) = normal {
            l2 += *w * mu_y * a.dot(&m.mul_vec(n));
        }
    }
    let d3 = delta * delta * delta;
    let vol = ball_volume(delta);
    let k = 9.0 / (vol * vol);
    let mut ld = ld * (d3 * k);
    if full {
        ld += s_vec * (c_x * k * d3 * d3 * t_scalar);
    }
    let l2 = match normal {
        Some(n) => *n * (1.25 * k * d3 * l2),
        None => Vec3::ZERO,
    };
    Nested { ld, l2 }
}

/// `L_d v(x)`, reduced: `(9/|B_δ|²) ∫_{B_δ(x)} ∫_{B_δ(y)} (λ−μ)(y) a(y)⊗b(z−y) v(z) dz dy`
/// with `a(y) = (y−x)/|y−x|²`, `b(w) = w/|w|²`.
pub fn eval_ld(cfg: &OperatorConfig, material: &Material, field: &PiecewiseField, x: &Vec3) -> Result<Vec3, OperatorError> {
    finite(nested(cfg, material, field, x, None).ld)
}

/// `L v = L_s v + L_d v`.
pub fn eval_l(cfg: &OperatorConfig, material: &Material, field: &PiecewiseField, x: &Vec3) -> Result<Vec3, OperatorError> {
    Ok(eval_ls(cfg, material, field, x)? + eval_ld(cfg, material, field, x)?)
}

/// `L₂ u(x) = (5/4)(9/|B_δ|²) [∫∫ μ(y) a(y)·b(z−y) (u(z)·n) dz dy] n`.
pub fn eval_l2(
    cfg: &OperatorConfig,
    material: &Material,
    field: &PiecewiseField,
    x: &Vec3,
    n: &Vec3,
) -> Result<Vec3, OperatorError> {
    check_unit(n)?;
    finite(nested(cfg, material, field, x, Some(n)).l2)
}

/// All constituents of `L*` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorParts {
    pub ls: Vec3,
    pub ld: Vec3,
    pub l1: Vec3,
    pub l2: Vec3,
    /// Whether `x` lies in the extended interface `Γ_δ`.
    pub in_band: bool,
}

impl OperatorParts {
    pub fn l(&self) -> Vec3 {
        self.ls + self.ld
    }

    pub fn l_gamma(&self) -> Vec3 {
        self.l1 + self.ld * 0.25 + self.l2
    }

    pub fn l_star(&self) -> Vec3 {
        if self.in_band {
            self.l() + self.l_gamma()
        } else {
            self.l()
        }
    }
}

/// Evaluates every part in one pass; `L₁`, `L₂` are computed only inside `Γ_δ`.
pub fn eval_parts(
    cfg: &OperatorConfig,
    material: &Material,
    field: &PiecewiseField,
    x: &Vec3,
) -> Result<OperatorParts, OperatorError> {
    let iface = common_interface(material, field).copied();
    let in_band = iface.is_some_and(|i| i.signed_distance(x).abs() < cfg.delta());
    let ls = eval_ls(cfg, material, field, x)?;
    if !in_band {
        let ld = eval_ld(cfg, material, field, x)?;
        return Ok(OperatorParts {
            ls,
            ld,
            l1: Vec3::ZERO,
            l2: Vec3::ZERO,
            in_band,
        });
    }
    let n = iface.expect("band implies interface").normal();
    let nest = nested(cfg, material, field, x, Some(&n));
    Ok(OperatorParts {
        ls,
        ld: finite(nest.ld)?,
        l1: eval_l1(cfg, material, field, x)?,
        l2: finite(nest.l2)?,
        in_band,
    })
}

/// `L_Γ u = L₁ u + ¼ L_d u + L₂ u` with `n` the interface normal; defined on `Γ_δ`.
pub fn eval_l_gamma(cfg: &OperatorConfig, material: &Material, field: &PiecewiseField, x: &Vec3) -> Result<Vec3, OperatorError> {
    let iface = common_interface(material, field).ok_or(FieldError::NoInterface)?;
    let s = iface.signed_distance(x);
    if s.abs() >= cfg.delta() {
        return Err(OperatorError::OutsideExtendedInterface {
            distance: s,
            delta: cfg.delta(),
        });
    }
    Ok(eval_parts(cfg, material, field, x)?.l_gamma())
}

/// `L* u = L u + 1_{Γ_δ} L_Γ u`.
pub fn eval_l_star(cfg: &OperatorConfig, material: &Material, field: &PiecewiseField, x: &Vec3) -> Result<Vec3, OperatorError> {
    Ok(eval_parts(cfg, material, field, x)?.l_star())
}

/// Local limit of `δ L u(x)` at `x ∈ Γ`:
/// `(45/32)(⟦(μ₊+μ)(∇u+∇uᵀ)⟧n + ⟦(μ₊+μ)∇·u⟧n − ⟦(μ₊+μ)∇u⟧n·n n + (4/5)⟦(λ−μ)∇·u⟧n)`.
pub fn natural_limit_formula(material: &Material, field: &PiecewiseField, x: &Vec3) -> Result<Vec3, OperatorError> {
    let iface = common_interface(material, field).ok_or(FieldError::NoInterface)?;
    let s = iface.signed_distance(x);
    if s.abs() > ON_INTERFACE_TOL {
        return Err(FieldError::NotOnInterface(s).into());
    }
    let n = iface.normal();
    let (_, mu_p) = material.lame_on(SideTag::Plus, x);
    let side_term = |side: SideTag| {
        let g = field.grad_on(side, x);
        let (lambda, mu) = material.lame_on(side, x);
        let w = mu_p + mu;
        let gn = g.mul_vec(&n);
        let sym = (g + g.transpose()).mul_vec(&n) * w;
        let div = g.trace();
        sym + n * (w * div) - n * (w * gn.dot(&n)) + n * (0.8 * (lambda - mu) * div)
    };
    Ok((side_term(SideTag::Plus) - side_term(SideTag::Minus)) * (45.0 / 32.0))
}

/// Spherical angles `(φ, θ)` of a unit vector, φ = 0 on the polar axis.
fn angles(n: &Vec3) -> (f64, f64) {
    let theta = n.0[2].clamp(-1.0, 1.0).acos();
    let rho = n.0[0].hypot(n.0[1]);
    let phi = if rho > 1e-15 { n.0[1].atan2(n.0[0]) } else { 0.0 };
    (phi, theta)
}

/// The limit tensor `K = lim δ K_δ` for normal `n`, entry by entry in terms of
/// the spherical angles of `n`.
pub fn k_closed_form(n: &Vec3) -> Result<Tensor3, OperatorError> {
    check_unit(n)?;
    let (phi, theta) = angles(n);
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let c = 3.0 / 32.0;
    let k111 = c * cp * st * (3.0 - cp * cp * st * st);
    let k112 = c * sp * st * (1.0 - cp * cp * st * st);
    let k113 = c * ct * (1.0 - cp * cp * st * st);
    let k122 = c * cp * st * (1.0 - sp * sp * st * st);
    let k123 = -c * sp * cp * st * st * ct;
    let k133 = c * cp * st * st * st;
    let k223 = c * ct * (1.0 - sp * sp * st * st);
    let k233 = c * sp * st * st * st;
    let k222 = c * sp * st * (3.0 - sp * sp * st * st);
    let k333 = c * ct * (3.0 - ct * ct);

    // fully symmetric: index by the sorted multi-index
    let pick = |i: usize, j: usize, k: usize| {
        let mut idx = [i, j, k];
        idx.sort_unstable();
        match idx {
            [0, 0, 0] => k111,
            [0, 0, 1] => k112,
            [0, 0, 2] => k113,
            [0, 1, 1] => k122,
            [0, 1, 2] => k123,
            [0, 2, 2] => k133,
            [1, 1, 1] => k222,
            [1, 1, 2] => k223,
            [1, 2, 2] => k233,
            [2, 2, 2] => k333,
            _ => unreachable!(),
        }
    };
    let mut t = Tensor3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                t.0[i][j][k] = pick(i, j, k);
            }
        }
    }
    Ok(t)
}

/// `K A = (3/32)((A + Aᵀ)n + (tr A − An·n) n)`.
pub fn k_apply(a: &Mat3, n: &Vec3) -> Result<Vec3, OperatorError> {
    check_unit(n)?;
    let sym = (*a + a.transpose()).mul_vec(n);
    let scalar = a.trace() - a.mul_vec(n).dot(n);
    Ok((sym + *n * scalar) * (3.0 / 32.0))
}
