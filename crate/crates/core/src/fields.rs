//! Analytic two-phase materials, piecewise-smooth displacement fields and the
//! local elasticity quantities (stress, traction jump, Navier operator) built
//! from their one-sided derivatives.

use crate::tensor::{Mat3, Tensor3, Vec3};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

/// Points farther than this from Γ are rejected by interface-only quantities.
pub const ON_INTERFACE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("unknown manufactured solution `{0}`")]
    UnknownManufactured(String),
    #[error("point is not on the interface (signed distance {0:e})")]
    NotOnInterface(f64),
    #[error("no interface is defined for this field/material pair")]
    NoInterface,
    #[error("interface normal must be nonzero and finite")]
    DegenerateNormal,
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SideTag {
    Plus,
    Minus,
}

/// A plane Γ through `point` with unit `normal` pointing from the − side into
/// the + side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarInterface {
    point: Vec3,
    normal: Vec3,
}

impl PlanarInterface {
    /// Normalizes `normal`; fails on a zero or non-finite normal.
    pub fn new(point: Vec3, normal: Vec3) -> Result<Self, FieldError> {
        let len = normal.norm();
        if !(len.is_finite() && len > 0.0) || !point.is_finite() {
            return Err(FieldError::DegenerateNormal);
        }
        Ok(Self {
            point,
            normal: normal * (1.0 / len),
        })
    }

    /// The plane x₃ = 0 with normal ẑ.
    pub fn horizontal() -> Self {
        Self {
            point: Vec3::ZERO,
            normal: Vec3::basis(2),
        }
    }

    pub fn point(&self) -> Vec3 {
        self.point
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        (*x - self.point).dot(&self.normal)
    }

    /// Side containing `x`; points on Γ belong to the + side.
    pub fn side_of(&self, x: &Vec3) -> SideTag {
        if self.signed_distance(x) >= 0.0 {
            SideTag::Plus
        } else {
            SideTag::Minus
        }
    }

    /// Orthogonal projection of `x` onto Γ.
    pub fn project(&self, x: &Vec3) -> Vec3 {
        *x - self.normal * self.signed_distance(x)
    }
}

/// Scalar field with closed-form first and second derivatives.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: &Vec3) -> f64;
    fn grad(&self, x: &Vec3) -> Vec3;
    fn hessian(&self, x: &Vec3) -> Mat3;
}

/// Vector field with closed-form derivatives.
///
/// `grad(x)[(i, j)] = ∂v_i/∂x_j`, `hessian(x)[(i, j, k)] = ∂²v_i/∂x_j∂x_k`.
pub trait VectorField: Send + Sync {
    fn value(&self, x: &Vec3) -> Vec3;
    fn grad(&self, x: &Vec3) -> Mat3;
    fn hessian(&self, x: &Vec3) -> Tensor3;
}

/// `base + amp · sin(wave·x + phase)`; `amp = 0` gives a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigScalar {
    pub base: f64,
    pub amp: f64,
    pub wave: Vec3,
    pub phase: f64,
}

impl TrigScalar {
    pub fn constant(c: f64) -> Self {
        Self {
            base: c,
            amp: 0.0,
            wave: Vec3::ZERO,
            phase: 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.amp == 0.0
    }
}

impl ScalarField for TrigScalar {
    fn value(&self, x: &Vec3) -> f64 {
        if self.amp == 0.0 {
            return self.base;
        }
        self.base + self.amp * (self.wave.dot(x) + self.phase).sin()
    }

    fn grad(&self, x: &Vec3) -> Vec3 {
        if self.amp == 0.0 {
            return Vec3::ZERO;
        }
        self.wave * (self.amp * (self.wave.dot(x) + self.phase).cos())
    }

    fn hessian(&self, x: &Vec3) -> Mat3 {
        if self.amp == 0.0 {
            return Mat3::ZERO;
        }
        let s = -self.amp * (self.wave.dot(x) + self.phase).sin();
        crate::tensor::outer(&self.wave, &self.wave) * s
    }
}

/// Scalar quadratic `c + g·x + ½ xᵀ H x`, used for scalar-operator checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticScalar {
    pub constant: f64,
    pub linear: Vec3,
    pub hessian: Mat3,
}

impl ScalarField for QuadraticScalar {
    fn value(&self, x: &Vec3) -> f64 {
        self.constant + self.linear.dot(x) + 0.5 * x.dot(&self.hessian.mul_vec(x))
    }

    fn grad(&self, x: &Vec3) -> Vec3 {
        let hs = (self.hessian + self.hessian.transpose()) * 0.5;
        self.linear + hs.mul_vec(x)
    }

    fn hessian(&self, _x: &Vec3) -> Mat3 {
        (self.hessian + self.hessian.transpose()) * 0.5
    }
}

/// `v_i = a_i + M_ij x_j + ½ Q_ijk x_j x_k` with `Q` symmetric in its last
/// two indices (symmetrized on construction). Covers constant and affine
/// fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticField {
    offset: Vec3,
    linear: Mat3,
    quad: Tensor3,
}

impl QuadraticField {
    pub fn new(offset: Vec3, linear: Mat3, quad: Tensor3) -> Self {
        let mut q = Tensor3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    q.0[i][j][k] = 0.5 * (quad.0[i][j][k] + quad.0[i][k][j]);
                }
            }
        }
        Self {
            offset,
            linear,
            quad: q,
        }
    }

    pub fn constant(c: Vec3) -> Self {
        Self::new(c, Mat3::ZERO, Tensor3::ZERO)
    }

    pub fn affine(offset: Vec3, linear: Mat3) -> Self {
        Self::new(offset, linear, Tensor3::ZERO)
    }
}

impl VectorField for QuadraticField {
    fn value(&self, x: &Vec3) -> Vec3 {
        let mut v = self.offset + self.linear.mul_vec(x);
        for i in 0..3 {
            let qi = Mat3(self.quad.0[i]);
            v.0[i] += 0.5 * x.dot(&qi.mul_vec(x));
        }
        v
    }

    fn grad(&self, x: &Vec3) -> Mat3 {
        let mut g = self.linear;
        for i in 0..3 {
            let qi = Mat3(self.quad.0[i]);
            let row = qi.mul_vec(x);
            for j in 0..3 {
                g.0[i][j] += row.0[j];
            }
        }
        g
    }

    fn hessian(&self, _x: &Vec3) -> Tensor3 {
        self.quad
    }
}

/// `v_i = amp_i · sin(wave_i·x + phase_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigField {
    pub amp: Vec3,
    pub wave: [Vec3; 3],
    pub phase: Vec3,
}

impl TrigField {
    /// `(sin x₂, sin x₃, sin x₁)`.
    pub fn cyclic() -> Self {
        Self {
            amp: Vec3::new(1.0, 1.0, 1.0),
            wave: [Vec3::basis(1), Vec3::basis(2), Vec3::basis(0)],
            phase: Vec3::ZERO,
        }
    }
}

impl VectorField for TrigField {
    fn value(&self, x: &Vec3) -> Vec3 {
        let mut v = Vec3::ZERO;
        for i in 0..3 {
            v.0[i] = self.amp.0[i] * (self.wave[i].dot(x) + self.phase.0[i]).sin();
        }
        v
    }

    fn grad(&self, x: &Vec3) -> Mat3 {
        let mut g = Mat3::ZERO;
        for i in 0..3 {
            let c = self.amp.0[i] * (self.wave[i].dot(x) + self.phase.0[i]).cos();
            for j in 0..3 {
                g.0[i][j] = c * self.wave[i].0[j];
            }
        }
        g
    }

    fn hessian(&self, x: &Vec3) -> Tensor3 {
        let mut h = Tensor3::ZERO;
        for i in 0..3 {
            let s = -self.amp.0[i] * (self.wave[i].dot(x) + self.phase.0[i]).sin();
            let k = &self.wave[i];
            for j in 0..3 {
                for l in 0..3 {
                    h.0[i][j][l] = s * k.0[j] * k.0[l];
                }
            }
        }
        h
    }
}

/// `Σ_k c_k v_k`.
#[derive(Clone, Default)]
pub struct LinearCombination {
    terms: Vec<(f64, Arc<dyn VectorField>)>,
}

impl LinearCombination {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, coeff: f64, field: Arc<dyn VectorField>) -> Self {
        self.terms.push((coeff, field));
        self
    }
}

impl VectorField for LinearCombination {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.terms
            .iter()
            .fold(Vec3::ZERO, |acc, (c, f)| acc + f.value(x) * *c)
    }

    fn grad(&self, x: &Vec3) -> Mat3 {
        self.terms
            .iter()
            .fold(Mat3::ZERO, |acc, (c, f)| acc + f.grad(x) * *c)
    }

    fn hessian(&self, x: &Vec3) -> Tensor3 {
        self.terms
            .iter()
            .fold(Tensor3::ZERO, |acc, (c, f)| acc + f.hessian(x) * *c)
    }
}

/// A displacement field that is smooth on each side of an optional planar
/// interface. Without an interface only `plus` is used.
#[derive(Clone)]
pub struct PiecewiseField {
    plus: Arc<dyn VectorField>,
    minus: Arc<dyn VectorField>,
    interface: Option<PlanarInterface>,
}

impl fmt::Debug for PiecewiseField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PiecewiseField")
            .field("interface", &self.interface)
            .finish_non_exhaustive()
    }
}

impl PiecewiseField {
    pub fn smooth(field: Arc<dyn VectorField>) -> Self {
        Self {
            plus: field.clone(),
            minus: field,
            interface: None,
        }
    }

    pub fn two_sided(
        plus: Arc<dyn VectorField>,
        minus: Arc<dyn VectorField>,
        interface: PlanarInterface,
    ) -> Self {
        Self {
            plus,
            minus,
            interface: Some(interface),
        }
    }

    /// Attaches an interface to a field (a fictitious one if both sides agree).
    pub fn with_interface(mut self, interface: PlanarInterface) -> Self {
        self.interface = Some(interface);
        self
    }

    pub fn interface(&self) -> Option<&PlanarInterface> {
        self.interface.as_ref()
    }

    pub fn side_of(&self, x: &Vec3) -> SideTag {
        match &self.interface {
            Some(i) => i.side_of(x),
            None => SideTag::Plus,
        }
    }

    pub fn side(&self, side: SideTag) -> &dyn VectorField {
        match side {
            SideTag::Plus => self.plus.as_ref(),
            SideTag::Minus => self.minus.as_ref(),
        }
    }

    pub fn value(&self, x: &Vec3) -> Vec3 {
        self.side(self.side_of(x)).value(x)
    }

    pub fn value_on(&self, side: SideTag, x: &Vec3) -> Vec3 {
        self.side(side).value(x)
    }

    pub fn grad_on(&self, side: SideTag, x: &Vec3) -> Mat3 {
        self.side(side).grad(x)
    }

    pub fn hessian_on(&self, side: SideTag, x: &Vec3) -> Tensor3 {
        self.side(side).hessian(x)
    }
}

/// Piecewise-constant Lamé parameters across a planar interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseMaterial {
    pub lambda_plus: f64,
    pub mu_plus: f64,
    pub lambda_minus: f64,
    pub mu_minus: f64,
    pub interface: PlanarInterface,
}

impl TwoPhaseMaterial {
    pub fn new(
        lambda_plus: f64,
        mu_plus: f64,
        lambda_minus: f64,
        mu_minus: f64,
        interface: PlanarInterface,
    ) -> Result<Self, FieldError> {
        let all = [lambda_plus, mu_plus, lambda_minus, mu_minus];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::InvalidMaterial("non-finite Lamé parameter".into()));
        }
        if mu_plus <= 0.0 || mu_minus <= 0.0 {
            return Err(FieldError::InvalidMaterial(
                "shear moduli must be positive".into(),
            ));
        }
        Ok(Self {
            lambda_plus,
            mu_plus,
            lambda_minus,
            mu_minus,
            interface,
        })
    }

    pub fn lame_on(&self, side: SideTag) -> (f64, f64) {
        match side {
            SideTag::Plus => (self.lambda_plus, self.mu_plus),
            SideTag::Minus => (self.lambda_minus, self.mu_minus),
        }
    }
}

/// Smoothly varying Lamé parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothMaterial {
    pub lambda: TrigScalar,
    pub mu: TrigScalar,
}

impl SmoothMaterial {
    pub fn homogeneous(lambda: f64, mu: f64) -> Result<Self, FieldError> {
        if mu <= 0.0 || !mu.is_finite() || !lambda.is_finite() {
            return Err(FieldError::InvalidMaterial(
                "shear modulus must be positive and finite".into(),
            ));
        }
        Ok(Self {
            lambda: TrigScalar::constant(lambda),
            mu: TrigScalar::constant(mu),
        })
    }

    /// μ(x) = 2 + ½ sin x₁, λ = μ + 1.
    pub fn trig() -> Self {
        let mu = TrigScalar {
            base: 2.0,
            amp: 0.5,
            wave: Vec3::basis(0),
            phase: 0.0,
        };
        Self {
            lambda: TrigScalar { base: 3.0, ..mu },
            mu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Material {
    TwoPhase(TwoPhaseMaterial),
    Smooth(SmoothMaterial),
}

impl Material {
    pub fn interface(&self) -> Option<&PlanarInterface> {
        match self {
            Material::TwoPhase(m) => Some(&m.interface),
            Material::Smooth(_) => None,
        }
    }

    /// `(λ(x), μ(x))`; points on Γ take the + values.
    pub fn lame_at(&self, x: &Vec3) -> (f64, f64) {
        match self {
            Material::TwoPhase(m) => m.lame_on(m.interface.side_of(x)),
            Material::Smooth(m) => (m.lambda.value(x), m.mu.value(x)),
        }
    }

    pub fn mu_at(&self, x: &Vec3) -> f64 {
        self.lame_at(x).1
    }

    /// One-sided Lamé values (the side is ignored for smooth materials).
    pub fn lame_on(&self, side: SideTag, x: &Vec3) -> (f64, f64) {
        match self {
            Material::TwoPhase(m) => m.lame_on(side),
            Material::Smooth(m) => (m.lambda.value(x), m.mu.value(x)),
        }
    }

    /// One-sided gradients `(∇λ, ∇μ)`.
    pub fn lame_grad_on(&self, _side: SideTag, x: &Vec3) -> (Vec3, Vec3) {
        match self {
            Material::TwoPhase(_) => (Vec3::ZERO, Vec3::ZERO),
            Material::Smooth(m) => (m.lambda.grad(x), m.mu.grad(x)),
        }
    }
}

/// Interface shared by a material/field pair, preferring the material's.
pub fn common_interface<'a>(
    material: &'a Material,
    field: &'a PiecewiseField,
) -> Option<&'a PlanarInterface> {
    material.interface().or(field.interface())
}

pub fn signed_distance(interface: &PlanarInterface, x: &Vec3) -> f64 {
    interface.signed_distance(x)
}

pub fn lame_at(material: &Material, x: &Vec3) -> (f64, f64) {
    material.lame_at(x)
}

/// σ = λ(∇·u)I + μ(∇u + ∇uᵀ) from the requested side.
pub fn stress(material: &Material, field: &PiecewiseField, x: &Vec3, side: SideTag) -> Mat3 {
    let g = field.grad_on(side, x);
    let (lambda, mu) = material.lame_on(side, x);
    Mat3::identity() * (lambda * g.trace()) + (g + g.transpose()) * mu
}

fn require_on_interface(material: &Material, field: &PiecewiseField, x: &Vec3) -> Result<PlanarInterface, FieldError> {
    let iface = *common_interface(material, field).ok_or(FieldError::NoInterface)?;
    let d = iface.signed_distance(x);
    if d.abs() > ON_INTERFACE_TOL {
        return Err(FieldError::NotOnInterface(d));
    }
    Ok(iface)
}

/// ⟦σ⟧n = σ(x⁺)n − σ(x⁻)n.
pub fn traction_jump(material: &Material, field: &PiecewiseField, x: &Vec3) -> Result<Vec3, FieldError> {
    let iface = require_on_interface(material, field, x)?;
    let n = iface.normal();
    let plus = stress(material, field, x, SideTag::Plus).mul_vec(&n);
    let minus = stress(material, field, x, SideTag::Minus).mul_vec(&n);
    Ok(plus - minus)
}

/// Per-point derivative data shared by the Navier variants.
struct LocalData {
    g: Mat3,
    div: f64,
    grad_div: Vec3,
    laplacian: Vec3,
    div_grad_t: Vec3,
}

fn local_data(field: &PiecewiseField, x: &Vec3, side: SideTag) -> LocalData {
    let g = field.grad_on(side, x);
    let h = field.hessian_on(side, x);
    let mut grad_div = Vec3::ZERO;
    let mut laplacian = Vec3::ZERO;
    let mut div_grad_t = Vec3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            grad_div.0[i] += h.0[j][j][i];
            laplacian.0[i] += h.0[i][j][j];
            div_grad_t.0[i] += h.0[j][i][j];
        }
    }
    LocalData {
        g,
        div: g.trace(),
        grad_div,
        laplacian,
        div_grad_t,
    }
}

/// ∇·(μ(∇u + ∇uᵀ)).
fn shear_divergence(d: &LocalData, mu: f64, grad_mu: &Vec3) -> Vec3 {
    let sym = d.g + d.g.transpose();
    sym.mul_vec(grad_mu) + (d.laplacian + d.div_grad_t) * mu
}

/// N u = ∇(λ∇·u) + ∇·(μ(∇u + ∇uᵀ)).
pub fn navier(material: &Material, field: &PiecewiseField, x: &Vec3, side: SideTag) -> Vec3 {
    let d = local_data(field, x, side);
    let (lambda, mu) = material.lame_on(side, x);
    let (grad_lambda, grad_mu) = material.lame_grad_on(side, x);
    grad_lambda * d.div + d.grad_div * lambda + shear_divergence(&d, mu, &grad_mu)
}

/// N_s u = ∇(μ∇·u) + ∇·(μ(∇u + ∇uᵀ)).
pub fn navier_s(material: &Material, field: &PiecewiseField, x: &Vec3, side: SideTag) -> Vec3 {
    let d = local_data(field, x, side);
    let (_, mu) = material.lame_on(side, x);
    let (_, grad_mu) = material.lame_grad_on(side, x);
    grad_mu * d.div + d.grad_div * mu + shear_divergence(&d, mu, &grad_mu)
}

/// N_d u = ∇((λ − μ)∇·u).
pub fn navier_d(material: &Material, field: &PiecewiseField, x: &Vec3, side: SideTag) -> Vec3 {
    let d = local_data(field, x, side);
    let (lambda, mu) = material.lame_on(side, x);
    let (grad_lambda, grad_mu) = material.lame_grad_on(side, x);
    (grad_lambda - grad_mu) * d.div + d.grad_div * (lambda - mu)
}

/// Names of the registered manufactured solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManufacturedName {
    Constant,
    Linear,
    Quadratic,
    TrigSmooth,
    PatchJumpZeroTraction,
    GradientJump,
    SmoothMaterialTrig,
}

impl ManufacturedName {
    pub const ALL: [ManufacturedName; 7] = [
        ManufacturedName::Constant,
        ManufacturedName::Linear,
        ManufacturedName::Quadratic,
        ManufacturedName::TrigSmooth,
        ManufacturedName::PatchJumpZeroTraction,
        ManufacturedName::GradientJump,
        ManufacturedName::SmoothMaterialTrig,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ManufacturedName::Constant => "constant",
            ManufacturedName::Linear => "linear",
            ManufacturedName::Quadratic => "quadratic",
            ManufacturedName::TrigSmooth => "trig_smooth",
            ManufacturedName::PatchJumpZeroTraction => "patch_jump_zero_traction",
            ManufacturedName::GradientJump => "gradient_jump",
            ManufacturedName::SmoothMaterialTrig => "smooth_material_trig",
        }
    }

    /// Whether the default material is two-phase.
    pub fn is_interface_case(&self) -> bool {
        matches!(
            self,
            ManufacturedName::PatchJumpZeroTraction | ManufacturedName::GradientJump
        )
    }
}

impl fmt::Display for ManufacturedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ManufacturedName {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .find(|n| n.as_str() == s)
            .copied()
            .ok_or_else(|| FieldError::UnknownManufactured(s.to_string()))
    }
}

/// Textual material description: `two-phase:λ₊,μ₊,λ₋,μ₋`,
/// `homogeneous:λ,μ` or `smooth-trig`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MaterialSpec {
    TwoPhase([f64; 4]),
    Homogeneous(f64, f64),
    SmoothTrig,
}

impl MaterialSpec {
    /// The material, placing a two-phase split on `interface`.
    pub fn build(&self, interface: PlanarInterface) -> Result<Material, FieldError> {
        Ok(match *self {
            MaterialSpec::TwoPhase([lp, mp, lm, mm]) => {
                Material::TwoPhase(TwoPhaseMaterial::new(lp, mp, lm, mm, interface)?)
            }
            MaterialSpec::Homogeneous(l, m) => Material::Smooth(SmoothMaterial::homogeneous(l, m)?),
            MaterialSpec::SmoothTrig => Material::Smooth(SmoothMaterial::trig()),
        })
    }
}

impl FromStr for MaterialSpec {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FieldError::InvalidMaterial(format!("cannot parse material `{s}`"));
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<f64>, FieldError> {
            args.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect()
        };
        match kind.trim() {
            "two-phase" => {
                let v = nums()?;
                let arr: [f64; 4] = v.try_into().map_err(|_| bad())?;
                Ok(MaterialSpec::TwoPhase(arr))
            }
            "homogeneous" => match nums()?.as_slice() {
                [l, m] => Ok(MaterialSpec::Homogeneous(*l, *m)),
                _ => Err(bad()),
            },
            "smooth-trig" if args.is_empty() => Ok(MaterialSpec::SmoothTrig),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for MaterialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaterialSpec::TwoPhase([a, b, c, d]) => write!(f, "two-phase:{a},{b},{c},{d}"),
            MaterialSpec::Homogeneous(l, m) => write!(f, "homogeneous:{l},{m}"),
            MaterialSpec::SmoothTrig => f.write_str("smooth-trig"),
        }
    }
}

impl TryFrom<String> for MaterialSpec {
    type Error = FieldError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MaterialSpec> for String {
    fn from(m: MaterialSpec) -> String {
        m.to_string()
    }
}

/// A field paired with the material it is meant to be evaluated in.
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub name: ManufacturedName,
    pub field: PiecewiseField,
    pub material: Material,
}

/// Default two-phase Lamé values `(λ₊, μ₊, λ₋, μ₋)` of the interface cases.
pub const DEFAULT_TWO_PHASE: [f64; 4] = [1.0, 1.0, 2.0, 2.0];

/// Looks a manufactured solution up by name, with Γ = {x₃ = 0}.
pub fn make_manufactured(name: &str) -> Result<Manufactured, FieldError> {
    let name: ManufacturedName = name.parse()?;
    build_manufactured(name, PlanarInterface::horizontal(), None)
}

/// Builds a manufactured case for an arbitrary interface and, optionally, a
/// replacement material.
///
/// The flagship `patch_jump_zero_traction` field is `u± = k± s(x) n` with
/// `s` the signed distance; `k₋ = 1` and `k₊ = (λ₋+2μ₋)/(λ₊+2μ₊)` so that
/// σ⁺n = σ⁻n for whatever two-phase material is supplied.
pub fn build_manufactured(
    name: ManufacturedName,
    interface: PlanarInterface,
    material: Option<Material>,
) -> Result<Manufactured, FieldError> {
    let default_two_phase = || {
        let [lp, mp, lm, mm] = DEFAULT_TWO_PHASE;
        TwoPhaseMaterial::new(lp, mp, lm, mm, interface).map(Material::TwoPhase)
    };
    let material = match material {
        Some(Material::TwoPhase(m)) => Material::TwoPhase(TwoPhaseMaterial { interface, ..m }),
        Some(m) => m,
        None if name.is_interface_case() => default_two_phase()?,
        None if name == ManufacturedName::SmoothMaterialTrig => Material::Smooth(SmoothMaterial::trig()),
        None => Material::Smooth(SmoothMaterial::homogeneous(1.0, 1.0)?),
    };

    let n = interface.normal();
    let p_n = interface.point().dot(&n);
    // s(x) n as an affine field, scaled by k
    let normal_ramp = |k: f64| -> Arc<dyn VectorField> {
        Arc::new(QuadraticField::affine(
            n * (-k * p_n),
            crate::tensor::outer(&n, &n) * k,
        ))
    };

    let field = match name {
        ManufacturedName::Constant => {
            PiecewiseField::smooth(Arc::new(QuadraticField::constant(Vec3::new(1.0, -2.0, 0.5))))
        }
        ManufacturedName::Linear => PiecewiseField::smooth(Arc::new(QuadraticField::affine(
            Vec3::new(0.25, -0.5, 1.0),
            Mat3([[0.3, -0.7, 0.2], [0.5, 0.1, -0.4], [-0.6, 0.8, 0.9]]),
        ))),
        ManufacturedName::Quadratic => {
            let mut q = Tensor3::ZERO;
            q.0[0][0][0] = 2.0;
            PiecewiseField::smooth(Arc::new(QuadraticField::new(Vec3::ZERO, Mat3::ZERO, q)))
        }
        ManufacturedName::TrigSmooth | ManufacturedName::SmoothMaterialTrig => {
            PiecewiseField::smooth(Arc::new(TrigField::cyclic()))
        }
        ManufacturedName::PatchJumpZeroTraction => {
            let (lp, mp, lm, mm) = match &material {
                Material::TwoPhase(m) => (m.lambda_plus, m.mu_plus, m.lambda_minus, m.mu_minus),
                Material::Smooth(_) => {
                    return Err(FieldError::InvalidMaterial(
                        "patch_jump_zero_traction needs a two-phase material".into(),
                    ))
                }
            };
            let k_plus = (lm + 2.0 * mm) / (lp + 2.0 * mp);
            PiecewiseField::two_sided(normal_ramp(k_plus), normal_ramp(1.0), interface)
        }
        ManufacturedName::GradientJump => {
            let f = normal_ramp(1.0);
            PiecewiseField::two_sided(f.clone(), f, interface)
        }
    };
    Ok(Manufactured {
        name,
        field,
        material,
    })
}
