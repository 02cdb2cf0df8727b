//! Product Gauss rules on the unit ball, half-balls and balls sliced by
//! parallel planes, for integrands carrying `|z|^{-k}` factors with `k ≤ 2`.
//!
//! Every rule stores unit-ball offsets; integration over `B_δ(x)` maps a node
//! `z` to `x + δz` and scales its weight by `δ³`. Summation follows node order,
//! so results are bit-stable.

use crate::tensor::{outer, outer3, outer4, Mat3, Tensor3, Tensor4, Vec3};
use std::f64::consts::PI;
use std::ops::{Add, Mul};
use thiserror::Error;

pub const DEFAULT_RADIAL_ORDER: usize = 8;
pub const DEFAULT_ANGULAR_ORDER: usize = 12;

/// Tolerance on `|n| = 1` for normals handed to half-ball rules.
pub const UNIT_TOL: f64 = 1e-12;

/// Planes closer than this (in unit-ball coordinates) to the center are
/// treated as passing through it.
const PLANE_SNAP: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature orders must be at least 1 (got radial {radial}, angular {angular})")]
    InvalidOrder { radial: usize, angular: usize },
    #[error("horizon must be positive and finite (got {0})")]
    InvalidDelta(f64),
    #[error("normal must have unit length (|n| = {0})")]
    NonUnitNormal(f64),
    #[error("integrand is not finite at a quadrature node")]
    NonFinite,
}

/// Values that can be accumulated by a quadrature rule.
pub trait QuadValue: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn all_finite(&self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

macro_rules! quad_value {
    ($($t:ty),*) => {$(
        impl QuadValue for $t {
            fn zero() -> Self {
                <$t>::ZERO
            }
            fn all_finite(&self) -> bool {
                self.is_finite()
            }
        }
    )*};
}
quad_value!(Vec3, Mat3, Tensor3, Tensor4);

/// Gauss–Legendre nodes and weights on [−1, 1], ascending and exactly
/// symmetric about 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // x descends from near 1; store mirrored pairs
            nodes[n - 1 - i] = x;
            nodes[i] = -x;
            weights[n - 1 - i] = w;
            weights[i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Unit-ball offsets and weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeSet {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec3, &f64)> {
        self.points.iter().zip(&self.weights)
    }

    /// Applies `q` to every node.
    pub fn transformed(&self, q: &Mat3) -> NodeSet {
        NodeSet {
            points: self.points.iter().map(|p| q.mul_vec(p)).collect(),
            weights: self.weights.clone(),
        }
    }

    fn push(&mut self, p: Vec3, w: f64) {
        self.points.push(p);
        self.weights.push(w);
    }

    /// Σ w_q δ³ f(center + δ z_q), without a finiteness check.
    pub fn sum<T: QuadValue>(&self, delta: f64, center: &Vec3, mut f: impl FnMut(Vec3) -> T) -> T {
        let mut acc = T::zero();
        for (z, w) in self.iter() {
            acc = acc + f(*center + *z * delta) * *w;
        }
        acc * (delta * delta * delta)
    }

    /// Like [`NodeSet::sum`] but rejects a non-finite result.
    pub fn integrate<T: QuadValue>(
        &self,
        delta: f64,
        center: &Vec3,
        f: impl FnMut(Vec3) -> T,
    ) -> Result<T, QuadratureError> {
        check_delta(delta)?;
        let v = self.sum(delta, center, f);
        if v.all_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFinite)
        }
    }
}

fn check_delta(delta: f64) -> Result<(), QuadratureError> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(QuadratureError::InvalidDelta(delta))
    }
}

fn check_unit(n: &Vec3) -> Result<(), QuadratureError> {
    let len = n.norm();
    if (len - 1.0).abs() <= UNIT_TOL {
        Ok(())
    } else {
        Err(QuadratureError::NonUnitNormal(len))
    }
}

fn check_orders(radial: usize, angular: usize) -> Result<(), QuadratureError> {
    if radial >= 1 && angular >= 1 {
        Ok(())
    } else {
        Err(QuadratureError::InvalidOrder { radial, angular })
    }
}

/// Azimuthal nodes `2π(k+½)/m` with exact `φ ↦ φ+π` pairing when `m` is even.
fn azimuths(m: usize) -> Vec<(f64, f64)> {
    let half = m / 2;
    let mut out = vec![(0.0, 0.0); m];
    if m % 2 == 0 {
        for k in 0..half {
            let phi = 2.0 * PI * (k as f64 + 0.5) / m as f64;
            let (s, c) = phi.sin_cos();
            out[k] = (c, s);
            out[k + half] = (-c, -s);
        }
    } else {
        for (k, o) in out.iter_mut().enumerate() {
            let (s, c) = (2.0 * PI * (k as f64 + 0.5) / m as f64).sin_cos();
            *o = (c, s);
        }
    }
    out
}

/// Rotation built from the spherical angles (φ, θ) of `n` with `R n = ẑ`;
/// φ = 0 when `n` is parallel to ẑ.
pub fn rotation_to_z(n: &Vec3) -> Mat3 {
    let ct = n.0[2].clamp(-1.0, 1.0);
    let rho = n.0[0].hypot(n.0[1]);
    let st = rho;
    let (cp, sp) = if rho > 1e-15 {
        (n.0[0] / rho, n.0[1] / rho)
    } else {
        (1.0, 0.0)
    };
    Mat3([
        [cp * ct, sp * ct, -st],
        [-sp, cp, 0.0],
        [cp * st, sp * st, ct],
    ])
}

/// Product rule on the unit ball: Gauss–Legendre in `r` (with `r²` folded
/// into the weights), Gauss–Legendre in `cos θ`, and `2·angular` uniform
/// azimuths. The node set is symmetric under `z ↦ −z`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallQuadrature {
    radial_order: usize,
    angular_order: usize,
    radial: GaussLegendre,
    polar: GaussLegendre,
    nodes: NodeSet,
}

impl BallQuadrature {
    pub fn new(radial_order: usize, angular_order: usize) -> Result<Self, QuadratureError> {
        check_orders(radial_order, angular_order)?;
        let radial = GaussLegendre::new(radial_order);
        let polar = GaussLegendre::new(angular_order);
        let az = azimuths(2 * angular_order);
        let w_phi = PI / angular_order as f64;
        let mut nodes = NodeSet::default();
        for (r, wr) in radial.on(0.0, 1.0) {
            for (&c, &wc) in polar.nodes.iter().zip(&polar.weights) {
                let s = (1.0 - c * c).max(0.0).sqrt();
                for &(cp, sp) in &az {
                    nodes.push(Vec3::new(r * s * cp, r * s * sp, r * c), wr * r * r * wc * w_phi);
                }
            }
        }
        Ok(Self {
            radial_order,
            angular_order,
            radial,
            polar,
            nodes,
        })
    }

    pub fn radial_order(&self) -> usize {
        self.radial_order
    }

    pub fn angular_order(&self) -> usize {
        self.angular_order
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    /// A rule for the unit ball cut by the planes `{z·n = t}`, `t ∈ heights`.
    ///
    /// Directions are split at the polar angles where a plane meets the unit
    /// sphere and every ray is split where it crosses a plane, so integrands
    /// that are smooth between the planes are integrated without loss of
    /// order. Near-grazing directions use a logarithmic polar variable.
    pub fn sliced(&self, n: &Vec3, heights: &[f64]) -> NodeSet {
        let mut hs: Vec<f64> = heights
            .iter()
            .copied()
            .filter(|t| t.abs() < 1.0)
            .map(|t| if t.abs() < PLANE_SNAP { 0.0 } else { t })
            .collect();
        hs.sort_by(f64::total_cmp);
        hs.dedup();
        let reference = sliced_reference(&self.radial, &self.polar, self.angular_order, &hs);
        reference.transformed(&rotation_to_z(n).transpose())
    }
}

impl Default for BallQuadrature {
    fn default() -> Self {
        Self::new(DEFAULT_RADIAL_ORDER, DEFAULT_ANGULAR_ORDER).expect("default orders are valid")
    }
}

/// Sliced rule in the frame with the plane normal along ẑ.
fn sliced_reference(radial: &GaussLegendre, polar: &GaussLegendre, angular: usize, hs: &[f64]) -> NodeSet {
    let az = azimuths(2 * angular);
    let w_phi = PI / angular as f64;

    let mut breaks = vec![-1.0, 1.0];
    breaks.extend(hs.iter().copied());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut out = NodeSet::default();
    let emit = |c: f64, wc: f64, out: &mut NodeSet| {
        let s = (1.0 - c * c).max(0.0).sqrt();
        let mut cuts: Vec<f64> = hs
            .iter()
            .filter(|&&t| t != 0.0 && t * c > 0.0)
            .map(|&t| t / c)
            .filter(|&r| r < 1.0)
            .collect();
        cuts.sort_by(f64::total_cmp);
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(0.0);
        edges.extend(cuts);
        edges.push(1.0);
        for win in edges.windows(2) {
            for (r, wr) in radial.on(win[0], win[1]) {
                for &(cp, sp) in &az {
                    out.push(Vec3::new(r * s * cp, r * s * sp, r * c), wr * r * r * wc * w_phi);
                }
            }
        }
    };

    for win in breaks.windows(2) {
        let (a, b) = (win[0], win[1]);
        // planes crossed by rays in this polar band (same sign, |t| ≤ |c|)
        let crossing = hs.iter().any(|&t| t != 0.0 && ((a >= 0.0 && t > 0.0 && t <= a) || (b <= 0.0 && t < 0.0 && t >= b)));
        if !crossing {
            for (c, wc) in polar.on(a, b) {
                emit(c, wc, &mut out);
            }
            continue;
        }
        // log-graded panels of width ≤ 1 in ln|c|
        let sign = if a >= 0.0 { 1.0 } else { -1.0 };
        let (lo, hi) = if sign > 0.0 { (a, b) } else { (-b, -a) };
        let (t0, t1) = (lo.ln(), hi.ln());
        let panels = ((t1 - t0).ceil() as usize).max(1);
        let width = (t1 - t0) / panels as f64;
        for k in 0..panels {
            let pa = t0 + width * k as f64;
            let pb = if k + 1 == panels { t1 } else { pa + width };
            for (tau, wt) in polar.on(pa, pb) {
                let c = tau.exp();
                emit(sign * c, wt * c, &mut out);
            }
        }
    }
    out
}

/// Product rule on the reference half-ball `{|z| < 1, z₃ > 0}`, oriented to
/// a normal `n` by `Rᵀ` with `R n = ẑ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfBallQuadrature {
    radial_order: usize,
    angular_order: usize,
    reference: NodeSet,
}

impl HalfBallQuadrature {
    pub fn new(radial_order: usize, angular_order: usize) -> Result<Self, QuadratureError> {
        check_orders(radial_order, angular_order)?;
        let radial = GaussLegendre::new(radial_order);
        let polar = GaussLegendre::new(angular_order);
        let az = azimuths(2 * angular_order);
        let w_phi = PI / angular_order as f64;
        let mut reference = NodeSet::default();
        for (r, wr) in radial.on(0.0, 1.0) {
            for (c, wc) in polar.on(0.0, 1.0) {
                let s = (1.0 - c * c).max(0.0).sqrt();
                for &(cp, sp) in &az {
                    reference.push(Vec3::new(r * s * cp, r * s * sp, r * c), wr * r * r * wc * w_phi);
                }
            }
        }
        Ok(Self {
            radial_order,
            angular_order,
            reference,
        })
    }

    pub fn radial_order(&self) -> usize {
        self.radial_order
    }

    pub fn angular_order(&self) -> usize {
        self.angular_order
    }

    /// Nodes on the reference axis ẑ.
    pub fn reference(&self) -> &NodeSet {
        &self.reference
    }

    /// Nodes of `{|z| < 1, z·n > 0}`.
    pub fn oriented(&self, n: &Vec3) -> Result<NodeSet, QuadratureError> {
        check_unit(n)?;
        Ok(self.reference.transformed(&rotation_to_z(n).transpose()))
    }
}

impl Default for HalfBallQuadrature {
    fn default() -> Self {
        Self::new(DEFAULT_RADIAL_ORDER, DEFAULT_ANGULAR_ORDER).expect("default orders are valid")
    }
}

pub fn ball_volume(delta: f64) -> f64 {
    4.0 / 3.0 * PI * delta.powi(3)
}

/// Σ w_q δ³ f(center + δ z_q) over `B_δ(center)`.
pub fn integrate_ball<T: QuadValue>(
    rule: &BallQuadrature,
    delta: f64,
    center: &Vec3,
    f: impl FnMut(Vec3) -> T,
) -> Result<T, QuadratureError> {
    rule.nodes.integrate(delta, center, f)
}

/// Integral over `{y ∈ B_δ(center) : (y − center)·n > 0}`.
pub fn integrate_half_ball<T: QuadValue>(
    rule: &HalfBallQuadrature,
    delta: f64,
    center: &Vec3,
    n: &Vec3,
    f: impl FnMut(Vec3) -> T,
) -> Result<T, QuadratureError> {
    check_delta(delta)?;
    rule.oriented(n)?.integrate(delta, center, f)
}

/// `(30/|B_δ|) ∫_{B_δ} z⊗z⊗z⊗z/|z|⁴ dz`.
pub fn fourth_moment_numeric(rule: &BallQuadrature, delta: f64) -> Result<Tensor4, QuadratureError> {
    let v = integrate_ball(rule, delta, &Vec3::ZERO, |z| outer4(&z, &z, &z, &z) * (1.0 / z.norm_squared().powi(2)))?;
    Ok(v * (30.0 / ball_volume(delta)))
}

/// `∫_{B_δ} z⊗z/|z|² dz`.
pub fn second_moment_numeric(rule: &BallQuadrature, delta: f64) -> Result<Mat3, QuadratureError> {
    integrate_ball(rule, delta, &Vec3::ZERO, |z| outer(&z, &z) * (1.0 / z.norm_squared()))
}

/// `(1/|B_δ|) ∫_{B_δ^{n+}} z⊗z⊗z/|z|⁴ dz`.
pub fn k_delta_numeric(rule: &HalfBallQuadrature, delta: f64, n: &Vec3) -> Result<Tensor3, QuadratureError> {
    let v = integrate_half_ball(rule, delta, &Vec3::ZERO, n, |z| {
        outer3(&z, &z, &z) * (1.0 / z.norm_squared().powi(2))
    })?;
    Ok(v * (1.0 / ball_volume(delta)))
}

/// `(3δ/|B_δ|) ∫_{B_δ^{n+}} z/|z|² dz`.
pub fn half_ball_first_moment(rule: &HalfBallQuadrature, delta: f64, n: &Vec3) -> Result<Vec3, QuadratureError> {
    let v = integrate_half_ball(rule, delta, &Vec3::ZERO, n, |z| z * (1.0 / z.norm_squared()))?;
    Ok(v * (3.0 * delta / ball_volume(delta)))
}
