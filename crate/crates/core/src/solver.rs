//! Meshfree collocation of the interface system `L* u = b` in Ω,
//! `L* u = 0` in `Γ_δ`, on a uniform lattice with `u` prescribed on a
//! boundary collar.
//!
//! Bond integrals use the midpoint rule over lattice cells, each weighted by
//! the fraction of the cell inside `B_δ`. The nested integrals of `L_d` and
//! `L₂` are the composition of an inner single-integral operator
//! `g(y) = Σ_z W (z−y)/|z−y|² ⊗ (u(z) − u(y))` with an outer sum over `y`.

use crate::fields::{
    build_manufactured, navier, FieldError, ManufacturedName, Material, MaterialSpec, PiecewiseField, PlanarInterface,
};
use crate::quadrature::ball_volume;
use crate::tensor::{outer, Mat3, Vec3};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;
use thiserror::Error;

/// Target residual of a direct solve.
pub const SOLVER_TOL: f64 = 1e-10;
/// Condition estimates above this are rejected.
pub const MAX_CONDITION: f64 = 1e14;
/// Subsamples per axis when measuring the part of a cell inside the ball.
pub const SUBSAMPLES: usize = 4;
/// Largest dense system accepted.
pub const MAX_UNKNOWNS: usize = 15_000;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("horizon ratio must exceed 1 (got {0})")]
    InvalidRatio(f64),
    #[error("grid spacing must be positive and finite (got {0})")]
    InvalidSpacing(f64),
    #[error("box extent {extent} along axis {axis} is not a multiple of h = {h}")]
    NotLattice { axis: usize, extent: f64, h: f64 },
    #[error("a collar of {collar} nodes does not fit along axis {axis} ({nodes} nodes)")]
    CollarDoesNotFit { axis: usize, collar: usize, nodes: usize },
    #[error("{0} unknowns exceed the dense limit of {MAX_UNKNOWNS}")]
    TooLarge(usize),
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is ill-conditioned (1-norm condition estimate {estimate:e})")]
    IllConditioned { estimate: f64 },
    #[error("expected {expected} nodal values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("permutation of {0} free nodes is invalid")]
    InvalidPermutation(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeTag {
    Interior,
    ExtendedInterface,
    Constraint,
}

impl NodeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeTag::Interior => "interior",
            NodeTag::ExtendedInterface => "extended_interface",
            NodeTag::Constraint => "constraint",
        }
    }

    pub fn is_free(&self) -> bool {
        *self != NodeTag::Constraint
    }
}

/// Lattice offsets meeting `B_δ` with their cell volumes inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub offsets: Vec<[i64; 3]>,
    pub weights: Vec<f64>,
    /// Largest offset along any axis.
    pub reach: usize,
}

impl Stencil {
    /// Cells `o·h + [−h/2, h/2]³`, `o ≠ 0`, weighted by `h³` times the
    /// fraction of [`SUBSAMPLES`]³ subcell centres within `ratio·h` of the
    /// origin.
    pub fn new(h: f64, ratio: f64) -> Self {
        let span = (ratio + 0.5).ceil() as i64;
        let sub: Vec<f64> = (0..SUBSAMPLES)
            .map(|k| (k as f64 + 0.5) / SUBSAMPLES as f64 - 0.5)
            .collect();
        let r2 = ratio * ratio;
        let total = SUBSAMPLES.pow(3) as f64;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut reach = 0;
        for i in -span..=span {
            for j in -span..=span {
                for k in -span..=span {
                    if i == 0 && j == 0 && k == 0 {
                        continue;
                    }
                    let mut inside = 0usize;
                    for a in &sub {
                        for b in &sub {
                            for c in &sub {
                                let (x, y, z) = (i as f64 + a, j as f64 + b, k as f64 + c);
                                if x * x + y * y + z * z <= r2 {
                                    inside += 1;
                                }
                            }
                        }
                    }
                    if inside > 0 {
                        offsets.push([i, j, k]);
                        weights.push(h * h * h * inside as f64 / total);
                        reach = reach.max(i.unsigned_abs().max(j.unsigned_abs()).max(k.unsigned_abs()) as usize);
                    }
                }
            }
        }
        Self { offsets, weights, reach }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Tagged lattice on an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    pub lo: Vec3,
    pub hi: Vec3,
    pub h: f64,
    pub ratio: f64,
    pub dims: [usize; 3],
    pub points: Vec<Vec3>,
    pub tags: Vec<NodeTag>,
    pub interface: Option<PlanarInterface>,
    /// Collar thickness in nodes.
    pub collar: usize,
}

impl BoxGrid {
    pub fn delta(&self) -> f64 {
        self.ratio * self.h
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        (ijk[0] * self.dims[1] + ijk[1]) * self.dims[2] + ijk[2]
    }

    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        [idx / (self.dims[1] * self.dims[2]), j, k]
    }

    /// Node at `idx + offset`; the caller guarantees it exists.
    fn shifted(&self, idx: usize, o: [i64; 3]) -> usize {
        let p = self.ijk(idx);
        let q = [0, 1, 2].map(|a| (p[a] as i64 + o[a]) as usize);
        self.index(q)
    }

    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|i| self.tags[*i].is_free()).collect()
    }

    pub fn count(&self, tag: NodeTag) -> usize {
        self.tags.iter().filter(|t| **t == tag).count()
    }

    /// Nodal samples of a field, one value per node.
    pub fn sample(&self, field: &PiecewiseField) -> Vec<Vec3> {
        self.points.iter().map(|x| field.value(x)).collect()
    }
}

/// Lattice of spacing `h` on `[lo, hi]` with δ = `ratio·h`.
///
/// Nodes within the collar (at least 2δ and twice the stencil reach) are
/// `Constraint`; free nodes with `|s| < δ` are `ExtendedInterface`.
pub fn build_grid(
    lo: Vec3,
    hi: Vec3,
    h: f64,
    ratio: f64,
    interface: Option<PlanarInterface>,
) -> Result<BoxGrid, SolverError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(SolverError::InvalidSpacing(h));
    }
    if !(ratio > 1.0 && ratio.is_finite()) {
        return Err(SolverError::InvalidRatio(ratio));
    }
    let mut dims = [0usize; 3];
    for a in 0..3 {
        let extent = hi.0[a] - lo.0[a];
        let cells = (extent / h).round();
        if !(extent > 0.0) || (extent / h - cells).abs() > 1e-9 * cells.max(1.0) {
            return Err(SolverError::NotLattice { axis: a, extent, h });
        }
        dims[a] = cells as usize + 1;
    }
    let reach = Stencil::new(h, ratio).reach;
    let collar = (2 * reach).max((2.0 * ratio - 1e-9).ceil() as usize);
    for (a, n) in dims.iter().enumerate() {
        if *n <= 2 * collar {
            return Err(SolverError::CollarDoesNotFit { axis: a, collar, nodes: *n });
        }
    }
    let delta = ratio * h;
    let mut points = Vec::with_capacity(dims.iter().product());
    let mut tags = Vec::with_capacity(points.capacity());
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let ijk = [i, j, k];
                let p = Vec3::new(
                    lo.0[0] + i as f64 * h,
                    lo.0[1] + j as f64 * h,
                    lo.0[2] + k as f64 * h,
                );
                let in_collar = (0..3).any(|a| ijk[a] < collar || ijk[a] >= dims[a] - collar);
                let tag = if in_collar {
                    NodeTag::Constraint
                } else if interface.is_some_and(|g| g.signed_distance(&p).abs() < delta) {
                    NodeTag::ExtendedInterface
                } else {
                    NodeTag::Interior
                };
                points.push(p);
                tags.push(tag);
            }
        }
    }
    Ok(BoxGrid { lo, hi, h, ratio, dims, points, tags, interface, collar })
}

/// Rows of `L*` at the free nodes as 3×3 blocks over all nodes.
///
/// Constraint rows are the identity and are not stored.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: BoxGrid,
    pub stencil: Stencil,
    /// Free nodes in row order.
    pub free: Vec<usize>,
    /// Row `r` holds `(column node, block)` pairs in increasing node order.
    pub rows: Vec<Vec<(usize, Mat3)>>,
}

impl DiscreteOperator {
    /// `(A u)` at the free nodes.
    pub fn apply(&self, u: &[Vec3]) -> Result<Vec<Vec3>, SolverError> {
        check_len(u, self.grid.len())?;
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().fold(Vec3::ZERO, |acc, (j, b)| acc + b.mul_vec(&u[*j])))
            .collect())
    }

    /// Block row sums.
    pub fn row_sums(&self) -> Vec<Mat3> {
        self.rows
            .iter()
            .map(|row| row.iter().fold(Mat3::ZERO, |acc, (_, b)| acc + *b))
            .collect()
    }

    /// Infinity norm of the stored rows.
    pub fn norm_inf(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|row| {
                (0..3).map(move |i| row.iter().map(|(_, b)| (0..3).map(|j| b.0[i][j].abs()).sum::<f64>()).sum::<f64>())
            })
            .fold(0.0, f64::max)
    }

    /// The same operator with its free nodes listed in the order `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, SolverError> {
        let n = self.free.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|p| *p >= n || std::mem::replace(&mut seen[*p], true)) {
            return Err(SolverError::InvalidPermutation(n));
        }
        Ok(Self {
            grid: self.grid.clone(),
            stencil: self.stencil.clone(),
            free: perm.iter().map(|p| self.free[*p]).collect(),
            rows: perm.iter().map(|p| self.rows[*p].clone()).collect(),
        })
    }
}

fn check_len<T>(v: &[T], expected: usize) -> Result<(), SolverError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(SolverError::LengthMismatch { expected, got: v.len() })
    }
}

/// Assembles `L*` at every free node, in parallel over rows.
pub fn assemble(grid: &BoxGrid, material: &Material) -> DiscreteOperator {
    let stencil = Stencil::new(grid.h, grid.ratio);
    let free = grid.free_nodes();
    let rows = free.par_iter().map(|p| assemble_row(grid, &stencil, material, *p)).collect();
    DiscreteOperator { grid: grid.clone(), stencil, free, rows }
}

fn assemble_row(grid: &BoxGrid, st: &Stencil, material: &Material, p: usize) -> Vec<(usize, Mat3)> {
    let h = grid.h;
    let vol = ball_volume(grid.delta());
    let in_band = grid.tags[p] == NodeTag::ExtendedInterface;
    let normal = grid.interface.map(|g| g.normal()).filter(|_| in_band);
    let x = grid.points[p];
    let mu_x = material.mu_at(&x);

    // local accumulator over offsets in [−2R, 2R]³
    let r = 2 * st.reach as i64;
    let side = (2 * r + 1) as usize;
    let slot = |o: [i64; 3]| (((o[0] + r) as usize * side) + (o[1] + r) as usize) * side + (o[2] + r) as usize;
    let mut acc = vec![Mat3::ZERO; side * side * side];
    let centre = slot([0, 0, 0]);

    let vecs: Vec<Vec3> = st
        .offsets
        .iter()
        .map(|o| Vec3::new(o[0] as f64 * h, o[1] as f64 * h, o[2] as f64 * h))
        .collect();
    let recips: Vec<Vec3> = vecs.iter().map(|v| *v * (1.0 / v.norm_squared())).collect();

    // L_s, plus L₁ in the band: the weights μ(x)+μ(y) and −μ(x) combine
    let ks = 15.0 / vol;
    for ((o, w), v) in st.offsets.iter().zip(&st.weights).zip(&vecs) {
        let y = grid.points[grid.shifted(p, *o)];
        let weight = if in_band { material.mu_at(&y) } else { mu_x + material.mu_at(&y) };
        let r2 = v.norm_squared();
        let blk = outer(v, v) * (ks * w * weight / (r2 * r2));
        acc[slot(*o)] += blk;
        acc[centre] -= blk;
    }

    // L_d (scaled by 5/4 in the band) and L₂ as outer ∘ inner
    let kd = 9.0 / (vol * vol) * if in_band { 1.25 } else { 1.0 };
    let k2 = 45.0 / (4.0 * vol * vol);
    let nn = normal.map(|n| outer(&n, &n));
    for ((o, w), a) in st.offsets.iter().zip(&st.weights).zip(&recips) {
        let y = grid.points[grid.shifted(p, *o)];
        let (lambda_y, mu_y) = material.lame_at(&y);
        let sd = kd * w * (lambda_y - mu_y);
        let s2 = if nn.is_some() { k2 * w * mu_y } else { 0.0 };
        if sd == 0.0 && s2 == 0.0 {
            continue;
        }
        let oy = slot(*o);
        for ((o2, w2), b) in st.offsets.iter().zip(&st.weights).zip(&recips) {
            let mut blk = outer(a, b) * (sd * w2);
            if let Some(nn) = nn {
                blk += nn * (s2 * w2 * a.dot(b));
            }
            acc[slot([o[0] + o2[0], o[1] + o2[1], o[2] + o2[2]])] += blk;
            acc[oy] -= blk;
        }
    }

    let mut row = Vec::new();
    for i in -r..=r {
        for j in -r..=r {
            for k in -r..=r {
                let blk = acc[slot([i, j, k])];
                if blk != Mat3::ZERO {
                    row.push((grid.shifted(p, [i, j, k]), blk));
                }
            }
        }
    }
    row
}

/// Max-norm residuals split by node tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub interior: f64,
    pub extended_interface: f64,
    pub constraint: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.interior.max(self.extended_interface).max(self.constraint)
    }
}

/// `‖A u − rhs‖∞` per tag, where the right-hand side is `b` on `Interior`
/// rows, 0 on `ExtendedInterface` rows and `g` on `Constraint` rows.
pub fn residual_check(
    opr: &DiscreteOperator,
    u: &[Vec3],
    b: &[Vec3],
    g: &[Vec3],
) -> Result<ResidualReport, SolverError> {
    let n = opr.grid.len();
    check_len(b, n)?;
    check_len(g, n)?;
    let au = opr.apply(u)?;
    let mut rep = ResidualReport { interior: 0.0, extended_interface: 0.0, constraint: 0.0 };
    for (r, p) in opr.free.iter().enumerate() {
        match opr.grid.tags[*p] {
            NodeTag::Interior => rep.interior = rep.interior.max((au[r] - b[*p]).max_abs()),
            _ => rep.extended_interface = rep.extended_interface.max(au[r].max_abs()),
        }
    }
    for (p, tag) in opr.grid.tags.iter().enumerate() {
        if *tag == NodeTag::Constraint {
            rep.constraint = rep.constraint.max((u[p] - g[p]).max_abs());
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Displacement at every node.
    pub u: Vec<Vec3>,
    pub residuals: ResidualReport,
    /// Estimate of the 1-norm condition number of the free block.
    pub condition: f64,
}

/// Hager's estimate of `‖A⁻¹‖₁` from solves with `A` and `Aᵀ`.
fn inverse_norm1(solve: impl Fn(&DVector<f64>) -> DVector<f64>, solve_t: impl Fn(&DVector<f64>) -> DVector<f64>, n: usize) -> f64 {
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = solve(&x);
        let new = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = solve_t(&xi);
        let (jmax, zmax) = z.iter().enumerate().fold((0, 0.0), |(bj, bv), (j, v)| if v.abs() > bv { (j, v.abs()) } else { (bj, bv) });
        if new <= est || zmax <= z.dot(&x) {
            est = est.max(new);
            break;
        }
        est = new;
        x = DVector::zeros(n);
        x[jmax] = 1.0;
    }
    est
}

/// Dense free block and right-hand side: `b` on `Interior` rows, 0 on
/// `ExtendedInterface` rows, minus the constraint columns applied to `g`.
pub fn free_system(opr: &DiscreteOperator, b: &[Vec3], g: &[Vec3]) -> Result<(DMatrix<f64>, DVector<f64>), SolverError> {
    let grid = &opr.grid;
    check_len(b, grid.len())?;
    check_len(g, grid.len())?;
    let dim = 3 * opr.free.len();
    if dim > MAX_UNKNOWNS {
        return Err(SolverError::TooLarge(dim));
    }
    let mut pos = vec![usize::MAX; grid.len()];
    for (r, p) in opr.free.iter().enumerate() {
        pos[*p] = r;
    }
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (r, row) in opr.rows.iter().enumerate() {
        let p = opr.free[r];
        let mut f = if grid.tags[p] == NodeTag::Interior { b[p] } else { Vec3::ZERO };
        for (j, blk) in row {
            if pos[*j] == usize::MAX {
                f -= blk.mul_vec(&g[*j]);
            } else {
                let c = pos[*j];
                for i in 0..3 {
                    for k in 0..3 {
                        a[(3 * r + i, 3 * c + k)] += blk.0[i][k];
                    }
                }
            }
        }
        for i in 0..3 {
            rhs[3 * r + i] = f.0[i];
        }
    }
    Ok((a, rhs))
}

/// 1-norm of a dense matrix.
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Solves `L* u = b` on `Interior`, `L* u = 0` on `ExtendedInterface` and
/// `u = g` on `Constraint` nodes by dense LU. Constraint columns move to
/// the right-hand side.
pub fn solve_equilibrium(opr: &DiscreteOperator, b: &[Vec3], g: &[Vec3]) -> Result<Solution, SolverError> {
    let (a, rhs) = free_system(opr, b, g)?;
    let dim = rhs.len();
    let a_norm = norm1(&a);
    let lu = a.lu();
    if !lu.is_invertible() {
        return Err(SolverError::Singular);
    }
    // P A = L U, so Aᵀ x = v is Uᵀ Lᵀ (P x) = v
    let (l, u_mat, perm) = (lu.l(), lu.u(), lu.p());
    let solve = |v: &DVector<f64>| lu.solve(v).expect("invertible");
    let solve_t = |v: &DVector<f64>| {
        let w = u_mat.tr_solve_upper_triangular(v).expect("invertible");
        let mut x = l.tr_solve_lower_triangular(&w).expect("unit diagonal");
        perm.inv_permute_rows(&mut x);
        x
    };
    let condition = a_norm * inverse_norm1(solve, solve_t, dim);
    if !(condition <= MAX_CONDITION) {
        return Err(SolverError::IllConditioned { estimate: condition });
    }
    let x = solve(&rhs);
    let mut u = g.to_vec();
    for (r, p) in opr.free.iter().enumerate() {
        u[*p] = Vec3::new(x[3 * r], x[3 * r + 1], x[3 * r + 2]);
    }
    let residuals = residual_check(opr, &u, b, g)?;
    Ok(Solution { u, residuals, condition })
}

/// Writes `x,y,z,ux,uy,uz,tag` for every node.
pub fn write_solution_csv<W: Write>(grid: &BoxGrid, u: &[Vec3], w: W) -> Result<(), SolverError> {
    check_len(u, grid.len())?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "y", "z", "ux", "uy", "uz", "tag"])?;
    for ((p, v), t) in grid.points.iter().zip(u).zip(&grid.tags) {
        let mut rec: Vec<String> = p.0.iter().chain(v.0.iter()).map(|c| format!("{c:.16e}")).collect();
        rec.push(t.as_str().to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Body force of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyForce {
    #[default]
    Zero,
    /// `b = N u` of the manufactured field.
    Navier,
    Constant(Vec3),
}

impl BodyForce {
    pub fn nodal(&self, grid: &BoxGrid, material: &Material, field: &PiecewiseField) -> Vec<Vec3> {
        grid.points
            .iter()
            .map(|x| match self {
                BodyForce::Zero => Vec3::ZERO,
                BodyForce::Constant(c) => *c,
                BodyForce::Navier => navier(material, field, x, field.side_of(x)),
            })
            .collect()
    }
}

/// Axis-aligned bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxBounds {
    pub lo: Vec3,
    pub hi: Vec3,
}

fn default_ratio() -> f64 {
    3.0
}

fn default_normal() -> Vec3 {
    Vec3::basis(2)
}

/// A solve described in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(rename = "box")]
    pub bounds: BoxBounds,
    pub h: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    /// Manufactured field supplying the constraint data.
    pub field: String,
    /// Overrides the field's default material.
    #[serde(default)]
    pub material: Option<MaterialSpec>,
    /// Normal of the interface through the origin.
    #[serde(default = "default_normal")]
    pub normal: Vec3,
    #[serde(default)]
    pub b: BodyForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub assemble_s: f64,
    pub solve_s: f64,
}

/// Summary written next to the nodal solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub nodes: usize,
    pub free_nodes: usize,
    pub unknowns: usize,
    pub delta: f64,
    pub residuals: ResidualReport,
    pub condition: f64,
    /// Max-norm distance from the manufactured field over all nodes.
    pub max_error: f64,
    pub timings: Timings,
}

#[derive(Debug, Clone)]
pub struct SolveRun {
    pub grid: BoxGrid,
    pub solution: Solution,
    pub report: SolveReport,
}

/// Builds, assembles and solves the configured problem.
pub fn run_solve(cfg: &SolveConfig) -> Result<SolveRun, SolverError> {
    let name: ManufacturedName = cfg.field.parse()?;
    let iface = PlanarInterface::new(Vec3::ZERO, cfg.normal)?;
    let material = cfg.material.map(|m| m.build(iface)).transpose()?;
    let case = build_manufactured(name, iface, material)?;
    let grid = build_grid(cfg.bounds.lo, cfg.bounds.hi, cfg.h, cfg.ratio, case.material.interface().copied())?;
    let start = Instant::now();
    let opr = assemble(&grid, &case.material);
    let assemble_s = start.elapsed().as_secs_f64();
    let g = grid.sample(&case.field);
    let b = cfg.b.nodal(&grid, &case.material, &case.field);
    let start = Instant::now();
    let solution = solve_equilibrium(&opr, &b, &g)?;
    let solve_s = start.elapsed().as_secs_f64();
    let max_error = solution.u.iter().zip(&g).map(|(a, e)| (*a - *e).max_abs()).fold(0.0, f64::max);
    let report = SolveReport {
        nodes: grid.len(),
        free_nodes: opr.free.len(),
        unknowns: 3 * opr.free.len(),
        delta: grid.delta(),
        residuals: solution.residuals,
        condition: solution.condition,
        max_error,
        timings: Timings { assemble_s, solve_s },
    };
    Ok(SolveRun { grid, solution, report })
}
