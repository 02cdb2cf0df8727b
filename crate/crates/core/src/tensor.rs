//! Fixed-size real tensors of order 1 to 4 in three dimensions.
//!
//! Index conventions for the two non-obvious contractions are pinned to the
//! identities the rest of the crate depends on:
//!
//! * [`contract_t3_mat`]: `r_i = Σ_jk K_ijk A_jk`. With `K` the half-ball
//!   moment tensor and `A = ∇v` (`A_jk = ∂v_j/∂x_k`) this is the term
//!   `K_δ ∇v` produced by `∫ z⊗z (∇v z)/|z|⁴`.
//! * [`contract_t4_t3`]: `r_i = Σ_jkl T_ijkl H_jlk`, where `H_jlk` is the
//!   Hessian `∂²v_j/∂x_l∂x_k`. Against the isotropic fourth moment this yields
//!   `2Δv + 4∇(∇·v)` before the factor one half.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3(pub [[f64; 3]; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tensor3(pub [[[f64; 3]; 3]; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tensor4(pub [[[[f64; 3]; 3]; 3]; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    /// Unit basis vector `e_{axis+1}`.
    pub fn basis(axis: usize) -> Self {
        let mut v = [0.0; 3];
        v[axis] = 1.0;
        Vec3(v)
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn cross(&self, o: &Vec3) -> Vec3 {
        let a = &self.0;
        let b = &o.0;
        Vec3([
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ])
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalized(&self) -> Vec3 {
        *self * (1.0 / self.norm())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    pub fn identity() -> Self {
        let mut m = Self::ZERO;
        for i in 0..3 {
            m.0[i][i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(d: Vec3) -> Self {
        let mut m = Self::ZERO;
        for i in 0..3 {
            m.0[i][i] = d.0[i];
        }
        m
    }

    pub fn from_rows(rows: [Vec3; 3]) -> Self {
        Mat3([rows[0].0, rows[1].0, rows[2].0])
    }

    pub fn transpose(&self) -> Mat3 {
        let mut t = Self::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        let mut r = [0.0; 3];
        for (i, ri) in r.iter_mut().enumerate() {
            *ri = self.0[i][0] * v.0[0] + self.0[i][1] * v.0[1] + self.0[i][2] * v.0[2];
        }
        Vec3(r)
    }

    pub fn mul_mat(&self, other: &Mat3) -> Mat3 {
        let mut r = Self::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                r.0[i][j] = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        r
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3(self.0[i])
    }

    /// Frobenius inner product `A : B`.
    pub fn ddot(&self, other: &Mat3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl Tensor3 {
    pub const ZERO: Tensor3 = Tensor3([[[0.0; 3]; 3]; 3]);

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().flatten().all(|v| v.is_finite())
    }

    /// Applies an orthogonal change of basis to every index:
    /// `T'_ijk = Σ Q_ia Q_jb Q_kc T_abc`.
    pub fn rotated(&self, q: &Mat3) -> Tensor3 {
        let mut out = Tensor3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let mut s = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            for c in 0..3 {
                                s += q.0[i][a] * q.0[j][b] * q.0[k][c] * self.0[a][b][c];
                            }
                        }
                    }
                    out.0[i][j][k] = s;
                }
            }
        }
        out
    }
}

impl Tensor4 {
    pub const ZERO: Tensor4 = Tensor4([[[[0.0; 3]; 3]; 3]; 3]);

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().flatten().flatten().all(|v| v.is_finite())
    }
}

pub fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    let mut m = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            m.0[i][j] = a.0[i] * b.0[j];
        }
    }
    m
}

pub fn outer3(a: &Vec3, b: &Vec3, c: &Vec3) -> Tensor3 {
    let mut t = Tensor3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                t.0[i][j][k] = a.0[i] * b.0[j] * c.0[k];
            }
        }
    }
    t
}

pub fn outer4(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> Tensor4 {
    let mut t = Tensor4::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    t.0[i][j][k][l] = a.0[i] * b.0[j] * c.0[k] * d.0[l];
                }
            }
        }
    }
    t
}

/// `r_i = Σ_jk K_ijk A_jk`.
pub fn contract_t3_mat(k: &Tensor3, a: &Mat3) -> Vec3 {
    let mut r = [0.0; 3];
    for (i, ri) in r.iter_mut().enumerate() {
        let mut s = 0.0;
        for j in 0..3 {
            for l in 0..3 {
                s += k.0[i][j][l] * a.0[j][l];
            }
        }
        *ri = s;
    }
    Vec3(r)
}

/// `r_ij = Σ_kl T_ijkl A_lk`.
pub fn contract_t4_mat(t: &Tensor4, a: &Mat3) -> Mat3 {
    let mut r = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    s += t.0[i][j][k][l] * a.0[l][k];
                }
            }
            r.0[i][j] = s;
        }
    }
    r
}

/// `r_i = Σ_jkl T_ijkl H_jlk`, the contraction of a fourth-order moment with
/// a vector-field Hessian `H_jlk = ∂²v_j/∂x_l∂x_k`.
pub fn contract_t4_t3(t: &Tensor4, h: &Tensor3) -> Vec3 {
    let mut r = [0.0; 3];
    for (i, ri) in r.iter_mut().enumerate() {
        let mut s = 0.0;
        for j in 0..3 {
            let hj = Mat3(h.0[j]);
            let c = contract_t4_mat(t, &hj);
            s += c.0[i][j];
        }
        *ri = s;
    }
    Vec3(r)
}

macro_rules! impl_linear_ops {
    ($t:ty, $zero:expr, |$s:ident, $o:ident, $f:ident| $map:expr) => {
        impl Add for $t {
            type Output = $t;
            fn add(mut self, rhs: $t) -> $t {
                self += rhs;
                self
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(mut self, rhs: $t) -> $t {
                self -= rhs;
                self
            }
        }
        impl AddAssign for $t {
            fn add_assign(&mut self, rhs: $t) {
                let $s = self;
                let $o = rhs;
                let $f = |a: &mut f64, b: f64| *a += b;
                $map
            }
        }
        impl SubAssign for $t {
            fn sub_assign(&mut self, rhs: $t) {
                let $s = self;
                let $o = rhs;
                let $f = |a: &mut f64, b: f64| *a -= b;
                $map
            }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, k: f64) -> $t {
                let mut out = $zero;
                let $s = &mut out;
                let $o = self;
                let $f = |a: &mut f64, b: f64| *a = b * k;
                $map;
                out
            }
        }
        impl Mul<$t> for f64 {
            type Output = $t;
            fn mul(self, t: $t) -> $t {
                t * self
            }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                self * -1.0
            }
        }
    };
}

impl_linear_ops!(Vec3, Vec3::ZERO, |s, o, f| {
    for i in 0..3 {
        f(&mut s.0[i], o.0[i]);
    }
});
impl_linear_ops!(Mat3, Mat3::ZERO, |s, o, f| {
    for i in 0..3 {
        for j in 0..3 {
            f(&mut s.0[i][j], o.0[i][j]);
        }
    }
});
impl_linear_ops!(Tensor3, Tensor3::ZERO, |s, o, f| {
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                f(&mut s.0[i][j][k], o.0[i][j][k]);
            }
        }
    }
});
impl_linear_ops!(Tensor4, Tensor4::ZERO, |s, o, f| {
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    f(&mut s.0[i][j][k][l], o.0[i][j][k][l]);
                }
            }
        }
    }
});

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.0[i][j][k]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        &mut self.0[i][j][k]
    }
}

impl Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (i, j, k, l): (usize, usize, usize, usize)) -> &f64 {
        &self.0[i][j][k][l]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (i, j, k, l): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.0[i][j][k][l]
    }
}
