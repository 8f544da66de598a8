//! Symmetric 3x3 matrices, eigen-decomposition, the angle operator
//! `F(M) = Σ arctan λ_i`, the determinant, and their first and second
//! derivatives in matrix space.

use crate::linalg::{self, V3};
use crate::taylor::Scalar;
use std::f64::consts::PI;

/// Index order of the six independent components.
pub const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

const COALESCE: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SymMat3 {
    pub m11: f64,
    pub m12: f64,
    pub m13: f64,
    pub m22: f64,
    pub m23: f64,
    pub m33: f64,
}

impl SymMat3 {
    pub fn new(m11: f64, m12: f64, m13: f64, m22: f64, m23: f64, m33: f64) -> Self {
        SymMat3 {
            m11,
            m12,
            m13,
            m22,
            m23,
            m33,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::diag(1.0, 1.0, 1.0)
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Self::new(a, 0.0, 0.0, b, 0.0, c)
    }

    /// Builds from a function of `(i, j)` evaluated on the upper triangle.
    pub fn from_fn(f: impl Fn(usize, usize) -> f64) -> Self {
        Self::new(f(0, 0), f(0, 1), f(0, 2), f(1, 1), f(1, 2), f(2, 2))
    }

    /// Symmetric part of a full matrix.
    pub fn from_full(a: &[[f64; 3]; 3]) -> Self {
        Self::from_fn(|i, j| 0.5 * (a[i][j] + a[j][i]))
    }

    pub fn outer(a: &V3) -> Self {
        Self::from_fn(|i, j| a[i] * a[j])
    }

    /// `a bᵀ + b aᵀ`
    pub fn sym_outer(a: &V3, b: &V3) -> Self {
        Self::from_fn(|i, j| a[i] * b[j] + a[j] * b[i])
    }

    /// Unit direction of the `p`-th independent component (off-diagonal
    /// directions carry both entries).
    pub fn unit(p: usize) -> Self {
        let (i, j) = PAIRS[p];
        let mut m = [[0.0; 3]; 3];
        m[i][j] = 1.0;
        m[j][i] = 1.0;
        Self::from_fn(|a, b| m[a][b])
    }

    pub fn comps(&self) -> [f64; 6] {
        [self.m11, self.m22, self.m33, self.m12, self.m13, self.m23]
    }

    pub fn from_comps(c: &[f64; 6]) -> Self {
        Self::new(c[0], c[3], c[4], c[1], c[5], c[2])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.m11,
            (0, 1) => self.m12,
            (0, 2) => self.m13,
            (1, 1) => self.m22,
            (1, 2) => self.m23,
            _ => self.m33,
        }
    }

    pub fn to_full(&self) -> [[f64; 3]; 3] {
        let mut a = [[0.0; 3]; 3];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        a
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::from_fn(|i, j| self.get(i, j) + o.get(i, j))
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::from_fn(|i, j| self.get(i, j) - o.get(i, j))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_fn(|i, j| s * self.get(i, j))
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22 + self.m33
    }

    pub fn sigma2(&self) -> f64 {
        self.m11 * self.m22 + self.m11 * self.m33 + self.m22 * self.m33
            - self.m12 * self.m12
            - self.m13 * self.m13
            - self.m23 * self.m23
    }

    pub fn det(&self) -> f64 {
        self.m11 * (self.m22 * self.m33 - self.m23 * self.m23)
            - self.m12 * (self.m12 * self.m33 - self.m23 * self.m13)
            + self.m13 * (self.m12 * self.m23 - self.m22 * self.m13)
    }

    /// Cofactor matrix (equal to the adjugate for symmetric input).
    pub fn cof(&self) -> Self {
        Self::new(
            self.m22 * self.m33 - self.m23 * self.m23,
            self.m13 * self.m23 - self.m12 * self.m33,
            self.m12 * self.m23 - self.m13 * self.m22,
            self.m11 * self.m33 - self.m13 * self.m13,
            self.m12 * self.m13 - self.m11 * self.m23,
            self.m11 * self.m22 - self.m12 * self.m12,
        )
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(self.cof().scale(1.0 / d))
    }

    pub fn apply(&self, v: &V3) -> V3 {
        [
            self.m11 * v[0] + self.m12 * v[1] + self.m13 * v[2],
            self.m12 * v[0] + self.m22 * v[1] + self.m23 * v[2],
            self.m13 * v[0] + self.m23 * v[1] + self.m33 * v[2],
        ]
    }

    /// `aᵀ M b`
    pub fn bilin(&self, a: &V3, b: &V3) -> f64 {
        linalg::dot(a, &self.apply(b))
    }

    /// `tr(A B)` for symmetric `A`, `B` (the Frobenius pairing).
    pub fn dot(&self, o: &Self) -> f64 {
        self.m11 * o.m11
            + self.m22 * o.m22
            + self.m33 * o.m33
            + 2.0 * (self.m12 * o.m12 + self.m13 * o.m13 + self.m23 * o.m23)
    }

    /// Full (generally non-symmetric) product.
    pub fn matmul(&self, o: &Self) -> [[f64; 3]; 3] {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.get(i, k) * o.get(k, j)).sum();
            }
        }
        r
    }

    /// `Qᵀ M Q` where the columns of `Q` are the given vectors.
    pub fn in_frame(&self, q: &[V3; 3]) -> Self {
        Self::from_fn(|i, j| self.bilin(&q[i], &q[j]))
    }

    pub fn max_abs(&self) -> f64 {
        self.comps().iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Infinity norm (max row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..3)
            .map(|i| (0..3).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps().iter().all(|v| v.is_finite())
    }

    pub fn to_generic<T: Scalar>(&self, like: &T) -> GMat<T> {
        std::array::from_fn(|i| std::array::from_fn(|j| like.constant_like(self.get(i, j))))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Spectral3 {
    /// Ascending.
    pub values: [f64; 3],
    /// Unit eigenvectors, `vectors[k]` belongs to `values[k]`.
    pub vectors: [V3; 3],
}

impl Spectral3 {
    pub fn reconstruct(&self) -> SymMat3 {
        (0..3).fold(SymMat3::zero(), |acc, k| {
            acc.add(&SymMat3::outer(&self.vectors[k]).scale(self.values[k]))
        })
    }
}

fn sign_convention(v: V3) -> V3 {
    for c in v {
        if c.abs() > 1e-14 {
            return if c < 0.0 { linalg::scale(&v, -1.0) } else { v };
        }
    }
    v
}

fn jacobi(m: &SymMat3) -> ([f64; 3], [V3; 3]) {
    let mut a = m.to_full();
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..50 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        let diag = a[0][0].abs() + a[1][1].abs() + a[2][2].abs();
        if off <= f64::EPSILON * 1e-3 * diag || off == 0.0 {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let vals = [a[0][0], a[1][1], a[2][2]];
    let cols = [
        [v[0][0], v[1][0], v[2][0]],
        [v[0][1], v[1][1], v[2][1]],
        [v[0][2], v[1][2], v[2][2]],
    ];
    (vals, cols)
}

fn cardano(m: &SymMat3) -> [f64; 3] {
    let q = m.trace() / 3.0;
    let p1 = m.m12 * m.m12 + m.m13 * m.m13 + m.m23 * m.m23;
    let p2 = (m.m11 - q).powi(2) + (m.m22 - q).powi(2) + (m.m33 - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q, q, q];
    }
    let b = m.sub(&SymMat3::diag(q, q, q)).scale(1.0 / p);
    let r = (b.det() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l3 = q + 2.0 * p * phi.cos();
    let l1 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    [l1, 3.0 * q - l1 - l3, l3]
}

fn null_vector(m: &SymMat3, lam: f64) -> V3 {
    let a = m.sub(&SymMat3::diag(lam, lam, lam)).to_full();
    let c = [
        linalg::cross(&a[0], &a[1]),
        linalg::cross(&a[0], &a[2]),
        linalg::cross(&a[1], &a[2]),
    ];
    let best = c
        .iter()
        .max_by(|x, y| linalg::norm(x).total_cmp(&linalg::norm(y)))
        .unwrap();
    linalg::normalize(best)
}

/// Eigen-decomposition: closed-form roots with a Jacobi fallback for clustered
/// spectra or poor residuals.
pub fn eig3(m: &SymMat3) -> Spectral3 {
    let scale = m.max_abs();
    if scale == 0.0 {
        return Spectral3 {
            values: [0.0; 3],
            vectors: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        };
    }
    let l = cardano(m);
    let gap = (l[1] - l[0]).min(l[2] - l[1]);
    let mut out = None;
    if gap > 1e-3 * scale {
        let v0 = null_vector(m, l[0]);
        let v2 = null_vector(m, l[2]);
        let v2 = linalg::normalize(&linalg::axpy(&v2, -linalg::dot(&v2, &v0), &v0));
        let v1 = linalg::cross(&v2, &v0);
        let vecs = [v0, v1, v2];
        let resid = (0..3)
            .map(|k| {
                linalg::norm(&linalg::sub(
                    &m.apply(&vecs[k]),
                    &linalg::scale(&vecs[k], l[k]),
                ))
            })
            .fold(0.0, f64::max);
        if resid <= 1e-13 * scale {
            let vals = [
                m.bilin(&v0, &v0),
                m.bilin(&v1, &v1),
                m.bilin(&v2, &v2),
            ];
            out = Some((vals, vecs));
        }
    }
    let (vals, vecs) = out.unwrap_or_else(|| jacobi(m));
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    Spectral3 {
        values: [vals[idx[0]], vals[idx[1]], vals[idx[2]]],
        vectors: [
            sign_convention(vecs[idx[0]]),
            sign_convention(vecs[idx[1]]),
            sign_convention(vecs[idx[2]]),
        ],
    }
}

/// `F(M) = Σ arctan λ_i`.
pub fn slag_angle(m: &SymMat3) -> f64 {
    let (s1, s2, s3) = (m.trace(), m.sigma2(), m.det());
    angle_from_sigmas(s1, s2, s3)
}

fn angle_from_sigmas(s1: f64, s2: f64, s3: f64) -> f64 {
    let t = (s1 - s3).atan2(1.0 - s2);
    if t < -PI / 2.0 && s1 > 0.0 && s2 > 0.0 && s3 > 0.0 {
        t + 2.0 * PI
    } else if t > PI / 2.0 && s1 < 0.0 && s2 > 0.0 && s3 < 0.0 {
        t - 2.0 * PI
    } else {
        t
    }
}

/// First derivative (as a symmetric matrix of partials `F_ij`) and second
/// derivative (symmetric 6x6 over [`PAIRS`], entries `F_ij,kl`).
#[derive(Clone, Copy, Debug)]
pub struct MatDeriv {
    pub first: SymMat3,
    pub second: [[f64; 6]; 6],
}

fn mult(p: usize) -> f64 {
    if p < 3 {
        1.0
    } else {
        2.0
    }
}

impl MatDeriv {
    /// `DF[E] = Σ F_ij E_ij`.
    pub fn first_apply(&self, e: &SymMat3) -> f64 {
        self.first.dot(e)
    }

    /// `D²F[E, E'] = Σ F_ij,kl E_ij E'_kl`.
    pub fn bilinear(&self, e: &SymMat3, f: &SymMat3) -> f64 {
        let (a, b) = (e.comps(), f.comps());
        let mut s = 0.0;
        for p in 0..6 {
            for q in 0..6 {
                s += mult(p) * mult(q) * self.second[p][q] * a[p] * b[q];
            }
        }
        s
    }

    /// Matrix `Σ_kl F_ij,kl E_kl`, i.e. `E' ↦ D²F[E', E]` as a symmetric matrix.
    pub fn apply(&self, e: &SymMat3) -> SymMat3 {
        let a = e.comps();
        let mut r = [0.0; 6];
        for (p, rp) in r.iter_mut().enumerate() {
            *rp = (0..6).map(|q| mult(q) * self.second[p][q] * a[q]).sum();
        }
        SymMat3::from_comps(&r)
    }

    /// Entry `F_ij,kl` for arbitrary index order.
    pub fn entry(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let pos = |a: usize, b: usize| {
            PAIRS
                .iter()
                .position(|&(x, y)| (x, y) == (a.min(b), a.max(b)))
                .unwrap()
        };
        self.second[pos(i, j)][pos(k, l)]
    }

    fn from_bilinear(first: SymMat3, bil: impl Fn(&SymMat3, &SymMat3) -> f64) -> Self {
        let units: Vec<SymMat3> = (0..6).map(SymMat3::unit).collect();
        let mut second = [[0.0; 6]; 6];
        for p in 0..6 {
            for q in p..6 {
                let v = bil(&units[p], &units[q]) / (mult(p) * mult(q));
                second[p][q] = v;
                second[q][p] = v;
            }
        }
        MatDeriv { first, second }
    }
}

fn dd_fprime(a: f64, b: f64) -> f64 {
    if (a - b).abs() < COALESCE {
        let m = 0.5 * (a + b);
        -2.0 * m / (1.0 + m * m).powi(2)
    } else {
        (1.0 / (1.0 + a * a) - 1.0 / (1.0 + b * b)) / (a - b)
    }
}

/// Derivatives of `F` by the Daleckii–Krein formula.
pub fn slag_deriv(m: &SymMat3) -> MatDeriv {
    let sp = eig3(m);
    let l = sp.values;
    let u = sp.vectors;
    let first = (0..3).fold(SymMat3::zero(), |acc, k| {
        acc.add(&SymMat3::outer(&u[k]).scale(1.0 / (1.0 + l[k] * l[k])))
    });
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = dd_fprime(l[i], l[j]);
        }
    }
    MatDeriv::from_bilinear(first, |e, f| {
        let et = e.in_frame(&u);
        let ft = f.in_frame(&u);
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += g[i][j] * et.get(i, j) * ft.get(i, j);
            }
        }
        s
    })
}

/// Determinant, cofactor, and exact derivatives of the determinant.
pub fn det_calculus(m: &SymMat3) -> (f64, SymMat3, MatDeriv) {
    let cof = m.cof();
    let d = MatDeriv::from_bilinear(cof, |e, f| det_second(m, e, f));
    (m.det(), cof, d)
}

/// `D²det(M)[E, E'] = tr(M (cof(E+E') − cof E − cof E'))`.
pub fn det_second(m: &SymMat3, e: &SymMat3, f: &SymMat3) -> f64 {
    let c = e.add(f).cof().sub(&e.cof()).sub(&f.cof());
    m.dot(&c)
}

/// Full matrices over a generic scalar.
pub type GMat<T> = [[T; 3]; 3];

pub fn g_from_sym<T: Scalar>(m: &SymMat3, like: &T) -> GMat<T> {
    m.to_generic(like)
}

pub fn g_trace<T: Scalar>(m: &GMat<T>) -> T {
    m[0][0].add(&m[1][1]).add(&m[2][2])
}

/// `tr(A B)`.
pub fn g_dot<T: Scalar>(a: &GMat<T>, b: &GMat<T>) -> T {
    let mut s = a[0][0].mul(&b[0][0]);
    for i in 0..3 {
        for j in 0..3 {
            if i + j > 0 {
                s = s.add(&a[i][j].mul(&b[j][i]));
            }
        }
    }
    s
}

pub fn g_sigma2<T: Scalar>(m: &GMat<T>) -> T {
    let t = g_trace(m);
    t.mul(&t).sub(&g_dot(m, m)).scale(0.5)
}

pub fn g_cof<T: Scalar>(m: &GMat<T>) -> GMat<T> {
    let c = |a: usize, b: usize, c: usize, d: usize| m[a][b].mul(&m[c][d]);
    let e00 = c(1, 1, 2, 2).sub(&c(1, 2, 2, 1));
    let e01 = c(1, 2, 2, 0).sub(&c(1, 0, 2, 2));
    let e02 = c(1, 0, 2, 1).sub(&c(1, 1, 2, 0));
    let e10 = c(0, 2, 2, 1).sub(&c(0, 1, 2, 2));
    let e11 = c(0, 0, 2, 2).sub(&c(0, 2, 2, 0));
    let e12 = c(0, 1, 2, 0).sub(&c(0, 0, 2, 1));
    let e20 = c(0, 1, 1, 2).sub(&c(0, 2, 1, 1));
    let e21 = c(0, 2, 1, 0).sub(&c(0, 0, 1, 2));
    let e22 = c(0, 0, 1, 1).sub(&c(0, 1, 1, 0));
    [[e00, e01, e02], [e10, e11, e12], [e20, e21, e22]]
}

pub fn g_det<T: Scalar>(m: &GMat<T>) -> T {
    let c = g_cof(m);
    m[0][0]
        .mul(&c[0][0])
        .add(&m[0][1].mul(&c[0][1]))
        .add(&m[0][2].mul(&c[0][2]))
}

pub fn g_add<T: Scalar>(a: &GMat<T>, b: &GMat<T>) -> GMat<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j].add(&b[i][j])))
}

pub fn g_scale<T: Scalar>(a: &GMat<T>, s: &T) -> GMat<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j].mul(s)))
}

pub fn g_apply<T: Scalar>(a: &GMat<T>, v: &[T; 3]) -> [T; 3] {
    std::array::from_fn(|i| {
        a[i][0]
            .mul(&v[0])
            .add(&a[i][1].mul(&v[1]))
            .add(&a[i][2].mul(&v[2]))
    })
}

pub fn g_vdot<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0].mul(&b[0]).add(&a[1].mul(&b[1])).add(&a[2].mul(&b[2]))
}

pub fn g_value<T: Scalar>(a: &GMat<T>) -> SymMat3 {
    SymMat3::from_fn(|i, j| 0.5 * (a[i][j].value() + a[j][i].value()))
}

/// Angle operator over a generic scalar, continued from the base value.
pub fn g_angle<T: Scalar>(m: &GMat<T>) -> T {
    let s1 = g_trace(m);
    let s2 = g_sigma2(m);
    let s3 = g_det(m);
    let base = angle_from_sigmas(s1.value(), s2.value(), s3.value());
    let y = s1.sub(&s3);
    let x = s2.neg().shift(1.0);
    let t = T::atan2(&y, &x);
    let off = base - t.value();
    t.shift(off)
}

/// Invariant coefficients `a = 1 − σ₂`, `b = σ₁ − σ₃` of `M + tE` as
/// polynomials in `t`, `(a0, a1, a2, b0, b1, b2)` (the `t³` term of `b` is not
/// needed for second derivatives).
fn g_ab<T: Scalar>(m: &GMat<T>, e: &GMat<T>) -> [T; 6] {
    let trm = g_trace(m);
    let tre = g_trace(e);
    let s21 = tre.mul(&trm).sub(&g_dot(m, e));
    let cm = g_cof(m);
    let ce = g_cof(e);
    let a0 = g_sigma2(m).neg().shift(1.0);
    let a1 = s21.neg();
    let a2 = g_sigma2(e).neg();
    let b0 = trm.sub(&g_det(m));
    let b1 = tre.sub(&g_dot(&cm, e));
    let b2 = g_dot(m, &ce).neg();
    [a0, a1, a2, b0, b1, b2]
}

/// `DF(M)` over a generic scalar:
/// `[a(I − cof M) + b(tr M · I − M)] / (a² + b²)`.
pub fn g_dangle<T: Scalar>(m: &GMat<T>) -> GMat<T> {
    let a = g_sigma2(m).neg().shift(1.0);
    let b = g_trace(m).sub(&g_det(m));
    let q = a.mul(&a).add(&b.mul(&b)).recip();
    let cm = g_cof(m);
    let tr = g_trace(m);
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let id = if i == j { 1.0 } else { 0.0 };
            let p = cm[j][i].neg().shift(id).mul(&a);
            let r = if i == j {
                tr.sub(&m[j][i])
            } else {
                m[j][i].neg()
            };
            p.add(&r.mul(&b)).mul(&q)
        })
    })
}

/// `D²F(M)[E, E]` over a generic scalar.
pub fn g_d2angle<T: Scalar>(m: &GMat<T>, e: &GMat<T>) -> T {
    let [a0, a1, a2, b0, b1, b2] = g_ab(m, e);
    let n = a0.mul(&b1).sub(&b0.mul(&a1));
    let np = a0.mul(&b2).sub(&b0.mul(&a2)).scale(2.0);
    let q = a0.mul(&a0).add(&b0.mul(&b0));
    let qp = a0.mul(&a1).add(&b0.mul(&b1)).scale(2.0);
    np.mul(&q).sub(&n.mul(&qp)).div(&q.mul(&q))
}

/// `D²F(M)[E, E']` by polarization.
pub fn g_d2angle_bilinear<T: Scalar>(m: &GMat<T>, e: &GMat<T>, f: &GMat<T>) -> T {
    let sum: GMat<T> = std::array::from_fn(|i| std::array::from_fn(|j| e[i][j].add(&f[i][j])));
    let dif: GMat<T> = std::array::from_fn(|i| std::array::from_fn(|j| e[i][j].sub(&f[i][j])));
    g_d2angle(m, &sum).sub(&g_d2angle(m, &dif)).scale(0.25)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_sym(u: &V3, v: &V3) -> SymMat3 {
        SymMat3::new(
            4.0 * u[0] - 2.0,
            2.0 * u[1] - 1.0,
            2.0 * u[2] - 1.0,
            4.0 * v[0] - 2.0,
            2.0 * v[1] - 1.0,
            4.0 * v[2] - 2.0,
        )
    }

    #[test]
    fn diagonal_eigen() {
        let s = eig3(&SymMat3::diag(3.0, 1.0, 2.0));
        assert_eq!(s.values, [1.0, 2.0, 3.0]);
        assert_eq!(s.vectors[0], [0.0, 1.0, 0.0]);
        assert_eq!(s.vectors[1], [0.0, 0.0, 1.0]);
        assert_eq!(s.vectors[2], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn near_triple_stays_orthonormal() {
        let s = eig3(&SymMat3::diag(1.0, 1.0, 1.0 + 1e-13));
        for i in 0..3 {
            for j in 0..3 {
                let d = linalg::dot(&s.vectors[i], &s.vectors[j]);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn angle_matches_eigen_sum() {
        let pts = linalg::r3_sequence(400, 0.1);
        for w in pts.chunks(2) {
            let m = random_sym(&w[0], &w[1]).scale(3.0);
            let s = eig3(&m);
            let direct: f64 = s.values.iter().map(|l| l.atan()).sum();
            assert!((slag_angle(&m) - direct).abs() < 1e-12, "{m:?}");
        }
        assert!((slag_angle(&SymMat3::diag(50.0, 40.0, 30.0)) - (50f64.atan() + 40f64.atan() + 30f64.atan())).abs() < 1e-12);
        assert!((slag_angle(&SymMat3::diag(-50.0, -40.0, -30.0)) + (50f64.atan() + 40f64.atan() + 30f64.atan())).abs() < 1e-12);
    }

    #[test]
    fn eigen_free_first_derivative_matches_spectral() {
        let pts = linalg::r3_sequence(60, 0.7);
        for w in pts.chunks(2) {
            let m = random_sym(&w[0], &w[1]);
            let d = slag_deriv(&m);
            let g = g_dangle(&m.to_generic(&0.0));
            for i in 0..3 {
                for j in 0..3 {
                    assert!((g[i][j] - d.first.get(i, j)).abs() < 1e-12);
                }
            }
            let e = random_sym(&w[1], &w[0]);
            let f = random_sym(&w[0], &w[0]);
            let gb = g_d2angle_bilinear(&m.to_generic(&0.0), &e.to_generic(&0.0), &f.to_generic(&0.0));
            assert!((gb - d.bilinear(&e, &f)).abs() < 1e-11 * (1.0 + gb.abs()));
        }
    }

    #[test]
    fn det_cofactor_diag() {
        let (d, c, _) = det_calculus(&SymMat3::diag(1.0, 2.0, 3.0));
        assert_eq!(d, 6.0);
        assert_eq!(c, SymMat3::diag(6.0, 3.0, 2.0));
    }
}
