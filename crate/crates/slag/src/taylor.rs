//! Scalar abstraction and truncated multivariate Taylor arithmetic in three
//! variables.
//!
//! A [`Jet`] of order `n` stores the coefficients `c_α` of `Σ c_α h^α` for all
//! multi-indices with `|α| ≤ n`, in graded order. Products, quotients and the
//! elementary functions used by the angle operator are exact up to truncation,
//! so derivatives extracted from a jet carry only rounding error.

use crate::linalg::V3;
use crate::symtensor::SymMat3;
use std::sync::OnceLock;

pub const MAX_ORDER: usize = 9;
pub const NMON: usize = 220;

/// Number of monomials of total degree `≤ n` in three variables.
pub const fn count(n: usize) -> usize {
    (n + 1) * (n + 2) * (n + 3) / 6
}

pub trait Scalar: Clone + Send + Sync + std::fmt::Debug {
    fn constant_like(&self, v: f64) -> Self;
    fn value(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, s: f64) -> Self;
    fn shift(&self, s: f64) -> Self;
    fn recip(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn atan(&self) -> Self;

    fn div(&self, o: &Self) -> Self {
        self.mul(&o.recip())
    }

    fn square(&self) -> Self {
        self.mul(self)
    }

    /// Two-argument arctangent continued from the base value.
    fn atan2(y: &Self, x: &Self) -> Self {
        let (y0, x0) = (y.value(), x.value());
        let base = y0.atan2(x0);
        let num = x.scale(y0).neg().add(&y.scale(x0));
        let den = x.scale(x0).add(&y.scale(y0));
        num.div(&den).atan().shift(base)
    }
}

impl Scalar for f64 {
    fn constant_like(&self, v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
    fn shift(&self, s: f64) -> Self {
        self + s
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn atan(&self) -> Self {
        f64::atan(*self)
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn atan2(y: &Self, x: &Self) -> Self {
        y.atan2(*x)
    }
}

struct Tables {
    exps: Vec<[u8; 3]>,
    index: [[[u16; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1],
    /// (i, j, k) with `mon_i · mon_j = mon_k`, sorted by degree of `k`.
    mul: Vec<(u16, u16, u16)>,
    /// `mul_end[d]` = number of entries whose product degree is `≤ d`.
    mul_end: [usize; MAX_ORDER + 1],
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut exps = Vec::with_capacity(NMON);
        for d in 0..=MAX_ORDER {
            for a in (0..=d).rev() {
                for b in (0..=d - a).rev() {
                    exps.push([a as u8, b as u8, (d - a - b) as u8]);
                }
            }
        }
        let mut index = [[[u16::MAX; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1];
        for (i, e) in exps.iter().enumerate() {
            index[e[0] as usize][e[1] as usize][e[2] as usize] = i as u16;
        }
        let deg = |e: &[u8; 3]| (e[0] + e[1] + e[2]) as usize;
        let mut mul = Vec::new();
        let mut mul_end = [0usize; MAX_ORDER + 1];
        for d in 0..=MAX_ORDER {
            for (i, ei) in exps.iter().enumerate() {
                for (j, ej) in exps.iter().enumerate() {
                    if deg(ei) + deg(ej) != d {
                        continue;
                    }
                    let k = index[(ei[0] + ej[0]) as usize][(ei[1] + ej[1]) as usize]
                        [(ei[2] + ej[2]) as usize];
                    mul.push((i as u16, j as u16, k));
                }
            }
            mul_end[d] = mul.len();
        }
        Tables {
            exps,
            index,
            mul,
            mul_end,
        }
    })
}

/// Truncated Taylor polynomial in three variables about a base point.
#[derive(Clone)]
pub struct Jet {
    n: usize,
    c: Vec<f64>,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Jet(order {}, {:?})", self.n, &self.c[..self.c.len().min(10)])
    }
}

impl Jet {
    pub fn constant(v: f64, n: usize) -> Jet {
        assert!(n <= MAX_ORDER);
        let mut c = vec![0.0; count(n)];
        c[0] = v;
        Jet { n, c }
    }

    /// The coordinate functions `x_i + h_i`.
    pub fn coords(x: &V3, n: usize) -> [Jet; 3] {
        let mk = |i: usize| {
            let mut j = Jet::constant(x[i], n);
            if n >= 1 {
                j.c[1 + i] = 1.0;
            }
            j
        };
        [mk(0), mk(1), mk(2)]
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn coef(&self, e: [usize; 3]) -> f64 {
        if e[0] + e[1] + e[2] > self.n {
            return 0.0;
        }
        self.c[tables().index[e[0]][e[1]][e[2]] as usize]
    }

    /// Partial derivative `∂^α f` at the base point.
    pub fn partial(&self, e: [usize; 3]) -> f64 {
        let fact = |k: usize| (1..=k).product::<usize>() as f64;
        self.coef(e) * fact(e[0]) * fact(e[1]) * fact(e[2])
    }

    pub fn grad(&self) -> V3 {
        [
            self.partial([1, 0, 0]),
            self.partial([0, 1, 0]),
            self.partial([0, 0, 1]),
        ]
    }

    pub fn hess(&self) -> SymMat3 {
        SymMat3::from_fn(|i, j| {
            let mut e = [0usize; 3];
            e[i] += 1;
            e[j] += 1;
            self.partial(e)
        })
    }

    pub fn truncate(&self, n: usize) -> Jet {
        let n = n.min(self.n);
        Jet {
            n,
            c: self.c[..count(n)].to_vec(),
        }
    }

    /// Derivative with respect to variable `v`; the order drops by one.
    pub fn deriv(&self, v: usize) -> Jet {
        assert!(self.n >= 1, "derivative of an order-0 jet");
        let t = tables();
        let n = self.n - 1;
        let mut c = vec![0.0; count(n)];
        for (k, ck) in c.iter_mut().enumerate() {
            let mut e = t.exps[k];
            e[v] += 1;
            let src = t.index[e[0] as usize][e[1] as usize][e[2] as usize] as usize;
            *ck = self.c[src] * e[v] as f64;
        }
        Jet { n, c }
    }

    fn nilpotent(&self) -> Jet {
        let mut j = self.clone();
        j.c[0] = 0.0;
        j
    }

    /// Evaluates `Σ a_k (self - self_0)^k`.
    fn compose(&self, a: &[f64]) -> Jet {
        let g = self.nilpotent();
        let n = self.n.min(a.len() - 1);
        let mut r = Jet::constant(a[n], self.n);
        for k in (0..n).rev() {
            r = r.mul(&g);
            r.c[0] += a[k];
        }
        r
    }
}

impl Scalar for Jet {
    fn constant_like(&self, v: f64) -> Self {
        Jet::constant(v, self.n)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn add(&self, o: &Self) -> Self {
        let n = self.n.min(o.n);
        let mut c = vec![0.0; count(n)];
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = self.c[k] + o.c[k];
        }
        Jet { n, c }
    }
    fn sub(&self, o: &Self) -> Self {
        let n = self.n.min(o.n);
        let mut c = vec![0.0; count(n)];
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = self.c[k] - o.c[k];
        }
        Jet { n, c }
    }
    fn mul(&self, o: &Self) -> Self {
        let n = self.n.min(o.n);
        let t = tables();
        let mut c = vec![0.0; count(n)];
        for &(i, j, k) in &t.mul[..t.mul_end[n]] {
            c[k as usize] += self.c[i as usize] * o.c[j as usize];
        }
        Jet { n, c }
    }
    fn neg(&self) -> Self {
        self.scale(-1.0)
    }
    fn scale(&self, s: f64) -> Self {
        let mut r = self.clone();
        for v in r.c.iter_mut() {
            *v *= s;
        }
        r
    }
    fn shift(&self, s: f64) -> Self {
        let mut r = self.clone();
        r.c[0] += s;
        r
    }
    fn recip(&self) -> Self {
        let g0 = self.c[0];
        let mut a = vec![0.0; self.n + 1];
        let mut p = 1.0 / g0;
        for ak in a.iter_mut() {
            *ak = p;
            p *= -1.0 / g0;
        }
        self.compose(&a)
    }
    fn sqrt(&self) -> Self {
        let g0 = self.c[0];
        let s = g0.sqrt();
        let mut a = vec![0.0; self.n + 1];
        let mut binom = 1.0;
        let mut pw = s;
        for (k, ak) in a.iter_mut().enumerate() {
            *ak = binom * pw;
            binom *= (0.5 - k as f64) / (k as f64 + 1.0);
            pw /= g0;
        }
        self.compose(&a)
    }
    fn atan(&self) -> Self {
        let g0 = self.c[0];
        let q0 = 1.0 + g0 * g0;
        let p1 = 2.0 * g0;
        let mut c = vec![0.0; self.n + 1];
        for k in 0..=self.n {
            let prev1 = if k >= 1 { c[k - 1] } else { 0.0 };
            let prev2 = if k >= 2 { c[k - 2] } else { 0.0 };
            c[k] = if k == 0 {
                1.0 / q0
            } else {
                -(p1 * prev1 + prev2) / q0
            };
        }
        let mut a = vec![0.0; self.n + 1];
        a[0] = g0.atan();
        for k in 1..=self.n {
            a[k] = c[k - 1] / k as f64;
        }
        self.compose(&a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_sizes() {
        assert_eq!(count(MAX_ORDER), NMON);
        let t = tables();
        assert_eq!(t.exps.len(), NMON);
        assert_eq!(t.mul_end[MAX_ORDER], 5005);
    }

    #[test]
    fn product_rule_on_polynomials() {
        let x = [0.3, -0.2, 0.1];
        let [a, b, c] = Jet::coords(&x, 4);
        // f = a^2 b c
        let f = a.mul(&a).mul(&b).mul(&c);
        let d = f.partial([2, 1, 1]);
        assert!((d - 2.0).abs() < 1e-14);
        let d = f.partial([1, 0, 0]);
        assert!((d - 2.0 * x[0] * x[1] * x[2]).abs() < 1e-15);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let x = [0.4, 0.0, 0.0];
        let [a, _, _] = Jet::coords(&x, 6);
        let r = a.shift(1.0).recip();
        // d^k/dx^k (1+x)^{-1} = (-1)^k k! (1+x)^{-k-1}
        for k in 0..=6usize {
            let exact = (-1f64).powi(k as i32)
                * (1..=k).product::<usize>() as f64
                / 1.4f64.powi(k as i32 + 1);
            assert!((r.partial([k, 0, 0]) - exact).abs() < 1e-11 * exact.abs().max(1.0));
        }
        let s = a.sqrt();
        assert!((s.partial([1, 0, 0]) - 0.5 / 0.4f64.sqrt()).abs() < 1e-14);
        assert!((s.partial([2, 0, 0]) + 0.25 * 0.4f64.powf(-1.5)).abs() < 1e-13);
        let t = a.atan();
        assert!((t.partial([1, 0, 0]) - 1.0 / 1.16).abs() < 1e-15);
        assert!((t.partial([2, 0, 0]) + 0.8 / (1.16 * 1.16)).abs() < 1e-14);
        let t3 = -2.0 * (1.0 - 3.0 * 0.16) / 1.16f64.powi(3);
        assert!((t.partial([3, 0, 0]) - t3).abs() < 1e-13);
    }

    #[test]
    fn atan2_continues_branch() {
        let x = [-0.5, 0.3, 0.0];
        let [a, b, _] = Jet::coords(&x, 3);
        let t = Jet::atan2(&b, &a);
        assert!((t.value() - 0.3f64.atan2(-0.5)).abs() < 1e-15);
        let r2 = 0.25 + 0.09;
        assert!((t.partial([1, 0, 0]) + 0.3 / r2).abs() < 1e-14);
        assert!((t.partial([0, 1, 0]) + 0.5 / r2).abs() < 1e-14);
    }

    #[test]
    fn derivative_drops_order() {
        let x = [0.1, 0.2, 0.3];
        let [a, b, _] = Jet::coords(&x, 5);
        let f = a.mul(&b).mul(&b);
        let g = f.deriv(1);
        assert_eq!(g.order(), 4);
        assert!((g.value() - 2.0 * 0.1 * 0.2).abs() < 1e-15);
        assert!((g.partial([1, 1, 0]) - 2.0).abs() < 1e-15);
    }
}
