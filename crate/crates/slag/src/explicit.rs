//! Closed-form evaluation of the explicit objects: the potential Φ and its
//! jets, the angle field Θ, the nonzero eigenvalues Λ±, the paraboloid
//! residual, the quartic of the rotation laboratory and the rotation maps.

use crate::linalg::{self, V3};
use crate::symtensor::{self, SymMat3};
use crate::taylor::{Jet, Scalar};
use crate::Error;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub eps: f64,
    pub eps_r: f64,
    /// Taylor band width; `None` means 0.2 times the smallest curvature radius
    /// of ∂K.
    pub mu: Option<f64>,
    /// Band on which injectivity of the gradient map is checked; `None` means
    /// `mu / 2`.
    pub mu_prime: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            lambda: 0.05,
            eps: 0.05,
            eps_r: 0.05,
            mu: None,
            mu_prime: None,
        }
    }
}

impl ModelParams {
    pub fn new(lambda: f64, eps: f64) -> Result<Self, Error> {
        let p = ModelParams {
            lambda,
            eps,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let ok = self.lambda > 0.0
            && self.eps > 0.0
            && self.eps_r >= 0.0
            && self.lambda.is_finite()
            && self.eps.is_finite()
            && self.eps_r.is_finite()
            && self.mu.is_none_or(|m| m > 0.0)
            && self.mu_prime.is_none_or(|m| m > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{self:?}")))
        }
    }

    /// `Θ(0) = 2 arctan 2λ`.
    pub fn theta0(&self) -> f64 {
        2.0 * (2.0 * self.lambda).atan()
    }

    pub fn c_star(&self) -> f64 {
        self.theta0() + self.eps * self.eps
    }

    pub fn c(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 - self.c_star()
    }

    pub fn theta_r(&self) -> f64 {
        self.eps_r.atan()
    }
}

/// Fully symmetric rank-3 tensor (10 components, sorted index triples).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Sym3 {
    pub c: [f64; 10],
}

/// Fully symmetric rank-4 tensor (15 components, sorted index quadruples).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Sym4 {
    pub c: [f64; 15],
}

fn idx3(i: usize, j: usize, k: usize) -> usize {
    let mut a = [i, j, k];
    a.sort_unstable();
    // 000 001 002 011 012 022 111 112 122 222
    match a {
        [0, 0, 0] => 0,
        [0, 0, 1] => 1,
        [0, 0, 2] => 2,
        [0, 1, 1] => 3,
        [0, 1, 2] => 4,
        [0, 2, 2] => 5,
        [1, 1, 1] => 6,
        [1, 1, 2] => 7,
        [1, 2, 2] => 8,
        _ => 9,
    }
}

fn idx4(i: usize, j: usize, k: usize, l: usize) -> usize {
    let mut a = [i, j, k, l];
    a.sort_unstable();
    let n = [a[0], a[1], a[2], a[3]]
        .iter()
        .fold([0usize; 3], |mut c, &v| {
            c[v] += 1;
            c
        });
    // graded position of exponent (n0, n1, n2) among degree-4 monomials
    let mut pos = 0;
    for p in (0..=4).rev() {
        for q in (0..=4 - p).rev() {
            if [p, q, 4 - p - q] == n {
                return pos;
            }
            pos += 1;
        }
    }
    unreachable!()
}

impl Sym3 {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[idx3(i, j, k)]
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut t = Sym3::default();
        for i in 0..3 {
            for j in i..3 {
                for k in j..3 {
                    t.c[idx3(i, j, k)] = f(i, j, k);
                }
            }
        }
        t
    }

    /// `Σ_k T_ijk v_k`.
    pub fn contract(&self, v: &V3) -> SymMat3 {
        SymMat3::from_fn(|i, j| (0..3).map(|k| self.get(i, j, k) * v[k]).sum())
    }

    pub fn eval(&self, a: &V3, b: &V3, c: &V3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    s += self.get(i, j, k) * a[i] * b[j] * c[k];
                }
            }
        }
        s
    }

    pub fn add(&self, o: &Self) -> Self {
        Sym3 {
            c: std::array::from_fn(|i| self.c[i] + o.c[i]),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

impl Sym4 {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.c[idx4(i, j, k, l)]
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Sym4::default();
        for i in 0..3 {
            for j in i..3 {
                for k in j..3 {
                    for l in k..3 {
                        t.c[idx4(i, j, k, l)] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    /// `Σ_kl T_ijkl a_k b_l`.
    pub fn contract2(&self, a: &V3, b: &V3) -> SymMat3 {
        SymMat3::from_fn(|i, j| {
            let mut s = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    s += self.get(i, j, k, l) * a[k] * b[l];
                }
            }
            s
        })
    }

    pub fn eval(&self, a: &V3, b: &V3, c: &V3, d: &V3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        s += self.get(i, j, k, l) * a[i] * b[j] * c[k] * d[l];
                    }
                }
            }
        }
        s
    }

    pub fn add(&self, o: &Self) -> Self {
        Sym4 {
            c: std::array::from_fn(|i| self.c[i] + o.c[i]),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// Value and derivatives of a scalar field through order 2, 3 or 4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet4 {
    pub x: V3,
    pub value: f64,
    pub grad: V3,
    pub hess: SymMat3,
    pub d3: Option<Sym3>,
    pub d4: Option<Sym4>,
    pub order: u8,
}

impl Jet4 {
    /// Reads a jet off a truncated Taylor polynomial.
    pub fn from_taylor(x: V3, t: &Jet, order: u8) -> Jet4 {
        let part = |e: [usize; 3]| t.partial(e);
        let count = |ix: &[usize]| {
            let mut e = [0usize; 3];
            for &i in ix {
                e[i] += 1;
            }
            e
        };
        let d3 = (order >= 3).then(|| Sym3::from_fn(|i, j, k| part(count(&[i, j, k]))));
        let d4 = (order >= 4).then(|| Sym4::from_fn(|i, j, k, l| part(count(&[i, j, k, l]))));
        Jet4 {
            x,
            value: t.value(),
            grad: t.grad(),
            hess: t.hess(),
            d3,
            d4,
            order,
        }
    }

    /// Second-order Taylor polynomial's Hessian at `x + s` (through the
    /// available order).
    pub fn taylor_hess(&self, s: &V3) -> SymMat3 {
        let mut h = self.hess;
        if let Some(d3) = &self.d3 {
            h = h.add(&d3.contract(s));
        }
        if let Some(d4) = &self.d4 {
            h = h.add(&d4.contract2(s, s).scale(0.5));
        }
        h
    }

    /// The Taylor polynomial re-expanded about `y`, truncated at order `m`.
    pub fn reexpand(&self, y: &V3, m: usize) -> Jet {
        let s = Jet::coords(&linalg::sub(y, &self.x), m);
        let mut r = Jet::constant(self.value, m);
        for i in 0..3 {
            r = r.add(&s[i].scale(self.grad[i]));
        }
        for i in 0..3 {
            for j in 0..3 {
                r = r.add(&s[i].mul(&s[j]).scale(0.5 * self.hess.get(i, j)));
            }
        }
        if let Some(d3) = &self.d3 {
            for i in 0..3 {
                for j in 0..3 {
                    let sij = s[i].mul(&s[j]);
                    for k in 0..3 {
                        r = r.add(&sij.mul(&s[k]).scale(d3.get(i, j, k) / 6.0));
                    }
                }
            }
        }
        if let Some(d4) = &self.d4 {
            for i in 0..3 {
                for j in 0..3 {
                    let sij = s[i].mul(&s[j]);
                    for k in 0..3 {
                        let sijk = sij.mul(&s[k]);
                        for l in 0..3 {
                            r = r.add(&sijk.mul(&s[l]).scale(d4.get(i, j, k, l) / 24.0));
                        }
                    }
                }
            }
        }
        r
    }
}

fn check_domain(x: &V3) -> Result<(), Error> {
    if x.iter().all(|v| v.is_finite()) && x[2].abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfDomain(*x))
    }
}

fn fact(k: usize) -> f64 {
    (1..=k).product::<usize>() as f64
}

/// `∂^α Φ` from the closed-form rational expression.
pub fn phi_partial(p: &ModelParams, x: &V3, e: [usize; 3]) -> f64 {
    let poly = |t: f64, k: usize| match k {
        0 => t * t,
        1 => 2.0 * t,
        2 => 2.0,
        _ => 0.0,
    };
    let q = e[2];
    let mut s = 0.0;
    if e[1] == 0 {
        let a = 1.0 + x[2];
        let dq = if q % 2 == 0 { 1.0 } else { -1.0 } * fact(q) / a.powi(q as i32 + 1);
        s += p.lambda * poly(x[0], e[0]) * dq;
    }
    if e[0] == 0 {
        let b = 1.0 - x[2];
        let dq = fact(q) / b.powi(q as i32 + 1);
        s += p.lambda * poly(x[1], e[1]) * dq;
    }
    s
}

pub fn phi_value(p: &ModelParams, x: &V3) -> f64 {
    p.lambda * (x[0] * x[0] / (1.0 + x[2]) + x[1] * x[1] / (1.0 - x[2]))
}

pub fn phi_grad(p: &ModelParams, x: &V3) -> V3 {
    let a = 1.0 / (1.0 + x[2]);
    let b = 1.0 / (1.0 - x[2]);
    let l = p.lambda;
    [
        2.0 * l * x[0] * a,
        2.0 * l * x[1] * b,
        -l * x[0] * x[0] * a * a + l * x[1] * x[1] * b * b,
    ]
}

pub fn phi_hess(p: &ModelParams, x: &V3) -> SymMat3 {
    let a = 1.0 / (1.0 + x[2]);
    let b = 1.0 / (1.0 - x[2]);
    let l = p.lambda;
    SymMat3::new(
        2.0 * l * a,
        0.0,
        -2.0 * l * x[0] * a * a,
        2.0 * l * b,
        2.0 * l * x[1] * b * b,
        2.0 * l * (x[0] * x[0] * a * a * a + x[1] * x[1] * b * b * b),
    )
}

/// Unit kernel direction of `D²Φ(x)`, oriented with positive third component.
pub fn phi_kernel(x: &V3) -> V3 {
    let a = 1.0 / (1.0 + x[2]);
    let b = 1.0 / (1.0 - x[2]);
    crate::linalg::normalize(&[a * x[0], -b * x[1], 1.0])
}

pub fn phi_jet(p: &ModelParams, x: &V3, order: u8) -> Result<Jet4, Error> {
    check_domain(x)?;
    if !(2..=4).contains(&order) {
        return Err(Error::InvalidParams(format!("jet order {order}")));
    }
    let part = |ix: &[usize]| {
        let mut e = [0usize; 3];
        for &i in ix {
            e[i] += 1;
        }
        phi_partial(p, x, e)
    };
    Ok(Jet4 {
        x: *x,
        value: phi_value(p, x),
        grad: phi_grad(p, x),
        hess: phi_hess(p, x),
        d3: (order >= 3).then(|| Sym3::from_fn(|i, j, k| part(&[i, j, k]))),
        d4: (order >= 4).then(|| Sym4::from_fn(|i, j, k, l| part(&[i, j, k, l]))),
        order,
    })
}

/// Φ as a truncated Taylor polynomial of order `n` about `x`.
pub fn phi_taylor(p: &ModelParams, x: &V3, n: usize) -> Jet {
    let [a, b, c] = Jet::coords(x, n);
    let t1 = a.mul(&a).mul(&c.shift(1.0).recip());
    let t2 = b.mul(&b).mul(&c.neg().shift(1.0).recip());
    t1.add(&t2).scale(p.lambda)
}

/// `Θ = F(D²Φ)` only.
pub fn theta_value(p: &ModelParams, x: &V3) -> f64 {
    symtensor::slag_angle(&phi_hess(p, x))
}

#[derive(Clone, Copy, Debug)]
pub struct ThetaEval {
    pub theta: f64,
    pub grad: V3,
    pub hess: SymMat3,
}

/// Θ, ∇Θ and D²Θ by the chain rule
/// `Θ_k = F_ij Φ_ijk`, `Θ_kl = F_ij Φ_ijkl + F_ij,mn Φ_ijk Φ_mnl`.
pub fn theta_eval(p: &ModelParams, x: &V3) -> Result<ThetaEval, Error> {
    let j = phi_jet(p, x, 4)?;
    let d = symtensor::slag_deriv(&j.hess);
    let d3 = j.d3.unwrap();
    let d4 = j.d4.unwrap();
    let e: [V3; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let slices: [SymMat3; 3] = std::array::from_fn(|k| d3.contract(&e[k]));
    let grad = std::array::from_fn(|k| d.first_apply(&slices[k]));
    let hess = SymMat3::from_fn(|k, l| {
        d.first_apply(&d4.contract2(&e[k], &e[l])) + d.bilinear(&slices[k], &slices[l])
    });
    Ok(ThetaEval {
        theta: symtensor::slag_angle(&j.hess),
        grad,
        hess,
    })
}

/// Central-difference cross-check of `D²Θ` (step `h`).
pub fn theta_hess_fd(p: &ModelParams, x: &V3, h: f64) -> SymMat3 {
    let g = |y: V3| theta_eval(p, &y).map(|t| t.grad).unwrap_or([f64::NAN; 3]);
    let mut m = [[0.0; 3]; 3];
    for (l, row) in m.iter_mut().enumerate() {
        let mut xp = *x;
        let mut xm = *x;
        xp[l] += h;
        xm[l] -= h;
        let (gp, gm) = (g(xp), g(xm));
        for k in 0..3 {
            row[k] = (gp[k] - gm[k]) / (2.0 * h);
        }
    }
    SymMat3::from_full(&m)
}

/// The Remark's closed formula for the two nonzero eigenvalues of `D²Φ`.
pub fn lambda_pm(p: &ModelParams, x: &V3) -> Result<(f64, f64), Error> {
    check_domain(x)?;
    let a = 1.0 / (1.0 + x[2]);
    let b = 1.0 / (1.0 - x[2]);
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let base = 1.0 / (1.0 - x3 * x3) + 0.5 * a.powi(3) * x1 * x1 + 0.5 * b.powi(3) * x2 * x2;
    let inner = 2.0 * a * b * x3 + (b.powi(3) * x2 * x2 - a.powi(3) * x1 * x1);
    let root = (0.25 * inner * inner + a.powi(3) * b.powi(3) * x1 * x1 * x2 * x2).sqrt();
    let s = 2.0 * p.lambda;
    Ok((s * (base + root), s * (base - root)))
}

/// `y₃ − (y₂² − y₁²)/(4λ)`.
pub fn sigma_residual(p: &ModelParams, y: &V3) -> f64 {
    y[2] - (y[1] * y[1] - y[0] * y[0]) / (4.0 * p.lambda)
}

/// The quartic of the rotation laboratory as a truncated Taylor polynomial.
pub fn wy2_taylor(x: &V3, n: usize) -> Jet {
    let [a, b, c] = Jet::coords(x, n);
    wy2_generic(&a, &b, &c)
}

fn wy2_generic<T: Scalar>(a: &T, b: &T, c: &T) -> T {
    let r2 = a.square().add(&b.square());
    let q = a.square().sub(&b.square());
    r2.scale(0.5)
        .add(&c.mul(&q))
        .add(&c.square().mul(&r2.scale(18.0).sub(&c.square())).scale(1.0 / 12.0))
        .sub(&r2.square().scale(0.125))
}

pub fn wy2_value(x: &V3) -> f64 {
    wy2_generic(&x[0], &x[1], &x[2])
}

pub fn wy2_grad(x: &V3) -> V3 {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let r2 = x1 * x1 + x2 * x2;
    [
        x1 + 2.0 * x3 * x1 + 3.0 * x3 * x3 * x1 - 0.5 * r2 * x1,
        x2 - 2.0 * x3 * x2 + 3.0 * x3 * x3 * x2 - 0.5 * r2 * x2,
        x1 * x1 - x2 * x2 + 3.0 * x3 * r2 - x3 * x3 * x3 / 3.0,
    ]
}

pub fn wy2_hess(x: &V3) -> SymMat3 {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let r2 = x1 * x1 + x2 * x2;
    SymMat3::new(
        1.0 + 2.0 * x3 + 3.0 * x3 * x3 - 0.5 * r2 - x1 * x1,
        -x1 * x2,
        2.0 * x1 + 6.0 * x3 * x1,
        1.0 - 2.0 * x3 + 3.0 * x3 * x3 - 0.5 * r2 - x2 * x2,
        -2.0 * x2 + 6.0 * x3 * x2,
        3.0 * r2 - x3 * x3,
    )
}

pub fn wy2_jet(x: &V3) -> Jet4 {
    Jet4::from_taylor(*x, &wy2_taylor(x, 4), 4)
}

/// `(I − εM)⁻¹(εI + M)`, symmetrized.
pub fn rotate_hessian(m: &SymMat3, eps_r: f64) -> Result<SymMat3, Error> {
    let a = SymMat3::identity().sub(&m.scale(eps_r));
    let inv = a
        .inverse()
        .filter(|_| a.det().abs() > 1e-14)
        .ok_or(Error::RotationBreakdown)?;
    let b = m.add(&SymMat3::diag(eps_r, eps_r, eps_r));
    Ok(SymMat3::from_full(&inv.matmul(&b)))
}

/// `cos θ x − sin θ g`.
pub fn rotate_point(x: &V3, g: &V3, theta_r: f64) -> V3 {
    let (s, c) = theta_r.sin_cos();
    std::array::from_fn(|i| c * x[i] - s * g[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_tables_are_bijective() {
        let mut seen3 = [false; 10];
        let mut seen4 = [false; 15];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    seen3[idx3(i, j, k)] = true;
                    for l in 0..3 {
                        seen4[idx4(i, j, k, l)] = true;
                    }
                }
            }
        }
        assert!(seen3.iter().all(|&s| s) && seen4.iter().all(|&s| s));
    }

    #[test]
    fn closed_form_matches_taylor_arithmetic() {
        let p = ModelParams::default();
        let x = [0.3, -0.2, 0.25];
        let t = phi_taylor(&p, &x, 4);
        let j = Jet4::from_taylor(x, &t, 4);
        let c = phi_jet(&p, &x, 4).unwrap();
        assert!((j.value - c.value).abs() < 1e-15);
        for k in 0..15 {
            assert!((j.d4.unwrap().c[k] - c.d4.unwrap().c[k]).abs() < 1e-12);
        }
        for k in 0..10 {
            assert!((j.d3.unwrap().c[k] - c.d3.unwrap().c[k]).abs() < 1e-13);
        }
        assert!(j.hess.sub(&c.hess).max_abs() < 1e-14);
    }

    #[test]
    fn wy2_closed_forms_match_taylor() {
        let x = [0.05, -0.03, 0.07];
        let t = wy2_taylor(&x, 2);
        let g = wy2_grad(&x);
        let h = wy2_hess(&x);
        for i in 0..3 {
            assert!((t.grad()[i] - g[i]).abs() < 1e-15);
        }
        assert!(t.hess().sub(&h).max_abs() < 1e-15);
        assert!((t.value() - wy2_value(&x)).abs() < 1e-16);
    }

    #[test]
    fn rotation_of_flat_plane() {
        let r = rotate_hessian(&SymMat3::zero(), 0.1).unwrap();
        assert!(r.sub(&SymMat3::diag(0.1, 0.1, 0.1)).max_abs() < 1e-16);
    }

    #[test]
    fn singular_rotation_reported() {
        assert!(matches!(
            rotate_hessian(&SymMat3::diag(10.0, 0.0, 0.0), 0.1),
            Err(Error::RotationBreakdown)
        ));
    }
}
