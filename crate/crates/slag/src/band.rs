//! The glued potential `w`: Φ inside K and the exterior solution `v` on the
//! band outside K.
//!
//! Outside K, `w` is the Taylor polynomial of the Cauchy 4-jet of `v` at the
//! foot point of `x` on ∂K.
//!
//! [`extension_jet`] gives an independent route to the same 4-jet: the
//! level-set extension `D = δψ³/6 + X̂ψ⁴/24` of `v − Φ`, with
//! `ψ = (Θ − c*)/|∇Θ|` and `δ`, `X̂` evaluated on the level set of Θ through
//! the point, differentiated exactly with truncated Taylor arithmetic.

use crate::explicit::{self, Jet4, ModelParams};
use crate::freeboundary::{self, BoundaryMesh, BoundarySample};
use crate::linalg::{self, V3};
use crate::symtensor::{self, GMat, SymMat3};
use crate::taylor::{Jet, Scalar};
use crate::Error;

/// Jets of the level-set quantities at a point, truncated at `n − 3` or less.
pub struct LevelJets {
    pub theta: Jet,
    pub nu: [Jet; 3],
    pub nrm: Jet,
    pub delta: Jet,
    pub psi: Jet,
}

struct Core {
    h: GMat<Jet>,
    df: GMat<Jet>,
    grad_theta: [Jet; 3],
    lj: LevelJets,
}

fn core(p: &ModelParams, x: &V3, n: usize) -> Core {
    assert!(n >= 4);
    let phi = explicit::phi_taylor(p, x, n);
    let g: [Jet; 3] = std::array::from_fn(|i| phi.deriv(i));
    let h: GMat<Jet> = std::array::from_fn(|i| std::array::from_fn(|j| g[i].deriv(j)));
    let theta = symtensor::g_angle(&h);
    let gt: [Jet; 3] = std::array::from_fn(|k| theta.deriv(k));
    let nrm = symtensor::g_vdot(&gt, &gt).sqrt();
    let inv = nrm.recip();
    let nu: [Jet; 3] = std::array::from_fn(|k| gt[k].mul(&inv));
    let df = symtensor::g_dangle(&h);
    let fnn = symtensor::g_vdot(&nu, &symtensor::g_apply(&df, &nu));
    let delta = nrm.div(&fnn).neg();
    let psi = theta.shift(-p.c_star()).mul(&inv);
    Core {
        h,
        df,
        grad_theta: gt,
        lj: LevelJets {
            theta,
            nu,
            nrm,
            delta,
            psi,
        },
    }
}

/// Level-set jets only (`n ≥ 4`).
pub fn level_jets(p: &ModelParams, x: &V3, n: usize) -> LevelJets {
    core(p, x, n).lj
}

/// Gradient of `δ = −|∇Θ| / F_νν`, exact.
pub fn delta_gradient(p: &ModelParams, x: &V3) -> V3 {
    core(p, x, 4).lj.delta.grad()
}

/// The extension `D` as a Taylor polynomial of order `n − 5` about `x`.
pub fn extension_jet(p: &ModelParams, x: &V3, n: usize) -> Jet {
    assert!((5..=crate::taylor::MAX_ORDER).contains(&n));
    let c = core(p, x, n);
    let LevelJets {
        nu,
        nrm,
        delta,
        psi,
        ..
    } = &c.lj;
    let gd: [Jet; 3] = std::array::from_fn(|k| delta.deriv(k));
    let dn_delta = symtensor::g_vdot(&gd, nu);
    let g_t: [Jet; 3] = std::array::from_fn(|k| gd[k].sub(&dn_delta.mul(&nu[k])));
    let inv = nrm.recip();
    // tangential projector and second derivatives of Θ
    let ht: GMat<Jet> =
        std::array::from_fn(|k| std::array::from_fn(|l| c.grad_theta[k].deriv(l)));
    let proj: GMat<Jet> = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let id = if i == j { 1.0 } else { 0.0 };
            nu[i].mul(&nu[j]).neg().shift(id)
        })
    });
    let pht: GMat<Jet> = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut s = proj[i][0].mul(&ht[0][j]);
            for k in 1..3 {
                s = s.add(&proj[i][k].mul(&ht[k][j]));
            }
            s
        })
    });
    let s_amb: GMat<Jet> = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut s = pht[i][0].mul(&proj[0][j]);
            for k in 1..3 {
                s = s.add(&pht[i][k].mul(&proj[k][j]));
            }
            s.mul(&inv)
        })
    });
    // contractions of D³Φ and D⁴Φ with ν
    let dh: [GMat<Jet>; 3] = std::array::from_fn(|k| {
        std::array::from_fn(|i| std::array::from_fn(|j| c.h[i][j].deriv(k)))
    });
    let t_nu: GMat<Jet> = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut s = dh[0][i][j].mul(&nu[0]);
            for k in 1..3 {
                s = s.add(&dh[k][i][j].mul(&nu[k]));
            }
            s.add(&delta.mul(&nu[i]).mul(&nu[j]))
        })
    });
    let d4nn: GMat<Jet> = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut s = Jet::constant(0.0, nu[0].order());
            for k in 0..3 {
                for l in 0..3 {
                    let dd = dh[k][i][j].deriv(l);
                    s = s.add(&dd.mul(&nu[k]).mul(&nu[l]));
                }
            }
            s
        })
    });
    let fnn = symtensor::g_vdot(nu, &symtensor::g_apply(&c.df, nu));
    let term_g = symtensor::g_vdot(nu, &symtensor::g_apply(&c.df, &g_t)).scale(2.0);
    let term_s = delta.mul(&symtensor::g_dot(&c.df, &s_amb));
    let term_4 = symtensor::g_dot(&c.df, &d4nn);
    let term_2 = symtensor::g_d2angle(&c.h, &t_nu);
    let xx = term_g.add(&term_s).add(&term_4).add(&term_2).div(&fnn).neg();
    let gpsi: [Jet; 3] = std::array::from_fn(|k| psi.deriv(k));
    let mut psi_nn = Jet::constant(0.0, gpsi[0].order() - 1);
    for i in 0..3 {
        for j in 0..3 {
            psi_nn = psi_nn.add(&gpsi[i].deriv(j).mul(&nu[i]).mul(&nu[j]));
        }
    }
    let xhat = xx
        .sub(&delta.mul(&psi_nn).scale(6.0))
        .sub(&dn_delta.scale(4.0));
    let p2 = psi.square();
    let p3 = p2.mul(psi);
    delta
        .mul(&p3)
        .scale(1.0 / 6.0)
        .add(&xhat.mul(&p3).mul(psi).scale(1.0 / 24.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Branch {
    InsideK,
    Band,
}

/// Value, gradient and Hessian of the glued potential.
#[derive(Clone, Copy, Debug)]
pub struct WEval {
    pub value: f64,
    pub grad: V3,
    pub hess: SymMat3,
    pub branch: Branch,
}

/// The glued potential on `K_μ`.
#[derive(Clone, Debug)]
pub struct Glued {
    pub p: ModelParams,
    pub mesh: BoundaryMesh,
    pub mu: f64,
}

impl Glued {
    pub fn new(p: ModelParams, mesh: BoundaryMesh) -> Glued {
        let mu = p.mu.unwrap_or_else(|| mesh.default_mu());
        Glued { p, mesh, mu }
    }

    pub fn params(&self) -> &ModelParams {
        &self.p
    }

    /// Whether `x` lies in K (star-shaped test on the level function).
    pub fn in_k(&self, x: &V3) -> bool {
        linalg::norm(x) <= 1.5 * self.mesh.max_radius()
            && explicit::theta_value(&self.p, x) <= self.p.c_star()
    }

    pub fn branch(&self, x: &V3) -> Branch {
        if self.in_k(x) {
            Branch::InsideK
        } else {
            Branch::Band
        }
    }

    /// The boundary sample at the foot point of `x` on ∂K.
    pub fn foot(&self, x: &V3) -> Result<BoundarySample, Error> {
        let y = self.mesh.nearest_point(&self.p, x);
        freeboundary::frame_at(&self.p, &y, &linalg::normalize(&y))
    }

    /// Cauchy 4-jet of `v` at the foot point of `x`.
    pub fn band_jet(&self, x: &V3) -> Result<Jet4, Error> {
        freeboundary::cauchy_jet(&self.p, &self.foot(x)?, 4)
    }

    /// Taylor polynomial of `w` of order `m` about `x`, without the band
    /// membership check.
    pub fn taylor(&self, x: &V3, m: usize) -> Result<Jet, Error> {
        if self.in_k(x) {
            Ok(explicit::phi_taylor(&self.p, x, m))
        } else {
            Ok(self.band_jet(x)?.reexpand(x, m))
        }
    }

    /// Value, gradient and Hessian, without the band membership check.
    pub fn eval(&self, x: &V3) -> Result<WEval, Error> {
        if self.in_k(x) {
            Ok(WEval {
                value: explicit::phi_value(&self.p, x),
                grad: explicit::phi_grad(&self.p, x),
                hess: explicit::phi_hess(&self.p, x),
                branch: Branch::InsideK,
            })
        } else {
            let t = self.band_jet(x)?.reexpand(x, 2);
            Ok(WEval {
                value: t.value(),
                grad: t.grad(),
                hess: t.hess(),
                branch: Branch::Band,
            })
        }
    }

    /// Like [`Glued::eval`], but rejects points outside `K_μ` with a single
    /// foot-point projection.
    pub fn eval_in_band(&self, x: &V3) -> Result<WEval, Error> {
        if x[2].abs() >= 1.0 || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::OutOfDomain(*x));
        }
        if self.in_k(x) {
            return self.eval(x);
        }
        let foot = self.foot(x)?;
        if linalg::dist(x, &foot.x0) >= self.mu {
            return Err(Error::OutOfBand(*x));
        }
        let t = freeboundary::cauchy_jet(&self.p, &foot, 4)?.reexpand(x, 2);
        Ok(WEval {
            value: t.value(),
            grad: t.grad(),
            hess: t.hess(),
            branch: Branch::Band,
        })
    }

    pub fn grad(&self, x: &V3) -> Result<V3, Error> {
        Ok(self.eval(x)?.grad)
    }

    /// Distance from `x` to K (zero inside).
    pub fn distance_to_k(&self, x: &V3) -> f64 {
        if self.in_k(x) {
            return 0.0;
        }
        let foot = self.mesh.nearest_point(&self.p, x);
        linalg::dist(x, &foot)
    }

    /// The glued jet with band membership check.
    pub fn glue_w(&self, x: &V3, order: u8) -> Result<(Jet4, Branch), Error> {
        if x[2].abs() >= 1.0 || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::OutOfDomain(*x));
        }
        let b = self.branch(x);
        if b == Branch::Band && self.distance_to_k(x) >= self.mu {
            return Err(Error::OutOfBand(*x));
        }
        let t = self.taylor(x, order as usize)?;
        Ok((Jet4::from_taylor(*x, &t, order), b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extension_vanishes_to_second_order_on_level_set() {
        let p = ModelParams::default();
        // a point on the level set along the first axis
        let c = p.c_star();
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..80 {
            let m = 0.5 * (lo + hi);
            if explicit::theta_value(&p, &[m, 0.0, 0.0]) < c {
                lo = m
            } else {
                hi = m
            }
        }
        let x0 = [lo, 0.0, 0.0];
        let d = extension_jet(&p, &x0, 8);
        assert!(d.value().abs() < 1e-16);
        assert!(linalg::norm(&d.grad()) < 1e-14);
        assert!(d.hess().max_abs() < 1e-12);
        assert!(d.partial([3, 0, 0]).abs() > 1e-4);
    }
}
