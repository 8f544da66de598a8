//! Extraction of the compact convex set `K = {Θ ≤ c*}`, adapted boundary
//! frames, Cauchy jets of the exterior solution and the determinant-sign
//! diagnostics.

use crate::band;
use crate::explicit::{self, Jet4, ModelParams, Sym3, Sym4};
use crate::linalg::{self, V3};
use crate::par::{self, Exec};
use crate::symtensor::{self, SymMat3};
use crate::Error;
use std::collections::HashMap;
use std::io::Write;

/// Geodesic sphere mesh: unit vertices and undirected edges.
#[derive(Clone, Debug)]
pub struct SphereMesh {
    pub vertices: Vec<V3>,
    pub edges: Vec<(usize, usize)>,
}

/// Subdivided icosahedron; level `l` has `10·4^l + 2` vertices.
pub fn icosphere(level: usize) -> SphereMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<V3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(linalg::normalize)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<V3>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(linalg::normalize(&linalg::add(&verts[a], &verts[b])));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let a = mid(f[0], f[1], &mut verts);
            let b = mid(f[1], f[2], &mut verts);
            let c = mid(f[2], f[0], &mut verts);
            next.push([f[0], a, c]);
            next.push([f[1], b, a]);
            next.push([f[2], c, b]);
            next.push([a, b, c]);
        }
        faces = next;
    }
    let mut edges: Vec<(usize, usize)> = faces
        .iter()
        .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    SphereMesh {
        vertices: verts,
        edges,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundarySample {
    pub x0: V3,
    /// Direction from the origin used to locate the sample.
    pub omega: V3,
    pub nu: V3,
    pub tau1: V3,
    pub tau2: V3,
    pub xi: V3,
    /// `ξ·ν` (signed); the tangency score is its absolute value.
    pub xi_dot_nu: f64,
    pub kappa_xi: f64,
    pub theta_nu: f64,
    /// Shape operator over `(τ₁, τ₂)`.
    pub shape: [[f64; 2]; 2],
    pub theta_hess: SymMat3,
}

impl BoundarySample {
    pub fn score(&self) -> f64 {
        self.xi_dot_nu.abs()
    }

    pub fn principal_curvatures(&self) -> (f64, f64) {
        let [[a, b], [_, d]] = self.shape;
        let m = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (m - r, m + r)
    }

    /// Ambient tangential shape operator `P D²Θ P / |∇Θ|`.
    pub fn shape_ambient(&self) -> SymMat3 {
        let pr = |v: &V3| linalg::axpy(v, -linalg::dot(v, &self.nu), &self.nu);
        let e: [V3; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let pe: [V3; 3] = std::array::from_fn(|i| pr(&e[i]));
        SymMat3::from_fn(|i, j| self.theta_hess.bilin(&pe[i], &pe[j]) / self.theta_nu)
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryMesh {
    pub samples: Vec<BoundarySample>,
    pub level: usize,
    pub c_star: f64,
    pub edges: Vec<(usize, usize)>,
}

impl BoundaryMesh {
    pub fn max_radius(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| linalg::norm(&s.x0))
            .fold(0.0, f64::max)
    }

    pub fn min_curvature(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.principal_curvatures().0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_curvature(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.principal_curvatures().1)
            .fold(0.0, f64::max)
    }

    /// `0.2 ×` the smallest curvature radius of ∂K.
    pub fn default_mu(&self) -> f64 {
        0.2 / self.max_curvature()
    }

    pub fn nearest_sample(&self, x: &V3) -> &BoundarySample {
        self.samples
            .iter()
            .min_by(|a, b| linalg::dist(&a.x0, x).total_cmp(&linalg::dist(&b.x0, x)))
            .unwrap()
    }

    /// Closest point of ∂K to `x`: nearest sample, then alternating projection
    /// onto the level set and tangential correction.
    pub fn nearest_point(&self, p: &ModelParams, x: &V3) -> V3 {
        let mut y = self.nearest_sample(x).x0;
        for _ in 0..30 {
            let t = match explicit::theta_eval(p, &y) {
                Ok(t) => t,
                Err(_) => break,
            };
            let g2 = linalg::dot(&t.grad, &t.grad);
            y = linalg::axpy(&y, -(t.theta - self.c_star) / g2, &t.grad);
            let n = linalg::normalize(&t.grad);
            let d = linalg::sub(x, &y);
            let tang = linalg::axpy(&d, -linalg::dot(&d, &n), &n);
            y = linalg::add(&y, &tang);
            if linalg::norm(&tang) < 1e-14 {
                break;
            }
        }
        for _ in 0..3 {
            let t = explicit::theta_eval(p, &y).unwrap();
            let g2 = linalg::dot(&t.grad, &t.grad);
            y = linalg::axpy(&y, -(t.theta - self.c_star) / g2, &t.grad);
        }
        y
    }

    /// One CSV row per sample.
    pub fn write_csv<W: Write>(&self, p: &ModelParams, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "x1,x2,x3,nu1,nu2,nu3,xi1,xi2,xi3,score,kappa_xi,theta_nu,k_min,k_max,margin"
        )?;
        for s in &self.samples {
            let (kmin, kmax) = s.principal_curvatures();
            let margin = cauchy_data(p, s).map(|c| -c.delta).unwrap_or(f64::NAN);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.x0[0],
                s.x0[1],
                s.x0[2],
                s.nu[0],
                s.nu[1],
                s.nu[2],
                s.xi[0],
                s.xi[1],
                s.xi[2],
                s.score(),
                s.kappa_xi,
                s.theta_nu,
                kmin,
                kmax,
                margin
            )?;
        }
        Ok(())
    }
}

/// Radius `r` with `Θ(rω) = c*` by marching and bisection.
pub fn boundary_radius(p: &ModelParams, omega: &V3) -> Result<f64, Error> {
    let c = p.c_star();
    let rmax = if omega[2].abs() > 1e-12 {
        (0.95 / omega[2].abs()).min(1.5)
    } else {
        1.5
    };
    let f = |r: f64| explicit::theta_value(p, &linalg::scale(omega, r)) - c;
    let dr = 0.005;
    let mut lo = 0.0;
    let mut hi = None;
    let mut r = dr;
    while r <= rmax {
        if f(r) > 0.0 {
            hi = Some(r);
            break;
        }
        lo = r;
        r += dr;
    }
    let mut hi = hi.ok_or(Error::KExtraction(*omega))?;
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            break;
        }
        if f(m) > 0.0 {
            hi = m;
        } else {
            lo = m;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Adapted frame and curvature data at a boundary point.
pub fn frame_at(p: &ModelParams, x0: &V3, omega: &V3) -> Result<BoundarySample, Error> {
    let t = explicit::theta_eval(p, x0)?;
    let theta_nu = linalg::norm(&t.grad);
    let nu = linalg::scale(&t.grad, 1.0 / theta_nu);
    let xi = explicit::phi_kernel(x0);
    let xdn = linalg::dot(&xi, &nu);
    let proj = linalg::axpy(&xi, -xdn, &nu);
    let tau1 = if linalg::norm(&proj) > 1e-8 {
        linalg::normalize(&proj)
    } else {
        linalg::any_orthogonal(&nu)
    };
    let tau2 = linalg::cross(&nu, &tau1);
    let s = |a: &V3, b: &V3| t.hess.bilin(a, b) / theta_nu;
    let shape = [[s(&tau1, &tau1), s(&tau1, &tau2)], [s(&tau1, &tau2), s(&tau2, &tau2)]];
    Ok(BoundarySample {
        x0: *x0,
        omega: *omega,
        nu,
        tau1,
        tau2,
        xi,
        xi_dot_nu: xdn,
        kappa_xi: shape[0][0],
        theta_nu,
        shape,
        theta_hess: t.hess,
    })
}

pub fn sample_direction(p: &ModelParams, omega: &V3) -> Result<BoundarySample, Error> {
    let omega = linalg::normalize(omega);
    let r = boundary_radius(p, &omega)?;
    frame_at(p, &linalg::scale(&omega, r), &omega)
}

pub fn extract_k(p: &ModelParams, level: usize) -> Result<BoundaryMesh, Error> {
    extract_k_with(p, level, Exec::default())
}

pub fn extract_k_with(p: &ModelParams, level: usize, exec: Exec) -> Result<BoundaryMesh, Error> {
    p.validate()?;
    let sphere = icosphere(level);
    let samples: Result<Vec<_>, _> =
        par::map(exec, &sphere.vertices, |w| sample_direction(p, w)).into_iter().collect();
    Ok(BoundaryMesh {
        samples: samples?,
        level,
        c_star: p.c_star(),
        edges: sphere.edges,
    })
}

/// Exact tangential points (`ξ·ν = 0`) located by bisection along every mesh
/// edge across which the signed score changes sign.
pub fn tangential_points(p: &ModelParams, mesh: &BoundaryMesh) -> Vec<BoundarySample> {
    let crossing: Vec<(usize, usize)> = mesh
        .edges
        .iter()
        .copied()
        .filter(|&(a, b)| mesh.samples[a].xi_dot_nu * mesh.samples[b].xi_dot_nu < 0.0)
        .collect();
    par::map(Exec::default(), &crossing, |&(a, b)| {
        let (wa, wb) = (mesh.samples[a].omega, mesh.samples[b].omega);
        let sa = mesh.samples[a].xi_dot_nu;
        let at = |t: f64| {
            let w = linalg::normalize(&linalg::add(&linalg::scale(&wa, 1.0 - t), &linalg::scale(&wb, t)));
            sample_direction(p, &w)
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best = None;
        for _ in 0..60 {
            let m = 0.5 * (lo + hi);
            let s = at(m).ok()?;
            if s.xi_dot_nu * sa > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
            best = Some(s);
            if s.xi_dot_nu == 0.0 || hi - lo < 1e-15 {
                break;
            }
        }
        best
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Normal-jet data of the exterior solution at a boundary sample.
#[derive(Clone, Copy, Debug)]
pub struct CauchyData {
    /// `v_ννν − Φ_ννν = −Θ_ν / F_νν`.
    pub delta: f64,
    pub f_nn: f64,
    /// Tangential gradient of `δ` along ∂K.
    pub grad_t_delta: V3,
    /// `v_νννν − Φ_νννν`.
    pub x_nnnn: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TangentialDerivative {
    /// Exact gradient of the level-set extension of `δ`.
    Exact,
    /// Five-point stencil in graph coordinates over the tangent plane.
    Stencil { h: f64 },
}

/// Point of ∂K over `x0 + s τ` in graph coordinates over the tangent plane.
fn graph_point(p: &ModelParams, s: &BoundarySample, off: &V3) -> V3 {
    let base = linalg::add(&s.x0, off);
    let c = p.c_star();
    let mut g = 0.0;
    for _ in 0..50 {
        let x = linalg::axpy(&base, g, &s.nu);
        let t = explicit::theta_eval(p, &x).unwrap();
        let step = (t.theta - c) / linalg::dot(&t.grad, &s.nu);
        g -= step;
        if step.abs() < 1e-17 {
            break;
        }
    }
    linalg::axpy(&base, g, &s.nu)
}

fn delta_at(p: &ModelParams, x: &V3) -> f64 {
    let t = explicit::theta_eval(p, x).unwrap();
    let nu = linalg::normalize(&t.grad);
    let d = symtensor::slag_deriv(&explicit::phi_hess(p, x));
    -linalg::norm(&t.grad) / d.first.bilin(&nu, &nu)
}

pub fn cauchy_data(p: &ModelParams, s: &BoundarySample) -> Result<CauchyData, Error> {
    cauchy_data_with(p, s, TangentialDerivative::Exact)
}

pub fn cauchy_data_with(
    p: &ModelParams,
    s: &BoundarySample,
    mode: TangentialDerivative,
) -> Result<CauchyData, Error> {
    let j = explicit::phi_jet(p, &s.x0, 4)?;
    let d = symtensor::slag_deriv(&j.hess);
    let nu = s.nu;
    let f_nn = d.first.bilin(&nu, &nu);
    if f_nn.abs() < 1e-10 {
        return Err(Error::DegenerateNormal(f_nn));
    }
    let delta = -s.theta_nu / f_nn;
    let grad_t_delta = match mode {
        TangentialDerivative::Exact => {
            let g = band::delta_gradient(p, &s.x0);
            linalg::axpy(&g, -linalg::dot(&g, &nu), &nu)
        }
        TangentialDerivative::Stencil { h } => {
            let der = |tau: &V3| {
                let v = |k: f64| delta_at(p, &graph_point(p, s, &linalg::scale(tau, k * h)));
                (v(-2.0) - 8.0 * v(-1.0) + 8.0 * v(1.0) - v(2.0)) / (12.0 * h)
            };
            let (d1, d2) = (der(&s.tau1), der(&s.tau2));
            linalg::add(&linalg::scale(&s.tau1, d1), &linalg::scale(&s.tau2, d2))
        }
    };
    let d3 = j.d3.unwrap();
    let d4 = j.d4.unwrap();
    let s_amb = s.shape_ambient();
    let t_nu = d3.contract(&nu).add(&SymMat3::outer(&nu).scale(delta));
    let num = 2.0 * d.first.bilin(&nu, &grad_t_delta)
        + delta * d.first.dot(&s_amb)
        + d.first.dot(&d4.contract2(&nu, &nu))
        + d.bilinear(&t_nu, &t_nu);
    Ok(CauchyData {
        delta,
        f_nn,
        grad_t_delta,
        x_nnnn: -num / f_nn,
    })
}

/// Jet of `v` at `x₀` in ambient coordinates.
pub fn cauchy_jet(p: &ModelParams, s: &BoundarySample, order: u8) -> Result<Jet4, Error> {
    if !(order == 3 || order == 4) {
        return Err(Error::InvalidParams(format!("Cauchy jet order {order}")));
    }
    let cd = cauchy_data(p, s)?;
    let mut j = explicit::phi_jet(p, &s.x0, order)?;
    let nu = s.nu;
    let d3 = j.d3.unwrap();
    j.d3 = Some(d3.add(&Sym3::from_fn(|a, b, c| cd.delta * nu[a] * nu[b] * nu[c])));
    if order == 4 {
        let g = cd.grad_t_delta;
        let sd = s.shape_ambient().scale(cd.delta);
        let diff = Sym4::from_fn(|i, jj, k, l| {
            let ix = [i, jj, k, l];
            let mut v = cd.x_nnnn * nu[i] * nu[jj] * nu[k] * nu[l];
            for m in 0..4 {
                let mut t = g[ix[m]];
                for (q, &iq) in ix.iter().enumerate() {
                    if q != m {
                        t *= nu[iq];
                    }
                }
                v += t;
            }
            for a in 0..4 {
                for b in a + 1..4 {
                    let mut t = sd.get(ix[a], ix[b]);
                    for (q, &iq) in ix.iter().enumerate() {
                        if q != a && q != b {
                            t *= nu[iq];
                        }
                    }
                    v += t;
                }
            }
            v
        });
        j.d4 = Some(j.d4.unwrap().add(&diff));
    }
    Ok(j)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TangencyCase {
    Generic,
    NearTangential,
    Tangential,
}

#[derive(Clone, Copy, Debug)]
pub struct DetSign {
    pub case: TangencyCase,
    pub d_nu_g: f64,
    pub d_nunu_g: f64,
    /// `|δ| tr cof(D²Φ)`, the natural magnitude of `∂_νG`.
    pub scale: f64,
    /// `κ G_ξξ (v_ννν − Φ_ννν)`.
    pub identity_value: f64,
    /// Relative discrepancy between `∂²_νG` and the identity (tangential only).
    pub identity_rel: Option<f64>,
    /// `v_ξξν` and `Φ_ξξν`.
    pub v_xxn: f64,
    pub phi_xxn: f64,
}

pub fn classify(score: f64) -> TangencyCase {
    if score >= 0.1 {
        TangencyCase::Generic
    } else if score <= 0.01 {
        TangencyCase::Tangential
    } else {
        TangencyCase::NearTangential
    }
}

pub fn detsign_report(p: &ModelParams, s: &BoundarySample) -> Result<DetSign, Error> {
    let j = cauchy_jet(p, s, 4)?;
    let phi = explicit::phi_jet(p, &s.x0, 4)?;
    let (_, cof, dg) = symtensor::det_calculus(&j.hess);
    let nu = s.nu;
    let t_nu = j.d3.unwrap().contract(&nu);
    let d_nu_g = cof.dot(&t_nu);
    let d_nunu_g = cof.dot(&j.d4.unwrap().contract2(&nu, &nu)) + dg.bilinear(&t_nu, &t_nu);
    let delta = j.d3.unwrap().eval(&nu, &nu, &nu) - phi.d3.unwrap().eval(&nu, &nu, &nu);
    let g_xx = cof.bilin(&s.xi, &s.xi);
    let identity_value = s.kappa_xi * g_xx * delta;
    let case = classify(s.score());
    let identity_rel = (case == TangencyCase::Tangential)
        .then(|| (d_nunu_g - identity_value).abs() / identity_value.abs());
    Ok(DetSign {
        case,
        d_nu_g,
        d_nunu_g,
        scale: delta.abs() * cof.trace(),
        identity_value,
        identity_rel,
        v_xxn: j.d3.unwrap().eval(&s.xi, &s.xi, &nu),
        phi_xxn: phi.d3.unwrap().eval(&s.xi, &s.xi, &nu),
    })
}

/// `F(D²v_taylor(x₀ + tν)) − c*` for the jet of the given order.
pub fn taylor_residual(p: &ModelParams, jet: &Jet4, nu: &V3, t: f64) -> f64 {
    symtensor::slag_angle(&jet.taylor_hess(&linalg::scale(nu, t))) - p.c_star()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for l in 0..4 {
            let m = icosphere(l);
            assert_eq!(m.vertices.len(), 10 * 4usize.pow(l as u32) + 2);
            assert_eq!(m.edges.len(), 30 * 4usize.pow(l as u32));
        }
    }

    #[test]
    fn stencil_and_exact_tangential_derivatives_agree() {
        let p = ModelParams::default();
        let s = sample_direction(&p, &[0.3, 0.5, 0.4]).unwrap();
        let a = cauchy_data_with(&p, &s, TangentialDerivative::Exact).unwrap();
        let b = cauchy_data_with(&p, &s, TangentialDerivative::Stencil { h: 1e-3 }).unwrap();
        let scale = linalg::norm(&a.grad_t_delta);
        assert!(linalg::dist(&a.grad_t_delta, &b.grad_t_delta) < 1e-7 * scale.max(1e-3));
        assert!((a.x_nnnn - b.x_nnnn).abs() < 1e-6 * a.x_nnnn.abs().max(1e-3));
    }
}
