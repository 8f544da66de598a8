//! Geometry of the gradient graph `{(x, ∇w(x))}`: induced metric, Lagrangian
//! angle and the minimality diagnostic.
//!
//! The mean curvature of a Lagrangian graph is `J∇θ` for the angle
//! `θ = F(D²w)`, so its magnitude is the metric norm `|∇θ|_g` with
//! `g = I + (D²w)²`; a piece is called minimal when this vanishes to
//! tolerance.

use crate::band::{Branch, Glued};
use crate::explicit;
use crate::freeboundary;
use crate::linalg::{self, V3};
use crate::par::{self, Exec};
use crate::symtensor::{self, GMat, SymMat3};
use crate::taylor::{Jet, Scalar};
use crate::Error;
use serde::Serialize;

/// Pull-back of the Euclidean metric of `R⁶` under `x ↦ (x, ∇w(x))`.
pub fn graph_metric(hess: &SymMat3) -> SymMat3 {
    let h = hess.to_full();
    SymMat3::from_fn(|i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id + (0..3).map(|k| h[k][i] * h[k][j]).sum::<f64>()
    })
}

/// `sqrt(vᵀ g⁻¹ v)`.
pub fn metric_norm(g: &SymMat3, v: &V3) -> f64 {
    let z = linalg::solve3(&g.to_full(), v).unwrap_or([f64::NAN; 3]);
    linalg::dot(v, &z).max(0.0).sqrt()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GraphMetric {
    pub x: V3,
    pub g: [f64; 6],
    pub theta: f64,
    pub grad_theta: V3,
    pub norm_g: f64,
    pub branch: Branch,
}

/// Angle and angle gradient of a second-order Taylor polynomial's Hessian.
fn angle_of_taylor(t: &Jet) -> (f64, V3, SymMat3) {
    let g: [Jet; 3] = std::array::from_fn(|i| t.deriv(i));
    let h: GMat<Jet> = std::array::from_fn(|i| std::array::from_fn(|j| g[i].deriv(j)));
    let th = symtensor::g_angle(&h);
    (th.value(), th.grad(), t.hess())
}

/// The metric and angle data of the graph of `∇w` at `x`.
pub fn graph_point(w: &Glued, x: &V3) -> Result<GraphMetric, Error> {
    let (theta, grad, hess, branch) = if w.in_k(x) {
        let t = explicit::theta_eval(&w.p, x)?;
        (t.theta, t.grad, explicit::phi_hess(&w.p, x), Branch::InsideK)
    } else {
        let (th, gr, h) = angle_of_taylor(&w.taylor(x, 3)?);
        (th, gr, h, Branch::Band)
    };
    let g = graph_metric(&hess);
    Ok(GraphMetric {
        x: *x,
        g: g.comps(),
        theta,
        grad_theta: grad,
        norm_g: metric_norm(&g, &grad),
        branch,
    })
}

pub fn angle_field(w: &Glued, xs: &[V3], exec: Exec) -> Vec<Result<GraphMetric, Error>> {
    par::map(exec, xs, |x| graph_point(w, x))
}

/// Points `x₀ + t ν` off every `stride`-th boundary sample, for each offset.
pub fn band_points(w: &Glued, offsets: &[f64], stride: usize) -> Vec<V3> {
    let mut out = Vec::new();
    for s in w.mesh.samples.iter().step_by(stride.max(1)) {
        for &t in offsets {
            out.push(linalg::axpy(&s.x0, t, &s.nu));
        }
    }
    out
}

/// `D³Φ − D³v` at a boundary sample in the frame `(ν, τ₁, τ₂)`: the `ννν`
/// entry and the largest other entry.
pub fn third_jump(w: &Glued, s: &freeboundary::BoundarySample) -> Result<(f64, f64), Error> {
    let phi = explicit::phi_jet(&w.p, &s.x0, 3)?.d3.unwrap();
    let v = freeboundary::cauchy_jet(&w.p, s, 3)?.d3.unwrap();
    let frame = [s.nu, s.tau1, s.tau2];
    let diff = |a: &V3, b: &V3, c: &V3| phi.eval(a, b, c) - v.eval(a, b, c);
    let nnn = diff(&frame[0], &frame[0], &frame[0]);
    let mut off: f64 = 0.0;
    for a in 0..3 {
        for b in a..3 {
            for c in b..3 {
                if (a, b, c) != (0, 0, 0) {
                    off = off.max(diff(&frame[a], &frame[b], &frame[c]).abs());
                }
            }
        }
    }
    Ok((nnn, off))
}

/// `Θ_ν / F_νν` from the explicit potential.
pub fn third_jump_oracle(w: &Glued, s: &freeboundary::BoundarySample) -> f64 {
    let d = symtensor::slag_deriv(&explicit::phi_hess(&w.p, &s.x0));
    s.theta_nu / d.first.bilin(&s.nu, &s.nu)
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimalityReport {
    /// `sup |∇θ|_g` over the sampled band points.
    pub exterior_sup: f64,
    pub exterior_max_dist: f64,
    pub exterior_minimal: bool,
    /// `min |∇θ|_g` over ∂K, the measured `δ₀`.
    pub delta0: f64,
    /// `sup |∇θ|_g` over interior sample points.
    pub interior_sup: f64,
    pub interior_minimal: bool,
    /// Smallest ratio `|∇θ|_g / (Θ_ν / sqrt(λmax(g)))` over ∂K.
    pub boundary_bound_ratio: f64,
    pub origin_norm: f64,
    /// Largest relative deviation of the `ννν` jump from `Θ_ν/F_νν`.
    pub jump_slot_rel: f64,
    /// Largest other frame entry of the jump, relative to `Θ_ν/F_νν`.
    pub jump_off_rel: f64,
    /// `max |g − I − (D²w)²|` with `g` assembled from the graph tangents.
    pub metric_defect: f64,
    pub metric_min_eig: f64,
}

pub const MINIMAL_TOL: f64 = 1e-6;

pub fn minimality_report(w: &Glued, max_dist: f64, exec: Exec) -> Result<MinimalityReport, Error> {
    let offsets: Vec<f64> = (1..=4).map(|i| max_dist * i as f64 / 4.0).collect();
    let ext = band_points(w, &offsets, 7);
    let ext_sup = angle_field(w, &ext, exec)
        .into_iter()
        .map(|r| r.map(|m| m.norm_g))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let per_sample = par::map(exec, &w.mesh.samples, |s| -> Result<_, Error> {
        let t = explicit::theta_eval(&w.p, &s.x0)?;
        let h = explicit::phi_hess(&w.p, &s.x0);
        let g = graph_metric(&h);
        let n = metric_norm(&g, &t.grad);
        let lmax = symtensor::eig3(&g).values[2];
        let bound = s.theta_nu / lmax.sqrt();
        let (nnn, off) = third_jump(w, s)?;
        let oracle = third_jump_oracle(w, s);
        // tangent vectors (e_i, D²w e_i) of the graph
        let tv: [[f64; 6]; 3] = std::array::from_fn(|i| {
            let c = h.apply(&std::array::from_fn(|k| if k == i { 1.0 } else { 0.0 }));
            let mut v = [0.0; 6];
            v[i] = 1.0;
            v[3..].copy_from_slice(&c);
            v
        });
        let gram = SymMat3::from_fn(|i, j| (0..6).map(|k| tv[i][k] * tv[j][k]).sum());
        let defect = gram
            .sub(&SymMat3::identity())
            .sub(&SymMat3::from_full(&h.matmul(&h)))
            .max_abs();
        Ok((
            n,
            n / bound,
            ((nnn - oracle) / oracle).abs(),
            (off / oracle).abs(),
            defect,
            symtensor::eig3(&gram).values[0],
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let inner: Vec<V3> = linalg::r3_sequence(400, 0.0)
        .into_iter()
        .map(|u| {
            let d = [2.0 * u[0] - 1.0, 2.0 * u[1] - 1.0, 2.0 * u[2] - 1.0];
            linalg::scale(&d, w.mesh.max_radius())
        })
        .filter(|x| w.in_k(x))
        .collect();
    let int_sup = angle_field(w, &inner, exec)
        .into_iter()
        .map(|r| r.map(|m| m.norm_g))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let delta0 = per_sample.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let origin = graph_point(w, &[0.0; 3])?;
    let fold = |f: fn(&(f64, f64, f64, f64, f64, f64)) -> f64, max: bool| {
        per_sample.iter().map(f).fold(if max { 0.0 } else { f64::INFINITY }, |a, b| {
            if max {
                a.max(b)
            } else {
                a.min(b)
            }
        })
    };
    let interior_sup = int_sup.max(fold(|r| r.0, true));
    Ok(MinimalityReport {
        exterior_sup: ext_sup,
        exterior_max_dist: max_dist,
        exterior_minimal: ext_sup <= MINIMAL_TOL,
        delta0,
        interior_sup,
        interior_minimal: interior_sup <= MINIMAL_TOL,
        boundary_bound_ratio: fold(|r| r.1, false),
        origin_norm: origin.norm_g,
        jump_slot_rel: fold(|r| r.2, true),
        jump_off_rel: fold(|r| r.3, true),
        metric_defect: fold(|r| r.4, true),
        metric_min_eig: fold(|r| r.5, false),
    })
}

/// Largest mismatch between the swapped graph of `∇w` and the graph of `∇u`
/// at the given band points: `|∇u(∇w(x)) − x|`.
pub fn swap_defect(w: &Glued, xs: &[V3], exec: Exec) -> Result<f64, Error> {
    use crate::transform::{self, GluedMap, GradientMap};
    let m = GluedMap::new(w);
    let r: Result<Vec<f64>, Error> = par::map(exec, xs, |x| {
        let y = m.eval(x)?.y;
        let b = transform::invert_gradient(&m, &y)?;
        Ok(b.iter().map(|g| linalg::dist(&g.x, x)).fold(f64::INFINITY, f64::min))
    })
    .into_iter()
    .collect();
    Ok(r?.into_iter().fold(0.0, f64::max))
}
