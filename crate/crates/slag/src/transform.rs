//! Multivalued Legendre transform of gradient maps near their singular sets.
//!
//! A gradient map `G` is inverted along vertical lines. For fixed `(y₁, y₂)`
//! the equations `G₁ = y₁`, `G₂ = y₂` are solved by Newton's method at each
//! height `x₃ = s`, which inverts `H(x) = (G₁, G₂, x₃)`. The remaining scalar
//! equation `T₃(s) = G₃(H⁻¹(y₁, y₂, s)) = y₃` is bracketed on a scan of heights
//! and refined; every sign change is one branch of the transform.

use crate::band::{Branch, Glued};
use crate::explicit::{self, ModelParams};
use crate::freeboundary::BoundarySample;
use crate::linalg::{self, V3};
use crate::par::{self, Exec};
use crate::symtensor::{self, SymMat3};
use crate::Error;
use serde::Serialize;

const E3: V3 = [0.0, 0.0, 1.0];

/// A gradient map evaluated at a point of its scan parametrization.
#[derive(Clone, Copy, Debug)]
pub struct MapEval {
    /// Scan variable; its third component is the height `s`.
    pub param: V3,
    /// Point in the domain of the potential, `∇u(y)`.
    pub source: V3,
    pub y: V3,
    /// `∂y/∂param`.
    pub jac: [[f64; 3]; 3],
    /// Hessian of the potential at `source`.
    pub hess: SymMat3,
    /// `source·y − potential(source)`.
    pub legendre: f64,
    pub branch: Branch,
}

pub trait GradientMap: Sync {
    fn eval(&self, x: &V3) -> Result<MapEval, Error>;
    /// Starting point for `G₁ = y₁, G₂ = y₂` at height `s`.
    fn seed(&self, y1: f64, y2: f64, s: f64) -> V3;
    /// Ascending heights scanned along every vertical line.
    fn heights(&self) -> Vec<f64>;
}

/// One branch of the transform over `y`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GraphSample {
    pub x: V3,
    pub y: V3,
    pub legendre: f64,
    pub branch: Branch,
}

/// `½|x|²`, whose transform is itself.
#[derive(Clone, Copy, Debug)]
pub struct Quadratic {
    pub half_width: f64,
}

impl GradientMap for Quadratic {
    fn eval(&self, x: &V3) -> Result<MapEval, Error> {
        Ok(MapEval {
            param: *x,
            source: *x,
            y: *x,
            jac: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            hess: SymMat3::identity(),
            legendre: 0.5 * linalg::dot(x, x),
            branch: Branch::Band,
        })
    }

    fn seed(&self, y1: f64, y2: f64, s: f64) -> V3 {
        [y1, y2, s]
    }

    fn heights(&self) -> Vec<f64> {
        let n = 64;
        (0..=n)
            .map(|i| self.half_width * (2.0 * i as f64 / n as f64 - 1.0))
            .collect()
    }
}

/// The glued potential `w`, or `w_k = w − x₃²/k`, restricted to `K_μ`.
#[derive(Clone, Copy, Debug)]
pub struct GluedMap<'a> {
    pub w: &'a Glued,
    pub k: Option<f64>,
}

impl<'a> GluedMap<'a> {
    pub fn new(w: &'a Glued) -> Self {
        GluedMap { w, k: None }
    }

    pub fn shifted(w: &'a Glued, k: f64) -> Self {
        GluedMap { w, k: Some(k) }
    }
}

impl GradientMap for GluedMap<'_> {
    fn eval(&self, x: &V3) -> Result<MapEval, Error> {
        let e = self.w.eval_in_band(x)?;
        let (mut y, mut hess, mut value) = (e.grad, e.hess, e.value);
        if let Some(k) = self.k {
            y[2] -= 2.0 * x[2] / k;
            hess.m33 -= 2.0 / k;
            value -= x[2] * x[2] / k;
        }
        Ok(MapEval {
            param: *x,
            source: *x,
            y,
            jac: hess.to_full(),
            hess,
            legendre: linalg::dot(x, &y) - value,
            branch: e.branch,
        })
    }

    fn seed(&self, y1: f64, y2: f64, s: f64) -> V3 {
        psi_inverse(&self.w.p, y1, y2, s)
    }

    fn heights(&self) -> Vec<f64> {
        let top = self.w.mesh.max_radius() + self.w.mu;
        let n = (2.0 * top / (0.25 * self.w.mu)).ceil() as usize;
        (0..=n).map(|i| top * (2.0 * i as f64 / n as f64 - 1.0)).collect()
    }
}

fn residual2(e: &MapEval, y1: f64, y2: f64) -> f64 {
    (e.y[0] - y1).abs().max((e.y[1] - y2).abs())
}

/// Solves `G₁ = y₁, G₂ = y₂` at height `s` (the inverse of `H`).
pub fn solve_h<M: GradientMap + ?Sized>(
    map: &M,
    y1: f64,
    y2: f64,
    s: f64,
    start: &V3,
) -> Result<MapEval, Error> {
    let fail = || Error::HInversion([y1, y2, s]);
    let scale = 1.0 + y1.abs() + y2.abs();
    let mut x = [start[0], start[1], s];
    let mut best: Option<MapEval> = None;
    for _ in 0..40 {
        let e = map.eval(&x).map_err(|_| fail())?;
        let r = residual2(&e, y1, y2);
        if best.is_none_or(|b| r < residual2(&b, y1, y2)) {
            best = Some(e);
        }
        if r <= 2.0 * f64::EPSILON * scale {
            return Ok(e);
        }
        let j = e.jac;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det.abs() > 0.0 && det.is_finite()) {
            break;
        }
        let (r0, r1) = (e.y[0] - y1, e.y[1] - y2);
        let d0 = (j[1][1] * r0 - j[0][1] * r1) / det;
        let d1 = (j[0][0] * r1 - j[1][0] * r0) / det;
        x[0] -= d0;
        x[1] -= d1;
        if d0.abs().max(d1.abs()) <= 1e-16 * (1.0 + linalg::norm(&x)) {
            break;
        }
    }
    match best {
        Some(b) if residual2(&b, y1, y2) <= 1e-13 * scale => Ok(b),
        _ => Err(fail()),
    }
}

/// The preimage curve of one vertical line, sampled at the map's heights.
pub struct LineScan<'m, M: GradientMap + ?Sized> {
    map: &'m M,
    pub y1: f64,
    pub y2: f64,
    nodes: Vec<Option<MapEval>>,
}

impl<'m, M: GradientMap + ?Sized> LineScan<'m, M> {
    pub fn new(map: &'m M, y1: f64, y2: f64) -> Self {
        let mut nodes = Vec::new();
        let mut prev: Option<V3> = None;
        for s in map.heights() {
            let fresh = map.seed(y1, y2, s);
            let start = prev.unwrap_or(fresh);
            let e = solve_h(map, y1, y2, s, &start)
                .or_else(|_| solve_h(map, y1, y2, s, &fresh))
                .ok();
            prev = e.map(|e| e.param);
            nodes.push(e);
        }
        LineScan { map, y1, y2, nodes }
    }

    /// Number of heights at which `H` was inverted.
    pub fn covered(&self) -> usize {
        self.nodes.iter().flatten().count()
    }

    /// Range of `T₃` over the scanned curve.
    pub fn range(&self) -> Option<(f64, f64)> {
        let v: Vec<f64> = self.nodes.iter().flatten().map(|e| e.y[2]).collect();
        if v.is_empty() {
            return None;
        }
        Some((
            v.iter().copied().fold(f64::INFINITY, f64::min),
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ))
    }

    /// `(s, T₃(s))` at the scanned heights.
    pub fn profile(&self) -> Vec<(f64, f64)> {
        self.nodes.iter().flatten().map(|e| (e.param[2], e.y[2])).collect()
    }

    /// All branches over height `y3`, deduplicated.
    pub fn invert(&self, y3: f64) -> Vec<GraphSample> {
        let mut out: Vec<GraphSample> = Vec::new();
        let mut push = |e: &MapEval| {
            if !out.iter().any(|g| linalg::dist(&g.x, &e.source) < 1e-9) {
                out.push(GraphSample {
                    x: e.source,
                    y: [self.y1, self.y2, y3],
                    legendre: e.legendre,
                    branch: e.branch,
                });
            }
        };
        for w in self.nodes.windows(2) {
            let (Some(a), Some(b)) = (&w[0], &w[1]) else {
                continue;
            };
            let (fa, fb) = (a.y[2] - y3, b.y[2] - y3);
            if fa == 0.0 {
                push(a);
            } else if fa * fb < 0.0 {
                if let Some(e) = self.refine(a, b, y3) {
                    push(&e);
                }
            }
        }
        if let Some(Some(last)) = self.nodes.last() {
            if last.y[2] == y3 {
                push(last);
            }
        }
        out
    }

    /// Safeguarded regula falsi (Illinois, with periodic bisection) on
    /// `T₃(s) − y₃` between two bracketing nodes.
    fn refine(&self, a: &MapEval, b: &MapEval, y3: f64) -> Option<MapEval> {
        let (mut a, mut b) = (*a, *b);
        let (mut fa, mut fb) = (a.y[2] - y3, b.y[2] - y3);
        let mut side = 0i8;
        let mut best = if fa.abs() < fb.abs() { a } else { b };
        for it in 0..200 {
            let (sa, sb) = (a.param[2], b.param[2]);
            let mut s = (sa * fb - sb * fa) / (fb - fa);
            if it % 3 == 2 || !(s > sa.min(sb) && s < sa.max(sb)) {
                s = 0.5 * (sa + sb);
            }
            let t = (s - sa) / (sb - sa);
            let start = linalg::add(&linalg::scale(&a.param, 1.0 - t), &linalg::scale(&b.param, t));
            let e = solve_h(self.map, self.y1, self.y2, s, &start).ok()?;
            let f = e.y[2] - y3;
            if f.abs() < (best.y[2] - y3).abs() {
                best = e;
            }
            if f == 0.0 {
                return Some(e);
            }
            if f * fb > 0.0 {
                b = e;
                fb = f;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = e;
                fa = f;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
            if (b.param[2] - a.param[2]).abs() <= 4.0 * f64::EPSILON * (1.0 + s.abs()) {
                break;
            }
        }
        Some(best)
    }
}

/// Every branch of the transform over `y`.
pub fn invert_gradient<M: GradientMap + ?Sized>(map: &M, y: &V3) -> Result<Vec<GraphSample>, Error> {
    let v = LineScan::new(map, y[0], y[1]).invert(y[2]);
    if v.is_empty() {
        Err(Error::NoBranch(*y))
    } else {
        Ok(v)
    }
}

/// The branch with the smallest Legendre value.
pub fn min_branch(branches: &[GraphSample]) -> Option<GraphSample> {
    branches
        .iter()
        .copied()
        .min_by(|a, b| a.legendre.total_cmp(&b.legendre))
}

/// `u(y)`: the minimum over branches.
pub fn u_eval<M: GradientMap + ?Sized>(map: &M, y: &V3) -> Result<f64, Error> {
    Ok(min_branch(&invert_gradient(map, y)?).unwrap().legendre)
}

/// `T(y) = (y₁, y₂, G₃(H⁻¹(y)))` with `det DT` evaluated twice: as
/// `det DG · det DH⁻¹` and as `∂₃T₃` by the chain rule through `DH⁻¹ e₃`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TMap {
    pub x: V3,
    pub t: V3,
    pub det_dt: f64,
    pub d3t3: f64,
    pub branch: Branch,
}

pub fn t_map<M: GradientMap + ?Sized>(map: &M, y: &V3) -> Result<TMap, Error> {
    let e = solve_h(map, y[0], y[1], y[2], &map.seed(y[0], y[1], y[2]))?;
    let j = e.jac;
    let dh = [j[0], j[1], E3];
    let det_dh = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let det_g = SymMat3::from_full(&j).det();
    let dx = linalg::solve3(&dh, &E3).ok_or(Error::HInversion(*y))?;
    Ok(TMap {
        x: e.param,
        t: [y[0], y[1], e.y[2]],
        det_dt: det_g / det_dh,
        d3t3: linalg::dot(&j[2], &dx),
        branch: e.branch,
    })
}

/// `Ψ⁻¹(y₁, y₂, s)` in closed form.
pub fn psi_inverse(p: &ModelParams, y1: f64, y2: f64, s: f64) -> V3 {
    let l2 = 2.0 * p.lambda;
    [y1 * (1.0 + s) / l2, y2 * (1.0 - s) / l2, s]
}

pub fn psi(p: &ModelParams, x: &V3) -> V3 {
    let g = explicit::phi_grad(p, x);
    [g[0], g[1], x[2]]
}

/// Height of the paraboloid Σ over `(y₁, y₂)`.
pub fn sigma_height(p: &ModelParams, y1: f64, y2: f64) -> f64 {
    (y2 * y2 - y1 * y1) / (4.0 * p.lambda)
}

/// End points `(s₋, s₊)` of the intersection of `Ψ(K)` with the vertical line
/// over `(y₁, y₂)`, or `None` when the line misses `Ψ(K)`.
pub fn psi_chord(p: &ModelParams, y1: f64, y2: f64) -> Option<(f64, f64)> {
    let c = p.c_star();
    let f = |s: f64| {
        let x = psi_inverse(p, y1, y2, s);
        if linalg::norm(&x) > 0.6 {
            return 1.0;
        }
        explicit::theta_value(p, &x) - c
    };
    let n = 1200;
    let ss: Vec<f64> = (0..=n).map(|i| -0.6 + 1.2 * i as f64 / n as f64).collect();
    let inside: Vec<usize> = (0..=n).filter(|&i| f(ss[i]) <= 0.0).collect();
    let (&i0, &i1) = (inside.first()?, inside.last()?);
    let bisect = |mut out: f64, mut inn: f64| {
        for _ in 0..100 {
            let m = 0.5 * (out + inn);
            if f(m) <= 0.0 {
                inn = m
            } else {
                out = m
            }
        }
        inn
    };
    let lo = if i0 == 0 { ss[0] } else { bisect(ss[i0 - 1], ss[i0]) };
    let hi = if i1 == n { ss[n] } else { bisect(ss[i1 + 1], ss[i1]) };
    Some((lo, hi))
}

/// Chord length `L(y₁, y₂)`.
pub fn chord_length(p: &ModelParams, y1: f64, y2: f64) -> f64 {
    psi_chord(p, y1, y2).map_or(0.0, |(a, b)| b - a)
}

/// Value at `t = 0` of the polynomial in `√t` through the samples (Neville).
pub fn extrapolate_sqrt(ts: &[f64], vals: &[f64]) -> f64 {
    let q: Vec<f64> = ts.iter().map(|t| t.sqrt()).collect();
    let mut p = vals.to_vec();
    let n = p.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (q[i + m] * p[i] - q[i] * p[i + 1]) / (q[i + m] - q[i]);
        }
    }
    p[0]
}

#[derive(Clone, Debug, Serialize)]
pub struct JumpSample {
    pub y1: f64,
    pub y2: f64,
    pub jump: Option<f64>,
    pub chord: f64,
    pub h_probe: f64,
    pub flag: Option<String>,
}

impl JumpSample {
    /// `|jump + L| / L`.
    pub fn rel_err(&self) -> Option<f64> {
        self.jump.map(|j| (j + self.chord).abs() / self.chord.max(f64::MIN_POSITIVE))
    }
}

pub const PROBE_OFFSETS: [f64; 4] = [4.0, 8.0, 16.0, 32.0];

/// One-sided limits of `u₃` along the vertical line over `(y₁, y₂)`, each
/// extrapolated from offsets `{4, 8, 16, 32}·h` above and below Σ. The probe
/// step is capped so that the largest offset stays within half of the
/// covered range of `T₃`.
pub fn jump_at(map: &GluedMap, y1: f64, y2: f64, h_probe: f64) -> JumpSample {
    let p = &map.w.p;
    let gh = sigma_height(p, y1, y2);
    let chord = chord_length(p, y1, y2);
    let mut out = JumpSample {
        y1,
        y2,
        jump: None,
        chord,
        h_probe,
        flag: None,
    };
    let scan = LineScan::new(map, y1, y2);
    let Some((lo, hi)) = scan.range() else {
        out.flag = Some("line not covered".into());
        return out;
    };
    let cover = (hi - gh).min(gh - lo);
    if cover <= 0.0 {
        out.flag = Some("band does not straddle the paraboloid".into());
        return out;
    }
    let h = h_probe.min(cover / 64.0);
    out.h_probe = h;
    let ts: Vec<f64> = PROBE_OFFSETS.iter().map(|m| m * h).collect();
    let side = |sign: f64| -> Option<f64> {
        let v: Option<Vec<f64>> = ts
            .iter()
            .map(|t| min_branch(&scan.invert(gh + sign * t)).map(|b| b.x[2]))
            .collect();
        Some(extrapolate_sqrt(&ts, &v?))
    };
    match (side(1.0), side(-1.0)) {
        (Some(a), Some(b)) => out.jump = Some(a - b),
        _ => out.flag = Some("inversion failed near the paraboloid".into()),
    }
    out
}

pub fn jump_profile(map: &GluedMap, points: &[(f64, f64)], h_probe: f64, exec: Exec) -> Vec<JumpSample> {
    par::map(exec, points, |&(a, b)| jump_at(map, a, b, h_probe))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Above,
    Below,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Above => 1.0,
            Side::Below => -1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderFit {
    pub alpha: f64,
    pub decades: f64,
    pub points: usize,
    pub reliable: bool,
}

/// Slope of `log|∇u(z) − grad0|` against `log|z − z₀|` for `z = z₀ ± r e₃`,
/// following the branch nearest `grad0`.
pub fn holder_fit<M: GradientMap + ?Sized>(map: &M, z0: &V3, grad0: &V3, side: Side, radii: &[f64]) -> HolderFit {
    let scan = LineScan::new(map, z0[0], z0[1]);
    let mut rs = Vec::new();
    let mut ds = Vec::new();
    for &r in radii {
        let b = scan.invert(z0[2] + side.sign() * r);
        let best = b
            .iter()
            .map(|g| linalg::dist(&g.x, grad0))
            .fold(f64::INFINITY, f64::min);
        if best.is_finite() && best > 0.0 {
            rs.push(r);
            ds.push(best);
        }
    }
    let decades = match (rs.first(), rs.last()) {
        (Some(a), Some(b)) => (b / a).log10(),
        _ => 0.0,
    };
    let alpha = if rs.len() >= 2 { linalg::loglog_slope(&rs, &ds) } else { f64::NAN };
    HolderFit {
        alpha,
        decades,
        points: rs.len(),
        reliable: decades >= 1.5 && alpha.is_finite() && rs.len() == radii.len(),
    }
}

/// Radii spanning two decades below 40% of the covered range on `side` of
/// height `z3`.
fn probe_radii(scan_range: Option<(f64, f64)>, z3: f64, side: Side) -> Vec<f64> {
    let Some((lo, hi)) = scan_range else {
        return Vec::new();
    };
    let cover = match side {
        Side::Above => hi - z3,
        Side::Below => z3 - lo,
    };
    if cover <= 0.0 {
        return Vec::new();
    }
    linalg::logspace(4e-3 * cover, 0.4 * cover, 9)
}

/// Hölder fit at the interior point of Γ over `(y₁, y₂)`; the limit of `∇u`
/// from above is the lower end of the chord and from below the upper end.
pub fn holder_interior(map: &GluedMap, y1: f64, y2: f64, side: Side) -> Option<HolderFit> {
    let p = &map.w.p;
    let (s_lo, s_hi) = psi_chord(p, y1, y2)?;
    let z0 = [y1, y2, sigma_height(p, y1, y2)];
    let s0 = if side == Side::Above { s_lo } else { s_hi };
    let x0 = psi_inverse(p, y1, y2, s0);
    let radii = probe_radii(LineScan::new(map, y1, y2).range(), z0[2], side);
    Some(holder_fit(map, &z0, &x0, side, &radii))
}

/// Hölder fit at the point `∇Φ(x₀)` of ∂Γ, for a tangential boundary sample.
pub fn holder_edge(map: &GluedMap, s: &BoundarySample, side: Side) -> HolderFit {
    let z0 = explicit::phi_grad(&map.w.p, &s.x0);
    let radii = probe_radii(LineScan::new(map, z0[0], z0[1]).range(), z0[2], side);
    holder_fit(map, &z0, &s.x0, side, &radii)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WkCheck {
    /// `|w_k*(∇w(x) − 2x₃e₃/k) − w*(∇w(x)) + x₃²/k|`.
    pub identity_residual: f64,
    /// `F(D²w_k*) − (π/2 − c*)` at the inverted point.
    pub dual_angle_gap: f64,
}

pub fn wk_check(w: &Glued, k: f64, x: &V3) -> Result<WkCheck, Error> {
    let mw = GluedMap::new(w);
    let mk = GluedMap::shifted(w, k);
    let y = mw.eval(x)?.y;
    let u = u_eval(&mw, &y)?;
    let yk = linalg::axpy(&y, -2.0 * x[2] / k, &E3);
    let bk = min_branch(&invert_gradient(&mk, &yk)?).unwrap();
    let hk = mk.eval(&bk.x)?.hess;
    let inv = hk.inverse().ok_or(Error::NoBranch(yk))?;
    Ok(WkCheck {
        identity_residual: (bk.legendre - u + x[2] * x[2] / k).abs(),
        dual_angle_gap: symtensor::slag_angle(&inv) - w.p.c(),
    })
}

/// `max |w_k*(y) − u(y)|` over `y = ∇w(x)` for the given source points, with
/// the bound `max x₃² / k`.
pub fn wk_uniform(w: &Glued, k: f64, xs: &[V3], exec: Exec) -> Result<(f64, f64), Error> {
    let mw = GluedMap::new(w);
    let mk = GluedMap::shifted(w, k);
    let r: Result<Vec<(f64, f64)>, Error> = par::map(exec, xs, |x| {
        let y = mw.eval(x)?.y;
        let u = u_eval(&mw, &y)?;
        let uk = u_eval(&mk, &y)?;
        Ok(((uk - u).abs(), x[2] * x[2] / k))
    })
    .into_iter()
    .collect();
    Ok(r?.into_iter().fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_self_dual() {
        let q = Quadratic { half_width: 1.0 };
        let y = [0.3, -0.2, 0.11];
        let b = invert_gradient(&q, &y).unwrap();
        assert_eq!(b.len(), 1);
        assert!(linalg::dist(&b[0].x, &y) < 1e-12);
        assert!((b[0].legendre - 0.5 * linalg::dot(&y, &y)).abs() < 1e-14);
    }

    #[test]
    fn sqrt_extrapolation_is_exact_on_cubics_in_sqrt() {
        let f = |t: f64| 1.5 - 2.0 * t.sqrt() + 0.3 * t - 0.7 * t.powf(1.5);
        let ts = [4e-3, 8e-3, 16e-3, 32e-3];
        let v: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
        assert!((extrapolate_sqrt(&ts, &v) - 1.5).abs() < 1e-12);
    }
}
