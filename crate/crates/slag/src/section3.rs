//! The rotation laboratory built on the quartic model `w`.
//!
//! Rotating the graph of `∇w` by `θ = arctan εᵣ` gives the potential `w̃`,
//! parametrized by the original point `x`:
//! `x̃ = cos θ x − sin θ ∇w(x)`, `ỹ = ∇w̃(x̃) = sin θ x + cos θ ∇w(x)` and
//! `w̃(x̃) = w + sc(|x|² − |∇w|²)/2 − s² x·∇w`. The set `Z` is the component of
//! `{λ̃₃ > 0}` around the origin and `Ψ(x̃) = (w̃₁, w̃₂, x̃₃)`.

use crate::band::Branch;
use crate::explicit;
use crate::freeboundary;
use crate::linalg::{self, V3};
use crate::par::{self, Exec};
use crate::solver::{self, Grid, Operator, Problem, Region, ScalarField3, SolveOptions};
use crate::symtensor::{self, SymMat3};
use crate::transform::{self, GradientMap, LineScan, MapEval};
use crate::Error;
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

/// The rotated potential. Scans of vertical lines run over the original
/// heights `x₃ ∈ [−κ, κ]`.
#[derive(Clone, Copy, Debug)]
pub struct Rotation {
    pub eps_r: f64,
    pub kappa: f64,
    pub dh: f64,
    s: f64,
    c: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct RotatedPoint {
    pub x: V3,
    pub xt: V3,
    pub yt: V3,
    /// `w̃(x̃)`.
    pub value: f64,
    /// `D²w̃(x̃)`.
    pub hess: SymMat3,
    /// `∂ỹ/∂x = sI + cD²w`.
    pub dy: [[f64; 3]; 3],
    /// `∂x̃/∂x = cI − sD²w`.
    pub dxt: [[f64; 3]; 3],
    pub lambda3: f64,
}

fn shifted(m: &SymMat3, a: f64, b: f64) -> [[f64; 3]; 3] {
    m.scale(b).add(&SymMat3::diag(a, a, a)).to_full()
}

/// Newton's method for `f(x) = target` with Jacobian `j`.
fn newton3(
    f: impl Fn(&V3) -> (V3, [[f64; 3]; 3]),
    target: &V3,
    start: &V3,
) -> Option<V3> {
    let mut x = *start;
    let scale = 1.0 + linalg::norm(target);
    for _ in 0..60 {
        let (v, j) = f(&x);
        let r = linalg::sub(&v, target);
        if linalg::norm(&r) <= 4.0 * f64::EPSILON * scale {
            return Some(x);
        }
        let d = linalg::solve3(&j, &r)?;
        x = linalg::sub(&x, &d);
        if linalg::norm(&d) <= 1e-16 * (1.0 + linalg::norm(&x)) {
            break;
        }
    }
    let (v, _) = f(&x);
    (linalg::dist(&v, target) <= 1e-12 * scale).then_some(x)
}

impl Rotation {
    pub fn new(eps_r: f64) -> Result<Rotation, Error> {
        if !(0.0..=0.2).contains(&eps_r) {
            return Err(Error::InvalidParams(format!("eps_r = {eps_r} outside [0, 0.2]")));
        }
        let (s, c) = eps_r.atan().sin_cos();
        Ok(Rotation { eps_r, kappa: 0.5, dh: 0.005, s, c })
    }

    pub fn theta(&self) -> f64 {
        self.eps_r.atan()
    }

    /// `π/2 + 3θ`.
    pub fn angle(&self) -> f64 {
        FRAC_PI_2 + 3.0 * self.theta()
    }

    pub fn at(&self, x: &V3) -> Result<RotatedPoint, Error> {
        let (s, c) = (self.s, self.c);
        let g = explicit::wy2_grad(x);
        let m = explicit::wy2_hess(x);
        let hess = explicit::rotate_hessian(&m, self.eps_r)?;
        let xx = linalg::dot(x, x);
        let gg = linalg::dot(&g, &g);
        let xg = linalg::dot(x, &g);
        Ok(RotatedPoint {
            x: *x,
            xt: explicit::rotate_point(x, &g, self.theta()),
            yt: std::array::from_fn(|i| s * x[i] + c * g[i]),
            value: explicit::wy2_value(x) + 0.5 * s * c * (xx - gg) - s * s * xg,
            hess,
            dy: shifted(&m, s, c),
            dxt: shifted(&m, c, -s),
            lambda3: symtensor::eig3(&hess).values[0],
        })
    }

    /// The original point over `x̃`, by Newton from `x̃ / (c − s)`.
    pub fn source(&self, xt: &V3) -> Result<V3, Error> {
        let h = 1.0 / (self.c - self.s);
        let start = [xt[0] * h, xt[1] * h, xt[2] / self.c];
        newton3(
            |x| match self.at(x) {
                Ok(r) => (r.xt, r.dxt),
                Err(_) => ([f64::NAN; 3], [[f64::NAN; 3]; 3]),
            },
            xt,
            &start,
        )
        .ok_or(Error::HInversion(*xt))
    }

    /// `λ̃₃` as a function of `x̃`.
    pub fn lambda3(&self, xt: &V3) -> Result<f64, Error> {
        Ok(self.at(&self.source(xt)?)?.lambda3)
    }

    /// `Ψ = (ỹ₁, ỹ₂, x̃₃)` at the original point `x`.
    pub fn psi(&self, x: &V3) -> Result<V3, Error> {
        let r = self.at(x)?;
        Ok([r.yt[0], r.yt[1], r.xt[2]])
    }

    /// The original point with `Ψ = q`.
    pub fn psi_source(&self, q: &V3, start: &V3) -> Result<V3, Error> {
        newton3(
            |x| match self.at(x) {
                Ok(r) => ([r.yt[0], r.yt[1], r.xt[2]], [r.dy[0], r.dy[1], r.dxt[2]]),
                Err(_) => ([f64::NAN; 3], [[f64::NAN; 3]; 3]),
            },
            q,
            start,
        )
        .ok_or(Error::HInversion(*q))
    }
}

impl GradientMap for Rotation {
    fn eval(&self, x: &V3) -> Result<MapEval, Error> {
        if !(x[2].abs() <= 1.5 * self.kappa && linalg::norm(x) <= 3.0 * self.kappa) {
            return Err(Error::OutOfDomain(*x));
        }
        let r = self.at(x)?;
        Ok(MapEval {
            param: *x,
            source: r.xt,
            y: r.yt,
            jac: r.dy,
            hess: r.hess,
            legendre: linalg::dot(&r.xt, &r.yt) - r.value,
            branch: if r.lambda3 > 0.0 { Branch::InsideK } else { Branch::Band },
        })
    }

    fn seed(&self, y1: f64, y2: f64, s: f64) -> V3 {
        let h = 1.0 / (self.s + self.c);
        [y1 * h, y2 * h, s]
    }

    fn heights(&self) -> Vec<f64> {
        let n = (2.0 * self.kappa / self.dh).round() as usize;
        (0..=n).map(|i| self.kappa * (2.0 * i as f64 / n as f64 - 1.0)).collect()
    }
}

/// `D²λ̃₃(0)` in the `x̃` coordinates, closed form.
pub fn lambda3_hessian_formula(eps_r: f64) -> SymMat3 {
    let c2 = 1.0 / (1.0 + eps_r * eps_r);
    let f = -2.0 * (1.0 + eps_r * eps_r) / c2;
    let a = f / ((1.0 - eps_r) * (1.0 - eps_r));
    SymMat3::diag(a, a, f)
}

/// `D²λ̃₃(0)` by central differences in `x̃` with step `h`.
pub fn lambda3_hessian_fd(rot: &Rotation, h: f64) -> Result<SymMat3, Error> {
    let f = |v: V3| rot.lambda3(&v);
    let e = |i: usize, t: f64| -> V3 { std::array::from_fn(|k| if k == i { t } else { 0.0 }) };
    let f0 = f([0.0; 3])?;
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        m[i][i] = (f(e(i, h))? - 2.0 * f0 + f(e(i, -h))?) / (h * h);
        for j in 0..i {
            let p = |a: f64, b: f64| f(linalg::add(&e(i, a), &e(j, b)));
            m[i][j] = (p(h, h)? - p(h, -h)? - p(-h, h)? + p(-h, -h)?) / (4.0 * h * h);
            m[j][i] = m[i][j];
        }
    }
    Ok(SymMat3::from_full(&m))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OriginCheck {
    pub lambda3: f64,
    pub lambda3_err: f64,
    pub angle: f64,
    pub angle_err: f64,
    pub hess_rel_err: f64,
}

pub fn origin_check(rot: &Rotation) -> Result<OriginCheck, Error> {
    let r = rot.at(&[0.0; 3])?;
    let angle = symtensor::slag_angle(&r.hess);
    let fd = lambda3_hessian_fd(rot, 1e-3)?;
    let exact = lambda3_hessian_formula(rot.eps_r);
    Ok(OriginCheck {
        lambda3: r.lambda3,
        lambda3_err: (r.lambda3 - rot.eps_r).abs(),
        angle,
        angle_err: (angle - rot.angle()).abs(),
        hess_rel_err: fd.sub(&exact).max_abs() / exact.max_abs(),
    })
}

/// Log-log slopes over `radii` of the sup over directions of
/// `|F(D²w) − π/2|` and `|λ₃ + |x|²|`.
pub fn wy2_slopes(radii: &[f64]) -> (f64, f64) {
    let dirs: Vec<V3> = freeboundary::icosphere(2).vertices;
    let sup = |r: f64, f: &dyn Fn(&V3) -> f64| {
        dirs.iter()
            .map(|d| f(&linalg::scale(d, r)))
            .fold(0.0, f64::max)
    };
    let res: Vec<f64> = radii
        .iter()
        .map(|&r| sup(r, &|x| (symtensor::slag_angle(&explicit::wy2_hess(x)) - FRAC_PI_2).abs()))
        .collect();
    let lam: Vec<f64> = radii
        .iter()
        .map(|&r| {
            sup(r, &|x| {
                (symtensor::eig3(&explicit::wy2_hess(x)).values[0] + linalg::dot(x, x)).abs()
            })
        })
        .collect();
    (linalg::loglog_slope(radii, &res), linalg::loglog_slope(radii, &lam))
}

/// Boundary of `Z` sampled along icosphere directions in `x̃`.
#[derive(Clone, Debug, Serialize)]
pub struct ZMesh {
    pub eps_r: f64,
    /// Points of `∂Z` in `x̃`.
    pub points: Vec<V3>,
    /// The corresponding original points.
    pub sources: Vec<V3>,
    /// `Ψ` of the boundary points.
    pub psi: Vec<V3>,
}

impl ZMesh {
    pub fn enclosing_radius(&self) -> f64 {
        self.points.iter().map(linalg::norm).fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "xt1,xt2,xt3,psi1,psi2,psi3")?;
        for (p, q) in self.points.iter().zip(&self.psi) {
            writeln!(w, "{},{},{},{},{},{}", p[0], p[1], p[2], q[0], q[1], q[2])?;
        }
        Ok(())
    }
}

/// Radial root of `λ̃₃` along `omega`.
fn z_radius(rot: &Rotation, omega: &V3) -> Result<f64, Error> {
    let fail = || Error::KExtraction(*omega);
    let f = |r: f64| rot.lambda3(&linalg::scale(omega, r));
    let step = 0.1 * rot.eps_r.sqrt();
    let mut lo = 0.0;
    let mut hi = step;
    while f(hi).map_err(|_| fail())? > 0.0 {
        lo = hi;
        hi += step;
        if hi > rot.kappa {
            return Err(fail());
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid).map_err(|_| fail())? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn extract_z(rot: &Rotation, level: usize, exec: Exec) -> Result<ZMesh, Error> {
    if rot.eps_r <= 0.0 {
        return Err(Error::InvalidParams("Z needs eps_r > 0".into()));
    }
    let dirs = freeboundary::icosphere(level).vertices;
    let pts = par::map(exec, &dirs, |d| -> Result<(V3, V3, V3), Error> {
        let xt = linalg::scale(d, z_radius(rot, d)?);
        let x = rot.source(&xt)?;
        Ok((xt, x, rot.psi(&x)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(ZMesh {
        eps_r: rot.eps_r,
        points: pts.iter().map(|p| p.0).collect(),
        sources: pts.iter().map(|p| p.1).collect(),
        psi: pts.iter().map(|p| p.2).collect(),
    })
}

fn fd_grad(f: impl Fn(&V3) -> Result<f64, Error>, x: &V3, h: f64) -> Result<V3, Error> {
    let mut g = [0.0; 3];
    for i in 0..3 {
        let mut a = *x;
        let mut b = *x;
        a[i] += h;
        b[i] -= h;
        g[i] = (f(&a)? - f(&b)?) / (2.0 * h);
    }
    Ok(g)
}

/// `min_{i≠j} 2(Pᵢ − Pⱼ)·nᵢ / |Pⱼ − Pᵢ|²` for outward unit normals `nᵢ`; positive
/// for a uniformly convex sampled surface.
pub fn discrete_convexity(points: &[V3], normals: &[V3]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, (p, n)) in points.iter().zip(normals).enumerate() {
        for (j, q) in points.iter().enumerate() {
            if i != j {
                let d = linalg::sub(p, q);
                best = best.min(2.0 * linalg::dot(&d, n) / linalg::dot(&d, &d));
            }
        }
    }
    best
}

/// Discrete convexity of `Z` and of `Ψ(Z)`.
pub fn z_convexity(rot: &Rotation, z: &ZMesh, exec: Exec) -> Result<(f64, f64), Error> {
    let h = 1e-6;
    let normals = |pts: &[V3], f: &(dyn Fn(&V3, &V3) -> Result<f64, Error> + Sync)| {
        let idx: Vec<usize> = (0..pts.len()).collect();
        par::map(exec, &idx, |&i| -> Result<V3, Error> {
            let g = fd_grad(|y| f(y, &z.sources[i]), &pts[i], h)?;
            Ok(linalg::scale(&linalg::normalize(&g), -1.0))
        })
        .into_iter()
        .collect::<Result<Vec<V3>, Error>>()
    };
    let nz = normals(&z.points, &|xt, _| rot.lambda3(xt))?;
    let np = normals(&z.psi, &|q, start| Ok(rot.at(&rot.psi_source(q, start)?)?.lambda3))?;
    Ok((discrete_convexity(&z.points, &nz), discrete_convexity(&z.psi, &np)))
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchCensus {
    pub lines: usize,
    /// `histogram[n]` counts the tested heights with `n` branches.
    pub histogram: Vec<usize>,
}

impl BranchCensus {
    pub fn only_one_or_three(&self) -> bool {
        self.histogram
            .iter()
            .enumerate()
            .all(|(n, &c)| c == 0 || n == 1 || n == 3)
    }

    pub fn three_seen(&self) -> bool {
        self.histogram.get(3).is_some_and(|&c| c > 0)
    }
}

/// Branch counts over vertical lines through the projection of `Ψ(Z)`.
///
/// On each line the heights straddle the fold values of the scanned profile.
pub fn branch_census(rot: &Rotation, z: &ZMesh, stride: usize, exec: Exec) -> BranchCensus {
    let mut lines: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for q in z.psi.iter().step_by(stride.max(1)) {
        for t in [0.3, 0.6, 0.9] {
            lines.push((t * q[0], t * q[1]));
        }
    }
    let counts: Vec<Vec<usize>> = par::map(exec, &lines, |&(y1, y2)| {
        let scan = LineScan::new(rot, y1, y2);
        let prof = scan.profile();
        let mut ext: Vec<f64> = prof
            .windows(3)
            .filter(|w| (w[1].1 - w[0].1) * (w[2].1 - w[1].1) < 0.0)
            .map(|w| w[1].1)
            .collect();
        if ext.is_empty() {
            let mid = prof[prof.len() / 2].1;
            ext = vec![mid - 1e-3, mid + 1e-3];
        }
        let lo = ext.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ext.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = 0.5 * (hi - lo);
        (0..21)
            .map(|i| lo - pad + (hi - lo + 2.0 * pad) * (i as f64 + 0.5) / 21.0)
            .map(|y3| scan.invert(y3).len())
            .collect()
    });
    let mut histogram = vec![0; 6];
    for n in counts.into_iter().flatten() {
        if n >= histogram.len() {
            histogram.resize(n + 1, 0);
        }
        histogram[n] += 1;
    }
    BranchCensus {
        lines: lines.len(),
        histogram,
    }
}

/// Per-node minimum branch of `w̃*` and branch counts on a grid, one line scan
/// per column.
pub fn min_transform_field(rot: &Rotation, grid: &Grid, exec: Exec) -> (ScalarField3, Vec<u8>) {
    let [nx, ny, nz] = grid.dims;
    let cols = par::map_range(exec, nx * ny, |c| {
        let (i, j) = (c % nx, c / nx);
        let p = grid.point(grid.index(i, j, 0));
        let scan = LineScan::new(rot, p[0], p[1]);
        (0..nz)
            .map(|k| {
                let y3 = grid.point(grid.index(i, j, k))[2];
                let b = scan.invert(y3);
                let v = transform::min_branch(&b).map_or(f64::NAN, |g| g.legendre);
                (v, b.len() as u8)
            })
            .collect::<Vec<_>>()
    });
    let mut field = ScalarField3::new(grid, f64::NAN);
    let mut counts = vec![0u8; grid.len()];
    for (c, col) in cols.into_iter().enumerate() {
        let (i, j) = (c % nx, c / nx);
        for (k, (v, n)) in col.into_iter().enumerate() {
            let idx = grid.index(i, j, k);
            field.values[idx] = v;
            counts[idx] = n;
        }
    }
    (field, counts)
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub eps_r: f64,
    pub d: f64,
    pub h: f64,
    /// `sup |u − min(w̃*)|` on `d/2 ≤ |ỹ| ≤ d`.
    pub gap: f64,
    /// `sup (u − min(w̃*))` over the ball.
    pub ordering: f64,
    /// Fraction of annulus nodes over which `w̃*` is multivalued.
    pub multivalued: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub seconds: f64,
}

/// The discrete solution and `min(w̃*)` on a common grid.
pub struct DirichletRun {
    pub d: f64,
    pub grid: Grid,
    pub u: ScalarField3,
    pub mins: ScalarField3,
    pub counts: Vec<u8>,
    pub report: GapReport,
}

impl DirichletRun {
    fn annulus(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.len()).filter(|&i| {
            let r = linalg::norm(&self.grid.point(i));
            r >= 0.5 * self.d && r <= self.d
        })
    }

    /// `u − min(w̃*)` at node `i`.
    pub fn diff(&self, i: usize) -> f64 {
        self.u.values[i] - self.mins.values[i]
    }

    /// `sup |(u − min w̃*) − (u₀ − min w̃₀*)|` on the annulus against a run on
    /// the same grid.
    pub fn corrected_gap(&self, control: &DirichletRun) -> f64 {
        self.annulus()
            .map(|i| (self.diff(i) - control.diff(i)).abs())
            .fold(0.0, f64::max)
    }
}

/// Solves `F(D²u) = −3θ` in `B_{3d/2}` with data `min(w̃*)` on a grid of
/// `cells` cells per radius. The grid is offset by half a cell in `ỹ₃`, and
/// the scan height grows until every node's line is covered.
pub fn dirichlet_run(
    rot: &Rotation,
    d: f64,
    cells: usize,
    opts: &SolveOptions,
) -> Result<DirichletRun, Error> {
    if !(d > 0.0 && cells >= 4) {
        return Err(Error::InvalidParams(format!("d = {d}, cells = {cells}")));
    }
    let radius = 1.5 * d;
    let h = radius / cells as f64;
    let mut grid = Grid::cube(radius + 3.0 * h, h)?;
    grid.origin[2] += 0.5 * grid.h;
    let top = linalg::norm(&grid.upper()) + grid.h;
    let mut rot = *rot;
    while rot.c * rot.kappa.powi(3) / 3.0 - rot.s * rot.kappa < 1.5 * top {
        rot.kappa *= 1.25;
    }
    let rot = &rot;
    let (mins, counts) = min_transform_field(rot, &grid, opts.exec);
    if let Some(i) = mins.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NoBranch(grid.point(i)));
    }
    let lookup = |x: &V3| {
        let c: [f64; 3] = std::array::from_fn(|a| (x[a] - grid.origin[a]) / grid.h);
        let r = c.map(|v| v.round());
        if (0..3).all(|a| (c[a] - r[a]).abs() < 1e-6 && r[a] >= 0.0 && (r[a] as usize) < grid.dims[a]) {
            mins.values[grid.index(r[0] as usize, r[1] as usize, r[2] as usize)]
        } else {
            transform::u_eval(rot, x).unwrap_or(f64::NAN)
        }
    };
    let c = -3.0 * rot.theta();
    let rhs = move |_: &V3| c;
    let pb = Problem {
        grid,
        region: Region::Ball {
            center: [0.0; 3],
            radius,
        },
        op: Operator::Angle,
        rhs: &rhs,
        bdata: &lookup,
    };
    let (u, rep) = solver::solve(&pb, opts);
    if !rep.converged {
        return Err(Error::NonConvergence {
            iterations: rep.iterations,
            residual: rep.residual,
        });
    }
    let mut run = DirichletRun {
        d,
        grid,
        u,
        mins,
        counts,
        report: GapReport {
            eps_r: rot.eps_r,
            d,
            h: grid.h,
            gap: 0.0,
            ordering: f64::NEG_INFINITY,
            multivalued: 0.0,
            iterations: rep.iterations,
            residual: rep.residual,
            converged: rep.converged,
            seconds: rep.seconds,
        },
    };
    let (mut ann, mut multi, mut gap) = (0usize, 0usize, 0.0f64);
    for i in run.annulus() {
        gap = gap.max(run.diff(i).abs());
        ann += 1;
        multi += (run.counts[i] > 1) as usize;
    }
    let ordering = (0..grid.len())
        .filter(|&i| linalg::norm(&grid.point(i)) < radius)
        .map(|i| run.diff(i))
        .fold(f64::NEG_INFINITY, f64::max);
    run.report.gap = gap;
    run.report.ordering = ordering;
    run.report.multivalued = multi as f64 / ann.max(1) as f64;
    Ok(run)
}

pub fn dirichlet_compare(
    rot: &Rotation,
    d: f64,
    cells: usize,
    opts: &SolveOptions,
) -> Result<GapReport, Error> {
    Ok(dirichlet_run(rot, d, cells, opts)?.report)
}

#[derive(Clone, Debug, Serialize)]
pub struct GapScaling {
    pub control: GapReport,
    pub runs: Vec<GapReport>,
    /// Gap against the unrotated control, node by node.
    pub corrected: Vec<f64>,
    /// `corrected / εᵣ²`.
    pub normalized: Vec<f64>,
    /// Largest growth factor of `normalized` from one `εᵣ` to the next.
    pub growth: f64,
}

/// Gap of the Dirichlet comparison over a sequence of `εᵣ`, with the
/// unrotated run as the discretization baseline.
pub fn gap_scaling(
    eps: &[f64],
    d: f64,
    cells: usize,
    opts: &SolveOptions,
) -> Result<GapScaling, Error> {
    let control = dirichlet_run(&Rotation::new(0.0)?, d, cells, opts)?;
    let mut runs = Vec::new();
    let mut corrected = Vec::new();
    let mut normalized = Vec::new();
    for &e in eps {
        let r = dirichlet_run(&Rotation::new(e)?, d, cells, opts)?;
        let g = r.corrected_gap(&control);
        corrected.push(g);
        normalized.push(g / (e * e));
        runs.push(r.report);
    }
    let growth = normalized
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    Ok(GapScaling {
        control: control.report,
        runs,
        corrected,
        normalized,
        growth,
    })
}
/// `RotatedField`: the rotation with its `Z` mesh.
#[derive(Clone, Debug)]
pub struct RotatedField {
    pub rot: Rotation,
    pub z: ZMesh,
}

pub fn build_rotated(eps_r: f64, level: usize, exec: Exec) -> Result<RotatedField, Error> {
    if !(eps_r > 0.0 && eps_r <= 0.2) {
        return Err(Error::InvalidParams(format!("eps_r = {eps_r} outside (0, 0.2]")));
    }
    let rot = Rotation::new(eps_r)?;
    let z = extract_z(&rot, level, exec)?;
    Ok(RotatedField { rot, z })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_differential_matches_gradient() {
        let rot = Rotation::new(0.05).unwrap();
        let x0 = [0.07, -0.04, 0.05];
        let v = [0.3, 0.5, -0.2];
        let h = 1e-5;
        let at = |t: f64| rot.at(&linalg::axpy(&x0, t, &v)).unwrap();
        let (a, b, m) = (at(h), at(-h), at(0.0));
        let lhs = (a.value - b.value) / (2.0 * h);
        let dxt: V3 = std::array::from_fn(|i| (a.xt[i] - b.xt[i]) / (2.0 * h));
        assert!((lhs - linalg::dot(&m.yt, &dxt)).abs() < 1e-9);
    }

    #[test]
    fn unrotated_is_identity() {
        let rot = Rotation::new(0.0).unwrap();
        let x = [0.1, 0.02, -0.05];
        let r = rot.at(&x).unwrap();
        assert_eq!(r.xt, x);
        assert!((r.value - explicit::wy2_value(&x)).abs() < 1e-15);
    }
}
