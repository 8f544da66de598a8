//! Monotone wide-stencil finite differences for degenerate elliptic equations
//! on three-dimensional grids.
//!
//! Eigenvalues of the Hessian are approximated by directional second
//! differences over primitive lattice directions: `λ_min` is the minimum over
//! all directions, `λ_max` the maximum, and `λ_mid` the maximum over lattice
//! planes of the minimum over the directions in the plane. Each is
//! non-decreasing in the neighbour values and non-increasing in the centre
//! value, so `F_h = Σ arctan λ_h` is monotone, and it is exact on quadratics
//! whose Hessian is diagonal.
//!
//! Solves use a nonlinear Gauss–Seidel sweep with an exact local solve per
//! node, over-relaxed and multi-coloured so that each colour is updated in
//! parallel. The damped explicit iteration is kept as a baseline.

use crate::linalg::{self, V3};
use crate::par::{self, Exec};
use crate::Error;
use std::time::Instant;

/// Grid geometry: `dims` nodes per axis starting at `origin` with spacing `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub origin: V3,
    pub h: f64,
    pub dims: [usize; 3],
}

impl Grid {
    pub fn new(origin: V3, h: f64, dims: [usize; 3]) -> Result<Grid, Error> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParams(format!("grid spacing {h}")));
        }
        if dims.iter().any(|&n| n < 5) {
            return Err(Error::InvalidParams(format!("grid dims {dims:?} below 5")));
        }
        Ok(Grid { origin, h, dims })
    }

    /// The cube `[−half, half]³` with spacing `h` (rounded to a whole number of
    /// cells).
    pub fn cube(half: f64, h: f64) -> Result<Grid, Error> {
        let cells = (2.0 * half / h).round() as usize;
        Grid::new([-half; 3], 2.0 * half / cells as f64, [cells + 1; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn point(&self, idx: usize) -> V3 {
        let c = self.coords(idx);
        std::array::from_fn(|a| self.origin[a] + self.h * c[a] as f64)
    }

    /// Distance in nodes to the nearest face of the box.
    pub fn margin(&self, idx: usize) -> usize {
        let c = self.coords(idx);
        (0..3).map(|a| c[a].min(self.dims[a] - 1 - c[a])).min().unwrap()
    }

    pub fn upper(&self) -> V3 {
        std::array::from_fn(|a| self.origin[a] + self.h * (self.dims[a] - 1) as f64)
    }

    /// The grid with twice the spacing over the same box, when every axis has
    /// an even number of cells and the result keeps at least 5 nodes.
    pub fn coarsen(&self) -> Option<Grid> {
        if self.dims.iter().all(|&n| (n - 1) % 2 == 0 && (n - 1) / 2 + 1 >= 5) {
            Some(Grid {
                origin: self.origin,
                h: 2.0 * self.h,
                dims: self.dims.map(|n| (n - 1) / 2 + 1),
            })
        } else {
            None
        }
    }
}

/// Scalar values on a [`Grid`], x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField3 {
    pub origin: V3,
    pub h: f64,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

impl ScalarField3 {
    pub fn new(grid: &Grid, fill: f64) -> ScalarField3 {
        ScalarField3 {
            origin: grid.origin,
            h: grid.h,
            dims: grid.dims,
            values: vec![fill; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&V3) -> f64) -> ScalarField3 {
        ScalarField3 {
            origin: grid.origin,
            h: grid.h,
            dims: grid.dims,
            values: (0..grid.len()).map(|i| f(&grid.point(i))).collect(),
        }
    }

    pub fn grid(&self) -> Grid {
        Grid {
            origin: self.origin,
            h: self.h,
            dims: self.dims,
        }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid().index(i, j, k)]
    }

    pub fn validate(&self) -> Result<(), Error> {
        Grid::new(self.origin, self.h, self.dims)?;
        if self.values.len() != self.grid().len() {
            return Err(Error::Format(format!(
                "{} values for dims {:?}",
                self.values.len(),
                self.dims
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite value at index {i}")));
        }
        Ok(())
    }

    /// Trilinear interpolation; `None` outside the box.
    pub fn sample(&self, x: &V3) -> Option<f64> {
        let g = self.grid();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let s = (x[a] - self.origin[a]) / self.h;
            let n = (self.dims[a] - 1) as f64;
            if !(-1e-9..=n + 1e-9).contains(&s) {
                return None;
            }
            let s = s.clamp(0.0, n);
            let b = (s.floor() as usize).min(self.dims[a] - 2);
            base[a] = b;
            frac[a] = s - b as f64;
        }
        let mut v = 0.0;
        for c in 0..8 {
            let o = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            let w: f64 = (0..3)
                .map(|a| if o[a] == 1 { frac[a] } else { 1.0 - frac[a] })
                .product();
            if w != 0.0 {
                v += w * self.values[g.index(base[0] + o[0], base[1] + o[1], base[2] + o[2])];
            }
        }
        Some(v)
    }

    pub fn max_abs_diff(&self, o: &ScalarField3) -> f64 {
        self.values
            .iter()
            .zip(&o.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Primitive lattice directions up to a max-norm radius, their orthonormal
/// frames, and the lattice planes used for the middle eigenvalue.
#[derive(Clone, Debug)]
pub struct StencilSet {
    pub radius: usize,
    pub dirs: Vec<[i32; 3]>,
    /// `|d|²` per direction.
    pub len2: Vec<f64>,
    /// Triples of mutually orthogonal directions; the axis frame is first.
    pub frames: Vec<[usize; 3]>,
    /// Per normal direction, the directions lying in the orthogonal plane.
    pub planes: Vec<Vec<usize>>,
    plane_dirs: Vec<u8>,
    plane_offsets: Vec<usize>,
    plane_pad: Vec<[u8; PLANE_PAD]>,
}

const PLANE_PAD: usize = 8;

const MAX_DIRS: usize = 49;

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl StencilSet {
    pub fn new(radius: usize) -> StencilSet {
        assert!((1..=2).contains(&radius));
        let r = radius as i32;
        let mut dirs = vec![[1, 0, 0], [0, 1, 0], [0, 0, 1]];
        for a in -r..=r {
            for b in -r..=r {
                for c in -r..=r {
                    let d = [a, b, c];
                    if d == [0, 0, 0] || gcd(gcd(a, b), c) != 1 {
                        continue;
                    }
                    let first = *d.iter().find(|&&v| v != 0).unwrap();
                    if first < 0 || dirs.contains(&d) {
                        continue;
                    }
                    dirs.push(d);
                }
            }
        }
        let dot = |a: &[i32; 3], b: &[i32; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let len2 = dirs.iter().map(|d| dot(d, d) as f64).collect();
        let n = dirs.len();
        let mut frames = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if dot(&dirs[a], &dirs[b]) != 0 {
                    continue;
                }
                for c in b + 1..n {
                    if dot(&dirs[a], &dirs[c]) == 0 && dot(&dirs[b], &dirs[c]) == 0 {
                        frames.push([a, b, c]);
                    }
                }
            }
        }
        let planes: Vec<Vec<usize>> = dirs
            .iter()
            .map(|nrm| (0..n).filter(|&d| dot(&dirs[d], nrm) == 0).collect::<Vec<_>>())
            .filter(|p| p.len() >= 2)
            .collect();
        assert!(planes.iter().all(|p| p.len() <= PLANE_PAD));
        let mut plane_dirs = Vec::new();
        let mut plane_offsets = vec![0];
        for p in &planes {
            plane_dirs.extend(p.iter().map(|&d| d as u8));
            plane_offsets.push(plane_dirs.len());
        }
        let plane_pad = planes
            .iter()
            .map(|p| std::array::from_fn(|k| p[k.min(p.len() - 1)] as u8))
            .collect();
        StencilSet {
            radius,
            dirs,
            len2,
            frames,
            planes,
            plane_dirs,
            plane_offsets,
            plane_pad,
        }
    }

    /// The radius-2 set used away from the boundary.
    pub fn standard() -> StencilSet {
        StencilSet::new(2)
    }
}

/// Discrete operator values at one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscreteOps {
    pub f: f64,
    pub lambda_min: f64,
    pub laplacian: f64,
    pub d33: f64,
    /// The three eigenvalue approximations, ascending.
    pub lambdas: [f64; 3],
}

/// Directional second differences at a node, written as `a_d − b_d·u_c`.
struct Diffs {
    a: [f64; MAX_DIRS],
    b: [f64; MAX_DIRS],
}

fn node_diffs(set: &StencilSet, grid: &Grid, values: &[f64], idx: usize) -> Diffs {
    let c = grid.coords(idx);
    let h2 = grid.h * grid.h;
    let mut a = [0.0; MAX_DIRS];
    let mut b = [0.0; MAX_DIRS];
    for (n, (d, l2)) in set.dirs.iter().zip(&set.len2).enumerate() {
        let p = grid.index(
            (c[0] as i32 + d[0]) as usize,
            (c[1] as i32 + d[1]) as usize,
            (c[2] as i32 + d[2]) as usize,
        );
        let m = grid.index(
            (c[0] as i32 - d[0]) as usize,
            (c[1] as i32 - d[1]) as usize,
            (c[2] as i32 - d[2]) as usize,
        );
        let w = 1.0 / (l2 * h2);
        a[n] = (values[p] + values[m]) * w;
        b[n] = 2.0 * w;
    }
    Diffs { a, b }
}

/// Eigenvalue approximations at centre value `u` and the direction attaining
/// each one.
fn eig_h(set: &StencilSet, df: &Diffs, u: f64) -> ([f64; 3], [usize; 3]) {
    let n = set.dirs.len();
    let mut val = [0.0f64; MAX_DIRS];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for d in 0..n {
        let v = df.a[d] - df.b[d] * u;
        val[d] = v;
        lo = if v < lo { v } else { lo };
        hi = if v > hi { v } else { hi };
    }
    let (mut mid, mut best) = (f64::NEG_INFINITY, 0);
    for (p, pd) in set.plane_pad.iter().enumerate() {
        let mut m = val[pd[0] as usize];
        for &d in &pd[1..] {
            let v = val[d as usize];
            m = if v < m { v } else { m };
        }
        if m > mid {
            mid = m;
            best = p;
        }
    }
    let arg = |range: &[u8], target: f64| {
        range.iter().map(|&d| d as usize).find(|&d| val[d] == target).unwrap_or(0)
    };
    let pick = |target: f64| (0..n).find(|&d| val[d] == target).unwrap_or(0);
    let w = &set.plane_offsets[best..best + 2];
    (
        [lo, mid, hi],
        [pick(lo), arg(&set.plane_dirs[w[0]..w[1]], mid), pick(hi)],
    )
}

fn angle_h(set: &StencilSet, df: &Diffs, u: f64) -> (f64, f64) {
    let (l, act) = eig_h(set, df, u);
    let mut f = 0.0;
    let mut dfdu = 0.0;
    for i in 0..3 {
        f += l[i].atan();
        dfdu -= df.b[act[i]] / (1.0 + l[i] * l[i]);
    }
    (f, dfdu)
}

/// `(F_h, λmin_h, Δ_h, d33_h)` at a node whose margin is at least the stencil
/// radius.
pub fn discrete_ops(set: &StencilSet, field: &ScalarField3, idx: usize) -> DiscreteOps {
    let grid = field.grid();
    assert!(grid.margin(idx) >= set.radius, "node too close to the boundary");
    let v = &field.values;
    let u = v[idx];
    let df = node_diffs(set, &grid, v, idx);
    let (lambdas, _) = eig_h(set, &df, u);
    let f = lambdas.iter().map(|l| l.atan()).sum();
    let c = grid.coords(idx);
    let h2 = grid.h * grid.h;
    let ax = |a: usize| {
        let mut p = c;
        let mut m = c;
        p[a] += 1;
        m[a] -= 1;
        (v[grid.index(p[0], p[1], p[2])] + v[grid.index(m[0], m[1], m[2])] - 2.0 * u) / h2
    };
    DiscreteOps {
        f,
        lambda_min: lambdas[0],
        laplacian: ax(0) + ax(1) + ax(2),
        d33: ax(2),
        lambdas,
    }
}

/// Which equation is solved at interior nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    /// `F_h(u) = rhs`.
    Angle,
    /// `max{F_h(u) − rhs, λmin_h(u)} = 0`.
    Bellman,
    /// `max{Δ_h v, d33_h v + rhs} = 0`.
    Model,
}

/// Interior region; nodes outside it (and on the box faces) carry Dirichlet
/// data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    Box,
    Ball { center: V3, radius: f64 },
}

impl Region {
    fn contains(&self, x: &V3) -> bool {
        match self {
            Region::Box => true,
            Region::Ball { center, radius } => linalg::dist(x, center) < *radius,
        }
    }
}

pub type FieldFn<'a> = &'a (dyn Fn(&V3) -> f64 + Sync);

pub struct Problem<'a> {
    pub grid: Grid,
    pub region: Region,
    pub op: Operator,
    pub rhs: FieldFn<'a>,
    pub bdata: FieldFn<'a>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Damped explicit fixed point with double buffering.
    Explicit,
    /// Multi-coloured nonlinear SOR with exact local solves.
    Sor,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
    /// Relaxation factor; `None` picks one from the grid size.
    pub omega: Option<f64>,
    /// Start from the solution on the coarsened grid.
    pub nested: bool,
    pub exec: Exec,
    /// Sweeps between residual evaluations.
    pub check_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iter: 200_000,
            method: Method::Sor,
            omega: None,
            nested: true,
            exec: Exec::default(),
            check_every: 10,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    /// Per node: 1 where the second branch attains the max, 0 elsewhere
    /// (always 0 for [`Operator::Angle`] and at Dirichlet nodes).
    pub mask: Vec<u8>,
    pub seconds: f64,
    pub history: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
    pub converged: bool,
}

impl SolveReport {
    /// Points of the grid where the mask is set.
    pub fn mask_points(&self, grid: &Grid) -> Vec<V3> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == 1)
            .map(|(i, _)| grid.point(i))
            .collect()
    }
}

struct Setup {
    wide: StencilSet,
    narrow: StencilSet,
    interior: Vec<usize>,
    is_interior: Vec<bool>,
    colors: Vec<Vec<usize>>,
    rhs: Vec<f64>,
}

impl Setup {
    fn new(pb: &Problem) -> Setup {
        let g = &pb.grid;
        let is_interior: Vec<bool> = (0..g.len())
            .map(|i| g.margin(i) >= 1 && pb.region.contains(&g.point(i)))
            .collect();
        let interior: Vec<usize> = (0..g.len()).filter(|&i| is_interior[i]).collect();
        let ncol = if pb.op == Operator::Model { 2 } else { 27 };
        let mut colors = vec![Vec::new(); ncol];
        for &i in &interior {
            let c = g.coords(i);
            let k = if ncol == 2 {
                (c[0] + c[1] + c[2]) % 2
            } else {
                c[0] % 3 + 3 * (c[1] % 3) + 9 * (c[2] % 3)
            };
            colors[k].push(i);
        }
        colors.retain(|c| !c.is_empty());
        let rhs = (0..g.len())
            .map(|i| if is_interior[i] { (pb.rhs)(&g.point(i)) } else { 0.0 })
            .collect();
        Setup {
            wide: StencilSet::new(2),
            narrow: StencilSet::new(1),
            interior,
            is_interior,
            colors,
            rhs,
        }
    }

    fn set(&self, g: &Grid, idx: usize) -> &StencilSet {
        if g.margin(idx) >= 2 {
            &self.wide
        } else {
            &self.narrow
        }
    }
}

/// Residual of the discrete equation at an interior node and the active
/// branch.
fn node_residual(pb: &Problem, s: &Setup, v: &[f64], idx: usize) -> (f64, u8) {
    let g = &pb.grid;
    let u = v[idx];
    let c = s.rhs[idx];
    match pb.op {
        Operator::Angle => {
            let df = node_diffs(s.set(g, idx), g, v, idx);
            (angle_h(s.set(g, idx), &df, u).0 - c, 0)
        }
        Operator::Bellman => {
            let set = s.set(g, idx);
            let df = node_diffs(set, g, v, idx);
            let (l, _) = eig_h(set, &df, u);
            let f = l.iter().map(|x| x.atan()).sum::<f64>() - c;
            if l[0] > f {
                (l[0], 1)
            } else {
                (f, 0)
            }
        }
        Operator::Model => {
            let (lap, d33) = model_parts(g, v, idx);
            let lap = lap - 6.0 * u / (g.h * g.h);
            let d33 = d33 - 2.0 * u / (g.h * g.h) + c;
            if d33 >= lap {
                (d33, 1)
            } else {
                (lap, 0)
            }
        }
    }
}

/// Neighbour sums of the 7-point Laplacian and the axial x₃ difference,
/// divided by `h²`.
fn model_parts(g: &Grid, v: &[f64], idx: usize) -> (f64, f64) {
    let c = g.coords(idx);
    let h2 = g.h * g.h;
    let mut lap = 0.0;
    let mut d33 = 0.0;
    for a in 0..3 {
        let mut p = c;
        let mut m = c;
        p[a] += 1;
        m[a] -= 1;
        let s = v[g.index(p[0], p[1], p[2])] + v[g.index(m[0], m[1], m[2])];
        lap += s;
        if a == 2 {
            d33 = s;
        }
    }
    (lap / h2, d33 / h2)
}

/// Root of a decreasing function by safeguarded Newton.
fn decreasing_root(f: impl Fn(f64) -> (f64, f64), u0: f64, scale: f64) -> f64 {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut u = u0;
    let mut step = scale.max(1e-12);
    for _ in 0..200 {
        let (g, dg) = f(u);
        if g.abs() <= 1e-14 {
            return u;
        }
        if g.abs() <= 1e-8 && dg < 0.0 {
            return u - g / dg;
        }
        if g > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let mut next = if dg < 0.0 { u - g / dg } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                step *= 2.0;
                lo + step
            } else {
                step *= 2.0;
                hi - step
            };
        }
        if (next - u).abs() <= 1e-15 * (1.0 + u.abs()) {
            return next;
        }
        if lo.is_finite() && hi.is_finite() && hi - lo <= 1e-15 * (1.0 + u.abs()) {
            return 0.5 * (lo + hi);
        }
        u = next;
    }
    u
}

/// The centre value solving the local discrete equation, and its branch.
fn local_solve(pb: &Problem, s: &Setup, v: &[f64], idx: usize) -> (f64, u8) {
    let g = &pb.grid;
    let u0 = v[idx];
    let c = s.rhs[idx];
    let h2 = g.h * g.h;
    match pb.op {
        Operator::Angle | Operator::Bellman => {
            let set = s.set(g, idx);
            let df = node_diffs(set, g, v, idx);
            let fr = |u: f64| {
                let (f, d) = angle_h(set, &df, u);
                (f - c, d)
            };
            if pb.op == Operator::Angle {
                return (decreasing_root(fr, u0, h2), 0);
            }
            // λmin_h(u) = 0 at u = min_d a_d / b_d
            let r_l = (0..set.dirs.len())
                .map(|d| df.a[d] / df.b[d])
                .fold(f64::INFINITY, f64::min);
            if fr(r_l).0 <= 0.0 {
                (r_l, 1)
            } else {
                (decreasing_root(fr, u0.max(r_l), h2), 0)
            }
        }
        Operator::Model => {
            let (lap, d33) = model_parts(g, v, idx);
            let r_lap = lap * h2 / 6.0;
            let r_33 = (d33 + c) * h2 / 2.0;
            if r_33 >= r_lap {
                (r_33, 1)
            } else {
                (r_lap, 0)
            }
        }
    }
}

/// Explicit update `u + ρ·residual` with `ρ = h²/6`.
fn explicit_update(pb: &Problem, s: &Setup, v: &[f64], idx: usize) -> f64 {
    let rho = pb.grid.h * pb.grid.h / 6.0;
    v[idx] + rho * node_residual(pb, s, v, idx).0
}

fn residual_and_mask(pb: &Problem, s: &Setup, v: &[f64], exec: Exec) -> (f64, Vec<u8>) {
    let r = par::map(exec, &s.interior, |&i| node_residual(pb, s, v, i));
    let mut mask = vec![0u8; pb.grid.len()];
    let mut sup = 0.0f64;
    for (k, &i) in s.interior.iter().enumerate() {
        sup = sup.max(r[k].0.abs());
        mask[i] = r[k].1;
    }
    (sup, mask)
}

/// Sup-norm of the discrete equation over interior nodes.
pub fn residual(field: &ScalarField3, pb: &Problem) -> f64 {
    let s = Setup::new(pb);
    residual_and_mask(pb, &s, &field.values, Exec::default()).0
}

fn default_omega(pb: &Problem) -> f64 {
    let n = pb.grid.dims.iter().copied().max().unwrap() as f64;
    let w = 2.0 / (1.0 + (std::f64::consts::PI / (n - 1.0)).sin());
    match pb.op {
        Operator::Model => w,
        _ => 1.0 + 0.8 * (w - 1.0),
    }
}

/// Initial field: Dirichlet data outside the interior, the mean of the data
/// at Dirichlet nodes inside.
fn initial(pb: &Problem, s: &Setup) -> ScalarField3 {
    let mut f = ScalarField3::from_fn(&pb.grid, |x| (pb.bdata)(x));
    let (mut sum, mut n) = (0.0, 0);
    for (i, v) in f.values.iter().enumerate() {
        if !s.is_interior[i] {
            sum += v;
            n += 1;
        }
    }
    let mean = sum / n.max(1) as f64;
    for &i in &s.interior {
        f.values[i] = mean;
    }
    f
}

/// Solves the problem; nonconvergence is reported, not raised.
pub fn solve(pb: &Problem, opts: &SolveOptions) -> (ScalarField3, SolveReport) {
    let t0 = Instant::now();
    let s = Setup::new(pb);
    let mut field = initial(pb, &s);
    if opts.nested && opts.method == Method::Sor {
        if let Some(cg) = pb.grid.coarsen() {
            let coarse = Problem {
                grid: cg,
                region: pb.region,
                op: pb.op,
                rhs: pb.rhs,
                bdata: pb.bdata,
            };
            let copts = SolveOptions {
                max_iter: opts.max_iter,
                ..*opts
            };
            let (cf, _) = solve(&coarse, &copts);
            for &i in &s.interior {
                if let Some(v) = cf.sample(&pb.grid.point(i)) {
                    field.values[i] = v;
                }
            }
        }
    }
    let mut omega = opts.omega.unwrap_or_else(|| default_omega(pb));
    let mut stalled = 0;
    let mut best = f64::INFINITY;
    let mut rep = SolveReport::default();
    let mut last_mask: Option<Vec<u8>> = None;
    let mut flips: Vec<usize> = Vec::new();
    let mut it = 0;
    loop {
        if it % opts.check_every.max(1) == 0 || it >= opts.max_iter {
            let (r, mask) = residual_and_mask(pb, &s, &field.values, opts.exec);
            stalled = if r > 0.999 * best { stalled + 1 } else { 0 };
            best = best.min(r);
            // nonlinear over-relaxation can stall or lock into a cycle
            if stalled >= 5 && omega > 1.0 {
                omega = 1.0 + 0.5 * (omega - 1.0);
                stalled = 0;
            }
            rep.history.push((it, r));
            if let Some(lm) = &last_mask {
                if *lm != mask {
                    flips.push(it);
                }
            }
            last_mask = Some(mask);
            if r <= opts.tol || it >= opts.max_iter || !r.is_finite() {
                rep.residual = r;
                rep.converged = r <= opts.tol;
                break;
            }
        }
        match opts.method {
            Method::Sor => {
                for col in &s.colors {
                    let v = &field.values;
                    let new = par::map(opts.exec, col, |&i| local_solve(pb, &s, v, i));
                    for (k, &i) in col.iter().enumerate() {
                        let u = field.values[i];
                        // over-relax the smooth branch only
                        let w = if pb.op == Operator::Bellman && new[k].1 == 1 { 1.0 } else { omega };
                        field.values[i] = u + w * (new[k].0 - u);
                    }
                }
            }
            Method::Explicit => {
                let v = &field.values;
                let new = par::map(opts.exec, &s.interior, |&i| explicit_update(pb, &s, v, i));
                for (k, &i) in s.interior.iter().enumerate() {
                    field.values[i] = new[k];
                }
            }
        }
        it += 1;
    }
    rep.iterations = it;
    rep.mask = last_mask.unwrap_or_default();
    if pb.op != Operator::Angle && flips.iter().any(|&f| f + 100 > it && f > 0) {
        rep.warnings.push("mask changed during the final 100 iterations".into());
    }
    if !rep.converged {
        rep.warnings.push(format!(
            "no convergence: residual {:e} after {} iterations",
            rep.residual, it
        ));
    }
    rep.seconds = t0.elapsed().as_secs_f64();
    (field, rep)
}

fn check_c(c: f64) -> Result<(), Error> {
    if c.is_finite() && c.abs() < 1.5 * std::f64::consts::PI {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("|c| = {c} not below 3π/2")))
    }
}

fn converged(field: ScalarField3, rep: SolveReport) -> Result<(ScalarField3, SolveReport), Error> {
    if rep.converged {
        Ok((field, rep))
    } else {
        Err(Error::NonConvergence {
            iterations: rep.iterations,
            residual: rep.residual,
        })
    }
}

/// `F_h(u) = c` on the box with Dirichlet data.
pub fn solve_dirichlet(
    c: f64,
    bdata: FieldFn,
    grid: &Grid,
    tol: f64,
) -> Result<(ScalarField3, SolveReport), Error> {
    check_c(c)?;
    let rhs = move |_: &V3| c;
    let pb = Problem {
        grid: *grid,
        region: Region::Box,
        op: Operator::Angle,
        rhs: &rhs,
        bdata,
    };
    let (f, r) = solve(&pb, &SolveOptions { tol, ..Default::default() });
    converged(f, r)
}

/// `max{F_h(w) − c*, λmin_h(w)} = 0` on the box with Dirichlet data.
pub fn solve_bellman(
    c_star: f64,
    bdata: FieldFn,
    grid: &Grid,
    tol: f64,
) -> Result<(ScalarField3, SolveReport), Error> {
    check_c(c_star)?;
    let rhs = move |_: &V3| c_star;
    let pb = Problem {
        grid: *grid,
        region: Region::Box,
        op: Operator::Bellman,
        rhs: &rhs,
        bdata,
    };
    let (f, r) = solve(&pb, &SolveOptions { tol, ..Default::default() });
    converged(f, r)
}

/// Forcing `1 − |x|²` of the model problem.
pub fn model_forcing(x: &V3) -> f64 {
    1.0 - linalg::dot(x, x)
}

/// `max{Δv, v₃₃ + f} = 0` on `[−R, R]³` with `v = 0` on the boundary.
pub fn solve_model_with(
    r: f64,
    h: f64,
    forcing: FieldFn,
    opts: &SolveOptions,
) -> Result<(ScalarField3, SolveReport), Error> {
    if !(r >= 3.0 && h > 0.0 && h <= r / 16.0 + 1e-12) {
        return Err(Error::InvalidParams(format!("model problem needs R ≥ 3, h ≤ R/16 (R = {r}, h = {h})")));
    }
    let zero = |_: &V3| 0.0;
    let pb = Problem {
        grid: Grid::cube(r, h)?,
        region: Region::Box,
        op: Operator::Model,
        rhs: forcing,
        bdata: &zero,
    };
    let (f, rep) = solve(&pb, opts);
    converged(f, rep)
}

pub fn solve_model(r: f64, h: f64, tol: f64) -> Result<(ScalarField3, SolveReport), Error> {
    solve_model_with(r, h, &model_forcing, &SolveOptions { tol, ..Default::default() })
}

/// Chebyshev distance (in cells) from every node to the nearest node of
/// `mask`, by breadth-first search over the 26-neighbourhood.
pub fn distance_transform(grid: &Grid, mask: &[bool]) -> Vec<usize> {
    let mut dist = vec![usize::MAX; grid.len()];
    let mut queue = std::collections::VecDeque::new();
    for (i, &m) in mask.iter().enumerate() {
        if m {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let c = grid.coords(i);
        for o in 0..27 {
            let off = [o % 3, (o / 3) % 3, o / 9];
            let mut n = [0usize; 3];
            let mut ok = true;
            for a in 0..3 {
                let v = c[a] as isize + off[a] as isize - 1;
                if v < 0 || v >= grid.dims[a] as isize {
                    ok = false;
                    break;
                }
                n[a] = v as usize;
            }
            if !ok {
                continue;
            }
            let j = grid.index(n[0], n[1], n[2]);
            if dist[j] == usize::MAX {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    dist
}

/// Hausdorff distance between two node sets of the same grid, in the
/// Chebyshev metric.
pub fn grid_hausdorff(grid: &Grid, a: &[bool], b: &[bool]) -> f64 {
    let (na, nb) = (a.iter().any(|&v| v), b.iter().any(|&v| v));
    if !na || !nb {
        return if na == nb { 0.0 } else { f64::INFINITY };
    }
    let da = distance_transform(grid, a);
    let db = distance_transform(grid, b);
    let one = |m: &[bool], d: &[usize]| {
        m.iter()
            .zip(d)
            .filter(|(&x, _)| x)
            .map(|(_, &v)| v)
            .max()
            .unwrap_or(0)
    };
    one(a, &db).max(one(b, &da)) as f64 * grid.h
}

/// Max-norm Hausdorff distance between two point sets.
pub fn hausdorff(a: &[V3], b: &[V3]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let cheb = |p: &V3, q: &V3| (0..3).map(|k| (p[k] - q[k]).abs()).fold(0.0, f64::max);
    let one = |a: &[V3], b: &[V3]| {
        a.iter()
            .map(|p| b.iter().map(|q| cheb(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_counts() {
        let s1 = StencilSet::new(1);
        let s2 = StencilSet::new(2);
        assert_eq!(s1.dirs.len(), 13);
        assert_eq!(s2.dirs.len(), 49);
        assert_eq!(s2.frames[0], [0, 1, 2]);
        assert!(s2.planes.len() >= 40);
    }

    #[test]
    fn quadratic_ops_exact() {
        let g = Grid::cube(1.0, 0.25).unwrap();
        let a = [0.7, -1.3, 2.1];
        let f = ScalarField3::from_fn(&g, |x| 0.5 * (a[0] * x[0] * x[0] + a[1] * x[1] * x[1] + a[2] * x[2] * x[2]));
        let idx = g.index(4, 4, 4);
        let ops = discrete_ops(&StencilSet::standard(), &f, idx);
        let exact: f64 = a.iter().map(|v| v.atan()).sum();
        assert!((ops.f - exact).abs() < 1e-12, "{} {}", ops.f, exact);
        assert!((ops.lambda_min - a[1]).abs() < 1e-12);
        assert!((ops.laplacian - a.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn model_constant_forcing_gives_zero() {
        let m = |_: &V3| -1.0;
        let (f, _) = solve_model_with(3.0, 0.1875, &m, &SolveOptions::default()).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }
}
