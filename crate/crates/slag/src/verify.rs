//! The acceptance suite as a report: one named check per criterion, each with
//! a measured value, its tolerance and a runtime.

use crate::band::Glued;
use crate::config::Config;
use crate::explicit::{self, ModelParams};
use crate::freeboundary::{self, BoundarySample, TangencyCase};
use crate::geometry;
use crate::linalg::{self, V3};
use crate::par::{self, Exec};
use crate::section3::{self, Rotation};
use crate::solver::{self, Grid, Operator, Problem, Region, ScalarField3, SolveOptions, StencilSet};
use crate::symtensor::{self, SymMat3};
use crate::transform::{self, GluedMap, GradientMap, LineScan, Side};
use crate::Error;
use serde::Serialize;
use serde_json::{json, Value};
use std::cell::OnceCell;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Exploratory,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub criterion: u8,
    pub module: String,
    pub status: Status,
    pub value: f64,
    pub tolerance: f64,
    pub seconds: f64,
    pub detail: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
    pub exploratory: usize,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Report with timing fields zeroed, for comparing runs.
    pub fn without_timings(&self) -> Report {
        let mut r = self.clone();
        for c in &mut r.checks {
            c.seconds = 0.0;
        }
        r
    }
}

/// Outcome of one measurement.
pub struct Outcome {
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: Value,
}

type CheckFn = fn(&Ctx) -> Result<Outcome, Error>;

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub module: &'static str,
    pub exploratory: bool,
    run: CheckFn,
}

pub const MODULES: [&str; 7] = [
    "symtensor",
    "explicit",
    "freeboundary",
    "solver",
    "transform",
    "section3",
    "geometry",
];

pub fn criteria() -> [Criterion; 15] {
    let c = |id, name, module, run| Criterion {
        id,
        name,
        module,
        exploratory: false,
        run,
    };
    [
        c(1, "spectral-calculus", "symtensor", spectral_calculus as CheckFn),
        c(2, "explicit-identities", "explicit", explicit_identities),
        c(3, "angle-scaling", "explicit", angle_scaling),
        c(4, "k-geometry", "freeboundary", k_geometry),
        c(5, "third-derivative-jump", "freeboundary", third_derivative_jump),
        c(6, "determinant-sign", "freeboundary", determinant_sign),
        c(7, "solver-soundness", "solver", solver_soundness),
        c(8, "model-free-boundary", "solver", model_free_boundary),
        c(9, "legendre-structure", "transform", legendre_structure),
        c(10, "jump-formula", "transform", jump_formula),
        c(11, "holder-exponents", "transform", holder_exponents),
        c(12, "wk-approximation", "transform", wk_approximation),
        c(13, "rotation", "section3", rotation),
        c(14, "minimality", "geometry", minimality),
        Criterion {
            id: 15,
            name: "bellman-contact",
            module: "solver",
            exploratory: true,
            run: bellman_contact,
        },
    ]
}

/// Shared inputs, built on first use.
pub struct Ctx<'a> {
    pub cfg: &'a Config,
    glued: OnceCell<Result<Glued, String>>,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a Config) -> Self {
        Ctx {
            cfg,
            glued: OnceCell::new(),
        }
    }

    fn p(&self) -> ModelParams {
        self.cfg.explicit
    }

    fn exec(&self) -> Exec {
        self.cfg.exec()
    }

    fn glued(&self) -> Result<&Glued, Error> {
        self.glued
            .get_or_init(|| {
                freeboundary::extract_k_with(&self.p(), self.cfg.freeboundary.level, self.exec())
                    .map(|m| Glued::new(self.p(), m))
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::KExtraction([f64::NAN; 3]).with_context(e))
    }
}

trait WithContext {
    fn with_context(self, msg: &str) -> Error;
}

impl WithContext for Error {
    fn with_context(self, msg: &str) -> Error {
        Error::InvalidParams(format!("{msg} ({self})"))
    }
}

pub fn run_check(c: &Criterion, ctx: &Ctx) -> Check {
    let t = Instant::now();
    let out = (c.run)(ctx);
    let seconds = t.elapsed().as_secs_f64();
    let (value, tolerance, pass, detail) = match out {
        Ok(o) => (o.value, o.tolerance, o.pass, o.detail),
        Err(e) => (f64::NAN, f64::NAN, false, json!({ "error": e.to_string() })),
    };
    let status = if c.exploratory {
        Status::Exploratory
    } else if pass {
        Status::Pass
    } else {
        Status::Fail
    };
    let detail = if c.exploratory {
        json!({ "within_tolerance": pass, "measurements": detail })
    } else {
        detail
    };
    Check {
        name: c.name.to_string(),
        criterion: c.id,
        module: c.module.to_string(),
        status,
        value,
        tolerance,
        seconds,
        detail,
    }
}

/// Runs every check, or those of one module.
pub fn run_verify(cfg: &Config, only: Option<&str>) -> Result<Report, Error> {
    if let Some(m) = only {
        if !MODULES.contains(&m) {
            return Err(Error::Config(format!("unknown module `{m}`")));
        }
    }
    let ctx = Ctx::new(cfg);
    let checks: Vec<Check> = criteria()
        .iter()
        .filter(|c| only.is_none_or(|m| c.module == m))
        .map(|c| run_check(c, &ctx))
        .collect();
    let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
    Ok(Report {
        passed: count(Status::Pass),
        failed: count(Status::Fail),
        exploratory: count(Status::Exploratory),
        checks,
    })
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

fn min_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::INFINITY, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.min(b) })
}

/// Random symmetric matrices `Q diag(λ) Qᵀ`; every third one has a
/// near-coalescent pair with gap down to `1e-6`.
pub fn test_matrices(n: usize) -> Vec<SymMat3> {
    let us = linalg::r3_sequence(n, 0.0);
    let vs = linalg::r3_sequence(n, 0.37);
    (0..n)
        .map(|k| {
            let q = linalg::rotation_from_unit(&us[k]);
            let mut l = vs[k].map(|v| 6.0 * v - 3.0);
            if k % 3 == 0 {
                l[1] = l[0] + 10f64.powi(-(((k / 3) % 7) as i32));
            }
            SymMat3::from_fn(|i, j| (0..3).map(|a| q[i][a] * l[a] * q[j][a]).sum())
        })
        .collect()
}

fn spectral_calculus(ctx: &Ctx) -> Result<Outcome, Error> {
    let ms = test_matrices(ctx.cfg.verify.matrices);
    let dirs = test_matrices(2 * ms.len());
    let f = symtensor::slag_angle;
    let det = |m: &SymMat3| m.det();
    let errs = par::map_range(ctx.exec(), ms.len(), |k| {
        let m = &ms[k];
        let e = dirs[2 * k].scale(1.0 / dirs[2 * k].max_abs());
        let g = dirs[2 * k + 1].scale(1.0 / dirs[2 * k + 1].max_abs());
        let central = |f: &dyn Fn(&SymMat3) -> f64, h: f64| {
            (f(&m.add(&e.scale(h))) - f(&m.sub(&e.scale(h)))) / (2.0 * h)
        };
        let mixed = |f: &dyn Fn(&SymMat3) -> f64, h: f64| {
            let at = |a: f64, b: f64| f(&m.add(&e.scale(a)).add(&g.scale(b)));
            (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
        };
        let d = symtensor::slag_deriv(m);
        let s1 = d.first.max_abs().max(1e-300);
        let s2 = d.second.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
        let r1 = (central(&f, 1e-5) - d.first_apply(&e)).abs() / s1;
        let r2 = (mixed(&f, 1e-4) - d.bilinear(&e, &g)).abs() / s2;
        let (_, cof, dd) = symtensor::det_calculus(m);
        let t1 = cof.max_abs().max(m.max_abs().powi(2)).max(1e-300);
        let t2 = m.max_abs().max(1.0);
        let q1 = (central(&det, 1e-5) - dd.first_apply(&e)).abs() / t1;
        let q2 = (mixed(&det, 1e-3) - dd.bilinear(&e, &g)).abs() / t2;
        (r1.max(r2), q1.max(q2))
    });
    let slag = max_of(errs.iter().map(|e| e.0));
    let detm = max_of(errs.iter().map(|e| e.1));
    Ok(Outcome {
        value: slag,
        tolerance: 1e-5,
        pass: slag <= 1e-5 && detm <= 1e-7,
        detail: json!({ "matrices": ms.len(), "slag_rel_err": slag, "det_rel_err": detm, "det_tolerance": 1e-7 }),
    })
}

fn explicit_identities(ctx: &Ctx) -> Result<Outcome, Error> {
    let p = ctx.p();
    let pts: Vec<V3> = linalg::r3_sequence(ctx.cfg.verify.points, 0.11)
        .into_iter()
        .map(|u| [u[0] - 0.5, u[1] - 0.5, 1.6 * u[2] - 0.8])
        .collect();
    let r = par::map(ctx.exec(), &pts, |x| -> Result<(f64, f64, f64), Error> {
        let h = explicit::phi_hess(&p, x);
        let scale = h.max_abs().powi(3).max(f64::MIN_POSITIVE);
        let sig = explicit::sigma_residual(&p, &explicit::phi_grad(&p, x)).abs();
        let (lp, lm) = explicit::lambda_pm(&p, x)?;
        let mut v = symtensor::eig3(&h).values.to_vec();
        let zero = (0..3).min_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
        v.remove(zero);
        let eig = (v[0] - lm.min(lp)).abs().max((v[1] - lm.max(lp)).abs());
        Ok((h.det().abs() / scale, sig, eig))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let det = max_of(r.iter().map(|v| v.0));
    let sig = max_of(r.iter().map(|v| v.1));
    let eig = max_of(r.iter().map(|v| v.2));
    Ok(Outcome {
        value: det,
        tolerance: 1e-12,
        pass: det <= 1e-12 && sig <= 1e-12 && eig <= 1e-10,
        detail: json!({ "points": pts.len(), "det_rel": det, "sigma_residual": sig, "lambda_pm_err": eig }),
    })
}

/// `‖D²Θ(0) − λ diag(4,4,8)‖` and `|∇Θ(0)|` at `λ`.
pub fn angle_scaling_error(p: &ModelParams, lambda: f64) -> Result<(f64, f64, f64), Error> {
    let q = ModelParams { lambda, ..*p };
    let t = explicit::theta_eval(&q, &[0.0; 3])?;
    let e = t.hess.sub(&SymMat3::diag(4.0 * lambda, 4.0 * lambda, 8.0 * lambda)).max_abs();
    Ok((e, linalg::norm(&t.grad), symtensor::eig3(&t.hess).values[0]))
}

/// Largest admissible `e(λ) / 8λ` at the configured `λ`.
pub const SMALLNESS_TOL: f64 = 0.1;

fn angle_scaling(ctx: &Ctx) -> Result<Outcome, Error> {
    let l = ctx.p().lambda;
    let seq = [0.8 * l, 0.4 * l, 0.2 * l];
    let r = seq
        .iter()
        .map(|&v| angle_scaling_error(&ctx.p(), v))
        .collect::<Result<Vec<_>, _>>()?;
    let ratios: Vec<f64> = r.windows(2).map(|w| w[1].0 / w[0].0).collect();
    let worst = max_of(ratios.iter().copied());
    let grad = max_of(r.iter().map(|v| v.1));
    let pd = r[1].2;
    let (e0, _, _) = angle_scaling_error(&ctx.p(), l)?;
    let rel = e0 / (8.0 * l);
    Ok(Outcome {
        value: worst,
        tolerance: 0.35,
        pass: worst <= 0.35 && grad <= 1e-12 && pd > 0.0 && rel <= SMALLNESS_TOL,
        detail: json!({
            "relative_error_at_lambda": rel, "smallness_tolerance": SMALLNESS_TOL,
            "lambdas": seq, "errors": r.iter().map(|v| v.0).collect::<Vec<_>>(),
            "ratios": ratios, "grad_norm": grad, "min_eig_at_middle": pd,
        }),
    })
}

fn k_geometry(ctx: &Ctx) -> Result<Outcome, Error> {
    let p = ctx.p();
    let w = ctx.glued()?;
    let m = &w.mesh;
    let c = p.c_star();
    let level = max_of(m.samples.iter().map(|s| (explicit::theta_value(&p, &s.x0) - c).abs()));
    let kmin = m.min_curvature();
    let syms: [fn(&V3) -> V3; 3] = [
        |v| [-v[0], v[1], v[2]],
        |v| [v[0], -v[1], v[2]],
        |v| [v[1], v[0], -v[2]],
    ];
    let sym = par::map(ctx.exec(), &m.samples, |s| -> Result<f64, Error> {
        let r = linalg::norm(&s.x0);
        let om = linalg::scale(&s.x0, 1.0 / r);
        let mut e: f64 = 0.0;
        for f in &syms {
            e = e.max((freeboundary::boundary_radius(&p, &f(&om))? - r).abs());
        }
        Ok(e)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let sym = max_of(sym);
    Ok(Outcome {
        value: level,
        tolerance: 1e-10,
        pass: level <= 1e-10 && kmin > 0.0 && sym <= 1e-9 && m.samples.len() >= 2000,
        detail: json!({
            "samples": m.samples.len(), "level_err": level, "min_curvature": kmin,
            "max_curvature": m.max_curvature(), "symmetry_err": sym, "max_radius": m.max_radius(),
        }),
    })
}

fn third_derivative_jump(ctx: &Ctx) -> Result<Outcome, Error> {
    let p = ctx.p();
    let w = ctx.glued()?;
    let r = par::map(ctx.exec(), &w.mesh.samples, |s| -> Result<(f64, f64), Error> {
        let (nnn, _) = geometry::third_jump(w, s)?;
        let oracle = geometry::third_jump_oracle(w, s);
        Ok(((nnn - oracle).abs() / oracle.abs(), nnn))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let rel = max_of(r.iter().map(|v| v.0));
    let positive = r.iter().filter(|v| v.1 > 0.0).count() as f64 / r.len() as f64;
    let ts = linalg::logspace(2e-3, 2e-2, 6);
    let stride = (w.mesh.samples.len() / 24).max(1);
    let picks: Vec<&BoundarySample> = w.mesh.samples.iter().step_by(stride).collect();
    let mut slopes = Vec::new();
    for order in [3u8, 4] {
        let s = par::map(ctx.exec(), &picks, |s| -> Result<f64, Error> {
            let j = freeboundary::cauchy_jet(&p, s, order)?;
            let res: Vec<f64> = ts
                .iter()
                .map(|&t| freeboundary::taylor_residual(&p, &j, &s.nu, t).abs())
                .collect();
            Ok(linalg::loglog_slope(&ts, &res))
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        slopes.push((order, min_of(s)));
    }
    let slope_ok = slopes.iter().all(|&(o, s)| s >= o as f64 - 1.3);
    Ok(Outcome {
        value: rel,
        tolerance: 1e-8,
        pass: rel <= 1e-8 && positive == 1.0 && slope_ok,
        detail: json!({
            "samples": r.len(), "jump_rel_err": rel, "positive_fraction": positive,
            "taylor_slopes": slopes.iter().map(|&(o, s)| json!({"order": o, "min_slope": s})).collect::<Vec<_>>(),
        }),
    })
}

fn determinant_sign(ctx: &Ctx) -> Result<Outcome, Error> {
    let p = ctx.p();
    let w = ctx.glued()?;
    let generic: Vec<&BoundarySample> = w
        .mesh
        .samples
        .iter()
        .filter(|s| freeboundary::classify(s.score()) == TangencyCase::Generic)
        .collect();
    let gd = par::map(ctx.exec(), &generic, |s| freeboundary::detsign_report(&p, s).map(|d| d.d_nu_g))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let tang = freeboundary::tangential_points(&p, &w.mesh);
    let td = par::map(ctx.exec(), &tang, |s| freeboundary::detsign_report(&p, s))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let gen_max = gd.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gen_ok = gd.iter().all(|&v| v < 0.0);
    let flat = max_of(td.iter().map(|d| d.d_nu_g.abs() / d.scale));
    let curv_ok = td.iter().all(|d| d.d_nunu_g < 0.0);
    let ident = max_of(td.iter().map(|d| d.identity_rel.unwrap_or(f64::NAN)));
    Ok(Outcome {
        value: ident,
        tolerance: 1e-5,
        pass: gen_ok && !td.is_empty() && flat <= 1e-8 && curv_ok && ident <= 1e-5,
        detail: json!({
            "generic": gd.len(), "generic_max_d_nu_g": gen_max, "tangential": td.len(),
            "tangential_d_nu_g_rel": flat, "tangential_second_negative": curv_ok, "identity_rel": ident,
        }),
    })
}

/// Largest violation of monotonicity of the discrete operators at interior
/// nodes of a random smooth field, over every stencil neighbour.
pub fn monotonicity_violation(seed: f64) -> f64 {
    let g = Grid::cube(1.0, 0.25).unwrap();
    let coef = linalg::r3_sequence(3, seed);
    let f = ScalarField3::from_fn(&g, |x| {
        0.5 * (coef[0][0] * x[0] * x[0] + 2.0 * coef[0][1] * x[1] * x[1] - coef[0][2] * x[2] * x[2])
            + coef[1][0] * x[0] * x[1]
            - coef[1][1] * x[1] * x[2]
            + 0.3 * (coef[2][0] * 3.0 * x[0]).sin() * (coef[2][1] * 2.0 * x[2]).cos()
    });
    let set = StencilSet::standard();
    let idx = g.index(4, 4, 4);
    let base = solver::discrete_ops(&set, &f, idx);
    let c = g.coords(idx);
    let delta = 1e-3;
    let mut worst: f64 = 0.0;
    let ops = |o: &solver::DiscreteOps| [o.f, o.lambda_min, o.laplacian, o.d33];
    for d in &set.dirs {
        for sgn in [1i32, -1] {
            let n: [usize; 3] = std::array::from_fn(|a| (c[a] as i32 + sgn * d[a]) as usize);
            let mut g2 = f.clone();
            g2.values[g.index(n[0], n[1], n[2])] += delta;
            let up = solver::discrete_ops(&set, &g2, idx);
            for (a, b) in ops(&base).iter().zip(ops(&up)) {
                worst = worst.max(a - b);
            }
        }
    }
    let mut g3 = f.clone();
    g3.values[idx] += delta;
    let up = solver::discrete_ops(&set, &g3, idx);
    for (a, b) in ops(&base).iter().zip(ops(&up)) {
        worst = worst.max(b - a);
    }
    worst
}

fn solver_soundness(ctx: &Ctx) -> Result<Outcome, Error> {
    let tol = ctx.cfg.solver.tol;
    let opts = SolveOptions {
        tol,
        exec: ctx.exec(),
        ..Default::default()
    };
    let g = Grid::cube(1.0, 0.125)?;
    let a = SymMat3::diag(1.2, 0.8, -0.4);
    let q = move |x: &V3| 0.5 * a.bilin(x, x);
    let c = symtensor::slag_angle(&a);
    let run = |c: f64, b: &(dyn Fn(&V3) -> f64 + Sync)| {
        let rhs = move |_: &V3| c;
        let pb = Problem {
            grid: g,
            region: Region::Box,
            op: Operator::Angle,
            rhs: &rhs,
            bdata: b,
        };
        solver::solve(&pb, &opts)
    };
    let (u, rep) = run(c, &q);
    let exact = ScalarField3::from_fn(&g, q);
    let quad = u.max_abs_diff(&exact);
    let delta = 0.1;
    let lifted = move |x: &V3| q(x) + delta;
    let (u_hi, r2) = run(c, &lifted);
    let (u_lo, r3) = run(c + 0.2, &q);
    let order_b = max_of(u.values.iter().zip(&u_hi.values).map(|(a, b)| (a - b).max(b - a - delta)));
    let order_c = max_of(u_lo.values.iter().zip(&u.values).map(|(a, b)| a - b));
    let mono = max_of((0..8).map(|k| monotonicity_violation(0.1 * k as f64)));
    let minus_one = |_: &V3| -1.0;
    let (v, _) = solver::solve_model_with(3.0, 0.1875, &minus_one, &opts)?;
    let model = max_of(v.values.iter().map(|x| x.abs()));
    let converged = rep.converged && r2.converged && r3.converged;
    Ok(Outcome {
        value: quad,
        tolerance: 1e-9,
        pass: converged && quad <= 1e-9 && mono <= 0.0 && order_b <= tol && order_c <= tol && model == 0.0,
        detail: json!({
            "quadratic_err": quad, "monotonicity_violation": mono,
            "comparison_boundary": order_b, "comparison_rhs": order_c, "model_zero_max": model,
            "converged": converged,
        }),
    })
}

fn model_run(r: f64, h: f64, ctx: &Ctx) -> Result<(ScalarField3, Vec<V3>), Error> {
    let opts = SolveOptions {
        tol: ctx.cfg.solver.tol,
        exec: ctx.exec(),
        ..Default::default()
    };
    let (f, rep) = solver::solve_model_with(r, h, &solver::model_forcing, &opts)?;
    let pts = rep.mask_points(&f.grid());
    Ok((f, pts))
}

fn model_free_boundary(ctx: &Ctx) -> Result<Outcome, Error> {
    let s = &ctx.cfg.solver;
    let h = s.model_h;
    let (f4, m4) = model_run(s.model_r, h, ctx)?;
    let (_, m6) = model_run(s.model_r_outer, h, ctx)?;
    let reach = max_of(m4.iter().map(|p| p.iter().fold(0.0f64, |a, v| a.max(v.abs()))));
    let compact = !m4.is_empty() && reach < s.model_r - 2.0 * h;
    let stable = solver::hausdorff(&m4, &m6);
    let g = f4.grid();
    let [n, _, _] = g.dims;
    let mut sym: f64 = 0.0;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let v = f4.get(i, j, k);
                sym = sym.max((v - f4.get(n - 1 - j, i, k)).abs());
                sym = sym.max((v - f4.get(i, j, n - 1 - k)).abs());
            }
        }
    }
    let r = s.model_r;
    let levels = [r / 16.0, r / 24.0, r / 32.0];
    let fields = levels
        .iter()
        .map(|&h| model_run(r, h, ctx).map(|x| x.0))
        .collect::<Result<Vec<_>, _>>()?;
    let coarse = fields[0].grid();
    let diff = |a: &ScalarField3, b: &ScalarField3| {
        max_of((0..coarse.len()).map(|i| {
            let x = coarse.point(i);
            match (a.sample(&x), b.sample(&x)) {
                (Some(u), Some(v)) => (u - v).abs(),
                _ => 0.0,
            }
        }))
    };
    let d1 = diff(&fields[0], &fields[1]);
    let d2 = diff(&fields[1], &fields[2]);
    let sym_tol = 10.0 * ctx.cfg.solver.tol;
    Ok(Outcome {
        value: stable,
        tolerance: h,
        pass: compact && stable <= h && sym <= sym_tol && d2 < d1,
        detail: json!({
            "contact_nodes": m4.len(), "contact_reach": reach, "compact": compact,
            "hausdorff_r_inner_outer": stable, "symmetry_err": sym, "symmetry_tolerance": sym_tol,
            "levels": levels, "successive_diffs": [d1, d2],
        }),
    })
}

/// Points `(y₁, y₂)` well inside the projection of `Ψ(K)`, where the chord is
/// at least `frac` of the central chord.
pub fn interior_points(p: &ModelParams, rmax: f64, n: usize, frac: f64) -> Vec<(f64, f64)> {
    let a = 2.0 * p.lambda * rmax;
    let l0 = transform::chord_length(p, 0.0, 0.0);
    let mut out = vec![(0.0, 0.0)];
    for u in linalg::r3_sequence(64 * n, 0.29) {
        if out.len() >= n {
            break;
        }
        let (y1, y2) = (a * (2.0 * u[0] - 1.0), a * (2.0 * u[1] - 1.0));
        if transform::chord_length(p, y1, y2) >= frac * l0 {
            out.push((y1, y2));
        }
    }
    out
}

fn legendre_structure(ctx: &Ctx) -> Result<Outcome, Error> {
    let w = ctx.glued()?;
    let map = GluedMap::new(w);
    let stride = (w.mesh.samples.len() / 6).max(1);
    let band = geometry::band_points(w, &[0.3 * w.mu, 0.6 * w.mu], stride);
    let round_trip = geometry::swap_defect(w, &band, ctx.exec())?;
    let duality = par::map(ctx.exec(), &band, |x| -> Result<(f64, usize, usize), Error> {
        let e = map.eval(x)?;
        let br = transform::invert_gradient(&map, &e.y)?;
        let g = transform::min_branch(&br).unwrap();
        let hu = map.eval(&g.x)?.hess.inverse().ok_or(Error::NoBranch(e.y))?;
        let neg = symtensor::eig3(&e.hess).values.iter().filter(|&&v| v < 0.0).count();
        let gap = symtensor::slag_angle(&hu) + symtensor::slag_angle(&e.hess) - std::f64::consts::FRAC_PI_2;
        Ok((gap.abs(), neg, br.len()))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let dual = max_of(duality.iter().map(|d| d.0));
    let one_negative = duality.iter().all(|d| d.1 == 1);
    let single = duality.iter().all(|d| d.2 == 1);
    // the central line meets the degenerate segment `∇Φ = 0` at a single height
    let lines: Vec<(f64, f64)> = interior_points(&w.p, w.mesh.max_radius(), 5, 0.3)
        .into_iter()
        .skip(1)
        .collect();
    let concavity = par::map(ctx.exec(), &lines, |&(y1, y2)| {
        let scan = LineScan::new(&map, y1, y2);
        let Some((lo, hi)) = scan.range() else {
            return (f64::NAN, [0usize; 6]);
        };
        let (a, b) = (lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo));
        let us: Vec<(f64, usize)> = (0..=40)
            .map(|i| {
                let br = scan.invert(a + (b - a) * i as f64 / 40.0);
                (transform::min_branch(&br).map_or(f64::NAN, |g| g.legendre), br.len())
            })
            .collect();
        let d2 = us
            .windows(3)
            .map(|t| t[0].0 - 2.0 * t[1].0 + t[2].0)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut hist = [0usize; 6];
        for u in &us {
            hist[u.1.min(5)] += 1;
        }
        (d2, hist)
    });
    let conc = concavity.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    let mut line_hist = [0usize; 6];
    for c in &concavity {
        for (a, b) in line_hist.iter_mut().zip(c.1) {
            *a += b;
        }
    }
    let line_counts_ok = line_hist.iter().enumerate().all(|(k, &n)| n == 0 || k == 1 || k == 3);
    let mut rot = Rotation::new(ctx.cfg.section3.eps_seq[0])?;
    rot.kappa = ctx.cfg.section3.kappa;
    let z = section3::extract_z(&rot, ctx.cfg.section3.z_level, ctx.exec())?;
    let census = section3::branch_census(&rot, &z, 8, ctx.exec());
    let pass = round_trip <= 1e-9
        && dual <= 1e-8
        && one_negative
        && single
        && line_counts_ok
        && conc <= 1e-6
        && census.only_one_or_three()
        && census.three_seen();
    Ok(Outcome {
        value: dual,
        tolerance: 1e-8,
        pass,
        detail: json!({
            "band_points": band.len(), "round_trip": round_trip, "duality_err": dual,
            "one_negative_eigenvalue": one_negative, "band_branches_single": single,
            "vertical_second_difference_max": conc, "vertical_line_branches": line_hist,
            "rotated_census": census,
        }),
    })
}

fn jump_formula(ctx: &Ctx) -> Result<Outcome, Error> {
    let w = ctx.glued()?;
    let map = GluedMap::new(w);
    let pts = interior_points(&w.p, w.mesh.max_radius(), ctx.cfg.transform.jump_points, 0.3);
    let js = transform::jump_profile(&map, &pts, ctx.cfg.transform.h_probe, ctx.exec());
    let errs: Vec<f64> = js.iter().filter_map(|j| j.rel_err()).collect();
    let good = errs.iter().filter(|&&e| e <= 0.03).count();
    let worst = max_of(errs.iter().copied());
    Ok(Outcome {
        value: worst,
        tolerance: 0.03,
        pass: good >= 20 && worst <= 0.03,
        detail: json!({ "points": js.len(), "measured": errs.len(), "within": good, "samples": js }),
    })
}

fn holder_exponents(ctx: &Ctx) -> Result<Outcome, Error> {
    let w = ctx.glued()?;
    let map = GluedMap::new(w);
    let pts = interior_points(&w.p, w.mesh.max_radius(), ctx.cfg.transform.holder_interior, 0.4);
    let inner = par::map(ctx.exec(), &pts, |&(y1, y2)| {
        [Side::Above, Side::Below].map(|s| transform::holder_interior(&map, y1, y2, s))
    });
    let in_range = |f: &transform::HolderFit, lo: f64, hi: f64| f.reliable && f.alpha >= lo && f.alpha <= hi;
    let ok_inner = inner
        .iter()
        .filter(|fs| fs.iter().all(|f| f.as_ref().is_some_and(|f| in_range(f, 0.4, 0.6))))
        .count();
    let tang = freeboundary::tangential_points(&w.p, &w.mesh);
    let n = ctx.cfg.transform.holder_edge.max(1);
    let picks: Vec<&BoundarySample> = tang.iter().step_by((tang.len() / n).max(1)).take(n).collect();
    let edge = par::map(ctx.exec(), &picks, |s| {
        [Side::Above, Side::Below].map(|side| transform::holder_edge(&map, s, side))
    });
    let ok_edge = edge
        .iter()
        .filter(|fs| fs.iter().any(|f| f.reliable) && fs.iter().filter(|f| f.reliable).all(|f| in_range(f, 0.12, 0.28)))
        .count();
    let alphas: Vec<f64> = inner.iter().flatten().flatten().map(|f| f.alpha).collect();
    let edge_alphas: Vec<f64> = edge.iter().flatten().filter(|f| f.reliable).map(|f| f.alpha).collect();
    Ok(Outcome {
        value: ok_inner as f64,
        tolerance: 5.0,
        pass: ok_inner >= 5 && ok_edge >= 3,
        detail: json!({
            "interior_points": pts.len(), "interior_in_range": ok_inner, "interior_alphas": alphas,
            "edge_points": picks.len(), "edge_in_range": ok_edge, "edge_alphas": edge_alphas,
        }),
    })
}

fn wk_approximation(ctx: &Ctx) -> Result<Outcome, Error> {
    let w = ctx.glued()?;
    let stride = (w.mesh.samples.len() / 8).max(1);
    let xs = geometry::band_points(w, &[0.25 * w.mu, 0.5 * w.mu], stride);
    let mut ident: f64 = 0.0;
    let mut gaps = Vec::new();
    let mut uniform = Vec::new();
    let mut ok = true;
    for &k in &ctx.cfg.transform.wk {
        let r = par::map(ctx.exec(), &xs[..xs.len().min(6)], |x| transform::wk_check(w, k, x))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        ident = ident.max(max_of(r.iter().map(|c| c.identity_residual)));
        gaps.push(min_of(r.iter().map(|c| c.dual_angle_gap)));
        let (diff, bound) = transform::wk_uniform(w, k, &xs, ctx.exec())?;
        ok &= diff <= bound;
        uniform.push(json!({ "k": k, "max_diff": diff, "bound": bound }));
    }
    Ok(Outcome {
        value: ident,
        tolerance: 1e-10,
        pass: ident <= 1e-10 && ok,
        detail: json!({ "points": xs.len(), "identity_residual": ident, "min_dual_angle_gap": gaps, "uniform": uniform }),
    })
}

fn rotation(ctx: &Ctx) -> Result<Outcome, Error> {
    let s3 = &ctx.cfg.section3;
    let mut rot = Rotation::new(ctx.p().eps_r)?;
    rot.kappa = s3.kappa;
    let o = section3::origin_check(&rot)?;
    let (res_slope, lam_slope) = section3::wy2_slopes(&linalg::logspace(1e-3, 1e-1, 9));
    let opts = SolveOptions {
        tol: ctx.cfg.solver.tol.min(1e-10),
        exec: ctx.exec(),
        ..Default::default()
    };
    let g = section3::gap_scaling(&s3.eps_seq, s3.d, s3.cells, &opts)?;
    let ordering = g
        .runs
        .iter()
        .map(|r| r.ordering)
        .chain([g.control.ordering])
        .fold(f64::NEG_INFINITY, f64::max);
    let origin_ok = o.lambda3_err <= 1e-12 && o.angle_err <= 1e-12 && o.hess_rel_err <= 1e-4;
    let slopes_ok = res_slope >= 2.7 && lam_slope >= 2.7;
    let bounded = g.growth <= 1.25;
    let ordered = ordering <= 1e-8;
    Ok(Outcome {
        value: g.growth,
        tolerance: 1.25,
        pass: origin_ok && slopes_ok && bounded && ordered,
        detail: json!({
            "origin": o, "wy2_residual_slope": res_slope, "lambda3_slope": lam_slope,
            "gap_scaling": g, "ordering_max": ordering,
        }),
    })
}

fn minimality(ctx: &Ctx) -> Result<Outcome, Error> {
    let w = ctx.glued()?;
    let r = geometry::minimality_report(w, ctx.cfg.verify.minimal_dist, ctx.exec())?;
    let pass = r.exterior_minimal
        && r.delta0 > 0.0
        && !r.interior_minimal
        && r.interior_sup >= r.delta0
        && r.origin_norm <= 1e-12
        && r.jump_slot_rel <= 1e-8
        && r.jump_off_rel <= 1e-8
        && r.boundary_bound_ratio >= 1.0 - 1e-9
        && r.metric_defect <= 1e-12
        && r.metric_min_eig >= 1.0 - 1e-12;
    Ok(Outcome {
        value: r.exterior_sup,
        tolerance: geometry::MINIMAL_TOL,
        pass,
        detail: serde_json::to_value(&r).unwrap_or(Value::Null),
    })
}

fn bellman_contact(ctx: &Ctx) -> Result<Outcome, Error> {
    let p = ctx.p();
    let h = p.eps / ctx.cfg.solver.bellman_refine;
    let g = Grid::cube(0.2, h)?;
    let phi = move |x: &V3| explicit::phi_value(&p, x);
    let cs = p.c_star();
    let rhs = move |_: &V3| cs;
    let pb = Problem {
        grid: g,
        region: Region::Box,
        op: Operator::Bellman,
        rhs: &rhs,
        bdata: &phi,
    };
    let (_, rep) = solver::solve(
        &pb,
        &SolveOptions {
            tol: 1e-6,
            max_iter: 3000,
            omega: Some(1.6),
            exec: ctx.exec(),
            ..Default::default()
        },
    );
    let mask: Vec<bool> = rep.mask.iter().map(|&m| m == 1).collect();
    let in_k: Vec<bool> = (0..g.len())
        .map(|i| {
            let x = g.point(i);
            linalg::dot(&x, &x) < 0.1 && explicit::theta_value(&p, &x) <= cs
        })
        .collect();
    let d = solver::grid_hausdorff(&g, &mask, &in_k);
    Ok(Outcome {
        value: d,
        tolerance: 5.0 * h,
        pass: d <= 5.0 * h,
        detail: json!({
            "h": h, "hausdorff_over_h": d / h, "contact_nodes": mask.iter().filter(|&&m| m).count(),
            "k_nodes": in_k.iter().filter(|&&m| m).count(), "iterations": rep.iterations,
            "residual": rep.residual, "converged": rep.converged,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete() {
        let c = criteria();
        for (i, x) in c.iter().enumerate() {
            assert_eq!(x.id as usize, i + 1);
            assert!(MODULES.contains(&x.module));
        }
        assert_eq!(c.iter().filter(|x| x.exploratory).count(), 1);
    }
}
