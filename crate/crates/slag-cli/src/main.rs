use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use slag::band::Glued;
use slag::config::Config;
use slag::explicit;
use slag::freeboundary;
use slag::io::{self, Format};
use slag::linalg::V3;
use slag::section3::{self, Rotation};
use slag::solver::{self, Grid, Operator, Problem, Region, ScalarField3, SolveOptions};
use slag::transform::{self, GluedMap, Side};
use slag::verify;
use slag::Error;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "slag", version, about = "Non-smooth special Lagrangian potentials in three dimensions")]
struct Cli {
    /// INI configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override one key, as `section.key=value`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Run the numerical kernels on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemKind {
    Dirichlet,
    Bellman,
    Model,
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    Phi,
    Theta,
    W,
    Model,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the acceptance checks and print a JSON report.
    Verify {
        /// Restrict to the checks of one module.
        #[arg(long)]
        only: Option<String>,
        /// Write the report here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Drop the per-check detail.
        #[arg(long)]
        brief: bool,
    },
    /// Φ, Θ and Λ± at a point.
    Eval {
        #[arg(value_parser = parse_point, allow_hyphen_values = true)]
        x: V3,
    },
    /// Sample ∂K and summarize it; optionally write the samples as CSV.
    ExtractK {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Cauchy jet of the exterior solution at the foot point of `x`.
    Jets {
        #[arg(value_parser = parse_point, allow_hyphen_values = true)]
        x: V3,
        #[arg(long, default_value_t = 4)]
        order: u8,
    },
    /// Solve one of the discrete problems and optionally export the field.
    Solve {
        #[arg(long, value_enum)]
        problem: ProblemKind,
        /// Grid spacing; defaults to `eps/4` (Dirichlet, Bellman) or the
        /// configured model spacing.
        #[arg(long)]
        h: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_parser = parse_format)]
        format: Option<Format>,
    },
    /// Branches of the gradient inverse and `u` over `y`.
    Legendre {
        #[arg(value_parser = parse_point, allow_hyphen_values = true)]
        y: V3,
    },
    /// Measured jump of `u₃` across Γ against the chord length.
    Jump {
        #[arg(long)]
        points: Option<usize>,
        /// CSV output of the profile.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Hölder exponents of `∇u` at interior and edge points of Γ.
    Holder,
    /// Rotated quartic: origin data, slopes, `Z` and optionally the gap.
    Rotate {
        #[arg(long)]
        eps_r: Option<f64>,
        /// CSV output of `∂Z` and `Ψ(∂Z)`.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also run the Dirichlet comparison over the configured sequence.
        #[arg(long)]
        gap: bool,
    },
    /// Sample a field on a cube and write it.
    Export {
        #[arg(value_enum)]
        quantity: Quantity,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_parser = parse_format)]
        format: Option<Format>,
        #[arg(long, default_value_t = 0.2)]
        half: f64,
        #[arg(long, default_value_t = 0.0125)]
        h: f64,
    },
}

fn parse_point(s: &str) -> Result<V3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|_| "expected three comma-separated numbers".to_string())
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Config(_) | Error::InvalidParams(_) | Error::Format(_) => 2,
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> Result<Config, Error> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for s in &cli.set {
        let (lhs, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("`{s}`: expected section.key=value")))?;
        let (sec, key) = lhs
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("`{lhs}`: expected section.key")))?;
        cfg.set(sec.trim(), key.trim(), v.trim())?;
    }
    if cli.sequential {
        cfg.solver.parallel = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(v: &Value, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => {
            if let Err(e) = writeln!(std::io::stdout().lock(), "{text}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_field(f: &ScalarField3, path: &Path, format: Option<Format>) -> Result<(), Error> {
    let format = format
        .or_else(|| Format::from_path(path))
        .unwrap_or(Format::Slf);
    io::write_field(f, path, format)
}

fn glued(cfg: &Config) -> Result<Glued, Error> {
    let mesh = freeboundary::extract_k_with(&cfg.explicit, cfg.freeboundary.level, cfg.exec())?;
    Ok(Glued::new(cfg.explicit, mesh))
}

fn solve_opts(cfg: &Config) -> SolveOptions {
    SolveOptions {
        tol: cfg.solver.tol,
        exec: cfg.exec(),
        ..Default::default()
    }
}

fn report_json(r: &solver::SolveReport) -> Value {
    json!({
        "iterations": r.iterations,
        "residual": r.residual,
        "converged": r.converged,
        "seconds": r.seconds,
        "active_nodes": r.mask.iter().filter(|&&m| m == 1).count(),
        "warnings": r.warnings,
    })
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let cfg = load_config(cli)?;
    let p = cfg.explicit;
    match &cli.cmd {
        Cmd::Verify { only, output, brief } => {
            let report = verify::run_verify(&cfg, only.as_deref())?;
            let mut v = serde_json::to_value(&report).map_err(|e| Error::Format(e.to_string()))?;
            if *brief {
                for c in v["checks"].as_array_mut().into_iter().flatten() {
                    c.as_object_mut().map(|o| o.remove("detail"));
                }
            }
            emit(&v, output.as_deref())?;
            for c in &report.checks {
                eprintln!("{:>12} {:<24} {}", format!("{:?}", c.status).to_uppercase(), c.name, c.value);
            }
            return Ok(if report.all_passed() { 0 } else { 1 });
        }
        Cmd::Eval { x } => {
            let t = explicit::theta_eval(&p, x)?;
            let lpm = explicit::lambda_pm(&p, x).ok();
            emit(
                &json!({
                    "x": x,
                    "phi": explicit::phi_value(&p, x),
                    "grad_phi": explicit::phi_grad(&p, x),
                    "hess_phi": explicit::phi_hess(&p, x).to_full(),
                    "theta": t.theta,
                    "grad_theta": t.grad,
                    "hess_theta": t.hess.to_full(),
                    "lambda_pm": lpm,
                    "c_star": p.c_star(),
                    "inside_k": t.theta <= p.c_star(),
                }),
                None,
            )?;
        }
        Cmd::ExtractK { output } => {
            let m = freeboundary::extract_k_with(&p, cfg.freeboundary.level, cfg.exec())?;
            if let Some(path) = output {
                let mut w = create(path)?;
                m.write_csv(&p, &mut w)?;
                w.flush()?;
            }
            let tang = freeboundary::tangential_points(&p, &m);
            emit(
                &json!({
                    "samples": m.samples.len(),
                    "level": m.level,
                    "c_star": m.c_star,
                    "max_radius": m.max_radius(),
                    "min_curvature": m.min_curvature(),
                    "max_curvature": m.max_curvature(),
                    "default_mu": m.default_mu(),
                    "tangential_points": tang.len(),
                }),
                None,
            )?;
        }
        Cmd::Jets { x, order } => {
            let w = glued(&cfg)?;
            let s = w.foot(x)?;
            let j = freeboundary::cauchy_jet(&p, &s, *order)?;
            emit(
                &json!({
                    "x": x,
                    "foot": s.x0,
                    "normal": s.nu,
                    "order": j.order,
                    "value": j.value,
                    "grad": j.grad,
                    "hess": j.hess.to_full(),
                    "d3": j.d3.map(|t| t.c.to_vec()),
                    "d4": j.d4.map(|t| t.c.to_vec()),
                    "glued_value": w.eval(x)?.value,
                }),
                None,
            )?;
        }
        Cmd::Solve { problem, h, output, format } => {
            let opts = solve_opts(&cfg);
            let (field, rep) = match problem {
                ProblemKind::Model => {
                    let h = h.unwrap_or(cfg.solver.model_h);
                    solver::solve_model_with(cfg.solver.model_r, h, &solver::model_forcing, &opts)?
                }
                ProblemKind::Dirichlet | ProblemKind::Bellman => {
                    let h = h.unwrap_or(p.eps / cfg.solver.bellman_refine);
                    let grid = Grid::cube(0.2, h)?;
                    let phi = move |x: &V3| explicit::phi_value(&p, x);
                    let cs = p.c_star();
                    let rhs = move |_: &V3| cs;
                    let op = match problem {
                        ProblemKind::Bellman => Operator::Bellman,
                        _ => Operator::Angle,
                    };
                    let pb = Problem {
                        grid,
                        region: Region::Box,
                        op,
                        rhs: &rhs,
                        bdata: &phi,
                    };
                    solver::solve(&pb, &opts)
                }
            };
            if let Some(path) = output {
                write_field(&field, path, *format)?;
            }
            let g = field.grid();
            emit(&json!({ "dims": g.dims, "h": g.h, "report": report_json(&rep) }), None)?;
            return Ok(if rep.converged { 0 } else { 1 });
        }
        Cmd::Legendre { y } => {
            let w = glued(&cfg)?;
            let map = GluedMap::new(&w);
            let br = transform::invert_gradient(&map, y)?;
            emit(
                &json!({
                    "y": y,
                    "branches": br,
                    "u": transform::min_branch(&br).map(|g| g.legendre),
                }),
                None,
            )?;
        }
        Cmd::Jump { points, output } => {
            let w = glued(&cfg)?;
            let map = GluedMap::new(&w);
            let n = points.unwrap_or(cfg.transform.jump_points);
            let pts = verify::interior_points(&p, w.mesh.max_radius(), n, 0.3);
            let js = transform::jump_profile(&map, &pts, cfg.transform.h_probe, cfg.exec());
            if let Some(path) = output {
                let mut f = create(path)?;
                writeln!(f, "y1,y2,jump,chord,rel_err")?;
                for j in &js {
                    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
                    writeln!(f, "{},{},{},{},{}", j.y1, j.y2, opt(j.jump), j.chord, opt(j.rel_err()))?;
                }
                f.flush()?;
            }
            emit(&json!({ "samples": js }), None)?;
        }
        Cmd::Holder => {
            let w = glued(&cfg)?;
            let map = GluedMap::new(&w);
            let pts = verify::interior_points(&p, w.mesh.max_radius(), cfg.transform.holder_interior, 0.4);
            let interior: Vec<Value> = pts
                .iter()
                .map(|&(y1, y2)| {
                    json!({
                        "y1": y1, "y2": y2,
                        "above": transform::holder_interior(&map, y1, y2, Side::Above),
                        "below": transform::holder_interior(&map, y1, y2, Side::Below),
                    })
                })
                .collect();
            let tang = freeboundary::tangential_points(&p, &w.mesh);
            let n = cfg.transform.holder_edge.max(1);
            let edge: Vec<Value> = tang
                .iter()
                .step_by((tang.len() / n).max(1))
                .take(n)
                .map(|s| {
                    json!({
                        "x0": s.x0,
                        "above": transform::holder_edge(&map, s, Side::Above),
                        "below": transform::holder_edge(&map, s, Side::Below),
                    })
                })
                .collect();
            emit(&json!({ "interior": interior, "edge": edge }), None)?;
        }
        Cmd::Rotate { eps_r, output, gap } => {
            let s3 = &cfg.section3;
            let mut rot = Rotation::new(eps_r.unwrap_or(p.eps_r))?;
            rot.kappa = s3.kappa;
            let origin = section3::origin_check(&rot)?;
            let (rs, ls) = section3::wy2_slopes(&slag::linalg::logspace(1e-3, 1e-1, 9));
            let z = match section3::extract_z(&rot, s3.z_level, cfg.exec()) {
                Ok(z) => {
                    if let Some(path) = output {
                        let mut f = create(path)?;
                        z.write_csv(&mut f)?;
                        f.flush()?;
                    }
                    json!({ "points": z.points.len(), "enclosing_radius": z.enclosing_radius() })
                }
                Err(e) => json!({ "error": e.to_string() }),
            };
            let gap = if *gap {
                let g = section3::gap_scaling(&s3.eps_seq, s3.d, s3.cells, &solve_opts(&cfg))?;
                serde_json::to_value(&g).map_err(|e| Error::Format(e.to_string()))?
            } else {
                Value::Null
            };
            emit(
                &json!({
                    "eps_r": rot.eps_r, "origin": origin,
                    "wy2_residual_slope": rs, "lambda3_slope": ls, "z": z, "gap_scaling": gap,
                }),
                None,
            )?;
        }
        Cmd::Export { quantity, output, format, half, h } => {
            let field = match quantity {
                Quantity::Model => {
                    solver::solve_model_with(cfg.solver.model_r, cfg.solver.model_h, &solver::model_forcing, &solve_opts(&cfg))?.0
                }
                q => {
                    let grid = Grid::cube(*half, *h)?;
                    match q {
                        Quantity::Phi => ScalarField3::from_fn(&grid, |x| explicit::phi_value(&p, x)),
                        Quantity::Theta => ScalarField3::from_fn(&grid, |x| explicit::theta_value(&p, x)),
                        _ => {
                            let w = glued(&cfg)?;
                            ScalarField3::from_fn(&grid, |x| w.eval_in_band(x).map_or(f64::NAN, |e| e.value))
                        }
                    }
                }
            };
            write_field(&field, output, *format)?;
            let g = field.grid();
            emit(&json!({ "output": output, "dims": g.dims, "h": g.h }), None)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
