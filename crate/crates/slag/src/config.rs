//! INI configuration: `[section]` headers named after the modules and
//! `key = value` lines. Unknown sections or keys are rejected.

use crate::explicit::ModelParams;
use crate::par::Exec;
use crate::Error;
use ini::Ini;
use serde::Serialize;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreeBoundaryConfig {
    /// Icosphere subdivision level of the ∂K sampling.
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub parallel: bool,
    /// Half-widths of the model-problem boxes compared for the contact set.
    pub model_r: f64,
    pub model_r_outer: f64,
    pub model_h: f64,
    /// Grid spacing of the exploratory Bellman run is `eps / bellman_refine`.
    pub bellman_refine: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformConfig {
    pub h_probe: f64,
    pub jump_points: usize,
    pub holder_interior: usize,
    pub holder_edge: usize,
    pub wk: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Section3Config {
    /// Rotation sequence for the `Z` geometry and the gap scaling.
    pub eps_seq: Vec<f64>,
    pub d: f64,
    pub cells: usize,
    pub z_level: usize,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyConfig {
    /// Random matrices of the spectral-calculus check.
    pub matrices: usize,
    /// Points of the explicit-identity check.
    pub points: usize,
    /// Distance from ∂K up to which the exterior piece must be minimal.
    pub minimal_dist: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Config {
    pub explicit: ModelParams,
    pub freeboundary: FreeBoundaryConfig,
    pub solver: SolverConfig,
    pub transform: TransformConfig,
    pub section3: Section3Config,
    pub verify: VerifyConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            explicit: ModelParams::default(),
            freeboundary: FreeBoundaryConfig { level: 4 },
            solver: SolverConfig {
                tol: 1e-9,
                parallel: true,
                model_r: 4.0,
                model_r_outer: 6.0,
                model_h: 0.125,
                bellman_refine: 4.0,
            },
            transform: TransformConfig {
                h_probe: 1e-7,
                jump_points: 24,
                holder_interior: 6,
                holder_edge: 4,
                wk: vec![10.0, 100.0],
            },
            section3: Section3Config {
                eps_seq: vec![0.002, 0.001, 0.0005],
                d: 0.008,
                cells: 8,
                z_level: 2,
                kappa: 0.5,
            },
            verify: VerifyConfig {
                matrices: 1000,
                points: 10_000,
                minimal_dist: 1e-2,
            },
        }
    }
}

fn bad(section: &str, key: &str, value: &str) -> Error {
    Error::Config(format!("[{section}] {key} = {value}: invalid value"))
}

fn num<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T, Error> {
    value.trim().parse().map_err(|_| bad(section, key, value))
}

fn list(section: &str, key: &str, value: &str) -> Result<Vec<f64>, Error> {
    value
        .split(',')
        .map(|v| num(section, key, v))
        .collect::<Result<Vec<f64>, _>>()
        .and_then(|v| if v.is_empty() { Err(bad(section, key, value)) } else { Ok(v) })
}

fn flag(section: &str, key: &str, value: &str) -> Result<bool, Error> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(section, key, value)),
    }
}

fn optional(section: &str, key: &str, value: &str) -> Result<Option<f64>, Error> {
    match value.trim() {
        "" | "auto" | "none" => Ok(None),
        v => num(section, key, v).map(Some),
    }
}

impl Config {
    pub fn exec(&self) -> Exec {
        if self.solver.parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }

    pub fn from_ini_str(text: &str) -> Result<Config, Error> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut c = Config::default();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                c.set(section, key, value)?;
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config, Error> {
        let text = std::fs::read_to_string(path)?;
        Config::from_ini_str(&text)
    }

    /// Sets one `key = value` of `[section]`.
    pub fn set(&mut self, section: &str, key: &str, v: &str) -> Result<(), Error> {
        let s = section;
        match (s, key) {
            ("explicit", "lambda") => self.explicit.lambda = num(s, key, v)?,
            ("explicit", "eps") => self.explicit.eps = num(s, key, v)?,
            ("explicit", "eps_r") => self.explicit.eps_r = num(s, key, v)?,
            ("explicit", "mu") => self.explicit.mu = optional(s, key, v)?,
            ("explicit", "mu_prime") => self.explicit.mu_prime = optional(s, key, v)?,
            ("freeboundary", "level") => self.freeboundary.level = num(s, key, v)?,
            ("solver", "tol") => self.solver.tol = num(s, key, v)?,
            ("solver", "parallel") => self.solver.parallel = flag(s, key, v)?,
            ("solver", "model_r") => self.solver.model_r = num(s, key, v)?,
            ("solver", "model_r_outer") => self.solver.model_r_outer = num(s, key, v)?,
            ("solver", "model_h") => self.solver.model_h = num(s, key, v)?,
            ("solver", "bellman_refine") => self.solver.bellman_refine = num(s, key, v)?,
            ("transform", "h_probe") => self.transform.h_probe = num(s, key, v)?,
            ("transform", "jump_points") => self.transform.jump_points = num(s, key, v)?,
            ("transform", "holder_interior") => self.transform.holder_interior = num(s, key, v)?,
            ("transform", "holder_edge") => self.transform.holder_edge = num(s, key, v)?,
            ("transform", "wk") => self.transform.wk = list(s, key, v)?,
            ("section3", "eps_seq") => self.section3.eps_seq = list(s, key, v)?,
            ("section3", "d") => self.section3.d = num(s, key, v)?,
            ("section3", "cells") => self.section3.cells = num(s, key, v)?,
            ("section3", "z_level") => self.section3.z_level = num(s, key, v)?,
            ("section3", "kappa") => self.section3.kappa = num(s, key, v)?,
            ("verify", "matrices") => self.verify.matrices = num(s, key, v)?,
            ("verify", "points") => self.verify.points = num(s, key, v)?,
            ("verify", "minimal_dist") => self.verify.minimal_dist = num(s, key, v)?,
            _ => {
                let at = if s.is_empty() { String::new() } else { format!("[{s}] ") };
                return Err(Error::Config(format!("unknown key {at}`{key}`")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.explicit
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        pos("solver.tol", self.solver.tol)?;
        pos("solver.model_h", self.solver.model_h)?;
        pos("solver.bellman_refine", self.solver.bellman_refine)?;
        pos("transform.h_probe", self.transform.h_probe)?;
        pos("section3.d", self.section3.d)?;
        pos("section3.kappa", self.section3.kappa)?;
        pos("verify.minimal_dist", self.verify.minimal_dist)?;
        if self.solver.model_r_outer <= self.solver.model_r {
            return Err(Error::Config("solver.model_r_outer must exceed model_r".into()));
        }
        if self.explicit.eps_r > 0.2 || self.section3.eps_seq.iter().any(|&e| !(e > 0.0 && e <= 0.2)) {
            return Err(Error::Config("rotation parameters must lie in (0, 0.2]".into()));
        }
        if self.transform.wk.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::Config("transform.wk entries must be positive".into()));
        }
        if self.section3.cells < 4 || self.freeboundary.level > 7 {
            return Err(Error::Config("section3.cells ≥ 4 and freeboundary.level ≤ 7 required".into()));
        }
        Ok(())
    }

    /// The configuration as INI text that parses back to itself.
    pub fn to_ini_string(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("auto".to_string(), |v| v.to_string());
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        let e = &self.explicit;
        let s = &self.solver;
        let t = &self.transform;
        let r = &self.section3;
        let v = &self.verify;
        format!(
            "[explicit]\nlambda = {}\neps = {}\neps_r = {}\nmu = {}\nmu_prime = {}\n\n\
             [freeboundary]\nlevel = {}\n\n\
             [solver]\ntol = {}\nparallel = {}\nmodel_r = {}\nmodel_r_outer = {}\nmodel_h = {}\nbellman_refine = {}\n\n\
             [transform]\nh_probe = {}\njump_points = {}\nholder_interior = {}\nholder_edge = {}\nwk = {}\n\n\
             [section3]\neps_seq = {}\nd = {}\ncells = {}\nz_level = {}\nkappa = {}\n\n\
             [verify]\nmatrices = {}\npoints = {}\nminimal_dist = {}\n",
            e.lambda, e.eps, e.eps_r, opt(e.mu), opt(e.mu_prime),
            self.freeboundary.level,
            s.tol, s.parallel, s.model_r, s.model_r_outer, s.model_h, s.bellman_refine,
            t.h_probe, t.jump_points, t.holder_interior, t.holder_edge, join(&t.wk),
            join(&r.eps_seq), r.d, r.cells, r.z_level, r.kappa,
            v.matrices, v.points, v.minimal_dist,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let c = Config::default();
        assert_eq!(Config::from_ini_str(&c.to_ini_string()).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let e = Config::from_ini_str("[explicit]\nlambda = 0.04\ncolour = red\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let e = Config::from_ini_str("[nonsense]\nx = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn values_are_read() {
        let c = Config::from_ini_str("[explicit]\nlambda = 0.5\n[section3]\neps_seq = 0.01, 0.005\n").unwrap();
        assert_eq!(c.explicit.lambda, 0.5);
        assert_eq!(c.section3.eps_seq, vec![0.01, 0.005]);
    }
}
