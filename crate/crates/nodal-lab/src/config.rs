//! Flat key-value run configuration.
//!
//! One `key = value` per line, `#` starts a comment anywhere, no nesting.
//! Unknown keys are rejected so typos cannot silently fall back to
//! defaults. Serialization is canonical (fixed key order, shortest
//! round-trip decimals), which makes serialize ∘ parse idempotent and the
//! emitted files diff-friendly.

use std::path::Path;

use crate::ansatz::default_r_ladder;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::radial_ode::ShootOpts;
use crate::symmetry::m_min_exact;
use crate::util::write_atomic;

/// Everything a run needs: model, orbit, ladder, grids, tolerances, seed,
/// and where to put the artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: u32,
    pub p: f64,
    pub q: f64,
    /// Copies per block; `None` defers to the exact threshold for N.
    pub m: Option<u32>,
    pub r_ladder: Vec<f64>,
    pub r_max: f64,
    pub points_per_decade: u32,
    pub ode_rtol: f64,
    pub root_tol: f64,
    pub mc_samples: u64,
    pub seed: u64,
    pub output_dir: String,
    /// Optional explicit exponents for the interaction-scaling suite;
    /// when set, `verify cm` checks this single configuration instead of
    /// the randomized battery.
    pub cm_thetas: Option<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 5,
            p: 3.0,
            q: 4.0,
            m: None,
            r_ladder: default_r_ladder(5),
            r_max: 40.0,
            points_per_decade: 256,
            ode_rtol: 1e-10,
            root_tol: 1e-10,
            mc_samples: 100_000,
            seed: 1,
            output_dir: "out".into(),
            cm_thetas: None,
        }
    }
}

impl RunConfig {
    /// Parses the flat text format over the defaults. Every key is
    /// recognized or the whole parse fails; duplicates fail too.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n: Option<u32> = None;
        let mut p: Option<f64> = None;
        let mut q: Option<f64> = None;
        let mut m: Option<u32> = None;
        let mut r_ladder: Option<Vec<f64>> = None;
        let mut r_max: Option<f64> = None;
        let mut points_per_decade: Option<u32> = None;
        let mut ode_rtol: Option<f64> = None;
        let mut root_tol: Option<f64> = None;
        let mut mc_samples: Option<u64> = None;
        let mut seed: Option<u64> = None;
        let mut output_dir: Option<String> = None;
        let mut cm_thetas: Option<Vec<f64>> = None;

        fn dup<T>(slot: &Option<T>, key: &str, lineno: usize) -> Result<()> {
            if slot.is_some() {
                return Err(Error::Config(format!("line {lineno}: duplicate key '{key}'")));
            }
            Ok(())
        }

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {lineno}: expected 'key = value', got {raw:?}"))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "N" => {
                    dup(&n, key, lineno)?;
                    n = Some(parse_scalar(key, value, lineno)?);
                }
                "p" => {
                    dup(&p, key, lineno)?;
                    p = Some(parse_scalar(key, value, lineno)?);
                }
                "q" => {
                    dup(&q, key, lineno)?;
                    q = Some(parse_scalar(key, value, lineno)?);
                }
                "m" => {
                    dup(&m, key, lineno)?;
                    m = Some(parse_scalar(key, value, lineno)?);
                }
                "R_ladder" => {
                    dup(&r_ladder, key, lineno)?;
                    r_ladder = Some(parse_list(key, value, lineno)?);
                }
                "r_max" => {
                    dup(&r_max, key, lineno)?;
                    r_max = Some(parse_scalar(key, value, lineno)?);
                }
                "points_per_decade" => {
                    dup(&points_per_decade, key, lineno)?;
                    points_per_decade = Some(parse_scalar(key, value, lineno)?);
                }
                "ode_rtol" => {
                    dup(&ode_rtol, key, lineno)?;
                    ode_rtol = Some(parse_scalar(key, value, lineno)?);
                }
                "root_tol" => {
                    dup(&root_tol, key, lineno)?;
                    root_tol = Some(parse_scalar(key, value, lineno)?);
                }
                "mc_samples" => {
                    dup(&mc_samples, key, lineno)?;
                    mc_samples = Some(parse_scalar(key, value, lineno)?);
                }
                "seed" => {
                    dup(&seed, key, lineno)?;
                    seed = Some(parse_scalar(key, value, lineno)?);
                }
                "output_dir" => {
                    dup(&output_dir, key, lineno)?;
                    if value.is_empty() {
                        return Err(Error::Config(format!("line {lineno}: output_dir is empty")));
                    }
                    output_dir = Some(value.to_string());
                }
                "cm_thetas" => {
                    dup(&cm_thetas, key, lineno)?;
                    cm_thetas = Some(parse_list(key, value, lineno)?);
                }
                other => {
                    return Err(Error::Config(format!("line {lineno}: unknown key '{other}'")));
                }
            }
        }

        let defaults = RunConfig::default();
        let n = n.unwrap_or(defaults.n);
        let cfg = RunConfig {
            n,
            p: p.unwrap_or(defaults.p),
            q: q.unwrap_or(defaults.q),
            m,
            // The ladder default tracks N, so resolve it after N is known.
            r_ladder: r_ladder.unwrap_or_else(|| default_r_ladder(n)),
            r_max: r_max.unwrap_or(defaults.r_max),
            points_per_decade: points_per_decade.unwrap_or(defaults.points_per_decade),
            ode_rtol: ode_rtol.unwrap_or(defaults.ode_rtol),
            root_tol: root_tol.unwrap_or(defaults.root_tol),
            mc_samples: mc_samples.unwrap_or(defaults.mc_samples),
            seed: seed.unwrap_or(defaults.seed),
            output_dir: output_dir.unwrap_or(defaults.output_dir),
            cm_thetas,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), &e))?;
        RunConfig::parse(&text)
    }

    /// Canonical serialization: fixed key order, shortest round-trip
    /// decimals, optional keys omitted when unset.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# nodal-lab run configuration\n");
        out.push_str(&format!("N = {}\n", self.n));
        out.push_str(&format!("p = {}\n", self.p));
        out.push_str(&format!("q = {}\n", self.q));
        if let Some(m) = self.m {
            out.push_str(&format!("m = {m}\n"));
        }
        out.push_str(&format!("R_ladder = {}\n", join_list(&self.r_ladder)));
        out.push_str(&format!("r_max = {}\n", self.r_max));
        out.push_str(&format!("points_per_decade = {}\n", self.points_per_decade));
        out.push_str(&format!("ode_rtol = {}\n", self.ode_rtol));
        out.push_str(&format!("root_tol = {}\n", self.root_tol));
        out.push_str(&format!("mc_samples = {}\n", self.mc_samples));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("output_dir = {}\n", self.output_dir));
        if let Some(thetas) = &self.cm_thetas {
            out.push_str(&format!("cm_thetas = {}\n", join_list(thetas)));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        // Delegates the (N, p, q) coupling rules to the model.
        self.model_params()?;
        if self.r_ladder.is_empty() {
            return Err(Error::Config("R_ladder must not be empty".into()));
        }
        if self.r_ladder.windows(2).any(|w| !(w[1] > w[0])) || !(self.r_ladder[0] > 1.0) {
            return Err(Error::Config(format!(
                "R_ladder must be strictly increasing with every entry > 1, got {}",
                join_list(&self.r_ladder)
            )));
        }
        if !(self.r_max >= 10.0) || !self.r_max.is_finite() {
            return Err(Error::Config(format!(
                "r_max = {} too small for a tail fit; need at least 10",
                self.r_max
            )));
        }
        if self.points_per_decade < 16 {
            return Err(Error::Config(format!(
                "points_per_decade = {} underresolves the profile; need at least 16",
                self.points_per_decade
            )));
        }
        if !(self.ode_rtol > 0.0 && self.ode_rtol < 1e-2) {
            return Err(Error::Config(format!("ode_rtol = {} out of (0, 1e-2)", self.ode_rtol)));
        }
        if !(self.root_tol > 0.0 && self.root_tol < 1e-2) {
            return Err(Error::Config(format!("root_tol = {} out of (0, 1e-2)", self.root_tol)));
        }
        if self.mc_samples < 10_000 {
            return Err(Error::Config(format!(
                "mc_samples = {} too few for stable defect estimates; need at least 10000",
                self.mc_samples
            )));
        }
        if let Some(m) = self.m {
            if m < 2 {
                return Err(Error::Config(format!("m = {m} needs at least 2 copies per block")));
            }
        }
        if let Some(thetas) = &self.cm_thetas {
            if !(2..=3).contains(&thetas.len()) {
                return Err(Error::Config(format!(
                    "cm_thetas takes 2 or 3 exponents, got {}",
                    thetas.len()
                )));
            }
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.n, self.p, self.q)
    }

    /// The block count actually used: explicit, or the exact threshold.
    pub fn effective_m(&self) -> Result<u32> {
        match self.m {
            Some(m) => Ok(m),
            None => m_min_exact(self.n),
        }
    }

    pub fn shoot_opts(&self) -> ShootOpts {
        ShootOpts {
            r_max: self.r_max,
            ode_rtol: self.ode_rtol,
            tol_a: 1e-13,
            points_per_decade: self.points_per_decade as usize,
        }
    }
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str, lineno: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::Config(format!("line {lineno}: {key} = {value:?}: {e}")))
}

fn parse_list(key: &str, value: &str, lineno: usize) -> Result<Vec<f64>> {
    if value.is_empty() {
        return Err(Error::Config(format!("line {lineno}: {key} is empty")));
    }
    value
        .split(',')
        .map(|item| parse_scalar::<f64>(key, item.trim(), lineno))
        .collect()
}

fn join_list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
