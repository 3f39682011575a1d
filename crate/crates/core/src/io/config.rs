//! Run configuration: defaults, a flat `key = value` config file, command-line
//! flags and the `COCOONLAB_WORKERS` environment variable.
//!
//! Precedence, highest first: flags, config file, environment (workers
//! only), built-in defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::dataset::Format;
use crate::error::{Error, Result};
use crate::operator::{Boundary, PotentialKind};

pub const WORKERS_ENV: &str = "COCOONLAB_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GridSize {
    #[default]
    Small,
    Full,
}

impl std::str::FromStr for GridSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "small" => Ok(GridSize::Small),
            "full" => Ok(GridSize::Full),
            _ => Err(Error::Parse(format!("unknown grid '{s}', expected small or full"))),
        }
    }
}

/// Settings that may come from either the config file or flags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Overrides {
    pub l: Option<usize>,
    pub q: Option<usize>,
    pub p: Option<usize>,
    pub g: Option<f64>,
    pub g_min: Option<f64>,
    pub g_max: Option<f64>,
    pub g_step: Option<f64>,
    pub boundary: Option<Boundary>,
    pub potential: Option<PotentialKind>,
    pub tol_im: Option<f64>,
    pub refine_tol: Option<f64>,
    pub fluxes: Option<Vec<usize>>,
    pub momenta: Option<Vec<usize>>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub format: Option<Format>,
    pub grid: Option<GridSize>,
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad index list '{s}'")))
        })
        .collect()
}

fn value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Parse(format!("bad value '{v}' for {key}")))
}

impl Overrides {
    /// Parses `key = value` lines. Blank lines and lines starting with `#`
    /// are skipped; keys are the long flag names without dashes (`g-min` and
    /// `g_min` both work).
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut o = Overrides::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim().replace('_', "-");
            let v = v.trim();
            match key.as_str() {
                "L" | "l" => o.l = Some(value(&key, v)?),
                "q" => o.q = Some(value(&key, v)?),
                "p" => o.p = Some(value(&key, v)?),
                "g" => o.g = Some(value(&key, v)?),
                "g-min" => o.g_min = Some(value(&key, v)?),
                "g-max" => o.g_max = Some(value(&key, v)?),
                "g-step" => o.g_step = Some(value(&key, v)?),
                "boundary" => o.boundary = Some(v.parse()?),
                "potential" => o.potential = Some(v.parse()?),
                "tol-im" => o.tol_im = Some(value(&key, v)?),
                "refine-tol" => o.refine_tol = Some(value(&key, v)?),
                "fluxes" => o.fluxes = Some(parse_list(v)?),
                "momenta" => o.momenta = Some(parse_list(v)?),
                "workers" => o.workers = Some(value(&key, v)?),
                "out" => o.out = Some(PathBuf::from(v)),
                "svg" => o.svg = Some(PathBuf::from(v)),
                "format" => o.format = Some(v.parse()?),
                "grid" => o.grid = Some(v.parse()?),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: unknown key '{}'",
                        n + 1,
                        key
                    )))
                }
            }
        }
        Ok(o)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: Overrides) -> Overrides {
        Overrides {
            l: over.l.or(self.l),
            q: over.q.or(self.q),
            p: over.p.or(self.p),
            g: over.g.or(self.g),
            g_min: over.g_min.or(self.g_min),
            g_max: over.g_max.or(self.g_max),
            g_step: over.g_step.or(self.g_step),
            boundary: over.boundary.or(self.boundary),
            potential: over.potential.or(self.potential),
            tol_im: over.tol_im.or(self.tol_im),
            refine_tol: over.refine_tol.or(self.refine_tol),
            fluxes: over.fluxes.or(self.fluxes),
            momenta: over.momenta.or(self.momenta),
            workers: over.workers.or(self.workers),
            out: over.out.or(self.out),
            svg: over.svg.or(self.svg),
            format: over.format.or(self.format),
            grid: over.grid.or(self.grid),
        }
    }
}

/// Fully resolved settings of one invocation. The worker count is left out
/// of the serialised form so that it cannot change any output byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    #[serde(rename = "L")]
    pub l: usize,
    pub q: usize,
    pub p: usize,
    pub g: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub g_step: f64,
    pub boundary: Boundary,
    pub potential: PotentialKind,
    pub tol_im: Option<f64>,
    pub refine_tol: f64,
    pub fluxes: Option<Vec<usize>>,
    pub momenta: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub format: Format,
    pub grid: GridSize,
    #[serde(skip, default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

/// Worker count from the environment, if set.
pub fn env_workers() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Parse(format!("{WORKERS_ENV}='{v}' is not a worker count"))),
        Err(_) => Ok(None),
    }
}

impl RunConfig {
    pub fn resolve(subcommand: &str, settings: Overrides, env_workers: Option<usize>) -> Result<Self> {
        let cfg = RunConfig {
            subcommand: subcommand.to_string(),
            l: settings.l.unwrap_or(50),
            q: settings.q.unwrap_or(1),
            p: settings.p.unwrap_or(0),
            g: settings.g.unwrap_or(0.0),
            g_min: settings.g_min.unwrap_or(0.0),
            g_max: settings.g_max.unwrap_or(0.5),
            g_step: settings.g_step.unwrap_or(0.01),
            boundary: settings.boundary.unwrap_or(Boundary::Periodic),
            potential: settings.potential.unwrap_or(PotentialKind::Harper),
            tol_im: settings.tol_im,
            refine_tol: settings.refine_tol.unwrap_or(1e-9),
            fluxes: settings.fluxes,
            momenta: settings.momenta,
            out: settings.out,
            svg: settings.svg,
            format: settings.format.unwrap_or_default(),
            grid: settings.grid.unwrap_or_default(),
            workers: settings.workers.or(env_workers).unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.workers == 0 {
            return bad("worker count must be at least 1".into());
        }
        if self.l < 3 {
            return bad(format!("L must be at least 3, got {}", self.l));
        }
        for (name, v) in [("g-step", self.g_step), ("refine-tol", self.refine_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(t) = self.tol_im {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("tol-im must be positive, got {t}"));
            }
        }
        for v in [self.g, self.g_min, self.g_max] {
            if !v.is_finite() {
                return bad(format!("g values must be finite, got {v}"));
            }
        }
        Ok(())
    }
}
