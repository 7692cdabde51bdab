//! Option resolution with precedence flags > TOML config file > defaults.

use std::path::{Path, PathBuf};

use anyhow::Context;
use plap::SolveOptions;
use serde::{Deserialize, Serialize};

use crate::commands::usage;
use crate::Shared;

/// Keys accepted in the config file. All are optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub tol: Option<f64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: Option<usize>,
    pub tol_lambda: Option<f64>,
    pub tol_grad: Option<f64>,
    pub armijo_c: Option<f64>,
    pub armijo_shrink: Option<f64>,
    pub eps_initial: Option<f64>,
    pub eps_decay: Option<f64>,
    pub eps_floor: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Fully resolved options of one run. `tol` stays optional because its
/// default depends on the command.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub n: usize,
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub tol: Option<f64>,
    pub solver: SolveOptions,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub threads: Option<usize>,
}

pub const DEFAULT_N: usize = 64;

impl Settings {
    pub fn resolve(flags: &Shared) -> anyhow::Result<Self> {
        Self::resolve_with(flags, DEFAULT_N)
    }

    /// As [`Settings::resolve`] with a command-specific default resolution.
    pub fn resolve_with(flags: &Shared, default_n: usize) -> anyhow::Result<Self> {
        let file = match &flags.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let mut solver = SolveOptions::default();
        let s = &file.solver;
        solver.max_iters = s.max_iters.unwrap_or(solver.max_iters);
        solver.tol_lambda = s.tol_lambda.unwrap_or(solver.tol_lambda);
        solver.tol_grad = s.tol_grad.unwrap_or(solver.tol_grad);
        solver.armijo_c = s.armijo_c.unwrap_or(solver.armijo_c);
        solver.armijo_shrink = s.armijo_shrink.unwrap_or(solver.armijo_shrink);
        solver.eps.initial = s.eps_initial.unwrap_or(solver.eps.initial);
        solver.eps.decay = s.eps_decay.unwrap_or(solver.eps.decay);
        solver.eps.floor = s.eps_floor.unwrap_or(solver.eps.floor);
        solver.validate()?;

        let settings = Settings {
            n: flags.n.or(file.n).unwrap_or(default_n),
            p: flags.p.or(file.p).unwrap_or(2.0),
            a: flags.a.or(file.a).unwrap_or(1.0),
            b: flags.b.or(file.b).unwrap_or(1.0),
            tol: flags.tol.or(file.tol),
            solver,
            out: flags.out.clone().or(file.out),
            threads: flags.threads.or(file.threads),
        };
        if settings.n < 2 {
            return Err(usage("n must be at least 2"));
        }
        if settings.tol.is_some_and(|t| !(t > 0.0)) {
            return Err(usage("tol must be positive"));
        }
        if let Some(t) = settings.threads {
            if t == 0 {
                return Err(usage("threads must be positive"));
            }
            // A second initialization in the same process is harmless.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
        Ok(settings)
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}
