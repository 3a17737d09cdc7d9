//! Experiment configuration: flat `key = value` text, `#` comments.
//!
//! Keys may be written with `-` or `_`. Command-line flags use the same keys
//! and are applied after the file.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fulladagrad::data::{make_toeplitz_cov, sqrt_block_size};
use fulladagrad::{OptimizerConfig64, OptimizerKind, PowerSchedule, PrecondMode, SymMatrix64};

use crate::error::{config_err, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovSpec {
    Identity,
    Toeplitz(f64),
}

impl CovSpec {
    pub fn matrix(&self, d: usize) -> Result<SymMatrix64> {
        Ok(match *self {
            CovSpec::Identity => SymMatrix64::identity(d)?,
            CovSpec::Toeplitz(rho) => make_toeplitz_cov(d, rho)?,
        })
    }
}

impl fmt::Display for CovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovSpec::Identity => f.write_str("identity"),
            CovSpec::Toeplitz(rho) => write!(f, "toeplitz({rho})"),
        }
    }
}

/// Streaming block size: a number, `sqrt` (floor of sqrt(d)) or `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSpec {
    Fixed(usize),
    Sqrt,
    Dim,
}

impl BlockSpec {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            BlockSpec::Fixed(n) => n,
            BlockSpec::Sqrt => sqrt_block_size(d),
            BlockSpec::Dim => d,
        }
    }
}

impl FromStr for BlockSpec {
    type Err = crate::BenchError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(BlockSpec::Sqrt),
            "d" | "dim" => Ok(BlockSpec::Dim),
            n => match n.parse() {
                Ok(0) | Err(_) => Err(config_err(format!(
                    "block size must be a positive integer, 'sqrt' or 'd', got '{s}'"
                ))),
                Ok(v) => Ok(BlockSpec::Fixed(v)),
            },
        }
    }
}

/// One entry of the `optimizer` list: `wafa`, `swafa`, `swafa:d`, `swafa:14`...
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub block: Option<BlockSpec>,
}

impl OptimizerSpec {
    pub fn block_size(&self, cfg: &ExperimentConfig) -> usize {
        if self.kind == OptimizerKind::Swafa {
            self.block.unwrap_or(cfg.block_size).resolve(cfg.d)
        } else {
            1
        }
    }

    pub fn label(&self, cfg: &ExperimentConfig) -> String {
        if self.kind == OptimizerKind::Swafa {
            format!("swafa(n={})", self.block_size(cfg))
        } else {
            self.kind.name().to_owned()
        }
    }
}

impl FromStr for OptimizerSpec {
    type Err = crate::BenchError;
    fn from_str(s: &str) -> Result<Self> {
        let (name, block) = match s.split_once(':') {
            Some((name, b)) => (name, Some(b.parse()?)),
            None => (s, None),
        };
        let kind: OptimizerKind = name
            .parse()
            .map_err(|e: fulladagrad::Error| config_err(e.to_string()))?;
        if block.is_some() && kind != OptimizerKind::Swafa {
            return Err(config_err(format!(
                "only swafa takes a block size, got '{s}'"
            )));
        }
        Ok(OptimizerSpec { kind, block })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub optimizers: Vec<OptimizerSpec>,
    pub d: usize,
    /// Samples per run, `N`.
    pub n_samples: u64,
    pub replications: Option<usize>,
    pub cov: CovSpec,
    pub noise_std: f64,
    /// `theta_0 = theta* + theta0_scale * E`, `E ~ N(0, I)`.
    pub theta0_scale: f64,
    pub seed: u64,
    /// Geometric growth of recorded milestones in samples seen.
    pub milestone_factor: f64,
    pub out: Option<PathBuf>,
    pub block_size: BlockSpec,
    pub c_nu: Option<f64>,
    pub nu: Option<f64>,
    pub c_gamma: f64,
    pub gamma: f64,
    pub c_beta: f64,
    pub beta: f64,
    pub tau: f64,
    pub tau_prime: f64,
    pub a0_scale: f64,
    pub precond_mode: PrecondMode,
    pub grad_reuse: bool,
    pub eps: f64,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Single file split into train/test by `split`.
    pub data: Option<PathBuf>,
    pub split: f64,
    pub epochs: usize,
    pub record_time: bool,
    /// Dimensions swept by `check-invariants`.
    pub grid_dims: Vec<usize>,
    pub rho: f64,
    pub timing_runs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            optimizers: vec![OptimizerSpec {
                kind: OptimizerKind::Wafa,
                block: None,
            }],
            d: 20,
            n_samples: 100_000,
            replications: None,
            cov: CovSpec::Toeplitz(0.9),
            noise_std: 1.0,
            theta0_scale: 0.5,
            seed: 0,
            milestone_factor: 1.25,
            out: None,
            block_size: BlockSpec::Sqrt,
            c_nu: None,
            nu: None,
            c_gamma: 1.0,
            gamma: 0.75,
            c_beta: 1.0,
            beta: 0.75,
            tau: 2.0,
            tau_prime: 2.0,
            a0_scale: 0.1,
            precond_mode: PrecondMode::Averaged,
            grad_reuse: false,
            eps: 1e-8,
            train: None,
            test: None,
            data: None,
            split: 0.5,
            epochs: 1,
            record_time: false,
            grid_dims: vec![2, 5, 20],
            rho: 0.9,
            timing_runs: 5,
        }
    }
}

pub const KEYS: &[&str] = &[
    "optimizer",
    "d",
    "n_samples",
    "replications",
    "cov",
    "rho",
    "noise_std",
    "theta0_scale",
    "seed",
    "milestone_factor",
    "out",
    "block_size",
    "c_nu",
    "nu",
    "c_gamma",
    "gamma",
    "c_beta",
    "beta",
    "tau",
    "tau_prime",
    "a0_scale",
    "precond_mode",
    "grad_reuse",
    "eps",
    "train",
    "test",
    "data",
    "split",
    "epochs",
    "record_time",
    "grid_dims",
    "timing_runs",
];

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| config_err(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(config_err(format!("invalid boolean '{value}' for '{key}'"))),
    }
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "optimizer" => {
                self.optimizers = value
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?;
                if self.optimizers.is_empty() {
                    return Err(config_err("empty optimizer list"));
                }
            }
            "d" => self.d = parse(&key, value)?,
            "n_samples" => self.n_samples = parse(&key, value)?,
            "replications" => self.replications = Some(parse(&key, value)?),
            "cov" => {
                self.cov = match value {
                    "identity" => CovSpec::Identity,
                    "toeplitz" => CovSpec::Toeplitz(self.rho),
                    _ => {
                        return Err(config_err(format!(
                            "cov must be 'identity' or 'toeplitz', got '{value}'"
                        )))
                    }
                }
            }
            "rho" => {
                self.rho = parse(&key, value)?;
                if let CovSpec::Toeplitz(_) = self.cov {
                    self.cov = CovSpec::Toeplitz(self.rho);
                }
            }
            "noise_std" => self.noise_std = parse(&key, value)?,
            "theta0_scale" => self.theta0_scale = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "milestone_factor" => self.milestone_factor = parse(&key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "block_size" => self.block_size = value.parse()?,
            "c_nu" => self.c_nu = Some(parse(&key, value)?),
            "nu" => self.nu = Some(parse(&key, value)?),
            "c_gamma" => self.c_gamma = parse(&key, value)?,
            "gamma" => self.gamma = parse(&key, value)?,
            "c_beta" => self.c_beta = parse(&key, value)?,
            "beta" => self.beta = parse(&key, value)?,
            "tau" => self.tau = parse(&key, value)?,
            "tau_prime" => self.tau_prime = parse(&key, value)?,
            "a0_scale" => self.a0_scale = parse(&key, value)?,
            "precond_mode" => {
                self.precond_mode = value
                    .parse()
                    .map_err(|e: fulladagrad::Error| config_err(e.to_string()))?
            }
            "grad_reuse" => self.grad_reuse = parse_bool(&key, value)?,
            "eps" => self.eps = parse(&key, value)?,
            "train" => self.train = Some(PathBuf::from(value)),
            "test" => self.test = Some(PathBuf::from(value)),
            "data" => self.data = Some(PathBuf::from(value)),
            "split" => self.split = parse(&key, value)?,
            "epochs" => self.epochs = parse(&key, value)?,
            "record_time" => self.record_time = parse_bool(&key, value)?,
            "grid_dims" => {
                self.grid_dims = value
                    .split(',')
                    .map(|s| parse(&key, s.trim()))
                    .collect::<Result<_>>()?;
            }
            "timing_runs" => self.timing_runs = parse(&key, value)?,
            _ => return Err(config_err(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                config_err(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    i + 1
                ))
            })?;
            self.set(k, v)
                .map_err(|e| config_err(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn replications_or(&self, default: usize) -> usize {
        self.replications.unwrap_or(default)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(config_err("d must be at least 1"));
        }
        if self.replications == Some(0) {
            return Err(config_err("replications must be at least 1"));
        }
        for spec in &self.optimizers {
            let n = spec.block_size(self) as u64;
            if self.n_samples < n {
                return Err(config_err(format!(
                    "n_samples {} is below block size {n}",
                    self.n_samples
                )));
            }
            self.optimizer_config(spec)?;
        }
        if !(self.milestone_factor > 1.0) {
            return Err(config_err("milestone_factor must exceed 1"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(config_err("noise_std must be non-negative"));
        }
        if self.epochs == 0 || self.timing_runs == 0 {
            return Err(config_err("epochs and timing_runs must be at least 1"));
        }
        Ok(())
    }

    /// Optimizer hyperparameters: library defaults for the kind, overridden by
    /// whatever this config sets.
    pub fn optimizer_config(&self, spec: &OptimizerSpec) -> Result<OptimizerConfig64> {
        let n = spec.block_size(self);
        let mut c = OptimizerConfig64::defaults(spec.kind, n)?;
        if self.c_nu.is_some() || self.nu.is_some() {
            c.nu = PowerSchedule::decay(
                self.c_nu.unwrap_or(c.nu.coefficient()),
                self.nu.unwrap_or(c.nu.exponent()),
            )?;
        }
        c.gamma = PowerSchedule::decay(self.c_gamma, self.gamma)?;
        c.beta = PowerSchedule::growth(self.c_beta, self.beta)?;
        c.tau = self.tau;
        c.tau_prime = self.tau_prime;
        c.a0_scale = self.a0_scale;
        c.precond_mode = self.precond_mode;
        c.grad_reuse = self.grad_reuse;
        c.eps = self.eps;
        if !(c.a0_scale > 0.0) {
            return Err(config_err("a0_scale must be positive"));
        }
        if !(c.tau >= 0.0 && c.tau_prime >= 0.0) {
            return Err(config_err("tau and tau_prime must be non-negative"));
        }
        Ok(c)
    }
}
