//! Wall-clock comparison of optimizers on the linear simulation.

use std::time::Instant;

use fulladagrad::data::GaussianLinearSource;
use fulladagrad::{run_optimizer, LinearRegression, OptimizerState64};

use crate::config::{ExperimentConfig, OptimizerSpec};
use crate::error::Result;
use crate::metrics::median;
use crate::runner::{replication_start, SimulationSetup};

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub label: String,
    pub runs_ns: Vec<u128>,
    pub median_ns: f64,
}

/// Wall time of one full run over `n_samples`, data generation included.
pub fn time_single_run(
    cfg: &ExperimentConfig,
    setup: &SimulationSetup,
    spec: &OptimizerSpec,
    index: usize,
) -> Result<u128> {
    let start = Instant::now();
    let (theta_star, theta0, rng) = replication_start(cfg, index);
    let source = GaussianLinearSource::new(theta_star, &setup.cov, cfg.noise_std, rng)?;
    let mut state = OptimizerState64::new(cfg.optimizer_config(spec)?, theta0)?;
    let steps = cfg.n_samples / spec.block_size(cfg) as u64;
    run_optimizer(&mut state, source, &LinearRegression, steps, |_| {})?;
    std::hint::black_box(state.estimate());
    Ok(start.elapsed().as_nanos())
}

/// Median over `timing_runs` sequential runs for each optimizer. Runs are
/// interleaved across optimizers so slow drift affects all of them alike.
pub fn time_compare(cfg: &ExperimentConfig) -> Result<Vec<TimingReport>> {
    cfg.validate()?;
    let setup = SimulationSetup::new(cfg)?;
    let mut runs: Vec<Vec<u128>> = vec![Vec::new(); cfg.optimizers.len()];
    for r in 0..cfg.timing_runs {
        for (k, spec) in cfg.optimizers.iter().enumerate() {
            runs[k].push(time_single_run(cfg, &setup, spec, r)?);
        }
    }
    Ok(cfg
        .optimizers
        .iter()
        .zip(runs)
        .map(|(spec, runs_ns)| {
            let xs: Vec<f64> = runs_ns.iter().map(|&n| n as f64).collect();
            TimingReport {
                label: spec.label(cfg),
                median_ns: median(&xs),
                runs_ns,
            }
        })
        .collect())
}
