//! Replicated simulation and classification runs.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use fulladagrad::data::{
    load_libsvm, replication_rng, sample_theta_star, train_test_split, Dataset,
    GaussianLinearSource, SampleRng,
};
use fulladagrad::linalg::inv_sqrt_eig;
use fulladagrad::models::linear_grad;
use fulladagrad::{
    run_optimizer, LabeledSample64, LinearRegression, LogisticRegression, OptimizerKind,
    OptimizerState64, PowerSchedule, PrecondState64, SymMatrix64, Vector64,
};

use crate::config::{CovSpec, ExperimentConfig, OptimizerSpec};
use crate::error::{config_err, BenchError, Result};
use crate::metrics::{
    aggregate, metric_accuracy, metric_precond_error, metric_theta_error, milestone_steps,
    Aggregate, Metric, MetricRow, RunRecord,
};

pub const DEFAULT_SIM_REPLICATIONS: usize = 20;

/// Quantities shared by every replication of a simulated configuration.
#[derive(Debug, Clone)]
pub struct SimulationSetup {
    pub cov: SymMatrix64,
    /// Limit of the preconditioner, `(noise_std^2 Sigma)^{-1/2}`; `None`
    /// without noise.
    pub precond_target: Option<SymMatrix64>,
}

impl SimulationSetup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let cov = cfg.cov.matrix(cfg.d)?;
        let precond_target = if cfg.noise_std > 0.0 {
            let mut t = inv_sqrt_eig(&cov)?;
            t.scale(1.0 / cfg.noise_std);
            Some(t)
        } else {
            None
        };
        Ok(Self {
            cov,
            precond_target,
        })
    }
}

fn gaussian_vector(d: usize, rng: &mut SampleRng) -> Vector64 {
    Vector64::from_fn(d, |_| rng.sample(StandardNormal))
}

/// `theta*`, `theta_0` and the sample stream state of replication `index`.
pub fn replication_start(cfg: &ExperimentConfig, index: usize) -> (Vector64, Vector64, SampleRng) {
    let mut rng = replication_rng(cfg.seed, index as u64);
    let theta_star: Vector64 = sample_theta_star(cfg.d, &mut rng);
    let mut theta0 = theta_star.clone();
    theta0
        .axpy(cfg.theta0_scale, &gaussian_vector(cfg.d, &mut rng))
        .expect("same dimension");
    (theta_star, theta0, rng)
}

/// Drives `state` through `steps` steps and calls `record` at each milestone.
/// Returns the stepping time in nanoseconds, excluding `record`.
fn run_with_milestones<I, S>(
    state: &mut OptimizerState64,
    stream: I,
    model: &(impl fulladagrad::Model<f64> + ?Sized),
    steps: u64,
    factor: f64,
    mut record: impl FnMut(&OptimizerState64, u128) -> Result<()>,
) -> Result<u128>
where
    I: IntoIterator<Item = S>,
    S: std::borrow::Borrow<LabeledSample64>,
{
    let milestones = milestone_steps(steps, factor);
    let mut next = 0usize;
    let mut elapsed = 0u128;
    let mut failure = None;
    let mut last = Instant::now();
    run_optimizer(state, stream, model, steps, |s| {
        elapsed += last.elapsed().as_nanos();
        if next < milestones.len() && s.steps() == milestones[next] {
            next += 1;
            if failure.is_none() {
                if let Err(e) = record(s, elapsed) {
                    failure = Some(e);
                }
            }
        }
        last = Instant::now();
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(elapsed),
    }
}

/// One optimizer on one replication of the linear simulation.
pub fn run_linear(
    cfg: &ExperimentConfig,
    setup: &SimulationSetup,
    spec: &OptimizerSpec,
    index: usize,
) -> Result<RunRecord> {
    let (theta_star, theta0, rng) = replication_start(cfg, index);
    let n = spec.block_size(cfg);
    let source = GaussianLinearSource::new(theta_star.clone(), &setup.cov, cfg.noise_std, rng)?;
    let mut state = OptimizerState64::new(cfg.optimizer_config(spec)?, theta0)?;
    let steps = cfg.n_samples / n as u64;
    let mut rows = Vec::new();
    run_with_milestones(
        &mut state,
        source,
        &LinearRegression,
        steps,
        cfg.milestone_factor,
        |s, ns| {
            let mut row = MetricRow::new(s.samples_seen(), s.steps());
            row.set(
                Metric::MseTheta,
                metric_theta_error(s.theta(), &theta_star)?,
            );
            row.set(
                Metric::MseThetaAvg,
                metric_theta_error(s.theta_avg(), &theta_star)?,
            );
            if let (Some(p), Some(target)) = (s.precond(), &setup.precond_target) {
                row.set(
                    Metric::PrecondErr,
                    metric_precond_error(p.averaged(), target)?,
                );
                row.set(
                    Metric::PrecondErrCurrent,
                    metric_precond_error(p.current(), target)?,
                );
            }
            row.set(Metric::Skipped, s.skipped_updates() as f64);
            if cfg.record_time {
                row.set(Metric::WallTimeNs, ns as f64);
            }
            rows.push(row);
            Ok(())
        },
    )?;
    Ok(RunRecord {
        label: spec.label(cfg),
        rows,
    })
}

/// Runs `job(index)` for every replication in parallel, keeping order.
fn replicate<T: Send>(count: usize, job: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            job(i).map_err(|e| BenchError::Replication {
                index: i,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Transposes per-replication records into one aggregate per optimizer.
fn aggregate_by_optimizer(labels: &[String], per_rep: Vec<Vec<RunRecord>>) -> Vec<Aggregate> {
    labels
        .iter()
        .enumerate()
        .map(|(k, label)| {
            let runs: Vec<RunRecord> = per_rep.iter().map(|r| r[k].clone()).collect();
            aggregate(label, &runs)
        })
        .collect()
}

/// The `simulate` experiment: every optimizer on the same replications.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<Vec<Aggregate>> {
    cfg.validate()?;
    let setup = SimulationSetup::new(cfg)?;
    let reps = cfg.replications_or(DEFAULT_SIM_REPLICATIONS);
    let per_rep = replicate(reps, |i| {
        cfg.optimizers
            .iter()
            .map(|spec| run_linear(cfg, &setup, spec, i))
            .collect()
    })?;
    let labels: Vec<String> = cfg.optimizers.iter().map(|s| s.label(cfg)).collect();
    Ok(aggregate_by_optimizer(&labels, per_rep))
}

/// Pads every sample of `data` with zeros up to `dim` features.
fn pad_to(data: &mut Dataset<f64>, dim: usize) {
    if data.dim == dim {
        return;
    }
    for s in &mut data.samples {
        let mut v = std::mem::take(&mut s.x).into_vec();
        v.resize(dim, 0.0);
        s.x = Vector64::from_vec(v);
    }
    data.dim = dim;
}

/// Train and test sets named by the config, with a common feature count.
pub fn load_classification_data(cfg: &ExperimentConfig) -> Result<(Dataset<f64>, Dataset<f64>)> {
    let (mut train, mut test) = match (&cfg.train, &cfg.test, &cfg.data) {
        (Some(tr), Some(te), None) => (load_libsvm(tr, None)?, load_libsvm(te, None)?),
        (None, None, Some(all)) => train_test_split(&load_libsvm(all, None)?, cfg.split, cfg.seed)?,
        _ => {
            return Err(config_err(
                "classification needs either 'train' and 'test', or 'data'",
            ))
        }
    };
    let dim = train.dim.max(test.dim);
    pad_to(&mut train, dim);
    pad_to(&mut test, dim);
    Ok((train, test))
}

/// One optimizer on one replication of a classification task: `epochs`
/// passes over `train` in an order shuffled per replication and epoch.
pub fn run_logistic(
    cfg: &ExperimentConfig,
    train: &Dataset<f64>,
    test: &Dataset<f64>,
    spec: &OptimizerSpec,
    index: usize,
) -> Result<RunRecord> {
    use rand::seq::SliceRandom;
    let n = spec.block_size(cfg);
    let mut rng = replication_rng(cfg.seed, index as u64);
    let mut order = Vec::with_capacity(train.len() * cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut epoch: Vec<usize> = (0..train.len()).collect();
        epoch.shuffle(&mut rng);
        order.extend(epoch);
    }
    let steps = (order.len() / n) as u64;
    let mut state = OptimizerState64::new(cfg.optimizer_config(spec)?, Vector64::zeros(train.dim))?;
    let stream = order.iter().map(|&i| &train.samples[i]);
    let mut rows = Vec::new();
    run_with_milestones(
        &mut state,
        stream,
        &LogisticRegression,
        steps,
        cfg.milestone_factor,
        |s, ns| {
            let mut row = MetricRow::new(s.samples_seen(), s.steps());
            row.set(
                Metric::TrainAcc,
                metric_accuracy(s.estimate(), &train.samples)?,
            );
            row.set(
                Metric::TestAcc,
                metric_accuracy(s.estimate(), &test.samples)?,
            );
            row.set(Metric::Skipped, s.skipped_updates() as f64);
            if cfg.record_time {
                row.set(Metric::WallTimeNs, ns as f64);
            }
            rows.push(row);
            Ok(())
        },
    )?;
    Ok(RunRecord {
        label: spec.label(cfg),
        rows,
    })
}

/// The `classify` experiment. `d` is taken from the data.
pub fn run_classification(cfg: &ExperimentConfig) -> Result<Vec<Aggregate>> {
    let (train, test) = load_classification_data(cfg)?;
    classify_datasets(cfg, &train, &test)
}

pub fn classify_datasets(
    cfg: &ExperimentConfig,
    train: &Dataset<f64>,
    test: &Dataset<f64>,
) -> Result<Vec<Aggregate>> {
    let mut cfg = cfg.clone();
    cfg.d = train.dim;
    cfg.n_samples = (train.len() * cfg.epochs) as u64;
    cfg.validate()?;
    let reps = cfg.replications_or(1);
    let per_rep = replicate(reps, |i| {
        cfg.optimizers
            .iter()
            .map(|spec| run_logistic(&cfg, train, test, spec, i))
            .collect()
    })?;
    let labels: Vec<String> = cfg.optimizers.iter().map(|s| s.label(&cfg)).collect();
    Ok(aggregate_by_optimizer(&labels, per_rep))
}

fn precond_state(cfg: &ExperimentConfig) -> Result<PrecondState64> {
    Ok(PrecondState64::new(
        cfg.d,
        cfg.a0_scale,
        PowerSchedule::decay(cfg.c_gamma, cfg.gamma)?,
        PowerSchedule::growth(cfg.c_beta, cfg.beta)?,
        cfg.tau_prime,
    )?)
}

/// Preconditioner recursion alone, fed gradients at `theta*`, for
/// `n_samples` steps.
pub fn run_precond_replication(
    cfg: &ExperimentConfig,
    setup: &SimulationSetup,
    index: usize,
) -> Result<RunRecord> {
    let target = setup
        .precond_target
        .as_ref()
        .ok_or_else(|| config_err("precond-only needs noise_std > 0"))?;
    let (theta_star, _, rng) = replication_start(cfg, index);
    let mut source = GaussianLinearSource::new(theta_star.clone(), &setup.cov, cfg.noise_std, rng)?;
    let mut p = precond_state(cfg)?;
    let milestones = milestone_steps(cfg.n_samples, cfg.milestone_factor);
    let mut rows = Vec::with_capacity(milestones.len());
    let mut record = |p: &PrecondState64| -> Result<()> {
        let mut row = MetricRow::new(p.steps(), p.steps());
        row.set(
            Metric::PrecondErr,
            metric_precond_error(p.averaged(), target)?,
        );
        row.set(
            Metric::PrecondErrCurrent,
            metric_precond_error(p.current(), target)?,
        );
        row.set(Metric::Skipped, p.skipped_updates() as f64);
        rows.push(row);
        Ok(())
    };
    record(&p)?;
    for &m in &milestones[1..] {
        while p.steps() < m {
            let g = linear_grad(&theta_star, &source.draw_sample())?;
            p.rm_update(&g, 1)?;
        }
        record(&p)?;
    }
    Ok(RunRecord {
        label: "precond".into(),
        rows,
    })
}

pub fn run_precond_only(cfg: &ExperimentConfig) -> Result<Aggregate> {
    cfg.validate()?;
    let setup = SimulationSetup::new(cfg)?;
    let runs = replicate(cfg.replications_or(1), |i| {
        run_precond_replication(cfg, &setup, i)
    })?;
    Ok(aggregate("precond", &runs))
}

/// Outcome of one cell of the eigenvalue-bound sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSweepResult {
    pub label: String,
    pub d: usize,
    pub cov: CovSpec,
    pub steps: u64,
    pub checks: u64,
    pub violations: u64,
    /// Smallest `lambda_min - lower_bound` seen, relative to the bound.
    pub worst_lower_margin: f64,
    /// Smallest `upper_bound - lambda_max` seen, relative to the bound.
    pub worst_upper_margin: f64,
    pub skipped: u64,
}

impl InvariantSweepResult {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks the eigenvalue bounds of the first full-matrix optimizer in the
/// config after every step, for each `d` in `grid_dims` under both
/// covariances.
pub fn check_invariants(cfg: &ExperimentConfig) -> Result<Vec<InvariantSweepResult>> {
    let spec = cfg
        .optimizers
        .iter()
        .copied()
        .find(|s| s.kind.is_full())
        .unwrap_or(OptimizerSpec {
            kind: OptimizerKind::Wafa,
            block: None,
        });
    let mut out = Vec::new();
    for &d in &cfg.grid_dims {
        for cov in [CovSpec::Identity, CovSpec::Toeplitz(cfg.rho)] {
            let mut c = cfg.clone();
            c.d = d;
            c.cov = cov;
            c.optimizers = vec![spec];
            c.validate()?;
            for index in 0..cfg.replications_or(1) {
                out.push(check_invariants_one(&c, &spec, index)?);
            }
        }
    }
    Ok(out)
}

fn check_invariants_one(
    cfg: &ExperimentConfig,
    spec: &OptimizerSpec,
    index: usize,
) -> Result<InvariantSweepResult> {
    let (theta_star, theta0, rng) = replication_start(cfg, index);
    let cov = cfg.cov.matrix(cfg.d)?;
    let source = GaussianLinearSource::new(theta_star, &cov, cfg.noise_std, rng)?;
    let mut state = OptimizerState64::new(cfg.optimizer_config(spec)?, theta0)?;
    let steps = cfg.n_samples / spec.block_size(cfg) as u64;
    let mut res = InvariantSweepResult {
        label: spec.label(cfg),
        d: cfg.d,
        cov: cfg.cov,
        steps,
        checks: 0,
        violations: 0,
        worst_lower_margin: f64::INFINITY,
        worst_upper_margin: f64::INFINITY,
        skipped: 0,
    };
    run_optimizer(&mut state, source, &LinearRegression, steps, |s| {
        let p = s.precond().expect("full-matrix optimizer");
        let r = p.check_eigen_bounds();
        res.checks += 1;
        if !r.holds() {
            res.violations += 1;
        }
        res.worst_lower_margin = res.worst_lower_margin.min(r.lower_margin / r.lower_bound);
        res.worst_upper_margin = res.worst_upper_margin.min(r.upper_margin / r.upper_bound);
    })?;
    res.skipped = state.skipped_updates();
    Ok(res)
}
