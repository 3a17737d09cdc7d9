//! SGD, diagonal AdaGrad, WAA, Full AdaGrad, WAFA and SWAFA behind one
//! stepping interface.
//!
//! All schedules are evaluated at `t + 1` for the `(t + 1)`-th update. The
//! full-matrix variants touch the preconditioner only through `O(d^2)`
//! kernels.

use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use crate::data::block_iter;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{mat_vec, SymMatrix, Vector};
use crate::models::{LabeledSample, Model};
use crate::precond::{PrecondMode, PrecondState};
use crate::schedules::{LogWeightAverager, PowerSchedule};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    AdagradDiag,
    /// Diagonal AdaGrad reporting the log-weighted average of its iterates.
    Waa,
    FullAdagrad,
    /// Weighted averaged Full AdaGrad.
    Wafa,
    /// Streaming (block) WAFA.
    Swafa,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::Sgd,
        OptimizerKind::AdagradDiag,
        OptimizerKind::Waa,
        OptimizerKind::FullAdagrad,
        OptimizerKind::Wafa,
        OptimizerKind::Swafa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::AdagradDiag => "adagrad_diag",
            Self::Waa => "waa",
            Self::FullAdagrad => "full_adagrad",
            Self::Wafa => "wafa",
            Self::Swafa => "swafa",
        }
    }

    pub fn is_full(self) -> bool {
        matches!(self, Self::FullAdagrad | Self::Wafa | Self::Swafa)
    }

    pub fn is_diagonal(self) -> bool {
        matches!(self, Self::AdagradDiag | Self::Waa)
    }

    /// Whether the reported estimate is the averaged iterate.
    pub fn reports_average(self) -> bool {
        matches!(self, Self::Waa | Self::Wafa | Self::Swafa)
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        match key.as_str() {
            "adagrad" => Ok(Self::AdagradDiag),
            _ => Self::ALL
                .into_iter()
                .find(|k| k.name() == key)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown optimizer '{s}'"))),
        }
    }
}

/// Hyperparameters of one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig<T> {
    pub kind: OptimizerKind,
    /// Parameter step `nu_t`.
    pub nu: PowerSchedule<T>,
    /// Robbins-Monro step `gamma_t`.
    pub gamma: PowerSchedule<T>,
    /// Truncation threshold `beta_t`.
    pub beta: PowerSchedule<T>,
    /// Averaging exponent for the parameter.
    pub tau: T,
    /// Averaging exponent for the preconditioner.
    pub tau_prime: T,
    pub a0_scale: T,
    pub precond_mode: PrecondMode,
    /// Feed `g(theta_t)` to the preconditioner instead of `g(theta_{t,tau})`.
    pub grad_reuse: bool,
    pub block_size: usize,
    /// Added to the diagonal AdaGrad denominator.
    pub eps: T,
}

impl<T: Scalar> OptimizerConfig<T> {
    /// Defaults used throughout the experiments: `nu = gamma = beta = 3/4`
    /// with unit coefficients, `c_nu = sqrt(n)` for the streaming variant,
    /// `nu_t = t^{-1/4}` for diagonal AdaGrad, `A_0 = 0.1 I` and
    /// `tau = tau' = 2`.
    pub fn defaults(kind: OptimizerKind, block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidArgument(
                "block size must be at least 1".into(),
            ));
        }
        if kind != OptimizerKind::Swafa && block_size != 1 {
            return Err(Error::InvalidArgument(format!(
                "{kind} processes one sample per step"
            )));
        }
        let three_quarters = T::lit(0.75);
        let nu = match kind {
            OptimizerKind::AdagradDiag | OptimizerKind::Waa => {
                PowerSchedule::decay(T::one(), T::lit(0.25))?
            }
            OptimizerKind::Swafa => {
                PowerSchedule::decay(T::from_count(block_size as u64).sqrt(), three_quarters)?
            }
            _ => PowerSchedule::decay(T::one(), three_quarters)?,
        };
        Ok(Self {
            kind,
            nu,
            gamma: PowerSchedule::decay(T::one(), three_quarters)?,
            beta: PowerSchedule::growth(T::one(), three_quarters)?,
            tau: T::lit(2.0),
            tau_prime: T::lit(2.0),
            a0_scale: T::lit(0.1),
            precond_mode: PrecondMode::Averaged,
            grad_reuse: false,
            block_size,
            eps: T::lit(1e-8),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(Error::InvalidArgument(
                "block size must be at least 1".into(),
            ));
        }
        if self.kind != OptimizerKind::Swafa && self.block_size != 1 {
            return Err(Error::InvalidArgument(format!(
                "{} processes one sample per step",
                self.kind
            )));
        }
        if !(self.eps >= T::zero()) {
            return Err(Error::InvalidArgument("eps must be non-negative".into()));
        }
        Ok(())
    }

    /// Whether each step needs the gradient at the averaged iterate.
    pub fn needs_averaged_gradient(&self) -> bool {
        matches!(self.kind, OptimizerKind::Wafa | OptimizerKind::Swafa) && !self.grad_reuse
    }
}

/// Gradients for one step: block means over `n` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBlock<T> {
    /// `g_{t+1}(theta_t)`
    pub at_theta: Vector<T>,
    /// `g_{t+1}(theta_{t,tau})`, evaluated on the same samples.
    pub at_theta_avg: Option<Vector<T>>,
    pub n: usize,
}

impl<T: Scalar> GradientBlock<T> {
    pub fn single(g: Vector<T>) -> Self {
        Self {
            at_theta: g,
            at_theta_avg: None,
            n: 1,
        }
    }

    pub fn with_averaged(g: Vector<T>, g_avg: Vector<T>, n: usize) -> Self {
        Self {
            at_theta: g,
            at_theta_avg: Some(g_avg),
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    config: OptimizerConfig<T>,
    theta: Vector<T>,
    theta_avg: LogWeightAverager<T, Vector<T>>,
    precond: Option<PrecondState<T>>,
    diag_accum: Option<Vector<T>>,
    t: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(config: OptimizerConfig<T>, theta0: Vector<T>) -> Result<Self> {
        config.validate()?;
        let d = theta0.dim();
        if d == 0 {
            return Err(Error::InvalidArgument(
                "parameter dimension must be at least 1".into(),
            ));
        }
        let precond = if config.kind.is_full() {
            Some(PrecondState::new(
                d,
                config.a0_scale,
                config.gamma,
                config.beta,
                config.tau_prime,
            )?)
        } else {
            None
        };
        let diag_accum = config.kind.is_diagonal().then(|| Vector::zeros(d));
        Ok(Self {
            theta_avg: LogWeightAverager::new(config.tau, theta0.clone())?,
            theta: theta0,
            precond,
            diag_accum,
            t: 0,
            config,
        })
    }

    pub fn config(&self) -> &OptimizerConfig<T> {
        &self.config
    }

    pub fn kind(&self) -> OptimizerKind {
        self.config.kind
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    /// Optimizer steps taken.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn samples_seen(&self) -> u64 {
        self.t * self.config.block_size as u64
    }

    /// `theta_t`
    pub fn theta(&self) -> &Vector<T> {
        &self.theta
    }

    /// `theta_{t,tau}`
    pub fn theta_avg(&self) -> &Vector<T> {
        self.theta_avg.value()
    }

    /// The iterate this optimizer reports: averaged for WAA/WAFA/SWAFA.
    pub fn estimate(&self) -> &Vector<T> {
        if self.config.kind.reports_average() {
            self.theta_avg()
        } else {
            &self.theta
        }
    }

    pub fn precond(&self) -> Option<&PrecondState<T>> {
        self.precond.as_ref()
    }

    pub fn precond_mut(&mut self) -> Option<&mut PrecondState<T>> {
        self.precond.as_mut()
    }

    pub fn diag_accum(&self) -> Option<&Vector<T>> {
        self.diag_accum.as_ref()
    }

    pub fn skipped_updates(&self) -> u64 {
        self.precond
            .as_ref()
            .map_or(0, PrecondState::skipped_updates)
    }

    /// Dispatches on the configured kind.
    pub fn step(&mut self, block: &GradientBlock<T>) -> Result<()> {
        match self.config.kind {
            OptimizerKind::Sgd => self.sgd_step(block),
            OptimizerKind::AdagradDiag | OptimizerKind::Waa => self.adagrad_diag_step(block),
            OptimizerKind::FullAdagrad => self.full_adagrad_step(block),
            OptimizerKind::Wafa => self.wafa_step(block),
            OptimizerKind::Swafa => self.swafa_step(block),
        }
    }

    fn require(&self, operation: &'static str, ok: bool, expected: &'static str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                operation,
                expected,
                found: self.config.kind.name(),
            })
        }
    }

    fn check_block(&self, block: &GradientBlock<T>) -> Result<()> {
        check_dim(self.dim(), block.at_theta.dim())?;
        if let Some(g) = &block.at_theta_avg {
            check_dim(self.dim(), g.dim())?;
        }
        if block.n != self.config.block_size {
            return Err(Error::BlockSizeMismatch {
                expected: self.config.block_size,
                found: block.n,
            });
        }
        Ok(())
    }

    fn finish_step(&mut self) -> Result<()> {
        self.theta_avg.update(&self.theta)?;
        self.t += 1;
        Ok(())
    }

    /// `theta <- theta - nu_{t+1} g`
    pub fn sgd_step(&mut self, block: &GradientBlock<T>) -> Result<()> {
        self.require("sgd_step", self.config.kind == OptimizerKind::Sgd, "sgd")?;
        self.check_block(block)?;
        let nu = self.config.nu.at(self.t + 1);
        self.theta.axpy(-nu, &block.at_theta)?;
        self.finish_step()
    }

    /// Accumulates `g * g` per coordinate and steps by
    /// `nu_{t+1} g_i / (sqrt(G_ii) + eps)`.
    pub fn adagrad_diag_step(&mut self, block: &GradientBlock<T>) -> Result<()> {
        self.require(
            "adagrad_diag_step",
            self.config.kind.is_diagonal(),
            "adagrad_diag or waa",
        )?;
        self.check_block(block)?;
        let nu = self.config.nu.at(self.t + 1);
        let eps = self.config.eps;
        let acc = self
            .diag_accum
            .as_mut()
            .expect("diagonal kinds carry an accumulator");
        let g = block.at_theta.as_slice();
        for ((th, a), &gi) in self
            .theta
            .as_mut_slice()
            .iter_mut()
            .zip(acc.as_mut_slice())
            .zip(g)
        {
            *a += gi * gi;
            if gi != T::zero() {
                *th -= nu * gi / (a.sqrt() + eps);
            }
        }
        self.finish_step()
    }

    /// `theta <- theta - nu_{t+1} A_t g`, then the preconditioner update with
    /// the same gradient. One `A_t g` product serves both.
    pub fn full_adagrad_step(&mut self, block: &GradientBlock<T>) -> Result<()> {
        self.require(
            "full_adagrad_step",
            self.config.kind == OptimizerKind::FullAdagrad,
            "full_adagrad",
        )?;
        self.check_block(block)?;
        let nu = self.config.nu.at(self.t + 1);
        let pre = self
            .precond
            .as_mut()
            .expect("full kinds carry a preconditioner");
        let a_g = mat_vec(pre.current(), &block.at_theta)?;
        self.theta.axpy(-nu, &a_g)?;
        pre.rm_update_with_product(&block.at_theta, &a_g, 1)?;
        self.finish_step()
    }

    pub fn wafa_step(&mut self, block: &GradientBlock<T>) -> Result<()> {
        self.require("wafa_step", self.config.kind == OptimizerKind::Wafa, "wafa")?;
        self.check_block(block)?;
        self.averaged_full_step(block)
    }

    /// WAFA with block-mean gradients; the preconditioner update is scaled by
    /// the block size.
    pub fn swafa_step(&mut self, block: &GradientBlock<T>) -> Result<()> {
        self.require(
            "swafa_step",
            self.config.kind == OptimizerKind::Swafa,
            "swafa",
        )?;
        self.check_block(block)?;
        self.averaged_full_step(block)
    }

    fn averaged_full_step(&mut self, block: &GradientBlock<T>) -> Result<()> {
        let g_avg = if self.config.grad_reuse {
            &block.at_theta
        } else {
            block
                .at_theta_avg
                .as_ref()
                .ok_or(Error::MissingAveragedGradient)?
        };
        let nu = self.config.nu.at(self.t + 1);
        let mode = self.config.precond_mode;
        let reuse_product = self.config.grad_reuse && mode == PrecondMode::Current;
        let pre = self
            .precond
            .as_mut()
            .expect("full kinds carry a preconditioner");
        let dir = mat_vec(pre.effective_matrix(mode), &block.at_theta)?;
        self.theta.axpy(-nu, &dir)?;
        if reuse_product {
            pre.rm_update_with_product(g_avg, &dir, block.n)?;
        } else {
            let a_g = mat_vec(pre.current(), g_avg)?;
            pre.rm_update_with_product(g_avg, &a_g, block.n)?;
        }
        self.finish_step()
    }

    /// Builds the gradient block for the next step from `n` samples.
    pub fn gradient_block<M, S>(&self, model: &M, samples: &[S]) -> Result<GradientBlock<T>>
    where
        M: Model<T> + ?Sized,
        S: Borrow<LabeledSample<T>>,
    {
        let n = samples.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty sample block".into()));
        }
        let w = T::one() / T::from_count(n as u64);
        let mut g = Vector::zeros(self.dim());
        for s in samples {
            model.accumulate_grad(&self.theta, s.borrow(), w, &mut g)?;
        }
        let g_avg = if self.config.needs_averaged_gradient() {
            let mut ga = Vector::zeros(self.dim());
            for s in samples {
                model.accumulate_grad(self.theta_avg(), s.borrow(), w, &mut ga)?;
            }
            Some(ga)
        } else {
            None
        };
        Ok(GradientBlock {
            at_theta: g,
            at_theta_avg: g_avg,
            n,
        })
    }
}

/// Runs `steps` optimizer steps, pulling `block_size` samples per step.
///
/// `observe` sees the initial state and the state after every step.
pub fn run_optimizer<T, M, I, S>(
    state: &mut OptimizerState<T>,
    stream: I,
    model: &M,
    steps: u64,
    mut observe: impl FnMut(&OptimizerState<T>),
) -> Result<()>
where
    T: Scalar,
    M: Model<T> + ?Sized,
    I: IntoIterator<Item = S>,
    S: Borrow<LabeledSample<T>>,
{
    observe(state);
    if steps == 0 {
        return Ok(());
    }
    let mut blocks = block_iter(stream.into_iter(), state.config.block_size)?;
    for done in 0..steps {
        let block = blocks.next().ok_or(Error::StreamExhausted {
            completed: done,
            requested: steps,
        })?;
        let grads = state.gradient_block(model, &block)?;
        state.step(&grads)?;
        observe(state);
    }
    Ok(())
}

/// One recorded point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint<T> {
    pub step: u64,
    pub samples_seen: u64,
    pub theta: Vector<T>,
    pub theta_avg: Vector<T>,
    pub precond: Option<SymMatrix<T>>,
    pub skipped_updates: u64,
}

/// [`run_optimizer`] recording every `stride`-th step plus the last one;
/// `with_precond` also clones the effective preconditioner.
pub fn record_trajectory<T, M, I, S>(
    state: &mut OptimizerState<T>,
    stream: I,
    model: &M,
    steps: u64,
    stride: u64,
    with_precond: bool,
) -> Result<Vec<TrajectoryPoint<T>>>
where
    T: Scalar,
    M: Model<T> + ?Sized,
    I: IntoIterator<Item = S>,
    S: Borrow<LabeledSample<T>>,
{
    let stride = stride.max(1);
    let mut points = Vec::new();
    run_optimizer(state, stream, model, steps, |s| {
        if s.steps() % stride == 0 || s.steps() == steps {
            points.push(TrajectoryPoint {
                step: s.steps(),
                samples_seen: s.samples_seen(),
                theta: s.theta.clone(),
                theta_avg: s.theta_avg().clone(),
                precond: if with_precond {
                    s.precond
                        .as_ref()
                        .map(|p| p.effective_matrix(s.config.precond_mode).clone())
                } else {
                    None
                },
                skipped_updates: s.skipped_updates(),
            });
        }
    })?;
    Ok(points)
}
