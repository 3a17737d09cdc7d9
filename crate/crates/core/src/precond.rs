//! Truncated Robbins-Monro estimate of `Sigma^{-1/2}` and its weighted average.
//!
//! Each update costs `O(d^2)`: one `A g` product, one rank-one correction and
//! one blend into the averaged matrix. Eigenvalue checks are `O(d^3)` and are
//! only run on request.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{eig_extremes, mat_vec, SymMatrix, Vector};
use crate::schedules::{LogWeightAverager, PowerSchedule};
use crate::Scalar;

/// Which estimate preconditions the parameter step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrecondMode {
    /// `A_t`
    Current,
    /// `A_{t,tau'}`
    #[default]
    Averaged,
}

impl FromStr for PrecondMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "current" => Ok(Self::Current),
            "averaged" => Ok(Self::Averaged),
            other => Err(Error::InvalidArgument(format!(
                "unknown preconditioner mode '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecondState<T> {
    a: SymMatrix<T>,
    a_avg: LogWeightAverager<T, SymMatrix<T>>,
    t: u64,
    gamma: PowerSchedule<T>,
    beta: PowerSchedule<T>,
    skipped_updates: u64,
    a0_scale: T,
    lambda0: T,
    /// `sum_{k=1}^{t} gamma_k`, for the largest-eigenvalue bound.
    gamma_sum: T,
    check_invariants: bool,
}

/// Outcome of [`PrecondState::check_eigen_bounds`].
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBoundReport<T> {
    pub t: u64,
    pub symmetric: bool,
    pub lambda_min: T,
    pub lambda_max: T,
    /// `lambda0 / beta_{t+1}`
    pub lower_bound: T,
    /// `lambda_max(A_0) + sum_{k<=t} gamma_k`
    pub upper_bound: T,
    /// `lambda_min - lower_bound`; negative means violated.
    pub lower_margin: T,
    /// `upper_bound - lambda_max`; negative means violated.
    pub upper_margin: T,
    pub slack: T,
}

impl<T: Scalar> EigenBoundReport<T> {
    pub fn holds(&self) -> bool {
        self.symmetric && self.lower_margin >= -self.slack && self.upper_margin >= -self.slack
    }
}

/// Absolute slack granted to the eigen solver when checking bounds.
pub const EIGEN_SLACK: f64 = 1e-9;

impl<T: Scalar> PrecondState<T> {
    /// `A_0 = a0_scale * I_d`.
    pub fn new(
        dim: usize,
        a0_scale: T,
        gamma: PowerSchedule<T>,
        beta: PowerSchedule<T>,
        tau_prime: T,
    ) -> Result<Self> {
        if !(a0_scale > T::zero()) || !a0_scale.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "A_0 scale must be positive, got {a0_scale}"
            )));
        }
        let cc = gamma.coefficient() * beta.coefficient();
        if !(cc < T::one()) {
            static WARNED: std::sync::Once = std::sync::Once::new();
            WARNED.call_once(|| log::warn!("c_gamma * c_beta = {cc} is not below 1; eigenvalue lower bound relies on gamma_t beta_t <= 1"));
        }
        let a = SymMatrix::scaled_identity(dim, a0_scale)?;
        // beta_1 = c_beta
        let lambda0 = T::one().min(a0_scale / beta.at(1));
        Ok(Self {
            a_avg: LogWeightAverager::new(tau_prime, a.clone())?,
            a,
            t: 0,
            gamma,
            beta,
            skipped_updates: 0,
            a0_scale,
            lambda0,
            gamma_sum: T::zero(),
            check_invariants: false,
        })
    }

    /// Checks eigenvalue bounds after every update (`O(d^3)` per step).
    pub fn with_invariant_checks(mut self, enabled: bool) -> Self {
        self.check_invariants = enabled;
        self
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn skipped_updates(&self) -> u64 {
        self.skipped_updates
    }

    pub fn lambda0(&self) -> T {
        self.lambda0
    }

    pub fn a0_scale(&self) -> T {
        self.a0_scale
    }

    pub fn gamma(&self) -> &PowerSchedule<T> {
        &self.gamma
    }

    pub fn beta(&self) -> &PowerSchedule<T> {
        &self.beta
    }

    pub fn current(&self) -> &SymMatrix<T> {
        &self.a
    }

    pub fn averaged(&self) -> &SymMatrix<T> {
        self.a_avg.value()
    }

    pub fn effective_matrix(&self, mode: PrecondMode) -> &SymMatrix<T> {
        match mode {
            PrecondMode::Current => &self.a,
            PrecondMode::Averaged => self.a_avg.value(),
        }
    }

    /// Feeds one (block-mean) gradient; `block_size` scales the rank-one term
    /// and the truncation test.
    pub fn rm_update(&mut self, g: &Vector<T>, block_size: usize) -> Result<()> {
        let v = mat_vec(&self.a, g)?;
        self.rm_update_with_product(g, &v, block_size)
    }

    /// Same as [`rm_update`](Self::rm_update) with `a_g = A_t g` already computed.
    pub(crate) fn rm_update_with_product(
        &mut self,
        g: &Vector<T>,
        a_g: &Vector<T>,
        block_size: usize,
    ) -> Result<()> {
        check_dim(self.dim(), g.dim())?;
        check_dim(self.dim(), a_g.dim())?;
        if block_size == 0 {
            return Err(Error::InvalidArgument(
                "block size must be at least 1".into(),
            ));
        }
        let next = self.t + 1;
        let n = T::from_count(block_size as u64);
        let gamma = self.gamma.at(next);
        let q = n * g.dot_unchecked(a_g);
        if q <= self.beta.at(next) {
            self.a.rank_one_identity_update(gamma, n, a_g)?;
        } else {
            self.skipped_updates += 1;
        }
        self.gamma_sum += gamma;
        self.t = next;
        self.a_avg.update(&self.a)?;
        if self.check_invariants {
            let report = self.check_eigen_bounds();
            if !report.holds() {
                return Err(Error::InvariantViolation {
                    t: self.t,
                    detail: format!(
                        "lambda_min {} vs bound {}, lambda_max {} vs bound {}, symmetric {}",
                        report.lambda_min,
                        report.lower_bound,
                        report.lambda_max,
                        report.upper_bound,
                        report.symmetric
                    ),
                });
            }
        }
        Ok(())
    }

    /// Evaluates `lambda_min(A_t) >= lambda0 / beta_{t+1}` and
    /// `lambda_max(A_t) <= lambda_max(A_0) + sum_{k<=t} gamma_k`.
    pub fn check_eigen_bounds(&self) -> EigenBoundReport<T> {
        let symmetric = self.a.is_symmetric();
        let (lambda_min, lambda_max) = if symmetric {
            eig_extremes(&self.a)
        } else {
            let mut sym = self.a.clone();
            sym.symmetrize();
            eig_extremes(&sym)
        };
        let lower_bound = self.lambda0 / self.beta.at(self.t + 1);
        let upper_bound = self.a0_scale + self.gamma_sum;
        let slack = T::lit(EIGEN_SLACK) * T::one().max(lambda_max.abs());
        EigenBoundReport {
            t: self.t,
            symmetric,
            lambda_min,
            lambda_max,
            lower_bound,
            upper_bound,
            lower_margin: lambda_min - lower_bound,
            upper_margin: upper_bound - lambda_max,
            slack,
        }
    }

    /// Overwrites the current estimate without any check. Diagnostics only.
    pub fn set_current_unchecked(&mut self, a: SymMatrix<T>) {
        self.a = a;
    }

    /// Text snapshot; see [`PrecondState::from_snapshot`] for the layout.
    pub fn to_snapshot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "fulladagrad-precond 1");
        let _ = writeln!(s, "dim {}", self.dim());
        let _ = writeln!(s, "t {}", self.t);
        let _ = writeln!(s, "skipped {}", self.skipped_updates);
        let _ = writeln!(s, "a0_scale {}", self.a0_scale);
        let _ = writeln!(
            s,
            "gamma {} {}",
            self.gamma.coefficient(),
            self.gamma.exponent()
        );
        let _ = writeln!(
            s,
            "beta {} {}",
            self.beta.coefficient(),
            self.beta.exponent()
        );
        let _ = writeln!(s, "gamma_sum {}", self.gamma_sum);
        let _ = writeln!(
            s,
            "avg {} {} {}",
            self.a_avg.tau(),
            self.a_avg.weight_sum(),
            self.a_avg.count()
        );
        write_matrix(&mut s, "a", &self.a);
        write_matrix(&mut s, "a_avg", self.a_avg.value());
        s
    }

    /// Parses a snapshot written by [`to_snapshot`](Self::to_snapshot).
    ///
    /// One `key values...` record per line, in this order: header
    /// `fulladagrad-precond 1`, `dim`, `t`, `skipped`, `a0_scale`,
    /// `gamma c e`, `beta c e`, `gamma_sum`, `avg tau weight_sum count`,
    /// then `a` and `a_avg` each followed by `d*d` row-major values. Numbers use
    /// shortest round-trip formatting, so restore is exact.
    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |key: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Snapshot(format!("missing '{key}' record")))?;
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some(k) if k == key => Ok(parts.map(str::to_owned).collect()),
                other => Err(Error::Snapshot(format!(
                    "expected '{key}', found {other:?}"
                ))),
            }
        };
        let header = next("fulladagrad-precond")?;
        if header != ["1"] {
            return Err(Error::Snapshot(format!("unsupported version {header:?}")));
        }
        let dim: usize = one(&next("dim")?)?;
        let t: u64 = one(&next("t")?)?;
        let skipped: u64 = one(&next("skipped")?)?;
        let a0_scale: T = one(&next("a0_scale")?)?;
        let g = next("gamma")?;
        let b = next("beta")?;
        let gamma = PowerSchedule::decay(nth(&g, 0)?, nth(&g, 1)?)?;
        let beta = PowerSchedule::growth(nth(&b, 0)?, nth(&b, 1)?)?;
        let gamma_sum: T = one(&next("gamma_sum")?)?;
        let avg = next("avg")?;
        let a = read_matrix(dim, &next("a")?)?;
        let a_avg = read_matrix(dim, &next("a_avg")?)?;
        Ok(Self {
            a,
            a_avg: LogWeightAverager::from_parts(
                nth(&avg, 0)?,
                nth(&avg, 1)?,
                nth(&avg, 2)?,
                a_avg,
            ),
            t,
            lambda0: T::one().min(a0_scale / beta.at(1)),
            gamma,
            beta,
            skipped_updates: skipped,
            a0_scale,
            gamma_sum,
            check_invariants: false,
        })
    }
}

fn write_matrix<T: Scalar>(s: &mut String, key: &str, m: &SymMatrix<T>) {
    s.push_str(key);
    for v in m.as_slice() {
        let _ = write!(s, " {v}");
    }
    s.push('\n');
}

fn nth<V: FromStr>(fields: &[String], i: usize) -> Result<V> {
    fields
        .get(i)
        .ok_or_else(|| Error::Snapshot(format!("missing field {i}")))?
        .parse()
        .map_err(|_| Error::Snapshot(format!("unparsable field '{}'", fields[i])))
}

fn one<V: FromStr>(fields: &[String]) -> Result<V> {
    if fields.len() != 1 {
        return Err(Error::Snapshot(format!(
            "expected one value, found {}",
            fields.len()
        )));
    }
    nth(fields, 0)
}

fn read_matrix<T: Scalar>(dim: usize, fields: &[String]) -> Result<SymMatrix<T>> {
    if fields.len() != dim * dim {
        return Err(Error::Snapshot(format!(
            "expected {} matrix entries, found {}",
            dim * dim,
            fields.len()
        )));
    }
    let data = (0..fields.len())
        .map(|i| nth(fields, i))
        .collect::<Result<Vec<T>>>()?;
    SymMatrix::from_row_major(dim, data).map_err(|e| Error::Snapshot(e.to_string()))
}
