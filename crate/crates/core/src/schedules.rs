//! Power-law step sequences and the logarithmically weighted running average.

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, Vector};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `c * t^{-e}`
    Decay,
    /// `c * t^{+e}`
    Growth,
}

/// `c * t^{-e}` or `c * t^{e}`, evaluated at 1-based step indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSchedule<T> {
    coefficient: T,
    exponent: T,
    direction: Direction,
}

impl<T: Scalar> PowerSchedule<T> {
    pub fn new(coefficient: T, exponent: T, direction: Direction) -> Result<Self> {
        if !(coefficient > T::zero()) || !coefficient.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "schedule coefficient must be positive, got {coefficient}"
            )));
        }
        if !exponent.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "schedule exponent must be finite, got {exponent}"
            )));
        }
        Ok(Self {
            coefficient,
            exponent,
            direction,
        })
    }

    pub fn decay(coefficient: T, exponent: T) -> Result<Self> {
        Self::new(coefficient, exponent, Direction::Decay)
    }

    pub fn growth(coefficient: T, exponent: T) -> Result<Self> {
        Self::new(coefficient, exponent, Direction::Growth)
    }

    pub fn coefficient(&self) -> T {
        self.coefficient
    }

    pub fn exponent(&self) -> T {
        self.exponent
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn value(&self, t: u64) -> Result<T> {
        if t == 0 {
            return Err(Error::ZeroStep);
        }
        Ok(self.at(t))
    }

    /// Unchecked evaluation; callers guarantee `t >= 1`.
    #[inline]
    pub(crate) fn at(&self, t: u64) -> T {
        let e = match self.direction {
            Direction::Decay => -self.exponent,
            Direction::Growth => self.exponent,
        };
        self.coefficient * T::from_count(t).powf(e)
    }
}

/// Unnormalized weight `ln(k+1)^tau` with `0^0 = 1`.
#[inline]
fn log_weight<T: Scalar>(k: u64, tau: T) -> T {
    if tau == T::zero() {
        T::one()
    } else {
        T::from_count(k + 1).ln().powf(tau)
    }
}

/// Mixing coefficient of the `(t+1)`-th averaging update:
/// `ln(t+1)^tau / sum_{k=0}^{t} ln(k+1)^tau`, with `0^0 = 1` and `0/0 = 0`.
pub fn averaging_coefficient<T: Scalar>(t: u64, tau: T) -> T {
    let sum: T = (0..=t).map(|k| log_weight(k, tau)).sum();
    if sum == T::zero() {
        T::zero()
    } else {
        log_weight(t, tau) / sum
    }
}

/// Values the averager can blend: `self <- self + a (target - self)`.
pub trait Blend<T>: Clone {
    fn blend_toward(&mut self, target: &Self, weight: T) -> Result<()>;
}

impl<T: Scalar> Blend<T> for Vector<T> {
    fn blend_toward(&mut self, target: &Self, weight: T) -> Result<()> {
        crate::error::check_dim(self.dim(), target.dim())?;
        for (a, &b) in self.as_mut_slice().iter_mut().zip(target.as_slice()) {
            *a += weight * (b - *a);
        }
        Ok(())
    }
}

impl<T: Scalar> Blend<T> for SymMatrix<T> {
    fn blend_toward(&mut self, target: &Self, weight: T) -> Result<()> {
        SymMatrix::blend_toward(self, target, weight)
    }
}

/// Running log-weighted average: the `(t+1)`-th input enters with coefficient
/// `averaging_coefficient(t, tau)`. The running weight sum is kept so each
/// update is `O(size of value)`.
///
/// The printed recursion unrolls to a weighted mean in which the `j`-th input
/// (1-based) carries weight `ln(j)^tau`; for `tau > 0` the first input gets
/// weight zero and the initial value is dropped at the second update.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeightAverager<T, V> {
    tau: T,
    weight_sum: T,
    count: u64,
    value: V,
}

impl<T: Scalar, V: Blend<T>> LogWeightAverager<T, V> {
    pub fn new(tau: T, initial: V) -> Result<Self> {
        if !(tau >= T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "averaging exponent must be >= 0, got {tau}"
            )));
        }
        Ok(Self {
            tau,
            weight_sum: T::zero(),
            count: 0,
            value: initial,
        })
    }

    pub(crate) fn from_parts(tau: T, weight_sum: T, count: u64, value: V) -> Self {
        Self {
            tau,
            weight_sum,
            count,
            value,
        }
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn weight_sum(&self) -> T {
        self.weight_sum
    }

    /// Number of updates applied so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn value(&self) -> &V {
        &self.value
    }

    /// Folds in the next value and returns the coefficient used.
    pub fn update(&mut self, next: &V) -> Result<T> {
        let w = log_weight(self.count, self.tau);
        let sum = self.weight_sum + w;
        let a = if sum == T::zero() { T::zero() } else { w / sum };
        if a == T::one() {
            self.value.clone_from(next);
        } else if a != T::zero() {
            self.value.blend_toward(next, a)?;
        }
        self.weight_sum = sum;
        self.count += 1;
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn step_values() {
        let d = PowerSchedule::decay(1.0, 0.75).unwrap();
        assert_eq!(d.value(1).unwrap(), 1.0);
        assert_abs_diff_eq!(d.value(16).unwrap(), 0.125, epsilon = 1e-15);
        let g = PowerSchedule::growth(1.0, 0.75).unwrap();
        assert_abs_diff_eq!(g.value(16).unwrap(), 8.0, epsilon = 1e-13);
        assert!(matches!(d.value(0), Err(Error::ZeroStep)));
    }

    #[test]
    fn schedule_rejects_bad_coefficients() {
        assert!(PowerSchedule::decay(0.0, 0.75).is_err());
        assert!(PowerSchedule::decay(-1.0, 0.75).is_err());
        assert!(PowerSchedule::decay(1.0, f64::NAN).is_err());
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(averaging_coefficient(0, 2.0), 0.0);
        assert_eq!(averaging_coefficient(3, 0.0), 0.25);
        assert_eq!(averaging_coefficient(1, 2.0), 1.0);
        assert_eq!(averaging_coefficient(0, 0.0), 1.0);
    }

    #[test]
    fn uniform_average_is_arithmetic_mean() {
        let mut avg = LogWeightAverager::new(0.0, Vector::from_vec(vec![100.0, -100.0])).unwrap();
        let xs = [[1.0, 2.0], [3.0, -4.0], [5.0, 0.5], [-1.0, 1.5]];
        for x in &xs {
            avg.update(&Vector::from_vec(x.to_vec())).unwrap();
        }
        assert_abs_diff_eq!(avg.value()[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(avg.value()[1], 0.0, epsilon = 1e-14);
        assert_eq!(avg.count(), 4);
    }

    #[test]
    fn first_log_weighted_update_keeps_initial_value() {
        let init = Vector::from_vec(vec![7.0]);
        let mut avg = LogWeightAverager::new(2.0, init.clone()).unwrap();
        assert_eq!(avg.update(&Vector::from_vec(vec![1.0])).unwrap(), 0.0);
        assert_eq!(avg.value(), &init);
        assert_eq!(avg.update(&Vector::from_vec(vec![3.0])).unwrap(), 1.0);
        assert_eq!(avg.value()[0], 3.0);
    }

    #[test]
    fn rejects_negative_tau_and_shape_mismatch() {
        assert!(LogWeightAverager::new(-1.0, Vector::<f64>::zeros(2)).is_err());
        let mut avg = LogWeightAverager::new(0.0, Vector::<f64>::zeros(2)).unwrap();
        avg.update(&Vector::zeros(2)).unwrap();
        assert!(avg.update(&Vector::zeros(3)).is_err());
    }

    #[test]
    fn averages_matrices() {
        let mut avg = LogWeightAverager::new(0.0, SymMatrix::<f64>::identity(2).unwrap()).unwrap();
        avg.update(&SymMatrix::from_diag(&[2.0, 4.0]).unwrap())
            .unwrap();
        avg.update(&SymMatrix::from_diag(&[4.0, 0.0]).unwrap())
            .unwrap();
        assert_eq!(avg.value(), &SymMatrix::from_diag(&[3.0, 2.0]).unwrap());
    }
}
