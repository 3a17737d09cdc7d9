//! Losses and per-sample gradients for linear and logistic regression.

use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::Scalar;

/// One observation `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample<T> {
    pub x: Vector<T>,
    pub y: T,
}

impl<T: Scalar> LabeledSample<T> {
    pub fn new(x: Vector<T>, y: T) -> Self {
        Self { x, y }
    }
}

/// A per-sample loss `f(x, theta)` with its gradient in `theta`.
pub trait Model<T: Scalar>: Sync {
    fn loss(&self, theta: &Vector<T>, sample: &LabeledSample<T>) -> Result<T>;

    /// `out += weight * grad f(sample, theta)`.
    fn accumulate_grad(
        &self,
        theta: &Vector<T>,
        sample: &LabeledSample<T>,
        weight: T,
        out: &mut Vector<T>,
    ) -> Result<()>;

    fn grad(&self, theta: &Vector<T>, sample: &LabeledSample<T>) -> Result<Vector<T>> {
        let mut out = Vector::zeros(theta.dim());
        self.accumulate_grad(theta, sample, T::one(), &mut out)?;
        Ok(out)
    }
}

/// Half squared residual, `f = (y - x^T theta)^2 / 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearRegression;

/// Logistic log-loss with labels in `{0, 1}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogisticRegression;

fn residual_dot<T: Scalar>(
    theta: &Vector<T>,
    sample: &LabeledSample<T>,
    out_dim: Option<usize>,
) -> Result<T> {
    check_dim(theta.dim(), sample.x.dim())?;
    if let Some(d) = out_dim {
        check_dim(theta.dim(), d)?;
    }
    Ok(sample.x.dot_unchecked(theta))
}

impl<T: Scalar> Model<T> for LinearRegression {
    fn loss(&self, theta: &Vector<T>, sample: &LabeledSample<T>) -> Result<T> {
        let r = residual_dot(theta, sample, None)? - sample.y;
        Ok(T::lit(0.5) * r * r)
    }

    fn accumulate_grad(
        &self,
        theta: &Vector<T>,
        sample: &LabeledSample<T>,
        weight: T,
        out: &mut Vector<T>,
    ) -> Result<()> {
        let r = residual_dot(theta, sample, Some(out.dim()))? - sample.y;
        out.axpy(weight * r, &sample.x)
    }
}

fn check_label<T: Scalar>(y: T) -> Result<()> {
    if y == T::zero() || y == T::one() {
        Ok(())
    } else {
        Err(Error::InvalidLabel(y.to_f64_lossy()))
    }
}

/// Logistic function, split on the sign of `z` so `exp` never overflows.
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

impl<T: Scalar> Model<T> for LogisticRegression {
    fn loss(&self, theta: &Vector<T>, sample: &LabeledSample<T>) -> Result<T> {
        check_label(sample.y)?;
        let z = residual_dot(theta, sample, None)?;
        Ok(softplus(z) - sample.y * z)
    }

    fn accumulate_grad(
        &self,
        theta: &Vector<T>,
        sample: &LabeledSample<T>,
        weight: T,
        out: &mut Vector<T>,
    ) -> Result<()> {
        check_label(sample.y)?;
        let z = residual_dot(theta, sample, Some(out.dim()))?;
        out.axpy(weight * (sigmoid(z) - sample.y), &sample.x)
    }
}

/// `(x^T theta - y) x`
pub fn linear_grad<T: Scalar>(theta: &Vector<T>, sample: &LabeledSample<T>) -> Result<Vector<T>> {
    LinearRegression.grad(theta, sample)
}

/// `(sigma(x^T theta) - y) x`
pub fn logistic_grad<T: Scalar>(theta: &Vector<T>, sample: &LabeledSample<T>) -> Result<Vector<T>> {
    LogisticRegression.grad(theta, sample)
}

/// Class 1 iff `x^T theta >= 0`; the tie goes to class 1.
pub fn logistic_predict<T: Scalar>(theta: &Vector<T>, x: &Vector<T>) -> Result<u8> {
    Ok(u8::from(theta.dot(x)? >= T::zero()))
}

/// Central differences `(f(theta + h e_i) - f(theta - h e_i)) / 2h`.
pub fn finite_diff_grad<T: Scalar>(
    loss: impl Fn(&Vector<T>) -> T,
    theta: &Vector<T>,
    h: T,
) -> Result<Vector<T>> {
    if !(h > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let mut probe = theta.clone();
    Ok(Vector::from_fn(theta.dim(), |i| {
        let x = probe[i];
        probe[i] = x + h;
        let up = loss(&probe);
        probe[i] = x - h;
        let down = loss(&probe);
        probe[i] = x;
        (up - down) / (h + h)
    }))
}
