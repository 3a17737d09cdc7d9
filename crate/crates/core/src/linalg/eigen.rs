//! Cyclic Jacobi eigensolver and Cholesky factorization.
//!
//! Both are `O(d^3)` and exist for evaluation, data simulation and tests.
//! Nothing on an optimizer stepping path calls into this module.

use crate::error::{check_dim, Error, Result};
use crate::linalg::counters::tick_cubic;
use crate::linalg::{SymMatrix, Vector};
use crate::Scalar;

/// Eigenvalues at or below this are treated as non-positive.
pub const PD_TOLERANCE: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `S = V diag(values) V^T`, values ascending.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    /// Row-major `d x d`; column `k` is the eigenvector for `values[k]`.
    pub vectors: Vec<T>,
}

impl<T: Scalar> SymEigen<T> {
    pub fn vector(&self, k: usize) -> Vector<T> {
        let d = self.values.len();
        Vector::from_fn(d, |i| self.vectors[i * d + k])
    }

    /// Rebuilds `V diag(f(values)) V^T`.
    pub fn map_spectrum(&self, f: impl Fn(T) -> T) -> Result<SymMatrix<T>> {
        tick_cubic();
        let d = self.values.len();
        let w: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        SymMatrix::from_fn(d, |i, j| {
            (0..d).map(|k| v[i * d + k] * w[k] * v[j * d + k]).sum()
        })
    }
}

pub fn sym_eigen<T: Scalar>(s: &SymMatrix<T>) -> SymEigen<T> {
    tick_cubic();
    let d = s.dim();
    let mut a = s.as_slice().to_vec();
    let mut v = vec![T::zero(); d * d];
    for i in 0..d {
        v[i * d + i] = T::one();
    }
    let eps = T::epsilon();
    let floor = eps * eps * s.frobenius_norm();
    let two = T::lit(2.0);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                if apq.abs() <= floor
                    || apq.abs() <= eps * (app.abs() * aqq.abs()).sqrt() * T::lit(0.5)
                {
                    a[p * d + q] = T::zero();
                    a[q * d + p] = T::zero();
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (two * apq);
                // theta^2 would overflow; tan(phi) ~ 1 / (2 theta)
                let t = if theta.abs() > T::max_value().sqrt() {
                    T::one() / (two * theta)
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(T::one()))
                };
                let c = T::one() / t.hypot(T::one());
                let sn = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - sn * akq;
                    a[k * d + q] = sn * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - sn * aqk;
                    a[q * d + k] = sn * apk + c * aqk;
                }
                a[p * d + q] = T::zero();
                a[q * d + p] = T::zero();
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - sn * vkq;
                    v[k * d + q] = sn * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        a[i * d + i]
            .partial_cmp(&a[j * d + j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&k| a[k * d + k]).collect();
    let mut vectors = vec![T::zero(); d * d];
    for (new_k, &old_k) in order.iter().enumerate() {
        for i in 0..d {
            vectors[i * d + new_k] = v[i * d + old_k];
        }
    }
    SymEigen { values, vectors }
}

/// Smallest and largest eigenvalue.
pub fn eig_extremes<T: Scalar>(a: &SymMatrix<T>) -> (T, T) {
    let e = sym_eigen(a);
    (e.values[0], e.values[e.values.len() - 1])
}

/// Inverse of the symmetric positive-definite square root, `S^{-1/2}`.
pub fn inv_sqrt_eig<T: Scalar>(s: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let e = sym_eigen(s);
    let tol = T::lit(PD_TOLERANCE);
    if let Some(&bad) = e.values.iter().find(|&&l| !(l > tol)) {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: bad.to_f64_lossy(),
        });
    }
    e.map_spectrum(|l| T::one() / l.sqrt())
}

/// Lower-triangular factor `L` with `L L^T = S`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    dim: usize,
    /// Row-major, upper triangle zero.
    lower: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.lower[i * self.dim + j]
    }

    /// `L z`, exploiting the triangular shape.
    pub fn mul_vec(&self, z: &Vector<T>) -> Result<Vector<T>> {
        check_dim(self.dim, z.dim())?;
        let d = self.dim;
        let z = z.as_slice();
        Ok(Vector::from_fn(d, |i| {
            self.lower[i * d..i * d + i + 1]
                .iter()
                .zip(z)
                .map(|(&l, &x)| l * x)
                .sum()
        }))
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> Result<SymMatrix<T>> {
        tick_cubic();
        let d = self.dim;
        SymMatrix::from_fn(d, |i, j| {
            (0..=i.min(j))
                .map(|k| self.get(i, k) * self.get(j, k))
                .sum()
        })
    }
}

pub fn cholesky<T: Scalar>(s: &SymMatrix<T>) -> Result<Cholesky<T>> {
    tick_cubic();
    let d = s.dim();
    let mut l = vec![T::zero(); d * d];
    for j in 0..d {
        let mut diag = s.get(j, j);
        for k in 0..j {
            diag -= l[j * d + k] * l[j * d + k];
        }
        if !(diag > T::zero()) {
            return Err(Error::NotPositiveDefinite {
                eigenvalue: diag.to_f64_lossy(),
            });
        }
        let ljj = diag.sqrt();
        l[j * d + j] = ljj;
        for i in j + 1..d {
            let mut acc = s.get(i, j);
            for k in 0..j {
                acc -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = acc / ljj;
        }
    }
    Ok(Cholesky { dim: d, lower: l })
}
