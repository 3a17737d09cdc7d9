use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::SampleRng;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{cholesky, Cholesky, SymMatrix, Vector};
use crate::models::LabeledSample;
use crate::Scalar;

/// `R_ij = rho^{|i-j|}`.
pub fn make_toeplitz_cov<T: Scalar>(d: usize, rho: T) -> Result<SymMatrix<T>> {
    if !(rho.abs() < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "|rho| must be below 1, got {rho}"
        )));
    }
    SymMatrix::from_fn(d, |i, j| {
        if i == j {
            T::one()
        } else {
            rho.powi((j - i) as i32)
        }
    })
}

/// Coordinates i.i.d. uniform on `[-2, 2]`.
pub fn sample_theta_star<T: Scalar>(d: usize, rng: &mut SampleRng) -> Vector<T> {
    Vector::from_fn(d, |_| T::lit(rng.random_range(-2.0..=2.0)))
}

/// `y = x^T theta* + noise_std * zeta` with `x ~ N(0, Sigma_X)`, `zeta ~ N(0, 1)`.
///
/// An identity covariance skips the Cholesky product, so drawing costs `O(d)`.
#[derive(Debug, Clone)]
pub struct GaussianLinearSource<T> {
    theta_star: Vector<T>,
    cov_chol: Option<Cholesky<T>>,
    noise_std: T,
    rng: SampleRng,
}

impl<T: Scalar> GaussianLinearSource<T> {
    pub fn new(
        theta_star: Vector<T>,
        cov: &SymMatrix<T>,
        noise_std: T,
        rng: SampleRng,
    ) -> Result<Self> {
        check_dim(theta_star.dim(), cov.dim())?;
        if !(noise_std >= T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "noise std must be non-negative, got {noise_std}"
            )));
        }
        let identity = SymMatrix::identity(cov.dim())?;
        let cov_chol = if *cov == identity {
            None
        } else {
            Some(cholesky(cov)?)
        };
        Ok(Self {
            theta_star,
            cov_chol,
            noise_std,
            rng,
        })
    }

    pub fn theta_star(&self) -> &Vector<T> {
        &self.theta_star
    }

    /// `None` when the covariance is the identity.
    pub fn cov_chol(&self) -> Option<&Cholesky<T>> {
        self.cov_chol.as_ref()
    }

    pub fn draw_sample(&mut self) -> LabeledSample<T> {
        let d = self.theta_star.dim();
        let rng = &mut self.rng;
        let z = Vector::from_fn(d, |_| T::lit(rng.sample::<f64, _>(StandardNormal)));
        let x = match &self.cov_chol {
            Some(l) => l.mul_vec(&z).expect("dimensions fixed at construction"),
            None => z,
        };
        let noise = T::lit(self.rng.sample::<f64, _>(StandardNormal));
        let y = x.dot_unchecked(&self.theta_star) + self.noise_std * noise;
        LabeledSample { x, y }
    }
}

impl<T: Scalar> Iterator for GaussianLinearSource<T> {
    type Item = LabeledSample<T>;

    fn next(&mut self) -> Option<LabeledSample<T>> {
        Some(self.draw_sample())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::replication_rng;
    use rand::SeedableRng;

    #[test]
    fn toeplitz_examples() {
        assert_eq!(
            make_toeplitz_cov(4, 0.0).unwrap(),
            SymMatrix::identity(4).unwrap()
        );
        let r = make_toeplitz_cov(2, 0.9).unwrap();
        assert_eq!(
            r,
            SymMatrix::from_rows(&[vec![1.0, 0.9], vec![0.9, 1.0]]).unwrap()
        );
        let (lo, _) = crate::linalg::eig_extremes(&make_toeplitz_cov(3, 0.9).unwrap());
        assert!(lo > 0.0);
        assert!(make_toeplitz_cov(3, 1.0).is_err());
        assert!(make_toeplitz_cov(3, -1.5).is_err());
    }

    #[test]
    fn theta_star_support_and_determinism() {
        let mut rng = SampleRng::seed_from_u64(11);
        let t: Vector<f64> = sample_theta_star(50, &mut rng);
        assert!(t.iter().all(|&c| (-2.0..=2.0).contains(&c)));
        let again: Vector<f64> = sample_theta_star(50, &mut SampleRng::seed_from_u64(11));
        assert_eq!(t, again);
    }

    #[test]
    fn theta_star_mean_is_centered() {
        let mut rng = SampleRng::seed_from_u64(5);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_theta_star::<f64>(1, &mut rng)[0])
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn degenerate_source_is_silent() {
        let cov = make_toeplitz_cov(3, 0.5).unwrap();
        let mut src =
            GaussianLinearSource::new(Vector::zeros(3), &cov, 0.0, replication_rng(1, 0)).unwrap();
        assert!((0..100).all(|_| src.draw_sample().y == 0.0));
    }

    #[test]
    fn source_is_reproducible() {
        let cov = make_toeplitz_cov(3, 0.9).unwrap();
        let theta = Vector::from_vec(vec![1.0, -1.0, 0.5]);
        let a: Vec<_> = GaussianLinearSource::new(theta.clone(), &cov, 1.0, replication_rng(3, 2))
            .unwrap()
            .take(20)
            .collect();
        let b: Vec<_> = GaussianLinearSource::new(theta, &cov, 1.0, replication_rng(3, 2))
            .unwrap()
            .take(20)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_covariance_takes_fast_path() {
        let src = GaussianLinearSource::new(
            Vector::<f64>::zeros(4),
            &SymMatrix::identity(4).unwrap(),
            1.0,
            replication_rng(0, 0),
        )
        .unwrap();
        assert!(src.cov_chol().is_none());
        assert!(GaussianLinearSource::new(
            Vector::<f64>::zeros(3),
            &SymMatrix::identity(4).unwrap(),
            1.0,
            replication_rng(0, 0)
        )
        .is_err());
    }
}
