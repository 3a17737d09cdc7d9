use crate::error::{check_dim, Error, Result};
use crate::linalg::counters::{tick_cubic, tick_quadratic};
use crate::linalg::Vector;
use crate::Scalar;

/// Dense symmetric matrix, stored row-major.
///
/// Constructors reject asymmetric input and every in-place kernel writes the
/// upper triangle then mirrors it, so `a[i][j] == a[j][i]` holds bitwise. The
/// only escape hatch is [`SymMatrix::from_row_major_unchecked`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "matrix dimension must be at least 1".into(),
            ));
        }
        Ok(Self {
            dim,
            data: vec![T::zero(); dim * dim],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::scaled_identity(dim, T::one())
    }

    pub fn scaled_identity(dim: usize, scale: T) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m.data[i * dim + i] = scale;
        }
        Ok(m)
    }

    pub fn from_diag(diag: &[T]) -> Result<Self> {
        let mut m = Self::zeros(diag.len())?;
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = v;
        }
        Ok(m)
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle and mirrored.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            check_dim(dim, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_row_major(dim, data)
    }

    /// Row-major constructor; fails unless the data is exactly symmetric.
    pub fn from_row_major(dim: usize, data: Vec<T>) -> Result<Self> {
        let m = Self::from_row_major_unchecked(dim, data)?;
        if !m.is_symmetric() {
            return Err(Error::InvalidArgument("matrix is not symmetric".into()));
        }
        Ok(m)
    }

    /// Row-major constructor that skips the symmetry check. Used to probe
    /// diagnostics with corrupted state.
    pub fn from_row_major_unchecked(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "matrix dimension must be at least 1".into(),
            ));
        }
        check_dim(dim * dim, data.len())?;
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diag(&self) -> Vector<T> {
        Vector::from_fn(self.dim, |i| self.get(i, i))
    }

    pub fn is_symmetric(&self) -> bool {
        let d = self.dim;
        (0..d).all(|i| (i + 1..d).all(|j| self.data[i * d + j] == self.data[j * d + i]))
    }

    /// Replaces the matrix by `(A + A^T) / 2`.
    pub fn symmetrize(&mut self) {
        tick_quadratic();
        let d = self.dim;
        let half = T::lit(0.5);
        for i in 0..d {
            for j in i + 1..d {
                let v = (self.data[i * d + j] + self.data[j * d + i]) * half;
                self.data[i * d + j] = v;
                self.data[j * d + i] = v;
            }
        }
    }

    /// `A <- A - gamma * (n * v v^T - I)`, computed on the upper triangle and
    /// mirrored. This is the Robbins-Monro correction with `v = A g`.
    pub fn rank_one_identity_update(&mut self, gamma: T, n: T, v: &Vector<T>) -> Result<()> {
        check_dim(self.dim, v.dim())?;
        tick_quadratic();
        let d = self.dim;
        let v = v.as_slice();
        for i in 0..d {
            let gv = gamma * n * v[i];
            for j in i..d {
                let mut a = self.data[i * d + j] - gv * v[j];
                if i == j {
                    a += gamma;
                }
                self.data[i * d + j] = a;
                self.data[j * d + i] = a;
            }
        }
        Ok(())
    }

    /// `self <- self + weight * (target - self)`.
    pub fn blend_toward(&mut self, target: &Self, weight: T) -> Result<()> {
        check_dim(self.dim, target.dim)?;
        tick_quadratic();
        for (a, &b) in self.data.iter_mut().zip(&target.data) {
            *a += weight * (b - *a);
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: T) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            dim: self.dim,
            data,
        })
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&a| a * a).sum::<T>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        check_dim(self.dim, other.dim)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Dense product `A B`. The result is only symmetric when `A` and `B`
    /// commute, so it is returned as raw row-major data.
    pub fn matmul(&self, other: &Self) -> Result<Vec<T>> {
        check_dim(self.dim, other.dim)?;
        tick_cubic();
        let d = self.dim;
        let mut out = vec![T::zero(); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                for j in 0..d {
                    out[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        Ok(out)
    }

    /// `M S M` for symmetric `M`, `S`; symmetric by construction.
    pub fn sandwich(&self, inner: &Self) -> Result<Self> {
        let ms = self.matmul(inner)?;
        let ms = Self::from_row_major_unchecked(self.dim, ms)?;
        let mut out = Self::from_row_major_unchecked(self.dim, ms.matmul(self)?)?;
        out.symmetrize();
        Ok(out)
    }
}

/// `A v`.
pub fn mat_vec<T: Scalar>(a: &SymMatrix<T>, v: &Vector<T>) -> Result<Vector<T>> {
    check_dim(a.dim, v.dim())?;
    tick_quadratic();
    let x = v.as_slice();
    Ok(Vector::from_fn(a.dim, |i| {
        a.row(i).iter().zip(x).map(|(&aij, &xj)| aij * xj).sum()
    }))
}

/// `g^T A g`.
pub fn quad_form<T: Scalar>(a: &SymMatrix<T>, g: &Vector<T>) -> Result<T> {
    let ag = mat_vec(a, g)?;
    Ok(g.dot_unchecked(&ag))
}

/// `||A - B||_F`.
pub fn frobenius_distance<T: Scalar>(a: &SymMatrix<T>, b: &SymMatrix<T>) -> Result<T> {
    check_dim(a.dim, b.dim)?;
    tick_quadratic();
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt())
}
