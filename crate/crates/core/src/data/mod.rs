//! Sample sources: the Gaussian linear simulator, LIBSVM files, block
//! iteration and train/test splitting.

pub mod libsvm;
mod simulate;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use libsvm::{
    load_libsvm, parse_libsvm_line, read_libsvm, ParseError, ParseErrorKind, SparseRow,
};
pub use simulate::{make_toeplitz_cov, sample_theta_star, GaussianLinearSource};

use crate::error::{Error, Result};
use crate::models::LabeledSample;
use crate::Scalar;

/// Generator used for every random draw in the crate.
pub type SampleRng = ChaCha8Rng;

/// Independent stream `index` of the generator seeded with `seed`.
pub fn replication_rng(seed: u64, index: u64) -> SampleRng {
    let mut rng = SampleRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// In-memory labeled dataset with a fixed dense dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub samples: Vec<LabeledSample<T>>,
    pub dim: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Consecutive non-overlapping blocks of `n` items; a trailing partial block
/// is dropped.
#[derive(Debug, Clone)]
pub struct BlockIter<I> {
    inner: I,
    n: usize,
}

impl<I: Iterator> Iterator for BlockIter<I> {
    type Item = Vec<I::Item>;

    fn next(&mut self) -> Option<Self::Item> {
        let block: Vec<_> = self.inner.by_ref().take(self.n).collect();
        (block.len() == self.n).then_some(block)
    }
}

pub fn block_iter<I: Iterator>(stream: I, n: usize) -> Result<BlockIter<I>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "block size must be at least 1".into(),
        ));
    }
    Ok(BlockIter { inner: stream, n })
}

/// `floor(sqrt(d))`, at least 1.
pub fn sqrt_block_size(d: usize) -> usize {
    let mut r = (d as f64).sqrt() as usize;
    while r * r > d {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= d {
        r += 1;
    }
    r.max(1)
}

/// Shuffled split; the training part gets `round(fraction * total)` rows,
/// rounding halves up, so an odd total split at 0.5 gives train the extra row.
pub fn train_test_split<T: Scalar>(
    data: &Dataset<T>,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let total = data.len();
    let n_train = (fraction * total as f64 + 0.5).floor() as usize;
    if n_train == 0 || n_train >= total {
        return Err(Error::InvalidArgument(format!(
            "split of {total} rows at {fraction} leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut SampleRng::seed_from_u64(seed));
    let pick = |idx: &[usize]| Dataset {
        samples: idx.iter().map(|&i| data.samples[i].clone()).collect(),
        dim: data.dim,
    };
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;

    fn dataset(n: usize) -> Dataset<f64> {
        Dataset {
            samples: (0..n)
                .map(|i| LabeledSample::new(Vector::from_vec(vec![i as f64]), 0.0))
                .collect(),
            dim: 1,
        }
    }

    #[test]
    fn blocks_drop_remainder() {
        assert_eq!(block_iter(0..10, 1).unwrap().count(), 10);
        let blocks: Vec<_> = block_iter(0..10, 4).unwrap().collect();
        assert_eq!(blocks, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
        assert!(block_iter(0..10, 0).is_err());
    }

    #[test]
    fn sqrt_block_sizes() {
        assert_eq!(sqrt_block_size(200), 14);
        assert_eq!(sqrt_block_size(400), 20);
        assert_eq!(sqrt_block_size(1), 1);
        assert_eq!(sqrt_block_size(0), 1);
        assert_eq!(sqrt_block_size(99), 9);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = dataset(100);
        let (a, b) = train_test_split(&d, 0.5, 3).unwrap();
        assert_eq!((a.len(), b.len()), (50, 50));
        let (a2, _) = train_test_split(&d, 0.5, 3).unwrap();
        assert_eq!(a, a2);
        let (c, _) = train_test_split(&d, 0.5, 4).unwrap();
        assert_ne!(a, c);
        let (odd_train, odd_test) = train_test_split(&dataset(101), 0.5, 1).unwrap();
        assert_eq!((odd_train.len(), odd_test.len()), (51, 50));
    }

    #[test]
    fn split_partitions_rows() {
        let (a, b) = train_test_split(&dataset(37), 0.3, 9).unwrap();
        let mut seen: Vec<f64> = a.samples.iter().chain(&b.samples).map(|s| s.x[0]).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, (0..37).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_degenerate() {
        assert!(train_test_split(&dataset(10), 0.0, 1).is_err());
        assert!(train_test_split(&dataset(10), 1.0, 1).is_err());
        assert!(train_test_split(&dataset(1), 0.5, 1).is_err());
    }

    #[test]
    fn replication_streams_differ() {
        use rand::Rng;
        let a: u64 = replication_rng(7, 0).random();
        let b: u64 = replication_rng(7, 1).random();
        let a2: u64 = replication_rng(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}
