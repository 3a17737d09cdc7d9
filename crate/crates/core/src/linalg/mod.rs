//! Dense vector and symmetric-matrix kernels.
//!
//! Every matrix kernel bumps a thread-local counter tagged with its cost class
//! (`O(d^2)` or `O(d^3)`), so tests can assert what an optimizer step touches.

mod counters;
mod eigen;
mod sym;
mod vector;

pub use counters::{kernel_counts, reset_kernel_counts, KernelCounts};
pub use eigen::{
    cholesky, eig_extremes, inv_sqrt_eig, sym_eigen, Cholesky, SymEigen, PD_TOLERANCE,
};
pub use sym::{frobenius_distance, mat_vec, quad_form, SymMatrix};
pub use vector::Vector;
