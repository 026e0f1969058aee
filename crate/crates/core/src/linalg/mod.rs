//! Sparse and dense Hermitian linear algebra.

pub mod dense;
pub mod eigen;
pub mod ldl;
pub mod ordering;
pub mod sparse;

pub use dense::{hermitian_eigen, hermitian_eigenvalues, HermitianEigen, Mat};
pub use eigen::{EigenOptions, Eigenpairs};
pub use ldl::{Inertia, LdlFactor, Symbolic};
pub use sparse::SparseHermitian;
