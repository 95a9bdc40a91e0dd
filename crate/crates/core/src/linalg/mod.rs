//! Linear algebra: per-node small dense kernels, sparse storage and direct
//! solvers (faer), and the generalized symmetric eigen solver.

pub mod dirichlet;
pub mod eigen;
pub mod small;
pub mod sparse;

pub use dirichlet::{dirichlet_stiffness, lumped_mass};
pub use eigen::{dense_eigenvalues, lowest_eigenpairs, EigenOptions, EigenPairs};
pub use sparse::{lu_solve, nested_dissection, CscMatrix, SpdFactor, SpdSymbolic};
