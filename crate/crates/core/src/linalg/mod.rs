//! Dense linear algebra owned end to end: a cyclic Jacobi symmetric
//! eigensolver, Hermitian eigenvalues through the real embedding, the PSD
//! square root, and companion-matrix polynomial roots.

mod jacobi;
mod matrix;
mod roots;

pub use jacobi::{hermitian_eigenvalues, sqrt_psd, sym_eigen, sym_eigenvalues};
pub use matrix::{ComplexMatrix, SymmetricMatrix};
pub use roots::{poly_roots, Polynomial};

/// Sweep cap for the cyclic Jacobi solver.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Iteration cap per degree for the Hessenberg QR root finder.
pub const QR_ITERATIONS_PER_DEGREE: usize = 100;
