//! Limiting eigenvalue density of the sample covariance matrix of
//! cylindrically isotropic noise on a uniform line array.
//!
//! The pipeline:
//!
//! 1. [`ecm`] builds the Bessel-kernel Toeplitz covariance `J0(2πζ|p−q|)`
//!    and its spectrum.
//! 2. [`spike`] partitions that spectrum against the spiked-covariance
//!    thresholds and collapses it into a handful of weighted atoms.
//! 3. [`rmt`] multiplies the atomic population measure by a Wishart
//!    (Marčenko–Pastur) matrix through the Stieltjes self-consistency
//!    equation and reads off the density.
//! 4. [`mc`] simulates snapshots and pools sample covariance eigenvalues,
//!    and [`report`] scores the prediction against the simulation.

pub mod ecm;
pub mod error;
pub mod linalg;
pub mod mc;
pub mod report;
pub mod rmt;
pub mod specfun;
pub mod spike;

pub use ecm::{build_ecm, ensemble_spectrum, szego_density, ArrayNoiseConfig, EnsembleSpectrum};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, Polynomial, SymmetricMatrix};
pub use mc::{run_mc, EmpiricalSpectrum, McConfig};
pub use report::{compare, model_cdf, Agreement, ComparisonReport};
pub use rmt::{
    default_grid, density_curve, population_measure, predict_edf, predict_from_measure,
    stieltjes_at, FmcProblem, GridOptions, ModelMode, Prediction, SpectralDensity,
    StieltjesPolynomial,
};
pub use specfun::{bessel_j0, mp_density, zero_atom_mass, MpParams};
pub use spike::{classify, full_measure, reduce, AtomicMeasure, MeasureKind, SpikeClassification};

pub use num_complex::Complex64;
