//! Ensemble covariance of cylindrically isotropic noise on a uniform line
//! array and its spectrum.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, SymmetricMatrix};
use crate::specfun::bessel_j0;

/// Half-wavelength sensor spacing.
pub const DEFAULT_ZETA: f64 = 0.5;

/// Relative tolerance for clamping slightly negative eigenvalues.
const NEGATIVE_CLAMP_TOL: f64 = 1e-10;

/// Array geometry: `n` sensors spaced `zeta` wavelengths apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayNoiseConfig {
    n: usize,
    zeta: f64,
}

impl ArrayNoiseConfig {
    pub fn new(n: usize, zeta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "sensor count must be >= 2, got {n}"
            )));
        }
        if !(zeta.is_finite() && zeta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "zeta must be > 0, got {zeta}"
            )));
        }
        Ok(Self { n, zeta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Phase advance per sensor index, `2π·ζ`.
    pub fn alpha(&self) -> f64 {
        2.0 * PI * self.zeta
    }
}

/// Ensemble eigenvalues `γ_1 ≥ … ≥ γ_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpectrum {
    values: Vec<f64>,
}

impl EnsembleSpectrum {
    /// Wraps eigenvalues in any order. Values down to `−1e-10·γ_1` are
    /// clamped to zero; more negative values are rejected.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("spectrum must be nonempty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "spectrum values must be finite".into(),
            ));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        let floor = -NEGATIVE_CLAMP_TOL * values[0].abs();
        if let Some(&min) = values.last() {
            if min < floor {
                return Err(Error::NotPsd {
                    min_eigenvalue: min,
                    max_eigenvalue: values[0],
                });
            }
        }
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self { values })
    }

    /// Descending eigenvalues.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    /// Background level `γ_N`.
    pub fn smallest(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Toeplitz covariance with entries `J0(2πζ|p − q|)`.
pub fn build_ecm(cfg: &ArrayNoiseConfig) -> Result<SymmetricMatrix> {
    let alpha = cfg.alpha();
    let first_row = (0..cfg.n)
        .map(|k| bessel_j0(alpha * k as f64))
        .collect::<Result<Vec<f64>>>()?;
    SymmetricMatrix::from_fn(cfg.n, |p, q| first_row[p.abs_diff(q)])
}

pub fn ensemble_spectrum(cfg: &ArrayNoiseConfig) -> Result<EnsembleSpectrum> {
    let ecm = build_ecm(cfg)?;
    EnsembleSpectrum::from_values(sym_eigenvalues(&ecm)?)
}

/// Fourier transform `F(ω) = 2/√(α² − ω²)` of the kernel row; the limiting
/// profile of the Toeplitz eigenvalues.
pub fn szego_density(omega: f64, cfg: &ArrayNoiseConfig) -> Result<f64> {
    let alpha = cfg.alpha();
    if !omega.is_finite() || omega.abs() >= alpha {
        return Err(Error::Domain(format!(
            "|omega| must be < alpha = {alpha}, got {omega}"
        )));
    }
    Ok(2.0 / (alpha * alpha - omega * omega).sqrt())
}
