//! Monte Carlo ground truth: correlated complex Gaussian snapshots, sample
//! covariance matrices and pooled eigenvalues.
//!
//! Every trial draws from its own ChaCha8 stream keyed by `(seed, trial)`,
//! so trials run in any order on any number of workers and still merge
//! into bit-identical output.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ecm::{build_ecm, ArrayNoiseConfig};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, sqrt_psd, ComplexMatrix, SymmetricMatrix};

pub const DEFAULT_BINS: usize = 75;

/// Relative threshold (against the trial's largest eigenvalue) below which
/// an eigenvalue counts as an exact zero.
pub const ZERO_CLAMP: f64 = 1e-9;

/// Independent random stream for one trial.
#[derive(Debug, Clone)]
pub struct TrialStream {
    rng: ChaCha8Rng,
}

impl TrialStream {
    pub fn new(seed: u64, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        Self { rng }
    }

    /// Uniform on the open interval (0, 1).
    fn open_unit(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Circular complex Gaussian with `E|g|² = 1` via Box–Muller.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let u1 = self.open_unit();
        let u2 = self.open_unit();
        // Real and imaginary parts each carry variance ½.
        let r = (-u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        Complex64::new(r * theta.cos(), r * theta.sin())
    }
}

/// `n × l` matrix of independent circular complex Gaussians, unit variance.
pub fn gaussian_snapshots(n: usize, l: usize, stream: &mut TrialStream) -> Result<ComplexMatrix> {
    if n == 0 || l == 0 {
        return Err(Error::InvalidParameter(format!(
            "snapshot matrix must be non-empty, got {n}x{l}"
        )));
    }
    let entries = (0..n * l).map(|_| stream.complex_gaussian()).collect();
    ComplexMatrix::new(n, l, entries)
}

/// Eigenvalues (descending) of `(1/L)·(Σ^{1/2}G)(Σ^{1/2}G)ᴴ` for one draw of `G`.
pub fn scm_eigenvalues(
    sigma_half: &SymmetricMatrix,
    l: usize,
    stream: &mut TrialStream,
) -> Result<Vec<f64>> {
    let g = gaussian_snapshots(sigma_half.order(), l, stream)?;
    let x = g.left_mul_real(sigma_half);
    hermitian_eigenvalues(&x.gram(1.0 / l as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub array: ArrayNoiseConfig,
    pub snapshots: usize,
    pub trials: usize,
    pub seed: u64,
    pub bins: usize,
}

impl McConfig {
    pub fn new(
        array: ArrayNoiseConfig,
        snapshots: usize,
        trials: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            array,
            snapshots,
            trials,
            seed,
            bins: DEFAULT_BINS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_bins(mut self, bins: usize) -> Result<Self> {
        self.bins = bins;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.snapshots == 0 || self.trials == 0 || self.bins == 0 {
            return Err(Error::InvalidParameter(
                "snapshots, trials and bins must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Aspect ratio `N/L`.
    pub fn c(&self) -> f64 {
        self.array.n() as f64 / self.snapshots as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub heights: Vec<f64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn area(&self) -> f64 {
        self.edges
            .windows(2)
            .zip(&self.heights)
            .map(|(w, h)| (w[1] - w[0]) * h)
            .sum()
    }

    /// Piecewise-linear interpolation through the bin centers, zero outside
    /// the histogram range.
    pub fn interpolate(&self, x: f64) -> f64 {
        let centers = self.centers();
        let lo = self.edges[0];
        let hi = self.edges[self.edges.len() - 1];
        if x < lo || x > hi {
            return 0.0;
        }
        let last = centers.len() - 1;
        if x <= centers[0] {
            return self.heights[0];
        }
        if x >= centers[last] {
            return self.heights[last];
        }
        let i = centers.partition_point(|&c| c <= x);
        let t = (x - centers[i - 1]) / (centers[i] - centers[i - 1]);
        self.heights[i - 1] * (1.0 - t) + self.heights[i] * t
    }
}

/// Pooled sample covariance eigenvalues across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSpectrum {
    /// Ascending, zeros clamped to exactly 0.
    pub pooled: Vec<f64>,
    /// Per-trial eigenvalues (descending) in trial order.
    pub per_trial: Vec<Vec<f64>>,
    pub trials: usize,
    pub zero_count: usize,
    pub histogram: Histogram,
}

impl EmpiricalSpectrum {
    /// Assembles the pooled view from per-trial eigenvalue lists.
    pub fn from_trials(mut per_trial: Vec<Vec<f64>>, bins: usize) -> Result<Self> {
        if per_trial.is_empty() || per_trial.iter().any(|t| t.is_empty()) || bins == 0 {
            return Err(Error::InvalidParameter(
                "need at least one non-empty trial and one bin".into(),
            ));
        }
        let mut zero_count = 0;
        for trial in per_trial.iter_mut() {
            let max = trial.iter().cloned().fold(0.0, f64::max);
            for g in trial.iter_mut() {
                if *g < ZERO_CLAMP * max {
                    *g = 0.0;
                    zero_count += 1;
                }
            }
        }
        let mut pooled: Vec<f64> = per_trial.iter().flatten().copied().collect();
        pooled.sort_by(f64::total_cmp);
        let total = pooled.len() as f64;
        let max = pooled[pooled.len() - 1];
        let top = if max > 0.0 { 1.05 * max } else { 1.0 };
        let width = top / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| i as f64 * width).collect();
        let mut counts = vec![0usize; bins];
        for &g in pooled.iter().filter(|&&g| g > 0.0) {
            let b = ((g / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let heights = counts.iter().map(|&k| k as f64 / (total * width)).collect();
        Ok(Self {
            pooled,
            trials: per_trial.len(),
            per_trial,
            zero_count,
            histogram: Histogram { edges, heights },
        })
    }

    pub fn len(&self) -> usize {
        self.pooled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pooled.is_empty()
    }

    pub fn zero_fraction(&self) -> f64 {
        self.zero_count as f64 / self.pooled.len() as f64
    }

    /// Fraction of pooled eigenvalues `≤ x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.pooled.partition_point(|&g| g <= x) as f64 / self.pooled.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.pooled.iter().sum::<f64>() / self.pooled.len() as f64
    }
}

/// Runs all trials (in parallel on the current rayon pool) and pools them.
pub fn run_mc(mc: &McConfig) -> Result<EmpiricalSpectrum> {
    mc.validate()?;
    let sigma_half = sqrt_psd(&build_ecm(&mc.array)?)?;
    let per_trial = (0..mc.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut stream = TrialStream::new(mc.seed, trial);
            scm_eigenvalues(&sigma_half, mc.snapshots, &mut stream)
        })
        .collect::<Result<Vec<_>>>()?;
    EmpiricalSpectrum::from_trials(per_trial, mc.bins)
}
