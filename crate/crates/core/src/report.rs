//! Model-versus-simulation scoring and the JSON report.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mc::{EmpiricalSpectrum, McConfig};
use crate::rmt::{ModelMode, Prediction, SpectralDensity};

/// Cumulative distribution of a [`SpectralDensity`], renormalized so it
/// reaches exactly one at the end of the grid.
#[derive(Debug, Clone)]
pub struct ModelCdf<'a> {
    density: &'a SpectralDensity,
    /// Unnormalized cumulative mass at each grid point (zero atom included).
    cumulative: Vec<f64>,
    tail: f64,
    total: f64,
}

impl<'a> ModelCdf<'a> {
    pub fn new(density: &'a SpectralDensity) -> Self {
        let tail = density.origin_tail();
        let mut cumulative = Vec::with_capacity(density.grid.len());
        let mut acc = density.zero_mass + tail;
        cumulative.push(acc);
        for (x, f) in density.grid.windows(2).zip(density.values.windows(2)) {
            acc += 0.5 * (x[1] - x[0]) * (f[0] + f[1]);
            cumulative.push(acc);
        }
        let total = acc;
        Self {
            density,
            cumulative,
            tail,
            total,
        }
    }

    /// Mass before renormalization.
    pub fn raw_total(&self) -> f64 {
        self.total
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let d = self.density;
        let g = &d.grid;
        let x0 = g[0];
        let raw = if x < x0 {
            // Zero atom plus the x^{-1/2} tail below the grid.
            let frac = if x0 > 0.0 {
                (x / x0).max(0.0).sqrt()
            } else {
                1.0
            };
            d.zero_mass + self.tail * frac
        } else if x >= g[g.len() - 1] {
            self.total
        } else {
            let i = g.partition_point(|&v| v <= x) - 1;
            let h = g[i + 1] - g[i];
            let s = x - g[i];
            let (f0, f1) = (d.values[i], d.values[i + 1]);
            // Exact integral of the linear interpolant over [g_i, x].
            self.cumulative[i] + s * f0 + 0.5 * s * s * (f1 - f0) / h
        };
        (raw / self.total).clamp(0.0, 1.0)
    }
}

/// Model CDF at `x`: zero atom for `x ≥ 0` plus the integrated density.
pub fn model_cdf(d: &SpectralDensity, x: f64) -> f64 {
    ModelCdf::new(d).eval(x)
}

/// Distances between a model density and a simulated spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Sup distance between model CDF and empirical CDF.
    pub ks: f64,
    /// `∫|f_model − f_hist| dx` on the model grid.
    pub l1: f64,
    pub zero_mass_model: f64,
    pub zero_frac_empirical: f64,
}

/// Kolmogorov distance between `cdf` and the empirical distribution of the
/// ascending `samples`, evaluated on both sides of every jump.
pub fn ks_distance(
    cdf: impl Fn(f64) -> f64,
    left_limit: impl Fn(f64) -> f64,
    samples: &[f64],
) -> f64 {
    let n = samples.len() as f64;
    let mut ks: f64 = 0.0;
    let mut i = 0;
    while i < samples.len() {
        let v = samples[i];
        let mut j = i + 1;
        while j < samples.len() && samples[j] == v {
            j += 1;
        }
        let before = i as f64 / n;
        let after = j as f64 / n;
        ks = ks
            .max((left_limit(v) - before).abs())
            .max((cdf(v) - after).abs());
        i = j;
    }
    ks
}

pub fn compare(model: &SpectralDensity, emp: &EmpiricalSpectrum) -> Agreement {
    let cdf = ModelCdf::new(model);
    // The model CDF only jumps at zero.
    let left = |x: f64| if x == 0.0 { 0.0 } else { cdf.eval(x) };
    let ks = ks_distance(|x| cdf.eval(x), left, &emp.pooled);

    let diff: Vec<f64> = model
        .grid
        .iter()
        .zip(&model.values)
        .map(|(&x, &f)| (f - emp.histogram.interpolate(x)).abs())
        .collect();
    let l1 = crate::rmt::trapezoid(&model.grid, &diff);

    Agreement {
        ks,
        l1,
        zero_mass_model: model.zero_mass,
        zero_frac_empirical: emp.zero_fraction(),
    }
}

/// Flat report with stable key names for downstream parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n: usize,
    pub zeta: f64,
    pub c: f64,
    pub mode: ModelMode,
    pub atom_count: usize,
    pub ks: f64,
    pub l1: f64,
    pub zero_mass_model: f64,
    pub zero_frac_empirical: f64,
    pub runtime_model_ms: f64,
    pub runtime_mc_ms: f64,
    pub seed: u64,
}

impl ComparisonReport {
    pub fn assemble(
        prediction: &Prediction,
        mc: &McConfig,
        agreement: Agreement,
        runtime_mc_ms: f64,
    ) -> Self {
        Self {
            n: mc.array.n(),
            zeta: mc.array.zeta(),
            c: prediction.c,
            mode: prediction.mode,
            atom_count: prediction.atom_count(),
            ks: agreement.ks,
            l1: agreement.l1,
            zero_mass_model: agreement.zero_mass_model,
            zero_frac_empirical: agreement.zero_frac_empirical,
            runtime_model_ms: prediction.wall_ms,
            runtime_mc_ms,
            seed: mc.seed,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(
            serde_json::to_string_pretty(self)
                .expect("report fields are plain numbers and strings"),
        )
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mc::EmpiricalSpectrum;
    use crate::rmt::{default_grid, density_curve, FmcProblem, DEFAULT_ETA};
    use crate::specfun::{mp_density, MpParams};
    use crate::spike::AtomicMeasure;

    fn mp_model(c: f64) -> SpectralDensity {
        let p = FmcProblem::new(AtomicMeasure::point(1.0).unwrap(), c).unwrap();
        density_curve(&p, &default_grid(&p, 2000).unwrap(), DEFAULT_ETA).unwrap()
    }

    /// Inverse-CDF sampling from the model itself.
    fn sample_model(d: &SpectralDensity, count: usize, seed: u64) -> Vec<f64> {
        let cdf = ModelCdf::new(d);
        let hi = *d.grid.last().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out: Vec<f64> = (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                if u < cdf.eval(0.0) {
                    return 0.0;
                }
                let (mut a, mut b) = (0.0, hi);
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    if cdf.eval(mid) < u {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                0.5 * (a + b)
            })
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }

    #[test]
    fn cdf_edges() {
        let d = mp_model(0.25);
        assert_eq!(model_cdf(&d, -1.0), 0.0);
        // Only the η-Lorentzian tails sit below the support.
        assert!(model_cdf(&d, 0.01) < 1e-6);
        assert_eq!(model_cdf(&d, 100.0), 1.0);
        let c15 = mp_model(1.5);
        assert!((model_cdf(&c15, 0.0) - 1.0 / 3.0).abs() < 5e-3);
    }

    #[test]
    fn mp_median() {
        // Bisection on the integrated closed-form density: 0.9160040706866120.
        let d = mp_model(0.25);
        assert!((model_cdf(&d, 0.916_004_070_686_612) - 0.5).abs() < 1e-2);
    }

    #[test]
    fn cdf_monotone() {
        for c in [0.25, 1.0, 1.5] {
            let d = mp_model(c);
            let mut prev = 0.0;
            for i in 0..5000 {
                let v = model_cdf(&d, -0.1 + i as f64 * 0.002);
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn cdf_agrees_with_closed_form_integral() {
        let d = mp_model(0.5);
        let params = MpParams::unit(0.5).unwrap();
        let (a, _) = params.support();
        let x = 1.2;
        let n = 200_000;
        let h = (x - a) / n as f64;
        let exact: f64 = (0..n)
            .map(|i| mp_density(a + (i as f64 + 0.5) * h, params) * h)
            .sum();
        assert!((model_cdf(&d, x) - exact).abs() < 2e-3);
    }

    #[test]
    fn self_consistency_ks() {
        let d = mp_model(1.5);
        let samples = sample_model(&d, 100_000, 17);
        let emp =
            EmpiricalSpectrum::from_trials(vec![samples.into_iter().rev().collect()], 75).unwrap();
        let agreement = compare(&d, &emp);
        assert!(agreement.ks <= 0.01, "ks = {}", agreement.ks);
        assert!((agreement.zero_frac_empirical - 1.0 / 3.0).abs() < 1e-2);
        assert!(agreement.l1 < 0.1, "l1 = {}", agreement.l1);
    }

    #[test]
    fn disjoint_supports() {
        let d = mp_model(0.25);
        let samples: Vec<f64> = (0..1000).map(|i| 100.0 + i as f64 * 1e-3).collect();
        let emp = EmpiricalSpectrum::from_trials(vec![samples], 20).unwrap();
        let agreement = compare(&d, &emp);
        assert!(agreement.ks > 0.99);
    }

    #[test]
    fn ks_invariant_under_sample_order() {
        let d = mp_model(0.5);
        let samples = sample_model(&d, 2000, 3);
        let mut shuffled = samples.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for i in (1..shuffled.len()).rev() {
            let j = rng.random_range(0..=i);
            shuffled.swap(i, j);
        }
        let a = compare(
            &d,
            &EmpiricalSpectrum::from_trials(vec![samples], 50).unwrap(),
        );
        let b = compare(
            &d,
            &EmpiricalSpectrum::from_trials(vec![shuffled], 50).unwrap(),
        );
        assert_eq!(a.ks, b.ks);
    }

    #[test]
    fn ks_matches_brute_force() {
        let d = mp_model(0.25);
        let mut samples = sample_model(&d, 40, 5);
        samples.iter_mut().for_each(|x| *x *= 1.03);
        let emp = EmpiricalSpectrum::from_trials(vec![samples.clone()], 10).unwrap();
        let ks = compare(&d, &emp).ks;

        // Sup over a fine grid refined 10× between consecutive samples, with
        // one-sided limits approached from both sides of every sample.
        let ecdf =
            |x: f64| samples.iter().filter(|&&s| s <= x).count() as f64 / samples.len() as f64;
        let mut pts = vec![];
        let lo = samples[0] - 0.5;
        let hi = samples[samples.len() - 1] + 0.5;
        let mut knots = vec![lo];
        knots.extend(&samples);
        knots.push(hi);
        for w in knots.windows(2) {
            for k in 0..=10 {
                pts.push(w[0] + (w[1] - w[0]) * k as f64 / 10.0);
            }
            pts.push(w[1] - 1e-12);
        }
        let brute = pts
            .iter()
            .map(|&x| (model_cdf(&d, x) - ecdf(x)).abs())
            .fold(0.0, f64::max);
        assert!((brute - ks).abs() <= 1e-6, "brute {brute} vs {ks}");
    }

    #[test]
    fn report_json_keys() {
        use crate::ecm::ArrayNoiseConfig;
        use crate::rmt::{predict_edf, GridOptions};
        let array = ArrayNoiseConfig::new(8, 0.5).unwrap();
        let pred = predict_edf(
            &array,
            0.5,
            ModelMode::Reduced,
            GridOptions {
                points: 200,
                eta: 1e-6,
            },
        )
        .unwrap();
        let mc = McConfig::new(array, 16, 2, 1).unwrap();
        let report = ComparisonReport::assemble(
            &pred,
            &mc,
            Agreement {
                ks: 0.1,
                l1: 0.2,
                zero_mass_model: 0.0,
                zero_frac_empirical: 0.0,
            },
            3.0,
        );
        let v: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in [
            "n",
            "zeta",
            "c",
            "mode",
            "atom_count",
            "ks",
            "l1",
            "zero_mass_model",
            "zero_frac_empirical",
            "runtime_model_ms",
            "runtime_mc_ms",
            "seed",
        ] {
            assert!(keys.contains(&k), "missing {k}");
        }
        assert_eq!(keys.len(), 12);
        assert_eq!(v["mode"], "reduced");
    }
}
