//! Distances between two predicted densities and random test problems.

use iso_edf::report::ModelCdf;
use iso_edf::spike::{Atom, MeasureKind};
use iso_edf::{AtomicMeasure, FmcProblem, SpectralDensity};
use rand::Rng;

/// Sup distance between two model CDFs, checked at zero and every grid point
/// of either density.
pub fn cdf_distance(a: &SpectralDensity, b: &SpectralDensity) -> f64 {
    let (ca, cb) = (ModelCdf::new(a), ModelCdf::new(b));
    a.grid
        .iter()
        .chain(&b.grid)
        .chain(std::iter::once(&0.0))
        .map(|&x| (ca.eval(x) - cb.eval(x)).abs())
        .fold(0.0, f64::max)
}

/// `∫|f_a − f_b|` by trapezoid on the union of both grids.
pub fn density_l1(a: &SpectralDensity, b: &SpectralDensity) -> f64 {
    let mut xs: Vec<f64> = a.grid.iter().chain(&b.grid).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.windows(2)
        .map(|w| {
            let d0 = (a.value_at(w[0]) - b.value_at(w[0])).abs();
            let d1 = (a.value_at(w[1]) - b.value_at(w[1])).abs();
            0.5 * (w[1] - w[0]) * (d0 + d1)
        })
        .sum()
}

/// Up to eight atoms in `[0.2, 8)` rescaled to unit mean, with `c ∈ [0.1, 2)`.
pub fn random_problem(rng: &mut impl Rng) -> FmcProblem {
    let k = rng.random_range(1..=8);
    let raw: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random_range(0.2..8.0), rng.random_range(0.05..1.0)))
        .collect();
    let total: f64 = raw.iter().map(|a| a.1).sum();
    let mean: f64 = raw.iter().map(|a| a.0 * a.1).sum::<f64>() / total;
    let mut atoms: Vec<Atom> = raw
        .iter()
        .map(|&(t, w)| Atom {
            location: t / mean,
            weight: w / total,
        })
        .collect();
    let rest: f64 = atoms[1..].iter().map(|a| a.weight).sum();
    atoms[0].weight = 1.0 - rest;
    let c = rng.random_range(0.1..2.0);
    FmcProblem::new(
        AtomicMeasure::new(atoms, MeasureKind::Full).expect("valid atoms"),
        c,
    )
    .expect("positive c")
}
