//! Spiked-covariance bookkeeping: split the ensemble spectrum at the
//! background-scaled thresholds `γ_N(1+√c)` and `γ_N(1+√c)²`, then collapse
//! it into a small atomic measure.
//!
//! Eigenvalues above the upper threshold stay as individual atoms of mass
//! `1/N`. Those between the thresholds collapse into one atom at the
//! midpoint of the thresholds, and the rest into one atom at `γ_N`.

use serde::{Deserialize, Serialize};

use crate::ecm::EnsembleSpectrum;
use crate::error::{Error, Result};

/// Tolerance on the total weight of an atomic measure.
const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Relative location tolerance (against the largest atom) for merging.
const MERGE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Reduced,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Finite probability measure made of weighted point masses, stored with
/// strictly increasing locations.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
    kind: MeasureKind,
}

impl AtomicMeasure {
    /// Sorts the atoms, merges coincident locations (within `1e-10` of the
    /// largest location) and validates the weights.
    pub fn new(mut atoms: Vec<Atom>, kind: MeasureKind) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter(
                "atomic measure needs at least one atom".into(),
            ));
        }
        for a in &atoms {
            if !(a.location.is_finite() && a.location >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "atom location {} must be finite and >= 0",
                    a.location
                )));
            }
            if !(a.weight > 0.0 && a.weight <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "atom weight {} must lie in (0, 1]",
                    a.weight
                )));
            }
        }
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        let tol = MERGE_TOL * atoms[atoms.len() - 1].location;
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if a.location - last.location <= tol => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        let total: f64 = merged.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "atom weights sum to {total}, not 1"
            )));
        }
        Ok(Self {
            atoms: merged,
            kind,
        })
    }

    /// Single unit atom at `location`.
    pub fn point(location: f64) -> Result<Self> {
        Self::new(
            vec![Atom {
                location,
                weight: 1.0,
            }],
            MeasureKind::Full,
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.location).sum()
    }

    pub fn min_location(&self) -> f64 {
        self.atoms[0].location
    }

    pub fn max_location(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].location
    }
}

/// Where the collapsed mid-band atom sits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MidAtom {
    /// `γ_N·((1+√c) + (1+√c)²)/2`, the midpoint of the scaled thresholds.
    #[default]
    ScaledMidpoint,
    /// Explicit location.
    At(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeClassification {
    /// Eigenvalues above `t_high`, descending.
    pub gamma_dist: Vec<f64>,
    pub n_mid: usize,
    pub n_low: usize,
    pub gamma_mid: f64,
    pub gamma_n: f64,
    pub t_low: f64,
    pub t_high: f64,
}

impl SpikeClassification {
    /// Number of atoms [`reduce`] will emit.
    pub fn atom_count(&self) -> usize {
        self.gamma_dist.len() + usize::from(self.n_mid > 0) + usize::from(self.n_low > 0)
    }
}

pub fn classify(spectrum: &EnsembleSpectrum, c: f64) -> Result<SpikeClassification> {
    classify_with(spectrum, c, MidAtom::ScaledMidpoint)
}

/// Partitions the spectrum. Ties follow the strict/non-strict inequalities
/// of the model: `γ = t_low` counts as low, `γ = t_high` as mid.
pub fn classify_with(
    spectrum: &EnsembleSpectrum,
    c: f64,
    mid: MidAtom,
) -> Result<SpikeClassification> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "aspect ratio c must be > 0, got {c}"
        )));
    }
    let gamma_n = spectrum.smallest();
    if gamma_n <= 0.0 {
        return Err(Error::DegenerateSpectrum(format!(
            "smallest eigenvalue {gamma_n} is not positive"
        )));
    }
    let r = 1.0 + c.sqrt();
    let t_low = gamma_n * r;
    let t_high = gamma_n * r * r;

    let mut gamma_dist = Vec::new();
    let mut n_mid = 0;
    let mut n_low = 0;
    for &g in spectrum.values() {
        if g > t_high {
            gamma_dist.push(g);
        } else if g > t_low {
            n_mid += 1;
        } else {
            n_low += 1;
        }
    }
    let gamma_mid = match mid {
        MidAtom::ScaledMidpoint => 0.5 * (t_low + t_high),
        MidAtom::At(x) => {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "mid atom location must be > 0, got {x}"
                )));
            }
            x
        }
    };
    Ok(SpikeClassification {
        gamma_dist,
        n_mid,
        n_low,
        gamma_mid,
        gamma_n,
        t_low,
        t_high,
    })
}

/// Reduced atomic model: distinct spikes at `1/N` each, plus the mid and
/// low atoms when their counts are nonzero.
pub fn reduce(cls: &SpikeClassification, n: usize) -> Result<AtomicMeasure> {
    let total = cls.gamma_dist.len() + cls.n_mid + cls.n_low;
    if total != n {
        return Err(Error::Contract(format!(
            "classification covers {total} eigenvalues, expected {n}"
        )));
    }
    let nf = n as f64;
    let mut atoms: Vec<Atom> = cls
        .gamma_dist
        .iter()
        .map(|&g| Atom {
            location: g,
            weight: 1.0 / nf,
        })
        .collect();
    if cls.n_mid > 0 {
        atoms.push(Atom {
            location: cls.gamma_mid,
            weight: cls.n_mid as f64 / nf,
        });
    }
    if cls.n_low > 0 {
        atoms.push(Atom {
            location: cls.gamma_n,
            weight: cls.n_low as f64 / nf,
        });
    }
    AtomicMeasure::new(atoms, MeasureKind::Reduced)
}

/// Every ensemble eigenvalue as an atom of mass `1/N`.
pub fn full_measure(spectrum: &EnsembleSpectrum) -> Result<AtomicMeasure> {
    let w = 1.0 / spectrum.n() as f64;
    let atoms = spectrum
        .values()
        .iter()
        .map(|&g| Atom {
            location: g,
            weight: w,
        })
        .collect();
    AtomicMeasure::new(atoms, MeasureKind::Full)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;
    use crate::ecm::{ensemble_spectrum, ArrayNoiseConfig};

    fn reference_spectrum() -> EnsembleSpectrum {
        ensemble_spectrum(&ArrayNoiseConfig::new(51, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn reference_thresholds() {
        let cls = classify(&reference_spectrum(), 0.25).unwrap();
        assert!((cls.t_high - 2.0 / PI * 2.25).abs() < 1e-3);
        assert!((cls.t_low - 2.0 / PI * 1.5).abs() < 1e-3);
        assert!((cls.gamma_mid - 2.0 / PI * 3.75 / 2.0).abs() < 1e-3);
        assert_eq!(cls.gamma_dist.len() + cls.n_mid + cls.n_low, 51);
        assert!(cls.gamma_dist.iter().all(|&g| g > cls.t_high));
        // The three dominant eigenvalues are always distinct.
        assert!(cls.gamma_dist.len() >= 3);
    }

    #[test]
    fn partition_matches_independent_count() {
        // Frozen from an independent numpy eigvalsh of the same Toeplitz
        // matrix: (|Γ_dist|, N_mid, N_low) per c.
        let expected = [
            (0.25, (5, 8, 38)),
            (0.5, (3, 7, 41)),
            (1.0, (2, 5, 44)),
            (1.5, (1, 5, 45)),
        ];
        let s = reference_spectrum();
        for (c, (d, m, l)) in expected {
            let cls = classify(&s, c).unwrap();
            assert_eq!(
                (cls.gamma_dist.len(), cls.n_mid, cls.n_low),
                (d, m, l),
                "c = {c}"
            );
        }
    }

    #[test]
    fn flat_spectrum_is_all_low() {
        let s = EnsembleSpectrum::from_values(vec![0.7; 10]).unwrap();
        let cls = classify(&s, 0.5).unwrap();
        assert!(cls.gamma_dist.is_empty());
        assert_eq!((cls.n_mid, cls.n_low), (0, 10));
        let m = reduce(&cls, 10).unwrap();
        assert_eq!(
            m.atoms(),
            &[Atom {
                location: 0.7,
                weight: 1.0
            }]
        );
        assert_eq!(m.kind(), MeasureKind::Reduced);
    }

    #[test]
    fn ties_follow_inequalities() {
        // c = 1: t_low = 2, t_high = 4 for γ_N = 1.
        let s = EnsembleSpectrum::from_values(vec![4.0, 2.0, 1.0]).unwrap();
        let cls = classify(&s, 1.0).unwrap();
        assert!(cls.gamma_dist.is_empty());
        assert_eq!((cls.n_mid, cls.n_low), (1, 2));
    }

    #[test]
    fn degenerate_spectrum_rejected() {
        let s = EnsembleSpectrum::from_values(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            classify(&s, 0.5),
            Err(Error::DegenerateSpectrum(_))
        ));
        let s = EnsembleSpectrum::from_values(vec![1.0]).unwrap();
        assert!(classify(&s, 0.0).is_err());
    }

    #[test]
    fn reduced_reference_measure() {
        let s = reference_spectrum();
        let cls = classify(&s, 0.25).unwrap();
        let m = reduce(&cls, 51).unwrap();
        assert_eq!(m.len(), cls.atom_count());
        assert_eq!(m.len(), cls.gamma_dist.len() + 2);
        assert!((m.total_weight() - 1.0).abs() < 1e-12);
        let spikes = m
            .atoms()
            .iter()
            .filter(|a| (a.weight - 1.0 / 51.0).abs() < 1e-15)
            .count();
        assert_eq!(spikes, cls.gamma_dist.len());
        assert!(m.atoms().windows(2).all(|w| w[0].location < w[1].location));
    }

    #[test]
    fn mid_atom_override() {
        let cls = classify_with(&reference_spectrum(), 0.25, MidAtom::At(1.0)).unwrap();
        assert_eq!(cls.gamma_mid, 1.0);
        assert!(classify_with(&reference_spectrum(), 0.25, MidAtom::At(-1.0)).is_err());
    }

    #[test]
    fn reduce_rejects_inconsistent_order() {
        let cls = classify(&reference_spectrum(), 0.25).unwrap();
        assert!(matches!(reduce(&cls, 50), Err(Error::Contract(_))));
    }

    #[test]
    fn full_measure_examples() {
        let m = full_measure(&EnsembleSpectrum::from_values(vec![3.0, 2.0, 1.0]).unwrap()).unwrap();
        let locs: Vec<f64> = m.atoms().iter().map(|a| a.location).collect();
        assert_eq!(locs, vec![1.0, 2.0, 3.0]);
        assert!(m
            .atoms()
            .iter()
            .all(|a| (a.weight - 1.0 / 3.0).abs() < 1e-15));

        let m = full_measure(&EnsembleSpectrum::from_values(vec![2.0, 2.0]).unwrap()).unwrap();
        assert_eq!(
            m.atoms(),
            &[Atom {
                location: 2.0,
                weight: 1.0
            }]
        );
        assert_eq!(m.kind(), MeasureKind::Full);
    }

    #[test]
    fn full_reference_measure_has_no_merges() {
        let s = reference_spectrum();
        let tol = MERGE_TOL * s.largest();
        assert!(s.values().windows(2).all(|w| w[0] - w[1] > tol));
        let m = full_measure(&s).unwrap();
        assert_eq!(m.len(), 51);
        assert!((m.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measure_validation() {
        let bad = vec![Atom {
            location: 1.0,
            weight: 0.5,
        }];
        assert!(AtomicMeasure::new(bad, MeasureKind::Full).is_err());
        let neg = vec![Atom {
            location: -1.0,
            weight: 1.0,
        }];
        assert!(AtomicMeasure::new(neg, MeasureKind::Full).is_err());
        let zero = vec![
            Atom {
                location: 1.0,
                weight: 1.0,
            },
            Atom {
                location: 2.0,
                weight: 0.0,
            },
        ];
        assert!(AtomicMeasure::new(zero, MeasureKind::Full).is_err());
        assert!(AtomicMeasure::new(vec![], MeasureKind::Full).is_err());
    }

    fn spectrum_strategy() -> impl Strategy<Value = EnsembleSpectrum> {
        prop::collection::vec(0.1f64..20.0, 1..60)
            .prop_map(|v| EnsembleSpectrum::from_values(v).unwrap())
    }

    proptest! {
        #[test]
        fn partition_and_mass(s in spectrum_strategy(), c in 0.01f64..4.0) {
            let cls = classify(&s, c).unwrap();
            prop_assert_eq!(cls.gamma_dist.len() + cls.n_mid + cls.n_low, s.n());
            prop_assert!(cls.t_low < cls.t_high);
            let reduced = reduce(&cls, s.n()).unwrap();
            let full = full_measure(&s).unwrap();
            prop_assert!((reduced.total_weight() - 1.0).abs() <= 1e-12);
            prop_assert!((full.total_weight() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn more_snapshots_never_fewer_spikes(s in spectrum_strategy(), c1 in 0.01f64..4.0, c2 in 0.01f64..4.0) {
            let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            let a = classify(&s, lo).unwrap().gamma_dist.len();
            let b = classify(&s, hi).unwrap().gamma_dist.len();
            prop_assert!(b <= a);
        }

        #[test]
        fn first_moment_drift_bounded(s in spectrum_strategy(), c in 0.01f64..4.0) {
            let cls = classify(&s, c).unwrap();
            let n = s.n() as f64;
            let reduced = reduce(&cls, s.n()).unwrap();
            let full = full_measure(&s).unwrap();
            let bound = (cls.t_high - cls.gamma_n) / 2.0 * (cls.n_mid + cls.n_low) as f64 / n;
            prop_assert!((reduced.mean() - full.mean()).abs() <= bound + 1e-12);
        }
    }
}
