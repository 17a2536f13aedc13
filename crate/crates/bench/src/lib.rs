//! Fixtures shared by the benchmarks.

use iso_edf::{default_grid, population_measure, ArrayNoiseConfig, FmcProblem, ModelMode, Result};

/// 51 sensors at half-wavelength spacing.
pub fn reference_array() -> ArrayNoiseConfig {
    ArrayNoiseConfig::new(51, 0.5).expect("valid array")
}

/// Reduced and full problems for aspect ratio `c`, plus the grid of the full
/// problem so both are timed on the same abscissae.
pub fn model_pair(c: f64, points: usize) -> Result<(FmcProblem, FmcProblem, Vec<f64>)> {
    let array = reference_array();
    let reduced = FmcProblem::new(population_measure(&array, c, ModelMode::Reduced)?, c)?;
    let full = FmcProblem::new(population_measure(&array, c, ModelMode::Full)?, c)?;
    let grid = default_grid(&full, points)?;
    Ok((reduced, full, grid))
}
