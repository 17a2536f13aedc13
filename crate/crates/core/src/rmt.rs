//! Free multiplicative convolution of an atomic population spectrum with
//! the Marčenko–Pastur law, evaluated numerically.
//!
//! For a population measure `H = Σ w_i δ(t_i)` and aspect ratio `c = N/L`,
//! the Stieltjes transform `m(z)` of the limiting sample covariance
//! spectrum solves
//!
//! ```text
//! m = Σ_i w_i / (t_i (1 − c − c z m) − z)
//! ```
//!
//! Clearing denominators gives a polynomial of degree `k + 1` in `m`, where
//! `k` is the number of atoms. The admissible root is the one for which
//! both `m` and the companion transform `m̲ = −(1 − c)/z + c m` lie in the
//! upper half plane; it is unique. The density is `Im m(x + iη)/π` minus
//! the Lorentzian of the zero atom when `c > 1`.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecm::{ensemble_spectrum, ArrayNoiseConfig};
use crate::error::{Error, Result};
use crate::linalg::{poly_roots, Polynomial};
use crate::specfun::zero_atom_mass;
use crate::spike::{classify, full_measure, reduce, AtomicMeasure};

pub const DEFAULT_ETA: f64 = 1e-6;
pub const DEFAULT_GRID_POINTS: usize = 2000;

const FIXED_POINT_DAMPING: f64 = 0.5;
const FIXED_POINT_MAX_ITER: usize = 2000;
const FIXED_POINT_TOL: f64 = 1e-12;
/// Iterations between stall checks; a window must shrink the step by 10 %.
const STALL_WINDOW: usize = 200;
const RESIDUAL_TOL: f64 = 1e-10;
const NEGATIVE_DENSITY_TOL: f64 = 1e-8;
/// Grid points solved as one warm-started chain.
const SEGMENT_LEN: usize = 128;
/// Log-spaced points added near the origin when the bulk reaches it.
const ORIGIN_REFINEMENT: usize = 96;

fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Population measure together with the aspect ratio of the Wishart factor.
#[derive(Debug, Clone, PartialEq)]
pub struct FmcProblem {
    measure: AtomicMeasure,
    c: f64,
    locations: Vec<f64>,
    weights: Vec<f64>,
}

impl FmcProblem {
    pub fn new(measure: AtomicMeasure, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "aspect ratio c must be > 0, got {c}"
            )));
        }
        let locations = measure.atoms().iter().map(|a| a.location).collect();
        let weights = measure.atoms().iter().map(|a| a.weight).collect();
        Ok(Self {
            measure,
            c,
            locations,
            weights,
        })
    }

    pub fn measure(&self) -> &AtomicMeasure {
        &self.measure
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn atom_count(&self) -> usize {
        self.locations.len()
    }

    pub fn zero_mass(&self) -> f64 {
        (1.0 - 1.0 / self.c).max(0.0)
    }

    /// Right-hand side `Σ w_i / (t_i(1 − c − czm) − z)`.
    fn rhs(&self, z: Complex64, m: Complex64) -> Complex64 {
        let u = 1.0 - self.c - self.c * z * m;
        self.locations
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w / (t * u - z))
            .sum()
    }

    /// `m − rhs(m)` and its derivative in `m`.
    fn residual_and_slope(&self, z: Complex64, m: Complex64) -> (Complex64, Complex64) {
        let u = 1.0 - self.c - self.c * z * m;
        let mut f = m;
        let mut df = cplx(1.0, 0.0);
        for (&t, &w) in self.locations.iter().zip(&self.weights) {
            let d = t * u - z;
            let inv = 1.0 / d;
            f -= w * inv;
            df -= w * self.c * z * t * inv * inv;
        }
        (f, df)
    }

    pub fn residual(&self, z: Complex64, m: Complex64) -> f64 {
        (m - self.rhs(z, m)).norm()
    }

    /// Both `m` and the companion transform in the upper half plane.
    fn admissible(&self, z: Complex64, m: Complex64) -> bool {
        if !(m.re.is_finite() && m.im.is_finite()) || m.im <= 0.0 {
            return false;
        }
        // The two terms cancel near the origin when c > 1; judge the sign
        // against their size, not against the difference.
        let pole = -(1.0 - self.c) / z;
        let companion = pole + self.c * m;
        companion.im > -1e-12 * (pole.norm() + self.c * m.norm())
    }

    pub fn polynomial(&self) -> StieltjesPolynomial<'_> {
        StieltjesPolynomial { problem: self }
    }
}

/// The self-consistency equation with denominators cleared:
///
/// ```text
/// P(m; z) = m Π_i (t_i(1 − c − czm) − z) − Σ_i w_i Π_{j≠i} (t_j(1 − c − czm) − z)
/// ```
#[derive(Debug, Clone, Copy)]
pub struct StieltjesPolynomial<'a> {
    problem: &'a FmcProblem,
}

impl StieltjesPolynomial<'_> {
    /// Degree in `m`: atom count plus one.
    pub fn degree(&self) -> usize {
        self.problem.atom_count() + 1
    }

    /// The `k + 2` coefficients of `P(·; z)`, ascending in `m`.
    pub fn coefficients(&self, z: Complex64) -> Vec<Complex64> {
        self.expand(z)
    }

    fn expand(&self, z: Complex64) -> Vec<Complex64> {
        let p = self.problem;
        let k = p.atom_count();
        // Factor i is a_i + b_i m.
        let factors: Vec<(Complex64, Complex64)> = p
            .locations
            .iter()
            .map(|&t| (t * (1.0 - p.c) - z, -p.c * z * t))
            .collect();
        let product = |skip: Option<usize>| {
            let mut acc = vec![cplx(1.0, 0.0)];
            for (i, &(a, b)) in factors.iter().enumerate() {
                if Some(i) == skip {
                    continue;
                }
                let mut next = vec![cplx(0.0, 0.0); acc.len() + 1];
                for (j, &v) in acc.iter().enumerate() {
                    next[j] += v * a;
                    next[j + 1] += v * b;
                }
                acc = next;
            }
            acc
        };
        let mut coeffs = vec![cplx(0.0, 0.0); k + 2];
        for (j, v) in product(None).into_iter().enumerate() {
            coeffs[j + 1] += v;
        }
        for (i, &w) in p.weights.iter().enumerate() {
            for (j, v) in product(Some(i)).into_iter().enumerate() {
                coeffs[j] -= w * v;
            }
        }
        coeffs
    }

    pub fn eval(&self, z: Complex64, m: Complex64) -> Complex64 {
        self.coefficients(z)
            .iter()
            .rev()
            .fold(cplx(0.0, 0.0), |acc, &c| acc * m + c)
    }
}

enum FixedPoint {
    Converged(Complex64),
    Stalled,
}

fn damped_fixed_point(p: &FmcProblem, z: Complex64, start: Complex64) -> FixedPoint {
    let mut m = start;
    let mut window_step = f64::INFINITY;
    for iter in 1..=FIXED_POINT_MAX_ITER {
        let next = (1.0 - FIXED_POINT_DAMPING) * m + FIXED_POINT_DAMPING * p.rhs(z, m);
        if !(next.re.is_finite() && next.im.is_finite()) {
            return FixedPoint::Stalled;
        }
        let step = (next - m).norm();
        m = next;
        if step <= FIXED_POINT_TOL * m.norm().max(1.0) {
            return FixedPoint::Converged(m);
        }
        if iter % STALL_WINDOW == 0 {
            if step > 0.9 * window_step {
                return FixedPoint::Stalled;
            }
            window_step = step;
        }
    }
    FixedPoint::Stalled
}

/// Newton steps on the rational form; keeps the best iterate seen.
fn polish(p: &FmcProblem, z: Complex64, m0: Complex64) -> Complex64 {
    let mut m = m0;
    let mut best = (p.residual(z, m), m);
    for _ in 0..30 {
        let (f, df) = p.residual_and_slope(z, m);
        if df.norm() == 0.0 {
            break;
        }
        let next = m - f / df;
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        m = next;
        let r = p.residual(z, m);
        if r < best.0 {
            best = (r, m);
        }
        if r <= 1e-15 * m.norm().max(1.0) {
            break;
        }
    }
    best.1
}

/// `(1 − c − u)Π_i(t_i u − z) − cz Σ_i w_i Π_{j≠i}(t_j u − z)` with each
/// factor scaled to unit size, ascending in `u`.
fn u_coefficients(p: &FmcProblem, z: Complex64) -> Vec<Complex64> {
    let k = p.atom_count();
    let scales: Vec<f64> = p.locations.iter().map(|&t| t.max(z.norm())).collect();
    let factors: Vec<(Complex64, Complex64)> = p
        .locations
        .iter()
        .zip(&scales)
        .map(|(&t, &s)| (-z / s, cplx(t / s, 0.0)))
        .collect();
    let product = |skip: Option<usize>| {
        let mut acc = vec![cplx(1.0, 0.0)];
        for (i, &(a, b)) in factors.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let mut next = vec![cplx(0.0, 0.0); acc.len() + 1];
            for (j, &v) in acc.iter().enumerate() {
                next[j] += v * a;
                next[j + 1] += v * b;
            }
            acc = next;
        }
        acc
    };
    let mut coeffs = vec![cplx(0.0, 0.0); k + 2];
    for (j, v) in product(None).into_iter().enumerate() {
        coeffs[j] += (1.0 - p.c) * v;
        coeffs[j + 1] -= v;
    }
    for (i, (&w, &s)) in p.weights.iter().zip(&scales).enumerate() {
        let scale = p.c * z * w / s;
        for (j, v) in product(Some(i)).into_iter().enumerate() {
            coeffs[j] -= scale * v;
        }
    }
    coeffs
}

fn m_from_u(p: &FmcProblem, z: Complex64, u: Complex64) -> Complex64 {
    (1.0 - p.c - u) / (p.c * z)
}

/// Newton on `(1 − c − u)/(cz) − Σ w_i/(t_i u − z)`.
fn polish_u(p: &FmcProblem, z: Complex64, u0: Complex64) -> Complex64 {
    let cz = p.c * z;
    let eval = |u: Complex64| {
        let mut g = (1.0 - p.c - u) / cz;
        let mut dg = -1.0 / cz;
        for (&t, &w) in p.locations.iter().zip(&p.weights) {
            let inv = 1.0 / (t * u - z);
            g -= w * inv;
            dg += w * t * inv * inv;
        }
        (g, dg)
    };
    let mut u = u0;
    let mut best = (eval(u).0.norm(), u);
    for _ in 0..30 {
        let (g, dg) = eval(u);
        if dg.norm() == 0.0 {
            break;
        }
        let next = u - g / dg;
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        u = next;
        let r = eval(u).0.norm();
        if r < best.0 {
            best = (r, u);
        }
        if r == 0.0 {
            break;
        }
    }
    best.1
}

fn accept(p: &FmcProblem, z: Complex64, m: Complex64) -> bool {
    p.admissible(z, m) && p.residual(z, m) <= RESIDUAL_TOL * m.norm().max(1.0)
}

/// Stieltjes transform of the limiting sample covariance spectrum at `z`.
///
/// Tries a damped fixed-point iteration from `warm_start` (default `−1/z`);
/// if that stalls or lands on an inadmissible root, enumerates all roots of
/// the cleared polynomial, polishes them, and keeps the admissible root
/// nearest the warm start.
pub fn stieltjes_at(
    p: &FmcProblem,
    z: Complex64,
    warm_start: Option<Complex64>,
) -> Result<Complex64> {
    if !(z.im > 0.0 && z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!(
            "Stieltjes transform needs Im z > 0, got {z}"
        )));
    }
    let anchor = warm_start.unwrap_or(-1.0 / z);

    if let FixedPoint::Converged(m) = damped_fixed_point(p, z, anchor) {
        let m = polish(p, z, m);
        if accept(p, z, m) {
            return Ok(m);
        }
    }

    // Roots are taken in u = 1 − c − czm: near the origin with c > 1 the
    // m-roots crowd around the point u = 0, while in u they stay apart.
    let poly = Polynomial::new(u_coefficients(p, z))?;
    let roots = poly_roots(&poly)?;
    let mut best_residual = f64::INFINITY;
    let mut chosen: Option<(f64, Complex64)> = None;
    for r in roots {
        let m = m_from_u(p, z, polish_u(p, z, r));
        let res = p.residual(z, m);
        best_residual = best_residual.min(res);
        if accept(p, z, m) {
            let dist = (m - anchor).norm();
            if chosen.is_none_or(|(d, _)| dist < d) {
                chosen = Some((dist, m));
            }
        }
    }
    chosen.map(|(_, m)| m).ok_or(Error::Solver {
        re: z.re,
        im: z.im,
        residual: best_residual,
    })
}

/// Solve at `x + iη` by marching in from the far field, where `m ≈ −1/z`.
fn far_field_march(p: &FmcProblem, x: f64, eta: f64) -> Result<Complex64> {
    let top = (1e3 * p.measure.max_location().max(1.0)).max(eta);
    let mut y = top;
    let mut m = -1.0 / cplx(x, y);
    loop {
        m = stieltjes_at(p, cplx(x, y), Some(m))?;
        if y <= eta {
            return Ok(m);
        }
        y = (0.25 * y).max(eta);
    }
}

/// Limiting density sampled on a grid, plus the zero atom carried as metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub zero_mass: f64,
    pub eta: f64,
}

impl SpectralDensity {
    /// Mass of the density below the first grid point, taking `f ∝ x^{-1/2}`
    /// there (the only way the continuous part can reach the origin).
    pub fn origin_tail(&self) -> f64 {
        match (self.grid.first(), self.values.first()) {
            (Some(&x0), Some(&f0)) if x0 > 0.0 && f0 > 0.0 => 2.0 * x0 * f0,
            _ => 0.0,
        }
    }

    /// Trapezoid mass of the continuous part.
    pub fn continuous_mass(&self) -> f64 {
        self.origin_tail() + trapezoid(&self.grid, &self.values)
    }

    /// Continuous mass plus the zero atom; one up to quadrature error.
    pub fn total_mass(&self) -> f64 {
        self.zero_mass + self.continuous_mass()
    }

    pub fn first_moment(&self) -> f64 {
        // ∫_0^{x0} x·A x^{-1/2} dx = (2/3)·x0²·f(x0)
        let tail = match (self.grid.first(), self.values.first()) {
            (Some(&x0), Some(&f0)) if x0 > 0.0 && f0 > 0.0 => 2.0 / 3.0 * x0 * x0 * f0,
            _ => 0.0,
        };
        let xf: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.values)
            .map(|(x, f)| x * f)
            .collect();
        tail + trapezoid(&self.grid, &xf)
    }

    /// Density at `x`, linearly interpolated; zero off the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() || x < g[0] || x > g[g.len() - 1] {
            return 0.0;
        }
        let i = g.partition_point(|&v| v <= x);
        if i == 0 {
            return self.values[0];
        }
        if i >= g.len() {
            return self.values[g.len() - 1];
        }
        let t = (x - g[i - 1]) / (g[i] - g[i - 1]);
        self.values[i - 1] * (1.0 - t) + self.values[i] * t
    }
}

pub(crate) fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

fn density_from_m(p: &FmcProblem, z: Complex64, m: Complex64) -> Result<f64> {
    // Remove the Lorentzian of the zero atom so only the continuous part remains.
    let zero_part = p.zero_mass() * (-1.0 / z).im;
    let f = (m.im - zero_part) / PI;
    if f < -NEGATIVE_DENSITY_TOL {
        return Err(Error::Solver {
            re: z.re,
            im: z.im,
            residual: f,
        });
    }
    Ok(f.max(0.0))
}

fn solve_segment(p: &FmcProblem, xs: &[f64], eta: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(xs.len());
    let mut warm: Option<Complex64> = None;
    for &x in xs {
        let z = cplx(x, eta);
        let m = match warm {
            None => far_field_march(p, x, eta),
            Some(w) => stieltjes_at(p, z, Some(w)).or_else(|_| far_field_march(p, x, eta)),
        }
        .map_err(|e| Error::GridPoint {
            x,
            source: Box::new(e),
        })?;
        out.push(density_from_m(p, z, m).map_err(|e| Error::GridPoint {
            x,
            source: Box::new(e),
        })?);
        warm = Some(m);
    }
    Ok(out)
}

/// Density `Im m(x + iη)/π` on an ascending grid.
///
/// The grid is cut into fixed-length segments, each seeded by a far-field
/// march and then warm-started point to point; segments run in parallel on
/// the current rayon pool, so the output does not depend on the pool size.
pub fn density_curve(p: &FmcProblem, grid: &[f64], eta: f64) -> Result<SpectralDensity> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eta must be > 0, got {eta}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter("grid must be nonempty".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "grid must be finite and strictly ascending".into(),
        ));
    }
    if p.c >= 1.0 && grid[0] <= 0.0 {
        return Err(Error::InvalidParameter(
            "grid must be strictly positive when c >= 1; the zero atom is reported separately"
                .into(),
        ));
    }
    let segments: Vec<Vec<f64>> = grid
        .par_chunks(SEGMENT_LEN)
        .map(|xs| solve_segment(p, xs, eta))
        .collect::<Result<_>>()?;
    Ok(SpectralDensity {
        grid: grid.to_vec(),
        values: segments.into_iter().flatten().collect(),
        zero_mass: zero_atom_mass(p.c)?,
        eta,
    })
}

/// Uniform grid over `[lo, 1.25·t_max·(1+√c)²]`, where
/// `lo = max(1e-4, ½·t_min·(1−√c)²)` for `c < 1` and `1e-4` otherwise.
///
/// When the bulk reaches within a few grid steps of the origin (`c` near
/// one) the density has an `x^{-1/2}` edge there, and log-spaced points are
/// added between `lo` and the eighth uniform node.
pub fn default_grid(p: &FmcProblem, points: usize) -> Result<Vec<f64>> {
    if points < 16 {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least 16 points, got {points}"
        )));
    }
    let r = p.c.sqrt();
    let t_min = p.measure.min_location();
    let t_max = p.measure.max_location();
    let lo = if p.c < 1.0 {
        (0.5 * t_min * (1.0 - r).powi(2)).max(1e-4)
    } else {
        1e-4
    };
    let hi = 1.25 * t_max * (1.0 + r).powi(2);
    let h = (hi - lo) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| lo + h * i as f64).collect();
    grid[points - 1] = hi;

    let bulk_edge = t_min * (1.0 - r).powi(2);
    if bulk_edge < 8.0 * h {
        let top = grid[8];
        let ratio = (top / lo).powf(1.0 / ORIGIN_REFINEMENT as f64);
        let extra: Vec<f64> = (1..ORIGIN_REFINEMENT)
            .map(|i| lo * ratio.powi(i as i32))
            .collect();
        grid.extend(extra);
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    Reduced,
    Full,
}

impl std::fmt::Display for ModelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelMode::Reduced => "reduced",
            ModelMode::Full => "full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub points: usize,
    pub eta: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            points: DEFAULT_GRID_POINTS,
            eta: DEFAULT_ETA,
        }
    }
}

/// Density plus what produced it.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub density: SpectralDensity,
    pub measure: AtomicMeasure,
    pub c: f64,
    pub mode: ModelMode,
    pub wall_ms: f64,
}

impl Prediction {
    pub fn atom_count(&self) -> usize {
        self.measure.len()
    }
}

/// Population measure for an array configuration in the given mode.
pub fn population_measure(
    cfg: &ArrayNoiseConfig,
    c: f64,
    mode: ModelMode,
) -> Result<AtomicMeasure> {
    let spectrum = ensemble_spectrum(cfg)?;
    match mode {
        ModelMode::Reduced => reduce(&classify(&spectrum, c)?, spectrum.n()),
        ModelMode::Full => full_measure(&spectrum),
    }
}

/// Ensemble spectrum → atomic model → density.
pub fn predict_edf(
    cfg: &ArrayNoiseConfig,
    c: f64,
    mode: ModelMode,
    opts: GridOptions,
) -> Result<Prediction> {
    let start = Instant::now();
    let measure = population_measure(cfg, c, mode)?;
    predict_timed(measure, c, mode, opts, start)
}

/// Density for an arbitrary population measure, e.g. the identity.
pub fn predict_from_measure(
    measure: AtomicMeasure,
    c: f64,
    opts: GridOptions,
) -> Result<Prediction> {
    let mode = match measure.kind() {
        crate::spike::MeasureKind::Reduced => ModelMode::Reduced,
        crate::spike::MeasureKind::Full => ModelMode::Full,
    };
    predict_timed(measure, c, mode, opts, Instant::now())
}

fn predict_timed(
    measure: AtomicMeasure,
    c: f64,
    mode: ModelMode,
    opts: GridOptions,
    start: Instant,
) -> Result<Prediction> {
    let problem = FmcProblem::new(measure.clone(), c)?;
    let grid = default_grid(&problem, opts.points)?;
    let density = density_curve(&problem, &grid, opts.eta)?;
    Ok(Prediction {
        density,
        measure,
        c,
        mode,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
