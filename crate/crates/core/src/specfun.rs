//! Special functions: Bessel `J0` and the Marčenko–Pastur law.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

/// Switch from the power series to the Hankel asymptotic form.
const SERIES_LIMIT: f64 = 8.0;

/// `sqrt(2/π)`
const SQRT_FRAC_2_PI: f64 = 0.797_884_560_802_865_4;

/// Bessel function of the first kind, order zero.
///
/// Uses the Maclaurin series `Σ (−1)^k (x/2)^{2k} / (k!)²` for `|x| ≤ 8` and
/// the Hankel asymptotic expansion with rational `P0`/`Q0` corrections
/// (Cephes coefficients) beyond.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!(
            "bessel_j0 requires a finite argument, got {x}"
        )));
    }
    let x = x.abs();
    if x <= SERIES_LIMIT {
        Ok(j0_series(x))
    } else {
        Ok(j0_asymptotic(x))
    }
}

fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    // Terms peak near k ≈ x/2 and fall below 1e-17 well before k = 40 for x ≤ 8.
    for k in 1..40 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && kf > q.sqrt() {
            break;
        }
    }
    sum
}

fn j0_asymptotic(x: f64) -> f64 {
    let w = 5.0 / x;
    let q = 25.0 / (x * x);
    let p0 = polevl(q, &PP) / polevl(q, &PQ);
    let q0 = polevl(q, &QP) / p1evl(q, &QQ);
    let xn = x - FRAC_PI_4;
    (p0 * xn.cos() - w * q0 * xn.sin()) * SQRT_FRAC_2_PI / x.sqrt()
}

fn polevl(x: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Like [`polevl`] with an implicit leading coefficient of one.
fn p1evl(x: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().fold(1.0, |acc, &c| acc * x + c)
}

const PP: [f64; 7] = [
    7.969_367_292_973_471e-4,
    8.283_523_921_074_408e-2,
    1.239_533_716_464_143,
    5.447_250_030_587_687,
    8.747_165_001_998_17,
    5.303_240_382_353_949,
    1.0,
];

const PQ: [f64; 7] = [
    9.244_088_105_588_637e-4,
    8.562_884_743_544_745e-2,
    1.253_527_439_010_589_5,
    5.470_977_403_304_171,
    8.761_908_832_370_695,
    5.306_052_882_353_947,
    1.0,
];

const QP: [f64; 8] = [
    -1.136_638_388_984_691_6e-2,
    -1.282_527_186_705_093_1,
    -1.955_395_442_577_359_7e1,
    -9.320_601_521_237_683e1,
    -1.776_811_679_804_880_6e2,
    -1.470_775_051_549_511_8e2,
    -5.141_053_267_665_993e1,
    -6.050_143_506_007_285,
];

const QQ: [f64; 7] = [
    6.431_782_561_181_78e1,
    8.564_300_259_769_806e2,
    3.882_401_836_054_016_3e3,
    7.240_467_741_956_525e3,
    5.930_727_011_873_169e3,
    2.062_093_316_603_278_3e3,
    2.420_057_402_402_914e2,
];

/// Parameters of a (scaled) Marčenko–Pastur law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpParams {
    c: f64,
    scale: f64,
}

impl MpParams {
    pub fn new(c: f64, scale: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "aspect ratio c must be > 0, got {c}"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale must be > 0, got {scale}"
            )));
        }
        Ok(Self { c, scale })
    }

    /// Unit-scale law with aspect ratio `c`.
    pub fn unit(c: f64) -> Result<Self> {
        Self::new(c, 1.0)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Support `[scale·(1−√c)², scale·(1+√c)²]` of the continuous part.
    pub fn support(&self) -> (f64, f64) {
        let r = self.c.sqrt();
        (
            self.scale * (1.0 - r).powi(2),
            self.scale * (1.0 + r).powi(2),
        )
    }
}

/// Continuous part of the Marčenko–Pastur density.
///
/// Zero outside the open support and exactly zero on its edges. For `c > 1`
/// the continuous part carries mass `1/c`; the rest is the atom at zero
/// (see [`zero_atom_mass`]). For `c = 1` the density diverges like `x^{-1/2}`
/// at the origin and `x = 0` returns `+∞`.
pub fn mp_density(x: f64, p: MpParams) -> f64 {
    let (a, b) = p.support();
    if x == 0.0 && a == 0.0 {
        return f64::INFINITY;
    }
    if x <= a || x >= b {
        return 0.0;
    }
    ((b - x) * (x - a)).sqrt() / (2.0 * PI * p.c * p.scale * x)
}

/// Mass `max(0, 1 − 1/c)` of the atom at zero in the Marčenko–Pastur law.
pub fn zero_atom_mass(c: f64) -> Result<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Domain(format!(
            "aspect ratio c must be > 0, got {c}"
        )));
    }
    Ok((1.0 - 1.0 / c).max(0.0))
}
