use num_complex::Complex64;

use crate::error::{Error, Result};

use super::QR_ITERATIONS_PER_DEGREE;

/// Polynomial with complex coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    /// Trailing (highest-degree) zero coefficients are trimmed; the result
    /// must have degree at least one.
    pub fn new(mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "polynomial coefficients must be finite".into(),
            ));
        }
        while coeffs
            .last()
            .is_some_and(|z| *z == Complex64::new(0.0, 0.0))
        {
            coeffs.pop();
        }
        if coeffs.len() < 2 {
            return Err(Error::InvalidParameter(
                "polynomial degree must be >= 1".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Product with the linear factor `(z − a)`.
    pub fn mul_linear(&self, a: Complex64) -> Polynomial {
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[k + 1] += c;
            out[k] -= a * c;
        }
        Polynomial { coeffs: out }
    }
}

/// All roots of `p` as eigenvalues of its balanced companion matrix.
///
/// The companion matrix is already upper Hessenberg; it is balanced by
/// powers of two and reduced to triangular (Schur) form by shifted complex
/// QR with Wilkinson shifts.
pub fn poly_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    let d = p.degree();
    let lead = p.coeffs[d];
    if d == 1 {
        return Ok(vec![-p.coeffs[0] / lead]);
    }
    // First row holds −a_{d−1} … −a_0 of the monic polynomial; ones below the diagonal.
    let mut h = vec![Complex64::new(0.0, 0.0); d * d];
    for (j, entry) in h[..d].iter_mut().enumerate() {
        *entry = -p.coeffs[d - 1 - j] / lead;
    }
    for i in 1..d {
        h[i * d + i - 1] = Complex64::new(1.0, 0.0);
    }
    balance(&mut h, d);
    hessenberg_eigenvalues(&mut h, d)
}

fn l1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Parlett–Reinsch balancing by powers of two; a diagonal similarity, so
/// the Hessenberg structure survives.
fn balance(h: &mut [Complex64], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += l1(h[j * n + i]);
                    r += l1(h[i * n + j]);
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut g = r / RADIX;
            let mut f = 1.0;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    h[i * n + j] *= g;
                }
                for j in 0..n {
                    h[j * n + i] *= f;
                }
            }
        }
    }
}

/// Rotation `[[c, s], [−s̄, c]]` with real `c` mapping `(a, b)` to `(r, 0)`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0));
    }
    let norm = na.hypot(nb);
    let phase = a / na;
    (na / norm, phase * b.conj() / norm)
}

/// Eigenvalues of an upper Hessenberg matrix by explicitly shifted QR.
fn hessenberg_eigenvalues(h: &mut [Complex64], n: usize) -> Result<Vec<Complex64>> {
    let max_iter = QR_ITERATIONS_PER_DEGREE * n;
    let mut eig = vec![Complex64::new(0.0, 0.0); n];
    let mut rot: Vec<(f64, Complex64)> = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let at = |i: usize, j: usize| i * n + j;

    loop {
        if hi == 0 {
            eig[0] = h[0];
            break;
        }
        // Locate the active unreduced block [lo, hi].
        let mut lo = hi;
        while lo > 0 {
            let sub = l1(h[at(lo, lo - 1)]);
            let diag = l1(h[at(lo - 1, lo - 1)]) + l1(h[at(lo, lo)]);
            if sub <= f64::EPSILON * diag || sub < f64::MIN_POSITIVE {
                h[at(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[at(hi, hi)];
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        if total >= max_iter {
            return Err(Error::NoConvergence {
                what: "companion QR",
                iterations: total,
            });
        }
        total += 1;
        since_deflation += 1;

        let shift = if since_deflation % 11 == 10 {
            // Exceptional shift breaks rare cycling.
            h[at(hi, hi)] + Complex64::new(0.75 * l1(h[at(hi, hi - 1)]), 0.0)
        } else {
            wilkinson_shift(
                h[at(hi - 1, hi - 1)],
                h[at(hi - 1, hi)],
                h[at(hi, hi - 1)],
                h[at(hi, hi)],
            )
        };

        for k in lo..=hi {
            h[at(k, k)] -= shift;
        }
        rot.clear();
        for k in lo..hi {
            let (c, s) = givens(h[at(k, k)], h[at(k + 1, k)]);
            for j in k..=hi {
                let x = h[at(k, j)];
                let y = h[at(k + 1, j)];
                h[at(k, j)] = x * c + s * y;
                h[at(k + 1, j)] = -s.conj() * x + y * c;
            }
            rot.push((c, s));
        }
        for (idx, &(c, s)) in rot.iter().enumerate() {
            let k = lo + idx;
            for i in lo..=(k + 2).min(hi) {
                let x = h[at(i, k)];
                let y = h[at(i, k + 1)];
                h[at(i, k)] = x * c + y * s.conj();
                h[at(i, k + 1)] = -x * s + y * c;
            }
        }
        for k in lo..=hi {
            h[at(k, k)] += shift;
        }
    }
    Ok(eig)
}

/// Eigenvalue of `[[a, b], [c, d]]` closer to `d`.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = 0.5 * (a + d);
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}
