use crate::error::{Error, Result};

use super::{ComplexMatrix, SymmetricMatrix, JACOBI_MAX_SWEEPS};

/// Relative tolerance for the Hermitian check.
const HERMITIAN_TOL: f64 = 1e-10;

/// Relative tolerance below which negative eigenvalues count as round-off.
const PSD_TOL: f64 = 1e-10;

/// Eigenvalues of a real symmetric matrix, sorted descending.
pub fn sym_eigenvalues(a: &SymmetricMatrix) -> Result<Vec<f64>> {
    let n = a.order();
    let mut work = a.clone().into_entries();
    jacobi_in_place(&mut work, n, None)?;
    let mut values: Vec<f64> = (0..n).map(|i| work[i * n + i]).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(values)
}

/// Eigenvalues (descending) with matching eigenvectors; `vectors[k]` belongs
/// to `values[k]`.
pub fn sym_eigen(a: &SymmetricMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.order();
    let mut work = a.clone().into_entries();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    jacobi_in_place(&mut work, n, Some(&mut v))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| work[j * n + j].total_cmp(&work[i * n + i]));
    let values = order.iter().map(|&k| work[k * n + k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|i| v[i * n + k]).collect())
        .collect();
    Ok((values, vectors))
}

/// Cyclic Jacobi on a dense row-major symmetric buffer. On return the
/// diagonal holds the eigenvalues; `vectors`, when given, accumulates the
/// rotations column-wise.
fn jacobi_in_place(a: &mut [f64], n: usize, mut vectors: Option<&mut [f64]>) -> Result<()> {
    if n == 1 {
        return Ok(());
    }
    let frob2: f64 = a.iter().map(|x| x * x).sum();
    if frob2 == 0.0 {
        return Ok(());
    }
    let target = (1e-16 * frob2.sqrt()).powi(2);

    for sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= target {
            return Ok(());
        }
        // Early sweeps only rotate entries above a threshold.
        let thresh = if sweep < 3 {
            0.2 * off.sqrt() / (n * n) as f64
        } else {
            0.0
        };

        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let h = aqq - app;
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_p = c * akp - s * akq;
                    let new_q = s * akp + c * akq;
                    a[k * n + p] = new_p;
                    a[p * n + k] = new_p;
                    a[k * n + q] = new_q;
                    a[q * n + k] = new_q;
                }
                if let Some(v) = vectors.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    Err(Error::NoConvergence {
        what: "cyclic Jacobi",
        iterations: JACOBI_MAX_SWEEPS,
    })
}

/// Eigenvalues of a Hermitian matrix, sorted descending.
///
/// The `N×N` matrix `A = R + iI` is embedded as the `2N×2N` real symmetric
/// `[[R, −I], [I, R]]`, whose spectrum is that of `A` with every eigenvalue
/// doubled; sorted pairs are averaged back down to `N` values.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Contract(format!(
            "matrix is {}x{}, not square",
            n,
            a.cols()
        )));
    }
    let scale = a.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
    for i in 0..n {
        for j in i..n {
            let d = (a.get(i, j) - a.get(j, i).conj()).norm();
            if d > HERMITIAN_TOL * scale {
                return Err(Error::Contract(format!(
                    "matrix is not Hermitian at ({i}, {j}): mismatch {d:e}"
                )));
            }
        }
    }

    let m = 2 * n;
    let embedded = SymmetricMatrix::from_fn(m, |p, q| {
        let (bi, i) = (p / n, p % n);
        let (bj, j) = (q / n, q % n);
        // Average the two triangles so tiny Hermitian defects do not break symmetry.
        let z = 0.5 * (a.get(i, j) + a.get(j, i).conj());
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    })?;
    let doubled = sym_eigenvalues(&embedded)?;
    Ok(doubled
        .chunks_exact(2)
        .map(|pair| 0.5 * (pair[0] + pair[1]))
        .collect())
}

/// Symmetric PSD square root `B` with `B·B = a`.
///
/// Eigenvalues down to `−1e-10·λ_max` are treated as round-off and clamped
/// to zero; anything more negative is rejected.
pub fn sqrt_psd(a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let n = a.order();
    let (values, vectors) = sym_eigen(a)?;
    let max = values[0];
    let min = values[n - 1];
    if min < -PSD_TOL * max.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    let roots: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
    SymmetricMatrix::from_fn(n, |p, q| {
        roots
            .iter()
            .zip(&vectors)
            .map(|(r, v)| r * v[p] * v[q])
            .sum()
    })
}
