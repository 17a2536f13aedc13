use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real symmetric matrix stored densely in row-major order.
///
/// Symmetry is exact: constructors either mirror one triangle or reject
/// input whose transpose differs.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds the matrix from `f(p, q)` evaluated on the upper triangle.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter("matrix order must be >= 1".into()));
        }
        let mut entries = vec![0.0; order * order];
        for p in 0..order {
            for q in p..order {
                let v = f(p, q);
                if !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({p}, {q}) is not finite"
                    )));
                }
                entries[p * order + q] = v;
                entries[q * order + p] = v;
            }
        }
        Ok(Self { order, entries })
    }

    pub fn from_row_major(order: usize, entries: Vec<f64>) -> Result<Self> {
        if order == 0 || entries.len() != order * order {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries for order {order}, got {}",
                order * order,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "matrix entries must be finite".into(),
            ));
        }
        for p in 0..order {
            for q in p + 1..order {
                if entries[p * order + q] != entries[q * order + p] {
                    return Err(Error::Contract(format!(
                        "entries ({p}, {q}) and ({q}, {p}) differ"
                    )));
                }
            }
        }
        Ok(Self { order, entries })
    }

    pub fn identity(order: usize) -> Result<Self> {
        Self::from_fn(order, |p, q| if p == q { 1.0 } else { 0.0 })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::from_fn(values.len(), |p, q| if p == q { values[p] } else { 0.0 })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.entries[p * self.order + q]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Plain product `self · other`; the result is returned as a flat
    /// row-major buffer since it need not be symmetric.
    pub fn matmul(&self, other: &SymmetricMatrix) -> Vec<f64> {
        let n = self.order;
        assert_eq!(n, other.order, "order mismatch");
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let row = &other.entries[k * n..(k + 1) * n];
                for (o, b) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub(crate) fn into_entries(self) -> Vec<f64> {
        self.entries
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(
                "matrix dimensions must be positive".into(),
            ));
        }
        if entries.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if entries
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self::new(rows, cols, entries)
    }

    pub fn identity(order: usize) -> Result<Self> {
        Self::from_fn(order, order, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.entries
    }

    /// `a · self` for a real square matrix `a` with `a.order() == self.rows()`.
    pub fn left_mul_real(&self, a: &SymmetricMatrix) -> ComplexMatrix {
        assert_eq!(a.order(), self.rows, "dimension mismatch");
        let (n, l) = (self.rows, self.cols);
        let mut out = vec![Complex64::new(0.0, 0.0); n * l];
        for i in 0..n {
            let dst = &mut out[i * l..(i + 1) * l];
            for k in 0..n {
                let w = a.get(i, k);
                if w == 0.0 {
                    continue;
                }
                for (o, x) in dst.iter_mut().zip(&self.entries[k * l..(k + 1) * l]) {
                    *o += x * w;
                }
            }
        }
        ComplexMatrix {
            rows: n,
            cols: l,
            entries: out,
        }
    }

    /// Scaled Gram matrix `scale · self · selfᴴ`, Hermitian by construction.
    pub fn gram(&self, scale: f64) -> ComplexMatrix {
        let (n, l) = (self.rows, self.cols);
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let ri = &self.entries[i * l..(i + 1) * l];
            for j in i..n {
                let rj = &self.entries[j * l..(j + 1) * l];
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, y) in ri.iter().zip(rj) {
                    acc += x * y.conj();
                }
                acc *= scale;
                out[i * n + j] = acc;
                out[j * n + i] = acc.conj();
            }
            out[i * n + i].im = 0.0;
        }
        ComplexMatrix {
            rows: n,
            cols: n,
            entries: out,
        }
    }
}
