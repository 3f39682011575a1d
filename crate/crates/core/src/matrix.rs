//! Row-major dense square matrices.
//!
//! `get(r, c)` multiplies component `c` of an input vector and contributes to
//! component `r` of the output.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseRealMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseRealMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from rows; every row must have the same length as the
    /// number of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "row {r} has length {}, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries for dimension {n}, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n..(r + 1) * self.n]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for r in 0..self.n {
            for c in 0..self.n {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|r| (0..r).all(|c| self.get(r, c) == self.get(c, r)))
    }

    /// First non-finite entry, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(i) => Err(Error::NonFinite {
                row: i / self.n,
                col: i % self.n,
            }),
            None => Ok(()),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * other.get(k, c);
                }
            }
        }
        out
    }

    pub fn mul_complex_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .map(|(&a, &v)| v * a)
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// Count of entries that are not exactly zero in row `r`.
    pub fn row_nonzeros(&self, r: usize) -> usize {
        self.row(r).iter().filter(|&&x| x != 0.0).count()
    }

    pub fn to_complex(&self) -> DenseComplexMatrix {
        DenseComplexMatrix {
            n: self.n,
            data: self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseComplexMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DenseComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "row {r} has length {}, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.n + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.n..(r + 1) * self.n]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self
            .data
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            Some(i) => Err(Error::NonFinite {
                row: i / self.n,
                col: i % self.n,
            }),
            None => Ok(()),
        }
    }

    pub fn row_nonzeros(&self, r: usize) -> usize {
        self.row(r)
            .iter()
            .filter(|z| z.re != 0.0 || z.im != 0.0)
            .count()
    }

    /// The real `2n x 2n` block form `[[A, -B], [B, A]]` of `A + iB`.
    pub fn real_embedding(&self) -> DenseRealMatrix {
        let n = self.n;
        let mut out = DenseRealMatrix::zeros(2 * n);
        for r in 0..n {
            for c in 0..n {
                let z = self.get(r, c);
                out.set(r, c, z.re);
                out.set(r + n, c + n, z.re);
                out.set(r, c + n, -z.im);
                out.set(r + n, c, z.im);
            }
        }
        out
    }
}
