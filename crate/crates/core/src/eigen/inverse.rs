use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseRealMatrix;

/// Target residual of [`eigenpair`], relative to `||A||_F`.
pub const EIGENPAIR_RESIDUAL: f64 = 1e-10;

const MAX_ITERATIONS: usize = 60;
const RAYLEIGH_AFTER: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: Complex64,
    /// Unit 2-norm; the first component of (relatively) largest modulus is
    /// real and positive.
    pub vector: Vec<Complex64>,
    /// `||A v - value v||_2`.
    pub residual: f64,
}

/// LU factors of `A - shift I` with partial pivoting.
struct ShiftedLu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
}

impl ShiftedLu {
    /// Pivots smaller than `floor` are replaced by `floor`, which keeps the
    /// solve finite when the shift sits on an eigenvalue.
    fn new(a: &DenseRealMatrix, shift: Complex64, floor: f64) -> Self {
        let n = a.dim();
        let mut lu: Vec<Complex64> = a.as_slice().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for i in 0..n {
            lu[i * n + i] -= shift;
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&i, &j| lu[i * n + k].norm().total_cmp(&lu[j * n + k].norm()))
                .unwrap();
            if piv != k {
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            if lu[k * n + k].norm() < floor {
                lu[k * n + k] = Complex64::new(floor, 0.0);
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[k * n + j];
                    lu[i * n + j] -= f * u;
                }
            }
        }
        Self { n, lu, perm }
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[i * n + j];
                x[i] = x[i] - l * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.lu[i * n + j];
                x[i] = x[i] - u * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalise(v: &mut [Complex64]) {
    let s = norm(v);
    v.iter_mut().for_each(|z| *z /= s);
}

/// Rotates `v` so that its first component within a relative `1e-12` of the
/// largest modulus is real and positive.
pub(crate) fn fix_phase(v: &mut [Complex64]) {
    let big = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if big == 0.0 {
        return;
    }
    let idx = v
        .iter()
        .position(|z| z.norm() >= big * (1.0 - 1e-12))
        .unwrap();
    let rot = v[idx].conj() / v[idx].norm();
    v.iter_mut().for_each(|z| *z *= rot);
    v[idx] = Complex64::new(v[idx].re, 0.0);
}

fn rayleigh_and_residual(a: &DenseRealMatrix, x: &[Complex64]) -> (Complex64, f64) {
    let ax = a.mul_complex_vec(x);
    let lambda: Complex64 = x.iter().zip(&ax).map(|(xi, yi)| xi.conj() * yi).sum();
    let r = ax
        .iter()
        .zip(x)
        .map(|(y, xi)| (y - lambda * xi).norm_sqr())
        .sum::<f64>()
        .sqrt();
    (lambda, r)
}

/// Eigenvector for the eigenvalue nearest `approx`, by inverse iteration with
/// a complex shift.
///
/// The returned value is the Rayleigh quotient of the converged vector, which
/// minimises the residual over all scalars. If the fixed shift has not
/// converged after a few steps the shift moves to the current Rayleigh
/// quotient. Fails when the residual stays above
/// [`EIGENPAIR_RESIDUAL`]` * ||A||_F`, which happens when `approx` is nearly
/// equidistant from two eigenvalues; perturb the shift and retry.
pub fn eigenpair(a: &DenseRealMatrix, approx: Complex64) -> Result<EigenPair> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::Empty("matrix of dimension 0"));
    }
    a.check_finite()?;
    if !(approx.re.is_finite() && approx.im.is_finite()) {
        return Err(Error::InvalidParameter("non-finite shift".into()));
    }
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let target = EIGENPAIR_RESIDUAL * scale;
    let floor = f64::EPSILON * scale;

    let mut x: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + 0.5 * ((i + 1) as f64).sin(), 0.0))
        .collect();
    normalise(&mut x);

    let mut shift = approx;
    let mut lu = ShiftedLu::new(a, shift, floor);
    let mut best: Option<(Vec<Complex64>, Complex64, f64)> = None;
    let mut last = f64::INFINITY;
    for it in 0..MAX_ITERATIONS {
        let mut y = lu.solve(&x);
        if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            break;
        }
        normalise(&mut y);
        x = y;
        let (lambda, r) = rayleigh_and_residual(a, &x);
        if best.as_ref().map_or(true, |b| r < b.2) {
            best = Some((x.clone(), lambda, r));
        }
        if it >= 1 && r <= target && (r <= 16.0 * floor || r > 0.5 * last) {
            break;
        }
        last = r;
        if it + 1 == RAYLEIGH_AFTER && r > target {
            shift = lambda;
            lu = ShiftedLu::new(a, shift, floor);
        }
    }

    let (mut vector, value, residual) = best.expect("at least one iteration");
    if residual > target {
        return Err(Error::InverseIteration {
            residual,
            iterations: MAX_ITERATIONS,
        });
    }
    fix_phase(&mut vector);
    let ax = a.mul_complex_vec(&vector);
    let residual = ax
        .iter()
        .zip(&vector)
        .map(|(y, xi)| (y - value * xi).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(EigenPair {
        value,
        vector,
        residual,
    })
}
