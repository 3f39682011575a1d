//! Characteristic polynomial roots as an independent eigenvalue check.
//!
//! Coefficients come from the Faddeev-LeVerrier recurrence carried out in
//! double-double arithmetic, and the roots from the Aberth-Ehrlich iteration
//! with the polynomial and its derivative evaluated in double-double. Keeping
//! ~32 digits in the coefficients lets repeated eigenvalues of symmetric
//! matrices be resolved to near machine precision instead of `sqrt(eps)`.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::Spectrum;
use crate::error::{Error, Result};
use crate::matrix::DenseRealMatrix;

pub const ORACLE_MAX_DIM: usize = 10;

const ABERTH_MAX_ITER: usize = 800;
const ABERTH_ATTEMPTS: usize = 3;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let r = self - Dd::from_f64(q1).mul_f64(b);
        let q2 = r.hi / b;
        let r = r - Dd::from_f64(q2).mul_f64(b);
        let q3 = r.hi / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

/// Characteristic polynomial `det(zI - A) = sum c_i z^i`, lowest degree
/// first, with `c_n = 1`.
pub fn charpoly_coefficients(a: &DenseRealMatrix) -> Vec<f64> {
    charpoly_dd(a).into_iter().map(Dd::to_f64).collect()
}

fn charpoly_dd(a: &DenseRealMatrix) -> Vec<Dd> {
    let n = a.dim();
    let mut c = vec![Dd::ZERO; n + 1];
    c[n] = Dd::from_f64(1.0);
    // M_1 = I
    let mut m = vec![Dd::ZERO; n * n];
    for i in 0..n {
        m[i * n + i] = Dd::from_f64(1.0);
    }
    for k in 1..=n {
        let mut am = vec![Dd::ZERO; n * n];
        for i in 0..n {
            for l in 0..n {
                let x = a.get(i, l);
                if x == 0.0 {
                    continue;
                }
                for j in 0..n {
                    am[i * n + j] = am[i * n + j] + m[l * n + j].mul_f64(x);
                }
            }
        }
        let tr = (0..n).fold(Dd::ZERO, |s, i| s + am[i * n + i]);
        let ck = -tr.div_f64(k as f64);
        c[n - k] = ck;
        for i in 0..n {
            am[i * n + i] = am[i * n + i] + ck;
        }
        m = am;
    }
    c
}

/// `p(z)` and `p'(z)` by Horner's rule in double-double, rounded at the end.
fn eval_dd(c: &[Dd], z: Complex64) -> (Complex64, Complex64) {
    let (mut pr, mut pi) = (Dd::ZERO, Dd::ZERO);
    let (mut dr, mut di) = (Dd::ZERO, Dd::ZERO);
    for coef in c.iter().rev() {
        // d = d z + p
        let ndr = dr.mul_f64(z.re) - di.mul_f64(z.im) + pr;
        let ndi = dr.mul_f64(z.im) + di.mul_f64(z.re) + pi;
        dr = ndr;
        di = ndi;
        // p = p z + c
        let npr = pr.mul_f64(z.re) - pi.mul_f64(z.im) + *coef;
        let npi = pr.mul_f64(z.im) + pi.mul_f64(z.re);
        pr = npr;
        pi = npi;
    }
    (
        Complex64::new(pr.to_f64(), pi.to_f64()),
        Complex64::new(dr.to_f64(), di.to_f64()),
    )
}

fn aberth(c: &[Dd], angle_offset: f64) -> Option<Vec<Complex64>> {
    let n = c.len() - 1;
    let cf: Vec<f64> = c.iter().map(|x| x.to_f64()).collect();
    let centre = -cf[n - 1] / n as f64;
    // Fujiwara-style radius about the origin, then a margin
    let radius = (0..n)
        .map(|i| cf[i].abs().powf(1.0 / (n - i) as f64))
        .fold(0.0f64, f64::max)
        .max(1e-3)
        * 2.0;
    let mut z: Vec<Complex64> = (0..n)
        .map(|j| {
            let theta = TAU * j as f64 / n as f64 + angle_offset;
            let r = radius * (1.0 + 0.01 * j as f64 / n as f64);
            Complex64::new(centre, 0.0) + Complex64::from_polar(r, theta)
        })
        .collect();

    let mut quiet = 0;
    for _ in 0..ABERTH_MAX_ITER {
        let mut biggest = 0.0f64;
        for j in 0..n {
            let (p, dp) = eval_dd(c, z[j]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let s: Complex64 = (0..n)
                .filter(|&k| k != j)
                .map(|k| {
                    let d = z[j] - z[k];
                    if d == Complex64::new(0.0, 0.0) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * s);
            if !(w.re.is_finite() && w.im.is_finite()) {
                continue;
            }
            z[j] -= w;
            biggest = biggest.max(w.norm() / z[j].norm().max(1.0));
        }
        if z.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
            return None;
        }
        // a few extra sweeps after the steps hit rounding level
        if biggest <= 4.0 * f64::EPSILON {
            quiet += 1;
            if quiet >= 3 {
                return Some(z);
            }
        } else {
            quiet = 0;
        }
    }
    None
}

/// All eigenvalues of a small matrix as roots of its characteristic
/// polynomial, in canonical order. Shares no code with the Schur route.
pub fn charpoly_roots_oracle(a: &DenseRealMatrix) -> Result<Spectrum> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::Empty("matrix of dimension 0"));
    }
    if n > ORACLE_MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "oracle limited to dimension {ORACLE_MAX_DIM}, got {n}"
        )));
    }
    a.check_finite()?;
    let c = charpoly_dd(a);
    if n == 1 {
        return Ok(Spectrum::from_values(
            vec![Complex64::new(-c[0].to_f64(), 0.0)],
            0.0,
            0.0,
        ));
    }
    let offsets = [0.4, 1.3, 2.9];
    for &off in offsets.iter().take(ABERTH_ATTEMPTS) {
        if let Some(roots) = aberth(&c, off) {
            let scale = a.frobenius_norm().max(1.0);
            return Ok(Spectrum::from_values(roots, 0.0, 1e-9 * scale));
        }
    }
    Err(Error::RootIteration { degree: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::match_multisets;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dd_arithmetic_keeps_low_bits() {
        let x = Dd::from_f64(1.0) + Dd::from_f64(1e-20);
        assert_eq!(x.hi, 1.0);
        assert_eq!(x.lo, 1e-20);
        let third = Dd::from_f64(1.0).div_f64(3.0);
        let back = third.mul_f64(3.0) - Dd::from_f64(1.0);
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn coefficients_of_known_matrices() {
        let a = DenseRealMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(charpoly_coefficients(&a), vec![1.0, 0.0, 1.0]);
        // diag(1, 2, 3): (z-1)(z-2)(z-3) = z^3 - 6z^2 + 11z - 6
        let mut d = DenseRealMatrix::zeros(3);
        for i in 0..3 {
            d.set(i, i, (i + 1) as f64);
        }
        assert_eq!(charpoly_coefficients(&d), vec![-6.0, 11.0, -6.0, 1.0]);
    }

    #[test]
    fn small_examples() {
        let a = DenseRealMatrix::from_rows(&[vec![2.0]]).unwrap();
        assert_eq!(charpoly_roots_oracle(&a).unwrap().eigenvalues, vec![c(2.0, 0.0)]);

        let a = DenseRealMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let s = charpoly_roots_oracle(&a).unwrap();
        assert!(match_multisets(&s.eigenvalues, &[c(0.0, 1.0), c(0.0, -1.0)]).max_distance < 1e-14);

        let ring = DenseRealMatrix::from_rows(&[
            vec![-2.0, -1.0, -1.0],
            vec![-1.0, -2.0, -1.0],
            vec![-1.0, -1.0, -2.0],
        ])
        .unwrap();
        let s = charpoly_roots_oracle(&ring).unwrap();
        let m = match_multisets(&s.eigenvalues, &[c(-4.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)]);
        assert!(m.max_distance < 1e-13, "{m:?}");
    }

    #[test]
    fn rejects_large_input() {
        assert!(charpoly_roots_oracle(&DenseRealMatrix::identity(11)).is_err());
    }
}
