//! Eigenvalues of dense real non-symmetric matrices.
//!
//! [`eigenvalues`] runs the real Schur route, so conjugate pairs come out
//! exactly conjugate and real eigenvalues carry an imaginary part of exactly
//! zero. [`charpoly_roots_oracle`] is an independent check that never touches
//! the Schur code.

mod inverse;
mod oracle;
pub mod schur;

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseComplexMatrix, DenseRealMatrix};
use crate::operator::OperatorSpec;

pub use inverse::{eigenpair, EigenPair, EIGENPAIR_RESIDUAL};
pub use oracle::{charpoly_coefficients, charpoly_roots_oracle, ORACLE_MAX_DIM};

/// Default relative deflation threshold for the QR iteration.
pub const DEFAULT_TOL: f64 = 1e-13;

/// Largest complex dimension accepted by the real-embedding route.
pub const EMBEDDING_MAX_DIM: usize = 144;

/// Canonical order: real part ascending, then imaginary part ascending.
pub fn canonical_cmp(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn positive_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// A multiset of eigenvalues in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    /// Index pairs `(i, j)`, `i < j`, of conjugate partners.
    pub pairing: Vec<(usize, usize)>,
    pub max_residual: f64,
    pub source_spec: Option<OperatorSpec>,
}

impl Spectrum {
    /// Sorts `values` canonically and pairs conjugates: every value with
    /// `|Im| > pair_tol` is matched with the nearest unused value lying within
    /// `pair_tol` of its conjugate.
    pub fn from_values(values: Vec<Complex64>, max_residual: f64, pair_tol: f64) -> Self {
        let mut eigenvalues: Vec<Complex64> = values
            .into_iter()
            .map(|z| Complex64::new(positive_zero(z.re), positive_zero(z.im)))
            .collect();
        eigenvalues.sort_by(canonical_cmp);

        let mut used = vec![false; eigenvalues.len()];
        let mut pairing = Vec::new();
        for i in 0..eigenvalues.len() {
            let z = eigenvalues[i];
            if used[i] || z.im.abs() <= pair_tol || z.im > 0.0 {
                continue;
            }
            let target = z.conj();
            let partner = (0..eigenvalues.len())
                .filter(|&j| j != i && !used[j])
                .map(|j| (j, (eigenvalues[j] - target).norm()))
                .filter(|&(_, d)| d <= pair_tol)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, _)) = partner {
                used[i] = true;
                used[j] = true;
                pairing.push((i.min(j), i.max(j)));
            }
        }
        pairing.sort_unstable();
        Self {
            eigenvalues,
            pairing,
            max_residual,
            source_spec: None,
        }
    }

    pub fn with_source(mut self, spec: OperatorSpec) -> Self {
        self.source_spec = Some(spec);
        self
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_abs_im(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0, |m, z| m.max(z.im.abs()))
    }

    /// Eigenvalues with `|Im| > tol` that have no recorded partner.
    pub fn unpaired(&self, tol: f64) -> Vec<usize> {
        let mut paired = vec![false; self.len()];
        for &(i, j) in &self.pairing {
            paired[i] = true;
            paired[j] = true;
        }
        (0..self.len())
            .filter(|&i| !paired[i] && self.eigenvalues[i].im.abs() > tol)
            .collect()
    }

    pub fn conjugated(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().map(|z| z.conj()).collect()
    }

    pub fn negated(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().map(|z| -z).collect()
    }
}

/// Outcome of a greedy multiset comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultisetMatch {
    pub max_distance: f64,
    /// The worst-matched pair `(a, b)`.
    pub worst: Option<(Complex64, Complex64)>,
}

/// Matches `a` against `b`: walking `a` in canonical order, each element is
/// paired with the nearest unused element of `b`. Different lengths give an
/// infinite distance.
pub fn match_multisets(a: &[Complex64], b: &[Complex64]) -> MultisetMatch {
    if a.len() != b.len() {
        return MultisetMatch {
            max_distance: f64::INFINITY,
            worst: None,
        };
    }
    let mut left = a.to_vec();
    left.sort_by(canonical_cmp);
    let mut used = vec![false; b.len()];
    let mut out = MultisetMatch {
        max_distance: 0.0,
        worst: None,
    };
    for z in left {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, w)| (j, (z - w).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("lengths agree");
        used[j] = true;
        if out.worst.is_none() || d > out.max_distance {
            out.max_distance = d;
            out.worst = Some((z, b[j]));
        }
    }
    out
}

fn check_tol(tol: f64) -> Result<()> {
    if !(1e-15..=1e-6).contains(&tol) {
        return Err(Error::InvalidParameter(format!(
            "solver tolerance must lie in [1e-15, 1e-6], got {tol}"
        )));
    }
    Ok(())
}

/// All eigenvalues of `a`.
///
/// `tol` is the relative deflation threshold of the QR iteration. The
/// iteration gives up after [`schur::SWEEPS_PER_DIM`]` * n` double-shift
/// sweeps. `max_residual` is the relative Schur residual
/// `||B Q - Q T||_F / ||B||_F` of the balanced matrix `B`.
pub fn eigenvalues(a: &DenseRealMatrix, tol: f64) -> Result<Spectrum> {
    check_tol(tol)?;
    if a.dim() == 0 {
        return Err(Error::Empty("matrix of dimension 0"));
    }
    a.check_finite()?;
    let schur = schur::real_schur(a.dim(), a.as_slice(), tol)?;
    let residual = schur.relative_residual();
    // exact conjugates from 2x2 blocks, so a zero tolerance pairs them
    Ok(Spectrum::from_values(schur.eigenvalues, residual, 0.0))
}

/// Eigenvalues of a complex matrix `H = A + iB`, computed from the real matrix
/// `[[A, -B], [B, A]]`. The result has `2n` entries and equals
/// `spec(H) ∪ conj(spec(H))` as a multiset.
pub fn complex_eigenvalues_via_real_embedding(
    h: &DenseComplexMatrix,
    tol: f64,
) -> Result<Spectrum> {
    if h.dim() > EMBEDDING_MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "embedding route limited to dimension {EMBEDDING_MAX_DIM}, got {}",
            h.dim()
        )));
    }
    h.check_finite()?;
    eigenvalues(&h.real_embedding(), tol)
}

/// Determinant by LU with partial pivoting.
pub fn determinant(a: &DenseRealMatrix) -> f64 {
    let n = a.dim();
    let mut m = a.as_slice().to_vec();
    let mut det = 1.0;
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| m[i * n + k].abs().total_cmp(&m[j * n + k].abs()))
            .unwrap();
        if m[piv * n + k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            for j in 0..n {
                m.swap(k * n + j, piv * n + j);
            }
            det = -det;
        }
        let d = m[k * n + k];
        det *= d;
        for i in k + 1..n {
            let f = m[i * n + k] / d;
            for j in k..n {
                m[i * n + j] -= f * m[k * n + j];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_harper_matrix, OperatorSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn harper(l: usize, q: i64, p: i64, g: f64) -> DenseRealMatrix {
        build_harper_matrix(&OperatorSpec::harper(l, q, p, g).unwrap()).unwrap()
    }

    #[test]
    fn ring_of_three() {
        let s = eigenvalues(&harper(3, 0, 0, 0.0), DEFAULT_TOL).unwrap();
        let want = [c(-4.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)];
        assert!(match_multisets(&s.eigenvalues, &want).max_distance < 1e-13);
        assert_eq!(s.max_abs_im(), 0.0);
        assert!(s.max_residual < 1e-14);
    }

    #[test]
    fn asymmetric_ring_of_four() {
        let g = 0.5f64;
        let s = eigenvalues(&harper(4, 0, 0, g), DEFAULT_TOL).unwrap();
        let want = [
            c(-2.0 - 2.0 * g.cosh(), 0.0),
            c(-2.0, -2.0 * g.sinh()),
            c(-2.0 + 2.0 * g.cosh(), 0.0),
            c(-2.0, 2.0 * g.sinh()),
        ];
        assert!(match_multisets(&s.eigenvalues, &want).max_distance < 1e-13);
        assert_eq!(s.pairing.len(), 1);
        let (i, j) = s.pairing[0];
        assert_eq!(s.eigenvalues[i], s.eigenvalues[j].conj());
    }

    #[test]
    fn canonical_order_and_zero_normalisation() {
        let s = Spectrum::from_values(
            vec![c(1.0, 0.0), c(-0.0, -0.0), c(0.0, 1.0), c(0.0, -1.0)],
            0.0,
            1e-12,
        );
        assert_eq!(
            s.eigenvalues,
            vec![c(0.0, -1.0), c(0.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)]
        );
        assert!(s.eigenvalues[1].re.is_sign_positive());
        assert_eq!(s.pairing, vec![(0, 2)]);
        assert!(s.unpaired(1e-12).is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        let a = harper(3, 0, 0, 0.0);
        assert!(eigenvalues(&a, 1e-3).is_err());
        assert!(eigenvalues(&a, 1e-17).is_err());
        let mut b = a.clone();
        b.set(1, 2, f64::NAN);
        assert_eq!(
            eigenvalues(&b, DEFAULT_TOL),
            Err(Error::NonFinite { row: 1, col: 2 })
        );
    }

    #[test]
    fn embedding_examples() {
        let h = DenseComplexMatrix::from_rows(&[vec![c(0.0, 1.0)]]).unwrap();
        let s = complex_eigenvalues_via_real_embedding(&h, DEFAULT_TOL).unwrap();
        assert!(match_multisets(&s.eigenvalues, &[c(0.0, 1.0), c(0.0, -1.0)]).max_distance < 1e-15);

        let h = DenseComplexMatrix::from_rows(&[
            vec![c(1.0, 2.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(3.0, 0.0)],
        ])
        .unwrap();
        let s = complex_eigenvalues_via_real_embedding(&h, DEFAULT_TOL).unwrap();
        let want = [c(1.0, 2.0), c(1.0, -2.0), c(3.0, 0.0), c(3.0, 0.0)];
        assert!(match_multisets(&s.eigenvalues, &want).max_distance < 1e-14);
    }

    #[test]
    fn multiset_matching() {
        let a = [c(0.0, 0.0), c(1.0, 0.0)];
        let b = [c(1.0, 1e-9), c(0.0, 0.0)];
        let m = match_multisets(&a, &b);
        assert!((m.max_distance - 1e-9).abs() < 1e-20);
        assert_eq!(m.worst, Some((c(1.0, 0.0), c(1.0, 1e-9))));
        assert!(match_multisets(&a, &b[..1]).max_distance.is_infinite());
    }

    #[test]
    fn determinant_by_lu() {
        let a = DenseRealMatrix::from_rows(&[
            vec![0.0, 2.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![3.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!((determinant(&a) + 5.0).abs() < 1e-14);
    }
}
