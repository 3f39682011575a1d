//! Checks of the spectral symmetries and eigenvector diagnostics.
//!
//! Every check compares two spectra as multisets (or two matrices entry by
//! entry) and reports the largest mismatch together with the pair that
//! produced it.

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::{eigenpair, match_multisets, EigenPair, Spectrum};
use crate::error::{Error, Result};
use crate::operator::{build_harper_matrix, cos_turns, Boundary, OperatorSpec, PotentialKind};
use crate::sweep::spectrum_for;

/// Default tolerance of the spectral checks.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Largest `|Im|` accepted on an open chain.
pub const OPEN_IM_TOL: f64 = 1e-9;

/// Eigenvalues closer than this (relative to `||H||_F`) to another are
/// treated as degenerate by the eigenvector diagnostics.
pub const SIMPLE_GAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub name: String,
    pub point: Option<OperatorSpec>,
    pub max_distance: f64,
    pub tolerance: f64,
    /// `max_distance <= tolerance`.
    pub pass: bool,
    /// Worst-matched pair.
    pub witness: Option<(Complex64, Complex64)>,
    pub note: Option<String>,
}

impl SymmetryReport {
    fn new(name: &str, point: Option<OperatorSpec>, max_distance: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            point,
            max_distance,
            tolerance,
            pass: max_distance <= tolerance,
            witness: None,
            note: None,
        }
    }

    fn witness(mut self, w: Option<(Complex64, Complex64)>) -> Self {
        self.witness = w;
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

impl std::fmt::Display for SymmetryReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name
        )?;
        if let Some(s) = &self.point {
            write!(
                f,
                " L={} q={} p={} g={} {}",
                s.l(),
                s.q(),
                s.p,
                s.g,
                s.boundary
            )?;
        }
        write!(f, " distance={:e} tol={:e}", self.max_distance, self.tolerance)?;
        if let Some((a, b)) = self.witness {
            write!(f, " worst=({}{:+}i, {}{:+}i)", a.re, a.im, b.re, b.im)?;
        }
        if let Some(n) = &self.note {
            write!(f, " [{n}]")?;
        }
        Ok(())
    }
}

fn require_harper(spec: &OperatorSpec, what: &str) -> Result<()> {
    if spec.potential != PotentialKind::Harper {
        return Err(Error::InvalidParameter(format!(
            "{what} needs the cosine potential, got {}",
            spec.potential
        )));
    }
    Ok(())
}

/// Compares the chain matrix at `q` with one built from the unreduced flux
/// `q + L`. Tolerance 0.
pub fn verify_flux_periodicity(spec: &OperatorSpec) -> Result<SymmetryReport> {
    let h = build_harper_matrix(spec)?;
    let mut shifted = h.clone();
    if spec.potential == PotentialKind::Harper {
        let (l, q) = (spec.l() as i64, spec.q() as i64);
        for m in 0..spec.l() {
            let turns = (q + l) * m as i64 + spec.p as i64;
            shifted.set(m, m, -2.0 * cos_turns(turns, l));
        }
    }
    let max = h
        .as_slice()
        .iter()
        .zip(shifted.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(SymmetryReport::new("flux periodicity", Some(*spec), max, 0.0))
}

/// Largest gap between `z` and any other eigenvalue.
fn isolation(values: &[Complex64], i: usize) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, w)| (values[i] - w).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Index of the most isolated eigenvalue, first in canonical order on ties.
fn most_isolated(values: &[Complex64]) -> usize {
    (0..values.len())
        .max_by(|&i, &j| isolation(values, i).total_cmp(&isolation(values, j)).then(j.cmp(&i)))
        .unwrap_or(0)
}

/// `spectrum(q, p) = -spectrum(q, p + L/2)`, plus the explicit map
/// `xi_m -> (-1)^m xi_m` applied to the eigenvector of the most isolated
/// eigenvalue. The reported distance is the larger of the multiset distance
/// and the mapped residual divided by `||H||_F`.
pub fn verify_energy_negation(spec: &OperatorSpec) -> Result<SymmetryReport> {
    let l = spec.l();
    if l % 2 != 0 {
        return Err(Error::OddLattice(l));
    }
    require_harper(spec, "energy negation")?;
    let partner = spec.with_p((spec.p + l / 2) as i64);
    let a = spectrum_for(spec)?;
    let b = spectrum_for(&partner)?;
    let m = match_multisets(&a.eigenvalues, &b.negated());

    let h = build_harper_matrix(spec)?;
    let h2 = build_harper_matrix(&partner)?;
    let norm = h.frobenius_norm();
    let i = most_isolated(&a.eigenvalues);
    let pair = eigenpair(&h, a.eigenvalues[i])?;
    let mapped: Vec<Complex64> = pair
        .vector
        .iter()
        .enumerate()
        .map(|(m, z)| if m % 2 == 0 { *z } else { -z })
        .collect();
    let hx = h2.mul_complex_vec(&mapped);
    let res = hx
        .iter()
        .zip(&mapped)
        .map(|(y, x)| (y + pair.value * x).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / norm;

    let report = SymmetryReport::new("energy negation", Some(*spec), m.max_distance.max(res), SYMMETRY_TOL)
        .witness(m.worst)
        .note(format!("mapped eigenvector residual {res:e}"));
    Ok(report)
}

/// `spectrum(q, p) = spectrum(L - q, L - p)`.
pub fn verify_flux_reflection(spec: &OperatorSpec) -> Result<SymmetryReport> {
    let l = spec.l() as i64;
    let reflected = spec.with_q(l - spec.q() as i64).with_p(l - spec.p as i64);
    let a = spectrum_for(spec)?;
    let b = spectrum_for(&reflected)?;
    let m = match_multisets(&a.eigenvalues, &b.eigenvalues);
    Ok(SymmetryReport::new("flux reflection", Some(*spec), m.max_distance, SYMMETRY_TOL).witness(m.worst))
}

/// `spectrum(g) = spectrum(-g)`.
pub fn verify_g_reflection(spec: &OperatorSpec) -> Result<SymmetryReport> {
    let a = spectrum_for(spec)?;
    let b = spectrum_for(&spec.with_g(-spec.g))?;
    let m = match_multisets(&a.eigenvalues, &b.eigenvalues);
    Ok(SymmetryReport::new("g reflection", Some(*spec), m.max_distance, SYMMETRY_TOL).witness(m.worst))
}

/// `S = conj(S)` for the spectrum of a real matrix.
pub fn verify_conjugation_closure(spectrum: &Spectrum) -> SymmetryReport {
    let m = match_multisets(&spectrum.eigenvalues, &spectrum.conjugated());
    SymmetryReport::new("conjugation closure", spectrum.source_spec, m.max_distance, SYMMETRY_TOL)
        .witness(m.worst)
}

/// Tolerance for the open-chain comparison. `1e-8` up to `|g| = 1` or
/// `L = 100`; beyond both it grows by one decade per unit of
/// `|g| L / 100` above 1, since the gauge transform has condition number
/// `e^{|g| (L - 1)}`.
pub fn open_chain_tolerance(l: usize, g: f64) -> f64 {
    if g.abs() > 1.0 && l > 100 {
        let excess = (g.abs() * l as f64 / 100.0 - 1.0).max(0.0);
        SYMMETRY_TOL * 10f64.powf(excess)
    } else {
        SYMMETRY_TOL
    }
}

/// On an open chain the spectrum is real and equal to the `g = 0` spectrum.
/// The reported distance is the larger of the multiset distance to `g = 0`
/// and `10 max |Im|`, so that passing at `1e-8` also means `|Im| <= 1e-9`.
pub fn verify_open_bc_reality(spec: &OperatorSpec) -> Result<SymmetryReport> {
    if spec.boundary != Boundary::Open {
        return Err(Error::InvalidParameter("open-chain check needs the open boundary".into()));
    }
    let a = spectrum_for(spec)?;
    let b = spectrum_for(&spec.with_g(0.0))?;
    let m = match_multisets(&a.eigenvalues, &b.eigenvalues);
    let im = a.max_abs_im();
    let tol = open_chain_tolerance(spec.l(), spec.g);
    let mut report = SymmetryReport::new(
        "open-chain reality",
        Some(*spec),
        m.max_distance.max(im * SYMMETRY_TOL / OPEN_IM_TOL),
        tol,
    )
    .witness(m.worst);
    if tol > SYMMETRY_TOL {
        report = report.note(format!("tolerance loosened to {tol:e} for |g| > 1, L > 100"));
    }
    Ok(report)
}

/// All checks that apply to `spec`: (a), (c), (d) and conjugation always;
/// negation for the cosine potential on even lattices; reality on open
/// chains.
pub fn verify_point(spec: &OperatorSpec) -> Result<Vec<SymmetryReport>> {
    let mut out = vec![
        verify_flux_periodicity(spec)?,
        verify_flux_reflection(spec)?,
        verify_g_reflection(spec)?,
        verify_conjugation_closure(&spectrum_for(spec)?),
    ];
    if spec.l() % 2 == 0 && spec.potential == PotentialKind::Harper {
        out.insert(1, verify_energy_negation(spec)?);
    }
    if spec.boundary == Boundary::Open {
        out.push(verify_open_bc_reality(spec)?);
    }
    Ok(out)
}

/// `n` reproducible periodic Harper points with `L` drawn from `sizes`,
/// `q, p` uniform in `0..L` and `g` uniform in `[-g_max, g_max]`.
pub fn random_grid(seed: u64, n: usize, sizes: &[usize], g_max: f64) -> Result<Vec<OperatorSpec>> {
    if sizes.is_empty() {
        return Err(Error::Empty("lattice sizes"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (0..n)
        .map(|_| {
            let l = sizes[(unit() * sizes.len() as f64) as usize];
            let q = (unit() * l as f64) as i64;
            let p = (unit() * l as f64) as i64;
            let g = g_max * (2.0 * unit() - 1.0);
            OperatorSpec::harper(l, q, p, g)
        })
        .collect()
}

/// `1 / sum |v_m|^4` for a unit vector. Computed as
/// `(sum |v|^2)^2 / sum |v|^4`, which agrees for unit vectors and does not
/// depend on the overall scale.
pub fn participation_ratio(v: &[Complex64]) -> f64 {
    let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let n4: f64 = v.iter().map(|z| z.norm_sqr().powi(2)).sum();
    n2 * n2 / n4
}

/// `1 - |sum v_m^2|` for a unit vector, zero exactly when `v` is a phase
/// times a real vector. Computed as `1 - |sum v^2| / sum |v|^2`.
pub fn conjugation_order_parameter(v: &[Complex64]) -> f64 {
    let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let s: Complex64 = v.iter().map(|z| z * z).sum();
    (1.0 - s.norm() / n2).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDiagnostics {
    pub pair: EigenPair,
    pub participation: f64,
    pub eta: f64,
    /// Distance to the nearest other eigenvalue over `||H||_F`.
    pub relative_gap: f64,
}

/// Eigenvectors and diagnostics for every eigenvalue of `spec` that is
/// separated from the rest by more than [`SIMPLE_GAP`]` * ||H||_F`.
pub fn state_diagnostics(spec: &OperatorSpec) -> Result<Vec<StateDiagnostics>> {
    let h = build_harper_matrix(spec)?;
    let norm = h.frobenius_norm();
    let spectrum = spectrum_for(spec)?;
    let values = &spectrum.eigenvalues;
    let mut out = Vec::new();
    for i in 0..values.len() {
        let gap = isolation(values, i) / norm;
        if gap <= SIMPLE_GAP {
            continue;
        }
        let pair = eigenpair(&h, values[i])?;
        out.push(StateDiagnostics {
            participation: participation_ratio(&pair.vector),
            eta: conjugation_order_parameter(&pair.vector),
            relative_gap: gap,
            pair,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(l: usize, q: i64, p: i64, g: f64) -> OperatorSpec {
        OperatorSpec::harper(l, q, p, g).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn flux_periodicity_is_exact() {
        for s in [
            spec(6, 2, 0, 0.0),
            spec(50, 1, 0, 0.3),
            spec(4, 0, 0, 0.0).with_boundary(Boundary::Open),
            spec(7, 3, 5, -0.8),
        ] {
            let r = verify_flux_periodicity(&s).unwrap();
            assert!(r.pass);
            assert_eq!(r.max_distance, 0.0);
        }
    }

    #[test]
    fn energy_negation_examples() {
        for s in [spec(4, 0, 0, 0.0), spec(50, 1, 3, 0.0), spec(50, 1, 3, 0.4)] {
            let r = verify_energy_negation(&s).unwrap();
            assert!(r.pass, "{r}");
        }
        let ring = spectrum_for(&spec(4, 0, 0, 0.0)).unwrap();
        assert!(match_multisets(&ring.eigenvalues, &[c(-4.0, 0.0), c(-2.0, 0.0), c(-2.0, 0.0), c(0.0, 0.0)]).max_distance < 1e-14);
        assert_eq!(verify_energy_negation(&spec(5, 1, 0, 0.0)).unwrap_err(), Error::OddLattice(5));
        let flat = spec(6, 1, 0, 0.0).with_potential(PotentialKind::Constant { c: 1.0 });
        assert!(verify_energy_negation(&flat).is_err());
    }

    #[test]
    fn flux_reflection_examples() {
        for s in [spec(6, 1, 0, 0.0), spec(4, 2, 1, 0.3), spec(50, 7, 11, -0.25)] {
            let r = verify_flux_reflection(&s).unwrap();
            assert!(r.pass, "{r}");
        }
    }

    #[test]
    fn g_reflection_examples() {
        for s in [spec(8, 3, 1, 0.0), spec(4, 0, 0, 0.5), spec(50, 1, 0, 0.25)] {
            let r = verify_g_reflection(&s).unwrap();
            assert!(r.pass, "{r}");
        }
        assert_eq!(verify_g_reflection(&spec(8, 3, 1, 0.0)).unwrap().max_distance, 0.0);
    }

    #[test]
    fn conjugation_closure_is_exact() {
        for s in [spec(10, 3, 0, 0.0), spec(4, 0, 0, 0.5), spec(50, 1, 5, 0.4)] {
            let r = verify_conjugation_closure(&spectrum_for(&s).unwrap());
            assert!(r.pass);
            assert_eq!(r.max_distance, 0.0, "{r}");
        }
        let bad = Spectrum::from_values(vec![c(0.0, 1.0), c(0.0, -1.5)], 0.0, 0.0);
        assert!(!verify_conjugation_closure(&bad).pass);
    }

    #[test]
    fn open_chain_examples() {
        let open = |l, q, p, g| spec(l, q, p, g).with_boundary(Boundary::Open);
        for s in [open(6, 1, 0, 0.5), open(6, 1, 0, 0.0), open(50, 3, 7, 1.0)] {
            let r = verify_open_bc_reality(&s).unwrap();
            assert!(r.pass, "{r}");
            assert!(spectrum_for(&s).unwrap().max_abs_im() < 1e-9);
        }
        assert!(verify_open_bc_reality(&spec(6, 1, 0, 0.5)).is_err());
        assert_eq!(open_chain_tolerance(50, 3.0), 1e-8);
        assert_eq!(open_chain_tolerance(200, 0.5), 1e-8);
        assert!(open_chain_tolerance(200, 2.0) > 1e-8);
    }

    #[test]
    fn grid_is_reproducible() {
        let a = random_grid(7, 20, &[4, 6], 1.0).unwrap();
        assert_eq!(a, random_grid(7, 20, &[4, 6], 1.0).unwrap());
        assert!(a.iter().all(|s| [4, 6].contains(&s.l()) && s.g.abs() <= 1.0));
        assert!(random_grid(7, 1, &[], 1.0).is_err());
    }

    #[test]
    fn participation_examples() {
        let uniform = vec![c(1.0 / 8f64.sqrt(), 0.0); 8];
        assert!((participation_ratio(&uniform) - 8.0).abs() < 1e-12);
        let mut e3 = vec![c(0.0, 0.0); 8];
        e3[3] = c(1.0, 0.0);
        assert_eq!(participation_ratio(&e3), 1.0);
        let h = 1.0 / 2f64.sqrt();
        assert!((participation_ratio(&[c(h, 0.0), c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0)]) - 2.0).abs() < 1e-12);
        // phase and permutation
        let v = [c(0.6, 0.0), c(0.0, 0.8)];
        let w = [c(0.0, 0.8) * c(0.0, 1.0), c(0.6, 0.0) * c(0.0, 1.0)];
        assert!((participation_ratio(&v) - participation_ratio(&w)).abs() < 1e-15);
    }

    #[test]
    fn order_parameter_examples() {
        assert_eq!(conjugation_order_parameter(&[c(0.6, 0.0), c(-0.8, 0.0)]), 0.0);
        let h = 1.0 / 2f64.sqrt();
        assert!((conjugation_order_parameter(&[c(h, 0.0), c(0.0, h)]) - 1.0).abs() < 1e-15);
        let v = [c(0.6, 0.1), c(-0.3, 0.7), c(0.2, 0.0)];
        let rot = Complex64::from_polar(1.0, 0.77);
        let w: Vec<_> = v.iter().map(|z| z * rot).collect();
        assert!((conjugation_order_parameter(&v) - conjugation_order_parameter(&w)).abs() < 1e-15);
    }

    #[test]
    fn real_states_have_zero_eta() {
        let d = state_diagnostics(&spec(10, 3, 1, 0.1)).unwrap();
        assert!(!d.is_empty());
        for s in &d {
            if s.pair.value.im == 0.0 {
                assert!(s.eta <= 1e-8, "{}", s.eta);
            }
            assert!(s.participation >= 1.0 - 1e-12 && s.participation <= 10.0 + 1e-12);
        }
        let d = state_diagnostics(&spec(4, 0, 0, 0.5)).unwrap();
        assert!(d.iter().filter(|s| s.pair.value.im.abs() > 0.1).all(|s| s.eta > 0.5));
    }
}
