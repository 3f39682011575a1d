//! Dense matrices for the non-Hermitian Harper chain and its 2D parent lattice.
//!
//! Row `m` of the chain operator holds `-e^{g}` in column `m + 1`, `-e^{-g}` in
//! column `m - 1` and the onsite energy on the diagonal, so that
//! `(H xi)_m = -e^{g} xi_{m+1} - e^{-g} xi_{m-1} + u_m xi_m`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseComplexMatrix, DenseRealMatrix};

/// Largest |g| accepted by [`OperatorSpec`].
pub const MAX_ABS_G: f64 = 20.0;

/// Largest lattice size accepted by the 2D builder.
pub const MAX_2D_SIZE: usize = 12;

/// cos(2 pi a / b), evaluated after exact integer reduction to the first octant.
///
/// Quarter turns come out as exact zeros and `a` and `b - a` give bitwise equal
/// results.
pub fn cos_turns(a: i64, b: i64) -> f64 {
    assert!(b > 0, "denominator must be positive");
    let (mut a, mut b) = (a.rem_euclid(b) as i128, b as i128);
    if 2 * a > b {
        a = b - a;
    }
    let mut sign = 1.0;
    if 4 * a > b {
        // cos(x) = -cos(pi - x)
        a = b - 2 * a;
        b *= 2;
        sign = -1.0;
    }
    if 8 * a > b {
        // cos(x) = sin(pi/2 - x)
        let num = b - 4 * a;
        sign * (TAU * num as f64 / (4 * b) as f64).sin()
    } else {
        sign * (TAU * a as f64 / b as f64).cos()
    }
}

/// sin(2 pi a / b) with the same reduction as [`cos_turns`].
pub fn sin_turns(a: i64, b: i64) -> f64 {
    cos_turns(4 * a - b, 4 * b)
}

/// Flux per plaquette `q / L`, with `q` reduced into `0..L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FluxRational {
    q: usize,
    l: usize,
}

impl FluxRational {
    pub fn new(q: i64, l: usize) -> Result<Self> {
        if l < 3 {
            return Err(Error::InvalidParameter(format!(
                "lattice size must be at least 3, got {l}"
            )));
        }
        Ok(Self {
            q: q.rem_euclid(l as i64) as usize,
            l,
        })
    }

    pub fn numerator(&self) -> usize {
        self.q
    }

    pub fn denominator(&self) -> usize {
        self.l
    }

    pub fn phi(&self) -> f64 {
        self.q as f64 / self.l as f64
    }

    /// The reflected flux `1 - phi`, i.e. numerator `L - q mod L`.
    pub fn reflected(&self) -> Self {
        Self {
            q: (self.l - self.q) % self.l,
            l: self.l,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Periodic => f.write_str("periodic"),
            Boundary::Open => f.write_str("open"),
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "periodic" => Ok(Boundary::Periodic),
            "open" => Ok(Boundary::Open),
            other => Err(Error::Parse(format!("unknown boundary '{other}'"))),
        }
    }
}

/// Onsite term of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum PotentialKind {
    /// `-2 cos(2 pi phi m + k)`.
    Harper,
    /// `-c` on every site.
    Constant { c: f64 },
    /// `-V_m` with `V_m` uniform on `[-width, width]`, drawn from ChaCha20
    /// seeded with `seed`; `V_m = width * (2u - 1)` where `u` is the top 53
    /// bits of the `m`-th `next_u64` output scaled to `[0, 1)`.
    Random { seed: u64, width: f64 },
}

impl std::fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PotentialKind::Harper => f.write_str("harper"),
            PotentialKind::Constant { c } => write!(f, "constant:{c}"),
            PotentialKind::Random { seed, width } => write!(f, "random:{seed}:{width}"),
        }
    }
}

impl std::str::FromStr for PotentialKind {
    type Err = Error;

    /// Accepts `harper`, `constant:c` and `random:seed:W`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::Parse(format!("bad potential '{s}'"));
        match parts.as_slice() {
            [k] if k.eq_ignore_ascii_case("harper") => Ok(PotentialKind::Harper),
            [k, c] if k.eq_ignore_ascii_case("constant") => Ok(PotentialKind::Constant {
                c: c.parse().map_err(|_| bad())?,
            }),
            [k, seed, w] if k.eq_ignore_ascii_case("random") => Ok(PotentialKind::Random {
                seed: seed.parse().map_err(|_| bad())?,
                width: w.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Reproducible uniform draws on `[-width, width]`, one per site.
pub fn random_potential(seed: u64, width: f64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            width * (2.0 * u - 1.0)
        })
        .collect()
}

/// A full parameter point: which chain matrix to build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub flux: FluxRational,
    /// Momentum index, `k = 2 pi p / L`, reduced into `0..L`.
    pub p: usize,
    pub g: f64,
    pub boundary: Boundary,
    pub potential: PotentialKind,
}

impl OperatorSpec {
    /// Periodic Harper chain at flux `q / l` and momentum index `p`.
    pub fn harper(l: usize, q: i64, p: i64, g: f64) -> Result<Self> {
        let spec = Self {
            flux: FluxRational::new(q, l)?,
            p: p.rem_euclid(l as i64) as usize,
            g,
            boundary: Boundary::Periodic,
            potential: PotentialKind::Harper,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_potential(mut self, potential: PotentialKind) -> Self {
        self.potential = potential;
        self
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn with_q(mut self, q: i64) -> Self {
        self.flux = FluxRational {
            q: q.rem_euclid(self.l() as i64) as usize,
            l: self.l(),
        };
        self
    }

    pub fn with_p(mut self, p: i64) -> Self {
        self.p = p.rem_euclid(self.l() as i64) as usize;
        self
    }

    #[inline]
    pub fn l(&self) -> usize {
        self.flux.denominator()
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.flux.numerator()
    }

    pub fn k(&self) -> f64 {
        TAU * self.p as f64 / self.l() as f64
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.l();
        if l < 3 {
            return Err(Error::InvalidParameter(format!(
                "lattice size must be at least 3, got {l}"
            )));
        }
        if self.p >= l || self.q() >= l {
            return Err(Error::InvalidParameter(format!(
                "indices out of range: q = {}, p = {}, L = {l}",
                self.q(),
                self.p
            )));
        }
        if !self.g.is_finite() || self.g.abs() > MAX_ABS_G {
            return Err(Error::InvalidParameter(format!(
                "g must be finite with |g| <= {MAX_ABS_G}, got {}",
                self.g
            )));
        }
        match self.potential {
            PotentialKind::Harper => {}
            PotentialKind::Constant { c } if c.is_finite() => {}
            PotentialKind::Random { width, .. } if width.is_finite() && width >= 0.0 => {}
            other => {
                return Err(Error::InvalidParameter(format!(
                    "non-finite potential parameters: {other}"
                )))
            }
        }
        Ok(())
    }
}

/// Diagonal entry of row `m`.
///
/// # Panics
///
/// If `m >= L`.
pub fn onsite_potential(spec: &OperatorSpec, m: usize) -> f64 {
    let l = spec.l();
    assert!(m < l, "site index {m} out of range for L = {l}");
    match spec.potential {
        PotentialKind::Harper => {
            let turns = (spec.q() * m + spec.p) as i64;
            -2.0 * cos_turns(turns, l as i64)
        }
        PotentialKind::Constant { c } => -c,
        PotentialKind::Random { seed, width } => -random_potential(seed, width, m + 1)[m],
    }
}

fn onsite_all(spec: &OperatorSpec) -> Vec<f64> {
    match spec.potential {
        PotentialKind::Random { seed, width } => random_potential(seed, width, spec.l())
            .into_iter()
            .map(|v| -v)
            .collect(),
        _ => (0..spec.l()).map(|m| onsite_potential(spec, m)).collect(),
    }
}

/// The `L x L` chain matrix.
pub fn build_harper_matrix(spec: &OperatorSpec) -> Result<DenseRealMatrix> {
    spec.validate()?;
    let l = spec.l();
    let forward = -spec.g.exp();
    let backward = -(-spec.g).exp();
    let mut h = DenseRealMatrix::zeros(l);
    for (m, u) in onsite_all(spec).into_iter().enumerate() {
        h.set(m, m, u);
    }
    for m in 0..l - 1 {
        h.set(m, m + 1, forward);
        h.set(m + 1, m, backward);
    }
    if spec.boundary == Boundary::Periodic {
        h.set(l - 1, 0, forward);
        h.set(0, l - 1, backward);
    }
    Ok(h)
}

/// The `L^2 x L^2` lattice operator with flux `q / L` per plaquette and the
/// non-Hermitian factors on the `m` bonds. Site `(n, m)` has index `n L + m`;
/// both directions are periodic.
pub fn build_2d_hofstadter_matrix(l: usize, q: i64, g: f64) -> Result<DenseComplexMatrix> {
    if !(3..=MAX_2D_SIZE).contains(&l) {
        return Err(Error::InvalidParameter(format!(
            "2D lattice size must be in 3..={MAX_2D_SIZE}, got {l}"
        )));
    }
    if !g.is_finite() || g.abs() > MAX_ABS_G {
        return Err(Error::InvalidParameter(format!("bad g = {g}")));
    }
    let q = q.rem_euclid(l as i64);
    let li = l as i64;
    let idx = |n: usize, m: usize| (n % l) * l + (m % l);
    let forward = Complex64::new(-g.exp(), 0.0);
    let backward = Complex64::new(-(-g).exp(), 0.0);
    let mut h = DenseComplexMatrix::zeros(l * l);
    for n in 0..l {
        for m in 0..l {
            let row = idx(n, m);
            let turns = q * m as i64;
            let phase = Complex64::new(cos_turns(turns, li), sin_turns(turns, li));
            h.set(row, idx(n + 1, m), -phase);
            h.set(row, idx(n + l - 1, m), -phase.conj());
            h.set(row, idx(n, m + 1), forward);
            h.set(row, idx(n, m + l - 1), backward);
        }
    }
    Ok(h)
}
