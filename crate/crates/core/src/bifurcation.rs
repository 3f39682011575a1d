//! Transitions from real to complex eigenvalues as `g` grows.
//!
//! Critical values are located by bisection on the integer number of complex
//! eigenvalues, which is a step function of `g`. Near an exceptional point the
//! eigenvalues move like `sqrt(g - g_c)`, so root finding on a gap would be
//! badly conditioned while the count stays exact.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{canonical_cmp, Spectrum};
use crate::error::{Error, Result};
use crate::operator::{build_harper_matrix, OperatorSpec};
use crate::sweep::spectrum_for;

/// Relative threshold for calling an eigenvalue complex.
pub const TOL_IM_FACTOR: f64 = 1e-7;

/// Number of eigenvalues with `|Im| > tol_im`.
pub fn complex_count(spectrum: &Spectrum, tol_im: f64) -> usize {
    spectrum
        .eigenvalues
        .iter()
        .filter(|z| z.im.abs() > tol_im)
        .count()
}

/// `1e-7 * max_p ||H_p||_F / sqrt(L)` over the given momenta at the spec's
/// flux and `g`.
pub fn default_tol_im(spec: &OperatorSpec, momenta: &[usize]) -> f64 {
    let l = spec.l() as f64;
    let norm = momenta
        .iter()
        .map(|&p| {
            build_harper_matrix(&spec.with_p(p as i64))
                .map(|h| h.frobenius_norm())
                .unwrap_or(0.0)
        })
        .fold(0.0f64, f64::max);
    TOL_IM_FACTOR * norm / l.sqrt()
}

/// Union over `momenta` of the spectra at the spec's flux and `g`.
pub fn union_spectrum(spec: &OperatorSpec, momenta: &[usize]) -> Result<Spectrum> {
    let mut values = Vec::with_capacity(momenta.len() * spec.l());
    let mut residual = 0.0f64;
    for &p in momenta {
        let s = spectrum_for(&spec.with_p(p as i64))?;
        residual = residual.max(s.max_residual);
        values.extend(s.eigenvalues);
    }
    Ok(Spectrum::from_values(values, residual, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Real eigenvalues merge and leave the axis.
    Complexifying,
    /// Complex pairs return to the real axis.
    Realifying,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationEvent {
    pub g_lo: f64,
    pub g_hi: f64,
    pub g_critical: f64,
    pub count_before: usize,
    pub count_after: usize,
    /// Newly complex eigenvalue with the smallest positive imaginary part, on
    /// the complex side of the bracket.
    pub seed_eigenvalue: Complex64,
    /// Momentum index the seed came from.
    pub seed_momentum: usize,
    /// False when bisection kept finding more than one change inside the
    /// bracket even after a finer re-scan.
    pub resolved: bool,
}

impl BifurcationEvent {
    pub fn direction(&self) -> Direction {
        if self.count_after > self.count_before {
            Direction::Complexifying
        } else {
            Direction::Realifying
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSearch {
    /// Flux, boundary and potential; `p` and `g` are ignored.
    pub base: OperatorSpec,
    pub momenta: Vec<usize>,
    pub g_min: f64,
    pub g_max: f64,
    pub scan_step: f64,
    pub refine_tol: f64,
    /// Overrides [`default_tol_im`].
    pub tol_im: Option<f64>,
}

impl CriticalSearch {
    pub fn new(l: usize, q: usize, momenta: Vec<usize>, g_min: f64, g_max: f64) -> Result<Self> {
        Ok(Self {
            base: OperatorSpec::harper(l, q as i64, 0, 0.0)?,
            momenta,
            g_min,
            g_max,
            scan_step: 1e-3,
            refine_tol: 1e-9,
            tol_im: None,
        })
    }

    pub fn scan_step(mut self, step: f64) -> Self {
        self.scan_step = step;
        self
    }

    pub fn refine_tol(mut self, tol: f64) -> Self {
        self.refine_tol = tol;
        self
    }

    pub fn tol_im(mut self, tol: f64) -> Self {
        self.tol_im = Some(tol);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.g_min.is_finite() && self.g_max.is_finite()) || self.g_min >= self.g_max {
            return Err(Error::InvalidParameter(format!(
                "need g_min < g_max, got [{}, {}]",
                self.g_min, self.g_max
            )));
        }
        if !(self.scan_step > 0.0) || !self.scan_step.is_finite() {
            return Err(Error::InvalidParameter(format!("bad scan step {}", self.scan_step)));
        }
        if !(self.refine_tol >= 1e-10) || !self.refine_tol.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "refinement tolerance must be at least 1e-10, got {}",
                self.refine_tol
            )));
        }
        if self.momenta.is_empty() {
            return Err(Error::Empty("momentum subset"));
        }
        if let Some(t) = self.tol_im {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("tol_im must be positive, got {t}")));
            }
        }
        self.base.with_g(self.g_min).validate()?;
        self.base.with_g(self.g_max).validate()
    }

    fn tol_at(&self, g: f64) -> f64 {
        self.tol_im
            .unwrap_or_else(|| default_tol_im(&self.base.with_g(g), &self.momenta))
    }

    /// Complex count of the union spectrum at `g`.
    pub fn count_at(&self, g: f64) -> Result<usize> {
        let spec = self.base.with_g(g);
        let tol = self.tol_at(g);
        let mut total = 0;
        for &p in &self.momenta {
            total += complex_count(&spectrum_for(&spec.with_p(p as i64))?, tol);
        }
        Ok(total)
    }

    fn seed_at(&self, g: f64) -> Result<(Complex64, usize)> {
        let spec = self.base.with_g(g);
        let tol = self.tol_at(g);
        let mut best: Option<(Complex64, usize)> = None;
        for &p in &self.momenta {
            let s = spectrum_for(&spec.with_p(p as i64))?;
            for z in s.eigenvalues.iter().filter(|z| z.im > tol) {
                if best.map_or(true, |(b, _)| z.im < b.im) {
                    best = Some((*z, p));
                }
            }
        }
        Ok(best.unwrap_or((Complex64::new(f64::NAN, f64::NAN), self.momenta[0])))
    }

    fn grid(&self, lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| if i == n { hi } else { lo + i as f64 * step })
            .collect()
    }

    fn scan(&self, lo: f64, hi: f64, step: f64) -> Result<Vec<(f64, usize)>> {
        let grid = self.grid(lo, hi, step);
        let counts: Result<Vec<usize>> = grid.par_iter().map(|&g| self.count_at(g)).collect();
        Ok(grid.into_iter().zip(counts?).collect())
    }

    fn event(&self, lo: f64, hi: f64, c_lo: usize, c_hi: usize, resolved: bool) -> Result<BifurcationEvent> {
        let seed_g = if c_hi >= c_lo { hi } else { lo };
        let (seed, p) = self.seed_at(seed_g)?;
        Ok(BifurcationEvent {
            g_lo: lo,
            g_hi: hi,
            g_critical: lo + 0.5 * (hi - lo),
            count_before: c_lo,
            count_after: c_hi,
            seed_eigenvalue: seed,
            seed_momentum: p,
            resolved,
        })
    }

    /// Bisects `[lo, hi]`; on a lost bracket re-scans at a tenth of the step
    /// once (`fine == false`), otherwise gives up on the bracket.
    fn refine(&self, mut lo: f64, mut hi: f64, c_lo: usize, c_hi: usize, fine: bool) -> Result<Vec<BifurcationEvent>> {
        let (cell_lo, cell_hi) = (lo, hi);
        while hi - lo > self.refine_tol {
            let mid = lo + 0.5 * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            let c = self.count_at(mid)?;
            if c == c_lo {
                lo = mid;
            } else if c == c_hi {
                hi = mid;
            } else if fine {
                return Ok(vec![self.event(lo, hi, c_lo, c_hi, false)?]);
            } else {
                let step = (cell_hi - cell_lo) / 10.0;
                return self.refine_scan(&self.scan(cell_lo, cell_hi, step)?, true);
            }
        }
        Ok(vec![self.event(lo, hi, c_lo, c_hi, true)?])
    }

    fn refine_scan(&self, scan: &[(f64, usize)], fine: bool) -> Result<Vec<BifurcationEvent>> {
        let brackets: Vec<_> = scan
            .windows(2)
            .filter(|w| w[0].1 != w[1].1)
            .map(|w| (w[0], w[1]))
            .collect();
        let nested: Result<Vec<Vec<BifurcationEvent>>> = brackets
            .par_iter()
            .map(|&((lo, c_lo), (hi, c_hi))| self.refine(lo, hi, c_lo, c_hi, fine))
            .collect();
        Ok(nested?.into_iter().flatten().collect())
    }
}

/// Every change of the union complex count on `[g_min, g_max]`, refined to
/// brackets of width at most `refine_tol`, ascending in `g_critical`.
pub fn find_critical_g(search: &CriticalSearch) -> Result<Vec<BifurcationEvent>> {
    search.validate()?;
    let scan = search.scan(search.g_min, search.g_max, search.scan_step)?;
    let mut events = search.refine_scan(&scan, false)?;
    events.sort_by(|a, b| a.g_critical.total_cmp(&b.g_critical));
    Ok(events)
}

/// Picks the quartet followed by [`pitchfork_trace`]: the pair of sector-`p`
/// eigenvalues closest to `energy` at the grid point nearest `g_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartetSelector {
    pub g_ref: f64,
    pub energy: f64,
}

impl QuartetSelector {
    pub fn from_event(event: &BifurcationEvent) -> Self {
        Self {
            g_ref: event.g_critical,
            energy: event.seed_eigenvalue.re,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchforkTrace {
    pub l: usize,
    pub q: usize,
    pub p_pair: (usize, usize),
    pub g_grid: Vec<f64>,
    /// Tracks 0 and 1 live in sector `p_pair.0`; tracks 2 and 3 are their
    /// negation partners in sector `p_pair.1`.
    pub tracks: [Vec<Complex64>; 4],
    pub g_critical: f64,
    /// Grid steps where the matching stayed ambiguous after refinement.
    pub ambiguous_steps: usize,
}

impl PitchforkTrace {
    pub fn at(&self, i: usize) -> [Complex64; 4] {
        [self.tracks[0][i], self.tracks[1][i], self.tracks[2][i], self.tracks[3][i]]
    }
}

const MAX_MIDPOINT_LEVELS: usize = 3;
const AMBIGUITY: f64 = 1e-12;

/// Best ordered choice of two distinct entries of `values` continuing
/// `prev`, with a flag for a runner-up within [`AMBIGUITY`].
fn match_two(prev: [Complex64; 2], values: &[Complex64]) -> ([Complex64; 2], bool) {
    let mut best = (f64::INFINITY, [Complex64::default(); 2]);
    let mut second = f64::INFINITY;
    for (i, a) in values.iter().enumerate() {
        let da = (a - prev[0]).norm();
        if da >= second {
            continue;
        }
        for (j, b) in values.iter().enumerate() {
            if i == j {
                continue;
            }
            let cost = da + (b - prev[1]).norm();
            if cost < best.0 {
                second = best.0;
                best = (cost, [*a, *b]);
            } else if cost < second {
                second = cost;
            }
        }
    }
    (best.1, second - best.0 <= AMBIGUITY)
}

fn nearest_two(values: &[Complex64], target: f64) -> [Complex64; 2] {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| {
        let da = (a - Complex64::new(target, 0.0)).norm();
        let db = (b - Complex64::new(target, 0.0)).norm();
        da.total_cmp(&db).then(canonical_cmp(a, b))
    });
    let mut pair = [sorted[0], sorted[1]];
    pair.sort_by(canonical_cmp);
    pair
}

fn nearest_to(values: &[Complex64], target: Complex64, skip: Option<usize>) -> usize {
    (0..values.len())
        .filter(|&i| Some(i) != skip)
        .min_by(|&i, &j| (values[i] - target).norm().total_cmp(&(values[j] - target).norm()))
        .expect("non-empty spectrum")
}

/// Follows one quartet across `g_grid` by continuity.
///
/// Matching between neighbouring grid points minimises the summed complex
/// distance over ordered pairs within each sector. When two assignments tie to
/// within `1e-12`, midpoints are inserted (up to three levels) and the tie is
/// finally broken by canonical order.
pub fn pitchfork_trace(
    l: usize,
    q: usize,
    p_pair: (usize, usize),
    g_grid: &[f64],
    selector: QuartetSelector,
) -> Result<PitchforkTrace> {
    if l % 2 != 0 {
        return Err(Error::OddLattice(l));
    }
    if (p_pair.0 + l / 2) % l != p_pair.1 % l {
        return Err(Error::InvalidParameter(format!(
            "momentum pair must be (p, p + L/2), got {p_pair:?}"
        )));
    }
    if g_grid.len() < 2 || g_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("g grid must be ascending with at least two points".into()));
    }
    let base = OperatorSpec::harper(l, q as i64, 0, 0.0)?;
    let sectors = |g: f64| -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let a = spectrum_for(&base.with_g(g).with_p(p_pair.0 as i64))?;
        let b = spectrum_for(&base.with_g(g).with_p(p_pair.1 as i64))?;
        Ok((a.eigenvalues, b.eigenvalues))
    };

    let start = (0..g_grid.len())
        .min_by(|&i, &j| {
            (g_grid[i] - selector.g_ref)
                .abs()
                .total_cmp(&(g_grid[j] - selector.g_ref).abs())
        })
        .unwrap();

    let (sa, sb) = sectors(g_grid[start])?;
    let first = nearest_two(&sa, selector.energy);
    let i2 = nearest_to(&sb, -first[0], None);
    let i3 = nearest_to(&sb, -first[1], Some(i2));
    let start_state = [first[0], first[1], sb[i2], sb[i3]];

    let mut ambiguous_steps = 0usize;
    // One step from `(g_prev, state)` to `g_next`, subdividing on ties.
    let mut advance = |g_prev: f64, state: [Complex64; 4], g_next: f64| -> Result<Vec<(f64, [Complex64; 4])>> {
        let mut path = Vec::new();
        let mut stack = vec![(g_next, 0usize)];
        let (mut gp, mut st) = (g_prev, state);
        while let Some((g, level)) = stack.pop() {
            let (sa, sb) = sectors(g)?;
            let (a, amb_a) = match_two([st[0], st[1]], &sa);
            let (b, amb_b) = match_two([st[2], st[3]], &sb);
            if (amb_a || amb_b) && level < MAX_MIDPOINT_LEVELS {
                stack.push((g, level + 1));
                stack.push((gp + 0.5 * (g - gp), level + 1));
                continue;
            }
            if amb_a || amb_b {
                ambiguous_steps += 1;
            }
            st = [a[0], a[1], b[0], b[1]];
            gp = g;
            path.push((g, st));
        }
        Ok(path)
    };

    let mut forward = vec![(g_grid[start], start_state)];
    for &g in &g_grid[start + 1..] {
        let (gp, st) = *forward.last().unwrap();
        forward.extend(advance(gp, st, g)?);
    }
    let mut backward: Vec<(f64, [Complex64; 4])> = Vec::new();
    let (mut gp, mut st) = (g_grid[start], start_state);
    for &g in g_grid[..start].iter().rev() {
        for step in advance(gp, st, g)? {
            backward.push(step);
        }
        (gp, st) = *backward.last().unwrap();
    }
    backward.reverse();
    backward.extend(forward);

    let mut tracks: [Vec<Complex64>; 4] = Default::default();
    let mut grid = Vec::with_capacity(backward.len());
    for (g, st) in backward {
        grid.push(g);
        for k in 0..4 {
            tracks[k].push(st[k]);
        }
    }
    Ok(PitchforkTrace {
        l,
        q,
        p_pair: (p_pair.0 % l, p_pair.1 % l),
        g_grid: grid,
        tracks,
        g_critical: selector.g_ref,
        ambiguous_steps,
    })
}

/// Partition of the complex part of a union spectrum.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QuartetGrouping {
    /// `[E, E*, -E, -E*]`, with `E` in the upper-left quadrant's canonical
    /// position (first in canonical order among the four).
    pub quartets: Vec<[Complex64; 4]>,
    /// Pairs `{E, E*}` with `Re E = 0` within tolerance, closed on their own.
    pub pairs: Vec<[Complex64; 2]>,
    /// Complex values whose partners are missing.
    pub defects: Vec<Complex64>,
}

/// Groups the eigenvalues with `|Im| > tol` into sets closed under
/// conjugation and negation. Requires an even lattice so that sectors `k` and
/// `k + pi` both exist.
pub fn quartet_grouping(values: &[Complex64], l: usize, tol: f64) -> Result<QuartetGrouping> {
    if l % 2 != 0 {
        return Err(Error::OddLattice(l));
    }
    let mut complex: Vec<Complex64> = values.iter().copied().filter(|z| z.im.abs() > tol).collect();
    complex.sort_by(canonical_cmp);
    let mut used = vec![false; complex.len()];
    let mut out = QuartetGrouping::default();

    let find = |used: &[bool], target: Complex64| -> Option<usize> {
        (0..complex.len())
            .filter(|&j| !used[j])
            .map(|j| (j, (complex[j] - target).norm()))
            .filter(|&(_, d)| d <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j)
    };

    for i in 0..complex.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = complex[i];
        let Some(j) = find(&used, z.conj()) else {
            out.defects.push(z);
            continue;
        };
        used[j] = true;
        if z.re.abs() <= tol {
            out.pairs.push([z, complex[j]]);
            continue;
        }
        let Some(k) = find(&used, -z) else {
            out.defects.push(z);
            out.defects.push(complex[j]);
            continue;
        };
        used[k] = true;
        let Some(m) = find(&used, -z.conj()) else {
            out.defects.extend([z, complex[j], complex[k]]);
            continue;
        };
        used[m] = true;
        out.quartets.push([z, complex[j], complex[k], complex[m]]);
    }
    Ok(out)
}
