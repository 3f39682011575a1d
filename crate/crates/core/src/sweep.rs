//! Flux sweeps (butterfly and cocoon) and `g` sweeps (the transition fan).
//!
//! Cells are solved on a rayon pool of the requested size and written back by
//! their precomputed slot, so the output never depends on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bifurcation::{complex_count, default_tol_im};
use crate::eigen::{eigenvalues, Spectrum, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::operator::{build_harper_matrix, Boundary, OperatorSpec, PotentialKind};

/// Spectrum of the chain matrix for one parameter point.
pub fn spectrum_for(spec: &OperatorSpec) -> Result<Spectrum> {
    let h = build_harper_matrix(spec)?;
    Ok(eigenvalues(&h, DEFAULT_TOL)?.with_source(*spec))
}

/// `0..l`.
pub fn full_range(l: usize) -> Vec<usize> {
    (0..l).collect()
}

pub fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// One representative per class of momentum indices with identical spectra.
///
/// On a periodic Harper ring a lattice translation by `s` sites maps momentum
/// index `p` to `p + q s mod L`, so only `p mod gcd(q, L)` matters; the
/// representatives are `0..gcd(q, L)` (all of `0..L` at `q = 0`). Other
/// boundaries and potentials get the full range.
pub fn distinct_momenta(l: usize, q: usize, boundary: Boundary, potential: PotentialKind) -> Vec<usize> {
    match (boundary, potential) {
        (Boundary::Periodic, PotentialKind::Harper) => (0..gcd(q % l, l)).collect(),
        _ => full_range(l),
    }
}

pub(crate) fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::InvalidParameter("worker count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub q: usize,
    pub p: usize,
    pub eigen_index: usize,
    pub re: f64,
    pub im: f64,
}

/// Per-cell outcome of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStatus {
    pub q: usize,
    pub p: usize,
    pub max_residual: f64,
    /// Solver failure for this cell; its points are absent from the dataset.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDataset {
    pub l: usize,
    pub g: f64,
    pub boundary: Boundary,
    pub potential: PotentialKind,
    /// Lexicographic in `(q, p, eigen_index)`.
    pub points: Vec<SweepPoint>,
    pub cells: Vec<CellStatus>,
}

impl SweepDataset {
    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|c| c.error.is_none())
    }

    pub fn max_abs_im(&self) -> f64 {
        self.points.iter().fold(0.0, |m, p| m.max(p.im.abs()))
    }

    /// The points of cell `(q, p)` as complex numbers.
    pub fn cell(&self, q: usize, p: usize) -> Vec<num_complex::Complex64> {
        self.points
            .iter()
            .filter(|pt| pt.q == q && pt.p == p)
            .map(|pt| num_complex::Complex64::new(pt.re, pt.im))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxSweep {
    pub l: usize,
    pub g: f64,
    pub boundary: Boundary,
    pub potential: PotentialKind,
    pub fluxes: Vec<usize>,
    pub momenta: Vec<usize>,
    pub workers: usize,
}

impl FluxSweep {
    /// Every flux numerator and momentum index, periodic Harper chain.
    pub fn new(l: usize, g: f64) -> Self {
        Self {
            l,
            g,
            boundary: Boundary::Periodic,
            potential: PotentialKind::Harper,
            fluxes: full_range(l),
            momenta: full_range(l),
            workers: 1,
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

fn check_subset(name: &str, set: &[usize], l: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Empty("index subset"));
    }
    if let Some(bad) = set.iter().find(|&&i| i >= l) {
        return Err(Error::InvalidParameter(format!("{name} index {bad} out of range for L = {l}")));
    }
    Ok(())
}

/// Solves every `(q, p)` cell of the sweep.
pub fn flux_sweep(cfg: &FluxSweep) -> Result<SweepDataset> {
    check_subset("flux", &cfg.fluxes, cfg.l)?;
    check_subset("momentum", &cfg.momenta, cfg.l)?;
    let mut fluxes = cfg.fluxes.clone();
    fluxes.sort_unstable();
    fluxes.dedup();
    let mut momenta = cfg.momenta.clone();
    momenta.sort_unstable();
    momenta.dedup();

    let base = OperatorSpec::harper(cfg.l, 0, 0, cfg.g)?
        .with_boundary(cfg.boundary)
        .with_potential(cfg.potential);
    base.validate()?;

    let cells: Vec<(usize, usize)> = fluxes
        .iter()
        .flat_map(|&q| momenta.iter().map(move |&p| (q, p)))
        .collect();

    let pool = build_pool(cfg.workers)?;
    let results: Vec<Result<Spectrum>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(q, p)| spectrum_for(&base.with_q(q as i64).with_p(p as i64)))
            .collect()
    });

    let mut points = Vec::with_capacity(cells.len() * cfg.l);
    let mut statuses = Vec::with_capacity(cells.len());
    for (&(q, p), res) in cells.iter().zip(results) {
        match res {
            Ok(s) => {
                points.extend(s.eigenvalues.iter().enumerate().map(|(i, z)| SweepPoint {
                    q,
                    p,
                    eigen_index: i,
                    re: z.re,
                    im: z.im,
                }));
                statuses.push(CellStatus {
                    q,
                    p,
                    max_residual: s.max_residual,
                    error: None,
                });
            }
            Err(e) => statuses.push(CellStatus {
                q,
                p,
                max_residual: f64::NAN,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(SweepDataset {
        l: cfg.l,
        g: cfg.g,
        boundary: cfg.boundary,
        potential: cfg.potential,
        points,
        cells: statuses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GSweepPoint {
    pub g: f64,
    pub q: usize,
    pub p: usize,
    pub eigen_index: usize,
    pub re: f64,
    pub im: f64,
}

/// Summary of the union over momenta at one `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GSlice {
    pub g: f64,
    pub complex_count: usize,
    pub tol_im: f64,
    pub max_abs_im: f64,
    pub failed_momenta: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GSweepDataset {
    pub l: usize,
    pub q: usize,
    pub momenta: Vec<usize>,
    pub g_grid: Vec<f64>,
    /// Lexicographic in `(g index, p, eigen_index)`.
    pub points: Vec<GSweepPoint>,
    pub slices: Vec<GSlice>,
}

/// `g_min, g_min + step, ...` up to `g_max` inclusive (within half a step).
pub fn g_grid(g_min: f64, g_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(g_min.is_finite() && g_max.is_finite() && step.is_finite()) || step <= 0.0 || g_max <= g_min {
        return Err(Error::InvalidParameter(format!(
            "bad g range [{g_min}, {g_max}] with step {step}"
        )));
    }
    let n = ((g_max - g_min) / step + 0.5).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| g_min + i as f64 * step).collect();
    if let Some(last) = grid.last_mut() {
        if (*last - g_max).abs() <= 0.5 * step {
            *last = g_max;
        }
    }
    Ok(grid)
}

/// Union-over-momenta spectra on a grid of `g` at fixed flux `q / l`.
pub fn g_sweep(l: usize, q: usize, grid: &[f64], momenta: &[usize], workers: usize) -> Result<GSweepDataset> {
    if grid.len() < 2 {
        return Err(Error::InvalidParameter("g grid needs at least two points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("g grid must be strictly ascending".into()));
    }
    check_subset("momentum", momenta, l)?;
    let mut momenta = momenta.to_vec();
    momenta.sort_unstable();
    momenta.dedup();
    let base = OperatorSpec::harper(l, q as i64, 0, 0.0)?;
    for &g in grid {
        base.with_g(g).validate()?;
    }

    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|gi| momenta.iter().map(move |&p| (gi, p)))
        .collect();
    let pool = build_pool(workers)?;
    let results: Vec<Result<Spectrum>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(gi, p)| spectrum_for(&base.with_g(grid[gi]).with_p(p as i64)))
            .collect()
    });

    let mut points = Vec::new();
    let mut slices: Vec<GSlice> = grid
        .iter()
        .map(|&g| GSlice {
            g,
            complex_count: 0,
            tol_im: default_tol_im(&base.with_g(g), &momenta),
            max_abs_im: 0.0,
            failed_momenta: Vec::new(),
        })
        .collect();
    for (&(gi, p), res) in cells.iter().zip(results) {
        let slice = &mut slices[gi];
        match res {
            Ok(s) => {
                slice.complex_count += complex_count(&s, slice.tol_im);
                slice.max_abs_im = slice.max_abs_im.max(s.max_abs_im());
                points.extend(s.eigenvalues.iter().enumerate().map(|(i, z)| GSweepPoint {
                    g: grid[gi],
                    q,
                    p,
                    eigen_index: i,
                    re: z.re,
                    im: z.im,
                }));
            }
            Err(_) => slice.failed_momenta.push(p),
        }
    }
    Ok(GSweepDataset {
        l,
        q,
        momenta,
        g_grid: grid.to_vec(),
        points,
        slices,
    })
}
