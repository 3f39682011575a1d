//! Python module `cocoonlab`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cocoon_core::bifurcation as bif;
use cocoon_core::eigen;
use cocoon_core::matrix::DenseRealMatrix;
use cocoon_core::operator::{self, Boundary, PotentialKind};
use cocoon_core::sweep;
use cocoon_core::symmetry;
use cocoon_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Parse(_) | Error::OddLattice(_) | Error::Io(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseRealMatrix> {
    DenseRealMatrix::from_rows(&rows).map_err(to_py)
}

/// One parameter point of the chain.
#[pyclass(name = "OperatorSpec", frozen)]
#[derive(Clone)]
struct PySpec {
    inner: operator::OperatorSpec,
}

#[pymethods]
impl PySpec {
    #[new]
    #[pyo3(signature = (l, q, p, g, boundary = "periodic", potential = "harper"))]
    fn new(l: usize, q: i64, p: i64, g: f64, boundary: &str, potential: &str) -> PyResult<Self> {
        let boundary: Boundary = boundary.parse().map_err(to_py)?;
        let potential: PotentialKind = potential.parse().map_err(to_py)?;
        let inner = operator::OperatorSpec::harper(l, q, p, g)
            .map_err(to_py)?
            .with_boundary(boundary)
            .with_potential(potential);
        inner.validate().map_err(to_py)?;
        Ok(PySpec { inner })
    }

    #[getter(L)]
    fn l(&self) -> usize {
        self.inner.l()
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p
    }

    #[getter]
    fn g(&self) -> f64 {
        self.inner.g
    }

    #[getter]
    fn boundary(&self) -> String {
        self.inner.boundary.to_string()
    }

    #[getter]
    fn potential(&self) -> String {
        self.inner.potential.to_string()
    }

    fn with_g(&self, g: f64) -> PyResult<Self> {
        let inner = self.inner.with_g(g);
        inner.validate().map_err(to_py)?;
        Ok(PySpec { inner })
    }

    /// Dense chain matrix as a list of rows.
    fn matrix(&self) -> PyResult<Vec<Vec<f64>>> {
        let h = operator::build_harper_matrix(&self.inner).map_err(to_py)?;
        Ok((0..h.dim()).map(|r| h.row(r).to_vec()).collect())
    }

    /// Eigenvalues in canonical order.
    fn spectrum(&self) -> PyResult<Vec<Complex64>> {
        Ok(sweep::spectrum_for(&self.inner).map_err(to_py)?.eigenvalues)
    }

    /// Every symmetry check that applies, as dicts.
    fn verify<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        symmetry::verify_point(&self.inner)
            .map_err(to_py)?
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("name", &r.name)?;
                d.set_item("pass", r.pass)?;
                d.set_item("max_distance", r.max_distance)?;
                d.set_item("tolerance", r.tolerance)?;
                d.set_item("note", r.note.clone())?;
                Ok(d)
            })
            .collect()
    }

    /// `(eigenvalue, participation ratio, eta)` for each simple eigenvalue.
    fn state_diagnostics(&self) -> PyResult<Vec<(Complex64, f64, f64)>> {
        Ok(symmetry::state_diagnostics(&self.inner)
            .map_err(to_py)?
            .into_iter()
            .map(|d| (d.pair.value, d.participation, d.eta))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "OperatorSpec(L={}, q={}, p={}, g={}, boundary='{}', potential='{}')",
            self.inner.l(),
            self.inner.q(),
            self.inner.p,
            self.inner.g,
            self.inner.boundary,
            self.inner.potential
        )
    }
}

/// Eigenvalues of a real square matrix given as a list of rows.
#[pyfunction]
#[pyo3(signature = (rows, tol = eigen::DEFAULT_TOL))]
fn eigenvalues(rows: Vec<Vec<f64>>, tol: f64) -> PyResult<Vec<Complex64>> {
    Ok(eigen::eigenvalues(&matrix(rows)?, tol).map_err(to_py)?.eigenvalues)
}

/// Roots of the characteristic polynomial, for small matrices.
#[pyfunction]
fn charpoly_roots(rows: Vec<Vec<f64>>) -> PyResult<Vec<Complex64>> {
    Ok(eigen::charpoly_roots_oracle(&matrix(rows)?).map_err(to_py)?.eigenvalues)
}

/// Rows `(q, p, eigen_index, re, im)` over all fluxes and momenta.
#[pyfunction]
#[pyo3(name = "flux_sweep", signature = (l, g, workers = 1, boundary = "periodic", potential = "harper"))]
fn py_flux_sweep(
    py: Python<'_>,
    l: usize,
    g: f64,
    workers: usize,
    boundary: &str,
    potential: &str,
) -> PyResult<Vec<(usize, usize, usize, f64, f64)>> {
    let mut cfg = sweep::FluxSweep::new(l, g).workers(workers);
    cfg.boundary = boundary.parse().map_err(to_py)?;
    cfg.potential = potential.parse().map_err(to_py)?;
    let data = py.allow_threads(|| sweep::flux_sweep(&cfg)).map_err(to_py)?;
    if let Some(bad) = data.cells.iter().find(|c| c.error.is_some()) {
        return Err(PyRuntimeError::new_err(format!(
            "cell q={}, p={} failed: {}",
            bad.q,
            bad.p,
            bad.error.as_deref().unwrap_or("")
        )));
    }
    Ok(data.points.iter().map(|p| (p.q, p.p, p.eigen_index, p.re, p.im)).collect())
}

/// Changes in the number of complex eigenvalues of the periodic Harper
/// chain on `[g_min, g_max]`, as dicts.
#[pyfunction]
#[pyo3(signature = (l, q, g_min = 0.0, g_max = 0.5, scan_step = 1e-3, refine_tol = 1e-9, tol_im = None, momenta = None))]
#[allow(clippy::too_many_arguments)]
fn find_critical_g<'py>(
    py: Python<'py>,
    l: usize,
    q: usize,
    g_min: f64,
    g_max: f64,
    scan_step: f64,
    refine_tol: f64,
    tol_im: Option<f64>,
    momenta: Option<Vec<usize>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let momenta =
        momenta.unwrap_or_else(|| sweep::distinct_momenta(l, q % l.max(1), Boundary::Periodic, PotentialKind::Harper));
    let mut search = bif::CriticalSearch::new(l, q, momenta, g_min, g_max)
        .map_err(to_py)?
        .scan_step(scan_step)
        .refine_tol(refine_tol);
    search.tol_im = tol_im;
    let events = py.allow_threads(|| bif::find_critical_g(&search)).map_err(to_py)?;
    events
        .iter()
        .map(|e| {
            let d = PyDict::new(py);
            d.set_item("g_lo", e.g_lo)?;
            d.set_item("g_hi", e.g_hi)?;
            d.set_item("g_critical", e.g_critical)?;
            d.set_item("count_before", e.count_before)?;
            d.set_item("count_after", e.count_after)?;
            d.set_item(
                "direction",
                match e.direction() {
                    bif::Direction::Complexifying => "complexifying",
                    bif::Direction::Realifying => "realifying",
                },
            )?;
            d.set_item("seed_eigenvalue", e.seed_eigenvalue)?;
            d.set_item("seed_momentum", e.seed_momentum)?;
            d.set_item("resolved", e.resolved)?;
            Ok(d)
        })
        .collect()
}

/// Eigenvalues of the chain at every momentum in `momenta`.
#[pyfunction]
fn union_spectrum(spec: &PySpec, momenta: Vec<usize>) -> PyResult<Vec<Complex64>> {
    Ok(bif::union_spectrum(&spec.inner, &momenta).map_err(to_py)?.eigenvalues)
}

/// `(quartets, pairs, defects)` among values with `|Im| > tol`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn quartet_grouping(
    values: Vec<Complex64>,
    l: usize,
    tol: f64,
) -> PyResult<(Vec<[Complex64; 4]>, Vec<[Complex64; 2]>, Vec<Complex64>)> {
    let g = bif::quartet_grouping(&values, l, tol).map_err(to_py)?;
    Ok((g.quartets, g.pairs, g.defects))
}

/// Runs the command line with `args` (without the program name) and
/// returns the exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("cocoonlab".to_string()).chain(args).collect();
    py.allow_threads(|| cocoon_core::cli::run_cli(argv))
}

#[pymodule]
fn cocoonlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(charpoly_roots, m)?)?;
    m.add_function(wrap_pyfunction!(py_flux_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(find_critical_g, m)?)?;
    m.add_function(wrap_pyfunction!(union_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(quartet_grouping, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
