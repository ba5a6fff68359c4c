//! Python bindings for the `softrbf` collocation solver.
//!
//! Settings travel as JSON strings so that the Python side sees exactly the
//! schema the command-line tool reads and writes.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use softrbf::bench::CaseReport as RustReport;
use softrbf::tuner::{optimize_case, SearchSpace, ValidationObjective};
use softrbf::{CaseId, CaseSettings, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_case(case: &str) -> PyResult<CaseId> {
    case.parse().map_err(to_py)
}

fn settings_for(id: CaseId, settings_json: Option<&str>) -> PyResult<CaseSettings> {
    match settings_json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("settings: {e}"))),
        None => Ok(CaseSettings::defaults(id)),
    }
}

/// Softmax of partition logits onto the unit simplex.
#[pyfunction]
fn softmax_lengths(logits: Vec<f64>) -> PyResult<Vec<f64>> {
    softrbf::softmax_lengths(&logits).map_err(to_py)
}

/// n-th derivative of exp(-(x-c)^2 / (2 sigma^2)).
#[pyfunction]
fn gauss_deriv_1d(x: f64, center: f64, sigma: f64, order: u8) -> PyResult<f64> {
    softrbf::gauss_deriv_1d(x, center, sigma, order).map_err(to_py)
}

#[pyfunction]
fn fourier_magnitude(sigma: f64, omega: f64) -> f64 {
    softrbf::fourier_magnitude(sigma, omega)
}

#[pyfunction]
fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    softrbf::expected_improvement(mean, variance, best)
}

/// Case defaults as a JSON string.
#[pyfunction]
fn default_settings(case: &str) -> PyResult<String> {
    let id = parse_case(case)?;
    Ok(serde_json::to_string(&CaseSettings::defaults(id)).expect("settings serialize"))
}

/// Centers and widths of a case's basis (after clipping for irregular domains).
#[pyfunction]
#[pyo3(signature = (case, settings_json=None))]
fn sample_basis(case: &str, settings_json: Option<&str>) -> PyResult<(Vec<(f64, f64)>, Vec<f64>)> {
    let id = parse_case(case)?;
    let built = softrbf::builtin_case(id, &settings_for(id, settings_json)?).map_err(to_py)?;
    let centers = built.basis.centers.iter().map(|c| (c[0], c[1])).collect();
    Ok((centers, built.basis.widths))
}

/// Outcome of one benchmark case.
#[pyclass(frozen, name = "CaseReport")]
struct PyCaseReport {
    inner: RustReport,
}

#[pymethods]
impl PyCaseReport {
    #[getter]
    fn case(&self) -> &'static str {
        self.inner.config.case.as_str()
    }

    #[getter]
    fn basis_size(&self) -> usize {
        self.inner.basis_size
    }

    #[getter]
    fn residual_inf(&self) -> f64 {
        self.inner.solve.residual_inf
    }

    #[getter]
    fn solve_seconds(&self) -> f64 {
        self.inner.solve.solve_seconds
    }

    #[getter]
    fn mse(&self) -> f64 {
        self.inner.metrics.mse
    }

    #[getter]
    fn max_error(&self) -> f64 {
        self.inner.metrics.max_abs
    }

    #[getter]
    fn passed(&self) -> bool {
        self.inner.passed()
    }

    #[getter]
    fn points(&self) -> Vec<(f64, f64)> {
        self.inner.points.iter().map(|p| (p[0], p[1])).collect()
    }

    #[getter]
    fn predicted(&self) -> Vec<f64> {
        self.inner.predicted.clone()
    }

    #[getter]
    fn exact(&self) -> Vec<f64> {
        self.inner.exact.clone()
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients.clone()
    }

    /// Full report (config echo, solve summary, metrics, checks) as JSON.
    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("report serializes")
    }

    fn __repr__(&self) -> String {
        format!(
            "CaseReport(case={}, basis_size={}, residual_inf={:.3e}, mse={:.3e}, max_error={:.3e})",
            self.case(),
            self.basis_size(),
            self.residual_inf(),
            self.mse(),
            self.max_error()
        )
    }
}

/// Runs a built-in case; `settings_json` replaces the defaults when given.
#[pyfunction]
#[pyo3(signature = (case, settings_json=None))]
fn run_case(py: Python<'_>, case: &str, settings_json: Option<&str>) -> PyResult<PyCaseReport> {
    let id = parse_case(case)?;
    let settings = settings_for(id, settings_json)?;
    let inner = py.detach(|| softrbf::run_case(id, &settings)).map_err(to_py)?;
    Ok(PyCaseReport { inner })
}

/// Bayesian optimization of the first of two partition lengths inside
/// `w_range`. Returns `(best_lengths, best_j, [(lengths, j, best_j), ...])`.
#[pyfunction]
#[pyo3(signature = (case, budget, seed, w_range, validation_factor=2, settings_json=None))]
fn optimize_fraction(
    py: Python<'_>,
    case: &str,
    budget: usize,
    seed: u64,
    w_range: (f64, f64),
    validation_factor: usize,
    settings_json: Option<&str>,
) -> PyResult<(Vec<f64>, f64, Vec<(Vec<f64>, f64, f64)>)> {
    let id = parse_case(case)?;
    let settings = settings_for(id, settings_json)?;
    let space = SearchSpace::first_fraction(w_range.0, w_range.1).map_err(to_py)?;
    let outcome = py
        .detach(|| {
            let built = softrbf::builtin_case(id, &settings)?;
            let obj = ValidationObjective::new(built, space, validation_factor)?;
            optimize_case(&obj, budget, seed)
        })
        .map_err(to_py)?;
    let trace = outcome.trace.records.iter().map(|r| (r.lengths.clone(), r.j, r.best_j)).collect();
    Ok((outcome.trace.best().lengths.clone(), outcome.best_j, trace))
}

#[pymodule]
pub fn softrbf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(softmax_lengths, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_deriv_1d, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_magnitude, m)?)?;
    m.add_function(wrap_pyfunction!(expected_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(default_settings, m)?)?;
    m.add_function(wrap_pyfunction!(sample_basis, m)?)?;
    m.add_function(wrap_pyfunction!(run_case, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_fraction, m)?)?;
    m.add_class::<PyCaseReport>()?;
    Ok(())
}
