//! Python bindings: configuration checks, runs, kernel evaluation and the
//! small diagnostics helpers. Structured results come back as plain dicts.

use std::path::PathBuf;

use landau_core::checkpoint::Checkpoint;
use landau_core::config::parse_config_str;
use landau_core::diagnostics;
use landau_core::kernel::{self, KernelParams};
use landau_core::stepper::{self, RunEvent};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(landau, LandauError, PyException, "Raised for any simulator error; the message names the module and variant.");

fn py_err(e: landau_core::Error) -> PyErr {
    LandauError::new_err(e.qualified())
}

/// Serialises through JSON so Python receives ordinary dicts and lists.
fn to_python<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| py_err(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn params(gamma: f64, z: &[f64]) -> PyResult<KernelParams> {
    KernelParams::new(gamma, z.len()).map_err(py_err)
}

/// Raises `LandauError` naming the first violated gate; returns None otherwise.
#[pyfunction]
fn validate_config(text: &str) -> PyResult<()> {
    parse_config_str(text).map(|_| ()).map_err(py_err)
}

/// Runs a TOML configuration. Returns `records`, `steps`, `clipped_mass`,
/// `final_time` and the flat `final_values` (spatial-cell-major).
#[pyfunction]
#[pyo3(signature = (config, resume=None))]
fn run<'py>(py: Python<'py>, config: &str, resume: Option<PathBuf>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config_str(config).map_err(py_err)?;
    let start = match resume {
        Some(p) => Some(Checkpoint::load(&p).map_err(py_err)?.field),
        None => None,
    };
    let summary = py
        .detach(|| stepper::run(&cfg, start, |_: RunEvent<'_>| Ok(())))
        .map_err(py_err)?;
    let out = serde_json::json!({
        "records": summary.records,
        "steps": summary.steps,
        "clipped_mass": summary.clipped_mass,
        "final_time": summary.final_field.time,
        "final_values": summary.final_field.values,
    });
    to_python(py, &out)
}

/// `a(z)` as a `d × d` nested list, `d = len(z)`.
#[pyfunction]
fn kernel_matrix(z: Vec<f64>, gamma: f64) -> PyResult<Vec<Vec<f64>>> {
    let p = params(gamma, &z)?;
    let m = kernel::kernel_matrix(&z, &p);
    Ok((0..z.len()).map(|i| (0..z.len()).map(|j| m.get(i, j)).collect()).collect())
}

/// `b(z) = ∇·a(z)`.
#[pyfunction]
fn kernel_divergence(z: Vec<f64>, gamma: f64) -> PyResult<Vec<f64>> {
    kernel::kernel_divergence(&z, &params(gamma, &z)?).map_err(py_err)
}

/// `c(z) = ∇·b(z)`.
#[pyfunction]
fn kernel_c(z: Vec<f64>, gamma: f64) -> PyResult<f64> {
    kernel::kernel_c(&z, &params(gamma, &z)?).map_err(py_err)
}

/// Derivative-hierarchy constants for `gamma`.
#[pyfunction]
fn hierarchy_params<'py>(py: Python<'py>, gamma: f64) -> PyResult<Bound<'py, PyAny>> {
    to_python(py, &diagnostics::hierarchy_params(gamma).map_err(py_err)?)
}

/// Least-squares slope of `ln value` against `ln(1+t)` over `window`.
#[pyfunction]
fn fit_decay_rate<'py>(py: Python<'py>, series: Vec<(f64, f64)>, window: (f64, f64)) -> PyResult<Bound<'py, PyAny>> {
    to_python(py, &diagnostics::fit_decay_rate(&series, window).map_err(py_err)?)
}

/// Header and values of an LNDK checkpoint.
#[pyfunction]
fn load_checkpoint<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let c = Checkpoint::load(&path).map_err(py_err)?;
    let g = &c.field.grid;
    let out = serde_json::json!({
        "gamma": c.gamma,
        "time": c.field.time,
        "d_x": g.d_x,
        "d_v": g.d_v,
        "n_x": g.n_x,
        "n_v": g.n_v,
        "L_x": g.l_x,
        "v_max": g.v_max,
        "values": c.field.values,
    });
    to_python(py, &out)
}

#[pymodule]
fn landau(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LandauError", m.py().get_type::<LandauError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_c, m)?)?;
    m.add_function(wrap_pyfunction!(hierarchy_params, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decay_rate, m)?)?;
    m.add_function(wrap_pyfunction!(load_checkpoint, m)?)?;
    Ok(())
}
