//! Python bindings. Matrices cross the boundary as nested lists of
//! `complex`; reports cross as JSON strings.

use std::path::PathBuf;

use chm_core::estimation::{estimate_c as estimate_c_core, sample_coefficients, DftGrid, SampleEnsemble};
use chm_core::kernels;
use chm_core::oracle::{run_analytic_suite, SuiteOptions};
use chm_core::pipeline::{self, ConfigOverrides, ExperimentConfig};
use chm_core::{build_family, enumerate_k, simulator, Axis, Error, Family};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Invariant(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rows(m: &nalgebra::DMatrix<Complex64>) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

#[pyclass(name = "Circuit", module = "chm", from_py_object)]
#[derive(Clone)]
struct PyCircuit {
    inner: chm_core::Circuit,
}

#[pymethods]
impl PyCircuit {
    /// Benchmark family: `yzy-noent`, `yzy-ent`, `circuit16` or `circuit17`.
    #[staticmethod]
    #[pyo3(signature = (family, encoder = "x", qubits = 4, layers = 1, depth = 1))]
    fn family(family: &str, encoder: &str, qubits: usize, layers: usize, depth: usize) -> PyResult<Self> {
        let family: Family = family.parse().map_err(to_py)?;
        let axis: Axis = encoder.parse().map_err(to_py)?;
        Ok(PyCircuit { inner: build_family(family, axis, qubits, layers, depth).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyCircuit { inner: chm_core::Circuit::from_json(text).map_err(to_py)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.num_qubits()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.num_params()
    }

    #[getter]
    fn layers(&self) -> usize {
        self.inner.num_layers()
    }

    /// Single-use violations as readable strings; empty when valid.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().iter().map(|v| v.to_string()).collect()
    }

    fn expectation(&self, x: f64, theta: Vec<f64>) -> PyResult<f64> {
        simulator::expectation(&self.inner, x, &theta).map_err(to_py)
    }

    fn gradient(&self, x: f64, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        simulator::gradient_all(&self.inner, x, &theta).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Circuit(n={}, L={}, m={})", self.inner.num_qubits(), self.inner.num_layers(), self.inner.num_params())
    }
}

#[pyclass(name = "CMatrix", module = "chm")]
struct PyCMatrix {
    inner: chm_core::CMatrix,
}

#[pymethods]
impl PyCMatrix {
    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.data().shape()
    }

    #[getter]
    fn omegas(&self) -> Vec<i64> {
        self.inner.omegas().to_vec()
    }

    /// Column labels as sparse `[(param, k)]` lists.
    #[getter]
    fn ks(&self) -> Vec<Vec<(u32, i8)>> {
        self.inner.ks().iter().map(|k| k.entries().to_vec()).collect()
    }

    fn entries(&self) -> Vec<Vec<Complex64>> {
        rows(self.inner.data())
    }

    fn reconstruct(&self, x: f64, theta: Vec<f64>) -> Complex64 {
        self.inner.reconstruct(x, &theta)
    }

    fn variance_profile(&self) -> PyResult<Vec<f64>> {
        kernels::variance_profile(&self.inner).map_err(to_py)
    }

    fn row_energy(&self) -> PyResult<Vec<f64>> {
        kernels::row_energy(&self.inner).map_err(to_py)
    }

    fn covariance(&self) -> PyResult<Vec<Vec<Complex64>>> {
        kernels::covariance_from_c(&self.inner).map(|m| rows(&m)).map_err(to_py)
    }

    fn h_averaged(&self) -> Vec<Vec<Complex64>> {
        rows(&kernels::h_averaged(&self.inner))
    }

    fn h_kernel(&self, theta: Vec<f64>) -> PyResult<Vec<Vec<Complex64>>> {
        kernels::h_kernel(&self.inner, &theta).map(|m| rows(&m)).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_file().to_json().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let (r, c) = self.inner.data().shape();
        format!("CMatrix({r}x{c})")
    }
}

/// Exact C by Pauli propagation; needs single-use ±1 multipliers.
#[pyfunction]
fn exact_c(circuit: &PyCircuit) -> PyResult<PyCMatrix> {
    Ok(PyCMatrix { inner: chm_core::exact_c(&circuit.inner).map_err(to_py)? })
}

/// Truncated Monte-Carlo Ĉ from the first half of a seeded ensemble.
#[pyfunction]
#[pyo3(signature = (circuit, seed, samples, hamming, kcap = 20000, nx = None))]
fn estimate_c(circuit: &PyCircuit, seed: u64, samples: usize, hamming: usize, kcap: usize, nx: Option<usize>) -> PyResult<PyCMatrix> {
    let c = &circuit.inner;
    let grid = match nx {
        Some(n) => DftGrid::for_circuit(c, n),
        None => DftGrid::for_circuit(c, 126),
    }
    .map_err(to_py)?;
    let ens = SampleEnsemble::new(seed, samples);
    let s = sample_coefficients(c, &ens, ens.c_split(), &grid).map_err(to_py)?;
    let ks = enumerate_k(c.num_params(), hamming, kcap);
    Ok(PyCMatrix { inner: estimate_c_core(c, &s, &ks).map_err(to_py)? })
}

/// Runs the configured pipelines. `config` is a JSON object with the CLI
/// keys; returns `{pipeline: report_json}` and writes files if `out` is set.
#[pyfunction]
#[pyo3(signature = (config, out = None))]
fn run(py: Python<'_>, config: &str, out: Option<PathBuf>) -> PyResult<Vec<(String, String)>> {
    let file = ConfigOverrides::from_json(config).map_err(to_py)?;
    let cfg = ExperimentConfig::resolve(&file, &ConfigOverrides::default()).map_err(to_py)?;
    let reports = py.detach(|| pipeline::run(&cfg)).map_err(to_py)?;
    if let Some(dir) = out {
        reports.write(&dir).map_err(to_py)?;
    }
    let mut result = Vec::new();
    if let Some(r) = &reports.variance {
        result.push(("variance".to_string(), r.to_json().map_err(to_py)?));
    }
    if let Some(r) = &reports.correlation {
        result.push(("correlation".to_string(), r.to_json().map_err(to_py)?));
    }
    if let Some(r) = &reports.qntk {
        result.push(("qntk".to_string(), r.to_json().map_err(to_py)?));
    }
    Ok(result)
}

/// Runs the analytic suite; returns `(passed, report_json)`.
#[pyfunction]
fn oracle(py: Python<'_>) -> PyResult<(bool, String)> {
    let report = py.detach(|| run_analytic_suite(&SuiteOptions::default()));
    Ok((report.passed(), report.to_json().map_err(to_py)?))
}

#[pymodule]
fn chm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyCMatrix>()?;
    m.add_function(wrap_pyfunction!(exact_c, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_c, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    Ok(())
}
