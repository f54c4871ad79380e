//! Python bindings for the fine simulator, the multiscale bases and the
//! coarse comparison.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use poronlmc::harness::{self, RunConfig};
use poronlmc::io;
use poronlmc::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Solver(_) | Error::Assembly(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Run configuration. Every section takes its defaults unless overridden.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self { inner: RunConfig::default() }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        RunConfig::from_toml(text).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        RunConfig::load(&path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    /// Sets fine and coarse grid sizes.
    #[pyo3(signature = (nx, ny, coarse_nx, coarse_ny))]
    fn set_grid(&mut self, nx: usize, ny: usize, coarse_nx: usize, coarse_ny: usize) {
        self.inner.mesh.nx = nx;
        self.inner.mesh.ny = ny;
        self.inner.coarse.nx = coarse_nx;
        self.inner.coarse.ny = coarse_ny;
    }

    /// Number of implicit steps; the final time scales with it so the step
    /// length is unchanged.
    fn set_steps(&mut self, n: usize) {
        let m = &mut self.inner.material;
        m.t_max *= n as f64 / m.n_steps as f64;
        m.n_steps = n;
        self.inner.output.snapshots.retain(|&s| s <= n);
    }

    #[getter]
    fn fractures(&self) -> Option<PathBuf> {
        self.inner.fractures.file.clone()
    }

    #[setter]
    fn set_fractures(&mut self, path: Option<PathBuf>) {
        self.inner.fractures.file = path;
    }

    #[getter]
    fn layers(&self) -> Vec<usize> {
        self.inner.coarse.layers.clone()
    }

    #[setter]
    fn set_layers(&mut self, layers: Vec<usize>) {
        self.inner.coarse.layers = layers;
    }

    #[getter]
    fn conservative(&self) -> bool {
        self.inner.coarse.conservative
    }

    #[setter]
    fn set_conservative(&mut self, on: bool) {
        self.inner.coarse.conservative = on;
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.material.n_steps
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.material.tau()
    }

    #[getter]
    fn out_dir(&self) -> PathBuf {
        self.inner.output.dir.clone()
    }

    #[setter]
    fn set_out_dir(&mut self, dir: PathBuf) {
        self.inner.output.dir = dir;
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "Config(fine={}x{}, coarse={}x{}, layers={:?}, steps={})",
            c.mesh.nx, c.mesh.ny, c.coarse.nx, c.coarse.ny, c.coarse.layers, c.material.n_steps
        )
    }
}

/// Fine mesh, embedded fractures, coarse grid and the assembled system.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: Arc<harness::Problem>,
}

#[pymethods]
impl PyProblem {
    #[new]
    fn new(py: Python<'_>, config: PyConfig) -> PyResult<Self> {
        let inner = py.detach(|| harness::Problem::build(&config.inner)).map_err(to_py)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    /// Builds the problem from explicit polylines instead of a file.
    #[staticmethod]
    fn with_fractures(py: Python<'_>, config: PyConfig, polylines: Vec<Vec<(f64, f64)>>) -> PyResult<Self> {
        let lines: Vec<_> = polylines.into_iter().map(|p| p.into_iter().map(|(x, y)| [x, y]).collect()).collect();
        let inner = py
            .detach(|| harness::Problem::with_fractures(&config.inner, &lines))
            .map_err(to_py)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[getter]
    fn fine_dofs(&self) -> usize {
        self.inner.fine_dofs()
    }

    #[getter]
    fn coarse_dofs(&self) -> usize {
        self.inner.coarse_dofs()
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.mesh.n_cells()
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.mesh.n_vertices()
    }

    #[getter]
    fn n_segments(&self) -> usize {
        self.inner.fractures.n_segments()
    }

    #[getter]
    fn n_continua(&self) -> usize {
        self.inner.coarse.continua().len()
    }

    /// Fine-grid reference run.
    fn run_fine(&self, py: Python<'_>) -> PyResult<PyFineRun> {
        let p = Arc::clone(&self.inner);
        let run = py.detach(|| harness::run_fine(&p)).map_err(to_py)?;
        Ok(PyFineRun { inner: run })
    }

    /// Multiscale bases with `layers` oversampling layers and the coarse system.
    fn coarse_model(&self, py: Python<'_>, layers: usize) -> PyResult<PyCoarseModel> {
        let p = Arc::clone(&self.inner);
        let model = py.detach(|| harness::build_coarse_model(&p, layers)).map_err(to_py)?;
        Ok(PyCoarseModel { problem: p, inner: model })
    }

    /// Coarse-cell averages of a fine state: `(p_m, p_f, u_x, u_y)` blocks.
    fn coarse_average(&self, state: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = &self.inner;
        poronlmc::solver::coarse_average(&p.mesh, &p.fractures, &p.coarse, &state).map_err(to_py)
    }

    /// Splits a fine state into `(p_m, p_f, u_x, u_y)`.
    fn split(&self, state: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        if state.len() != self.inner.fine_dofs() {
            return Err(PyValueError::new_err(format!(
                "state has length {}, expected {}",
                state.len(),
                self.inner.fine_dofs()
            )));
        }
        let [a, b, c, d] = harness::split_fields(&self.inner, &state);
        Ok((a, b, c, d))
    }
}

#[pyclass(name = "FineRun", frozen)]
struct PyFineRun {
    inner: harness::FineRun,
}

#[pymethods]
impl PyFineRun {
    #[getter]
    fn final_state(&self) -> Vec<f64> {
        self.inner.final_state.clone()
    }

    /// Coarse-cell averages after every step.
    #[getter]
    fn averages(&self) -> Vec<Vec<f64>> {
        self.inner.averages.clone()
    }

    #[getter]
    fn snapshots(&self) -> Vec<(usize, Vec<f64>)> {
        self.inner.snapshots.clone()
    }

    #[getter]
    fn wall_time_s(&self) -> f64 {
        self.inner.wall_time_s
    }
}

#[pyclass(name = "CoarseModel", frozen)]
struct PyCoarseModel {
    problem: Arc<harness::Problem>,
    inner: harness::CoarseModel,
}

#[pymethods]
impl PyCoarseModel {
    #[getter]
    fn layers(&self) -> usize {
        self.inner.layers
    }

    #[getter]
    fn basis_time_s(&self) -> f64 {
        self.inner.basis_time_s
    }

    /// Nonzero fine values of coarse basis `i` as `(fine dofs, values)`.
    fn basis(&self, i: usize) -> PyResult<(Vec<usize>, Vec<f64>)> {
        if i >= self.problem.coarse_dofs() {
            return Err(PyValueError::new_err(format!("basis {i} out of range")));
        }
        let (d, v) = self.inner.projection.basis(i);
        Ok((d.to_vec(), v.to_vec()))
    }

    /// Coarse states after every step.
    fn run(&self, py: Python<'_>) -> PyResult<Vec<Vec<f64>>> {
        let run = py.detach(|| harness::run_coarse(&self.problem, &self.inner)).map_err(to_py)?;
        Ok(run.states)
    }

    /// Fine field `R^T x_c` of a coarse state.
    fn reconstruct(&self, coarse: Vec<f64>) -> PyResult<Vec<f64>> {
        poronlmc::solver::reconstruct(&self.inner.projection, &coarse).map_err(to_py)
    }

    /// Final-step `(e_p, e_ux, e_uy)` in percent against a fine run.
    fn errors(&self, py: Python<'_>, fine: &PyFineRun) -> PyResult<(f64, f64, f64)> {
        let run = py.detach(|| harness::run_coarse(&self.problem, &self.inner)).map_err(to_py)?;
        let m = harness::compare_runs(&self.problem, &fine.inner, &run).map_err(to_py)?;
        let last = m.last().ok_or_else(|| PyValueError::new_err("no time steps"))?;
        Ok((last.e_p, last.e_ux, last.e_uy))
    }
}

/// Fine run plus one coarse model per configured layer count; returns the
/// error table as a list of dicts.
#[pyfunction]
fn compare(py: Python<'_>, config: PyConfig) -> PyResult<Vec<Py<PyAny>>> {
    let cfg = config.inner;
    let rows = py
        .detach(|| -> poronlmc::Result<_> {
            cfg.validate()?;
            let problem = harness::Problem::build(&cfg)?;
            let fine = harness::run_fine(&problem)?;
            cfg.coarse
                .layers
                .iter()
                .map(|&s| harness::compare_layers(&problem, &fine, s))
                .collect::<poronlmc::Result<Vec<_>>>()
        })
        .map_err(to_py)?;
    rows.iter()
        .map(|r| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("s", r.layers)?;
            d.set_item("e_p", r.final_errors.e_p)?;
            d.set_item("e_ux", r.final_errors.e_ux)?;
            d.set_item("e_uy", r.final_errors.e_uy)?;
            d.set_item("DOF_f", r.dof_f)?;
            d.set_item("DOF_c", r.dof_c)?;
            d.set_item("wall_time_s", r.coarse_time_s)?;
            Ok(d.into_any().unbind())
        })
        .collect()
}

/// Random straight fractures inside `[0, width] x [0, height]`.
#[pyfunction]
#[pyo3(signature = (seed, count, min_length=0.075, max_length=0.225, width=1.0, height=1.0))]
fn generate_fractures(
    seed: u64,
    count: usize,
    min_length: f64,
    max_length: f64,
    width: f64,
    height: f64,
) -> PyResult<Vec<Vec<(f64, f64)>>> {
    if !(min_length > 0.0 && min_length <= max_length) {
        return Err(PyValueError::new_err("need 0 < min_length <= max_length"));
    }
    let lines = harness::generate_fractures(seed, count, (min_length, max_length), (width, height));
    Ok(lines.into_iter().map(|p| p.into_iter().map(|q| (q[0], q[1])).collect()).collect())
}

#[pyfunction]
fn read_fractures(path: PathBuf) -> PyResult<Vec<Vec<(f64, f64)>>> {
    let lines = io::read_fractures(&path).map_err(to_py)?;
    Ok(lines.into_iter().map(|p| p.into_iter().map(|q| (q[0], q[1])).collect()).collect())
}

#[pymodule]
#[pyo3(name = "poronlmc")]
fn poronlmc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyFineRun>()?;
    m.add_class::<PyCoarseModel>()?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(generate_fractures, m)?)?;
    m.add_function(wrap_pyfunction!(read_fractures, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
