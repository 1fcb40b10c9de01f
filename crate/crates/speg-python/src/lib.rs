//! Python bindings for the speg safety governor.
//!
//! Thin wrappers over the core types: build a ladder from a TOML problem
//! document (or load one from JSON), govern single states, run governed
//! simulations, and cross-check against the series reference route.

use nalgebra::DVector;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use speg::governor;
use speg::oracle;
use speg::sim;

fn err(e: speg::Error) -> PyErr {
    match e {
        speg::Error::Config(_) | speg::Error::Dimension(_) | speg::Error::Serde(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn vec_to_dvector(v: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(v)
}

#[pyclass(name = "Polytope", frozen, from_py_object)]
#[derive(Clone)]
struct PyPolytope {
    inner: speg::Polytope,
}

#[pymethods]
impl PyPolytope {
    /// Build from half-space rows `[[n1, …, nd, offset], …]`.
    #[staticmethod]
    fn from_rows(dim: usize, rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let mut list = Vec::with_capacity(rows.len());
        for row in &rows {
            if row.len() != dim + 1 {
                return Err(PyValueError::new_err(format!(
                    "rows must have {} entries",
                    dim + 1
                )));
            }
            list.push((DVector::from_row_slice(&row[..dim]), row[dim]));
        }
        Ok(PyPolytope { inner: speg::Polytope::new(dim, list).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyPolytope { inner: speg::Polytope::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn num_rows(&self) -> usize {
        self.inner.num_rows()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner
            .rows_vec()
            .into_iter()
            .map(|(n, o)| {
                let mut row: Vec<f64> = n.iter().copied().collect();
                row.push(o);
                row
            })
            .collect()
    }

    #[pyo3(signature = (x, tol = 1e-9))]
    fn contains_point(&self, x: Vec<f64>, tol: f64) -> bool {
        self.inner.contains_point(&vec_to_dvector(x), tol)
    }

    fn signed_margin(&self, x: Vec<f64>) -> f64 {
        self.inner.signed_margin(&vec_to_dvector(x))
    }

    fn contains(&self, other: &PyPolytope) -> PyResult<bool> {
        self.inner.contains(&other.inner).map_err(err)
    }

    fn bounding_box(&self) -> PyResult<Vec<(f64, f64)>> {
        self.inner.bounding_box().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Polytope(dim={}, rows={})", self.inner.dim(), self.inner.num_rows())
    }
}

#[pyclass(name = "SafeSetLadder", frozen)]
struct PyLadder {
    inner: speg::SafeSetLadder,
}

#[pymethods]
impl PyLadder {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyLadder { inner: speg::SafeSetLadder::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn step_set(&self, k: usize) -> PyResult<PyPolytope> {
        self.inner
            .step_sets()
            .get(k)
            .map(|p| PyPolytope { inner: p.clone() })
            .ok_or_else(|| PyValueError::new_err(format!("no step set {k}")))
    }

    fn infinite_set(&self) -> PyPolytope {
        PyPolytope { inner: self.inner.infinite_set().clone() }
    }

    fn input_set(&self) -> PyPolytope {
        PyPolytope { inner: self.inner.input_set().clone() }
    }

    /// `(depth, rows)` per constraint group; the terminal depth is `None`.
    fn group_sizes(&self) -> Vec<(Option<usize>, usize)> {
        self.inner
            .groups()
            .iter()
            .map(|g| {
                let depth = match g.depth() {
                    speg::GroupDepth::Step(k) => Some(k),
                    speg::GroupDepth::Infinite => None,
                };
                (depth, g.num_rows())
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "SafeSetLadder(horizon={}, terminal_rows={})",
            self.inner.horizon(),
            self.inner.infinite_set().num_rows()
        )
    }
}

#[pyclass(name = "PenaltyConfig", frozen)]
struct PyPenaltyConfig {
    inner: governor::PenaltyConfig,
}

#[pymethods]
impl PyPenaltyConfig {
    #[new]
    fn new(
        theta: f64,
        phi_quad: f64,
        horizon: usize,
        adjustment_weight: Vec<Vec<f64>>,
        eps_zero_tol: f64,
    ) -> PyResult<Self> {
        let m = adjustment_weight.len();
        if m == 0 || adjustment_weight.iter().any(|r| r.len() != m) {
            return Err(PyValueError::new_err("adjustment weight must be square"));
        }
        let w = nalgebra::DMatrix::from_fn(m, m, |i, j| adjustment_weight[i][j]);
        Ok(PyPenaltyConfig {
            inner: governor::PenaltyConfig::new(theta, phi_quad, horizon, w, eps_zero_tol)
                .map_err(err)?,
        })
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta()
    }

    #[getter]
    fn phi_quad(&self) -> f64 {
        self.inner.phi_quad()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    #[getter]
    fn eps_zero_tol(&self) -> f64 {
        self.inner.eps_zero_tol()
    }

    fn phi(&self, eps: f64) -> f64 {
        self.inner.phi(eps)
    }

    fn depth_weight(&self, k: usize) -> f64 {
        self.inner.depth_weight(k)
    }
}

#[pyclass(name = "ProblemConfig", frozen)]
struct PyProblemConfig {
    inner: speg::ProblemConfig,
}

#[pymethods]
impl PyProblemConfig {
    #[staticmethod]
    fn from_toml_str(text: &str) -> PyResult<Self> {
        Ok(PyProblemConfig { inner: speg::ProblemConfig::from_toml_str(text).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyProblemConfig {
            inner: speg::ProblemConfig::load(std::path::Path::new(path)).map_err(err)?,
        })
    }

    /// Run the offline pipeline: returns `(ladder, penalty_config)`.
    fn build(&self) -> PyResult<(PyLadder, PyPenaltyConfig)> {
        let (ladder, penalty) = self.inner.build().map_err(err)?;
        Ok((PyLadder { inner: ladder }, PyPenaltyConfig { inner: penalty }))
    }

    fn state_set(&self) -> PyResult<PyPolytope> {
        Ok(PyPolytope { inner: self.inner.state_set().map_err(err)? })
    }

    fn input_set(&self) -> PyResult<PyPolytope> {
        Ok(PyPolytope { inner: self.inner.input_set().map_err(err)? })
    }
}

#[pyclass(name = "GovernorSolution", frozen)]
struct PyGovernorSolution {
    #[pyo3(get)]
    u: Vec<f64>,
    #[pyo3(get)]
    eps: Vec<f64>,
    #[pyo3(get)]
    k_star: i64,
    #[pyo3(get)]
    kkt_residual: f64,
    #[pyo3(get)]
    iterations: usize,
}

#[pymethods]
impl PyGovernorSolution {
    fn __repr__(&self) -> String {
        format!("GovernorSolution(k_star={}, u={:?})", self.k_star, self.u)
    }
}

/// Minimally adjust `u_nom` at state `x`: protection when attainable,
/// extension otherwise.
#[pyfunction]
fn govern(
    ladder: &PyLadder,
    cfg: &PyPenaltyConfig,
    x: Vec<f64>,
    u_nom: Vec<f64>,
) -> PyResult<PyGovernorSolution> {
    let sol = governor::govern(
        &ladder.inner,
        &cfg.inner,
        &vec_to_dvector(x),
        &vec_to_dvector(u_nom),
    )
    .map_err(err)?;
    Ok(PyGovernorSolution {
        u: sol.u.iter().copied().collect(),
        eps: sol.slacks.iter().copied().collect(),
        k_star: sol.k_star,
        kkt_residual: sol.qp.kkt_residual,
        iterations: sol.qp.iterations,
    })
}

/// Reference route: protection problem first, then the depth scan.
/// Returns `(depth, u_or_none, wall_seconds)`.
#[pyfunction]
fn solve_series(
    ladder: &PyLadder,
    cfg: &PyPenaltyConfig,
    x: Vec<f64>,
    u_nom: Vec<f64>,
) -> PyResult<(i64, Option<Vec<f64>>, f64)> {
    let res = oracle::solve_series(
        &ladder.inner,
        &cfg.inner,
        &vec_to_dvector(x),
        &vec_to_dvector(u_nom),
    )
    .map_err(err)?;
    Ok((
        res.depth,
        res.u.map(|u| u.iter().copied().collect()),
        res.wall_time.as_secs_f64(),
    ))
}

#[pyclass(name = "SimTrace", frozen)]
struct PySimTrace {
    inner: sim::SimTrace,
}

#[pymethods]
impl PySimTrace {
    fn __len__(&self) -> usize {
        self.inner.steps.len()
    }

    fn states(&self) -> Vec<Vec<f64>> {
        self.inner.steps.iter().map(|s| s.state.iter().copied().collect()).collect()
    }

    fn inputs(&self) -> Vec<Vec<f64>> {
        self.inner.steps.iter().map(|s| s.u.iter().copied().collect()).collect()
    }

    fn disturbances(&self) -> Vec<Vec<f64>> {
        self.inner.steps.iter().map(|s| s.w.iter().copied().collect()).collect()
    }

    fn k_stars(&self) -> Vec<i64> {
        self.inner.steps.iter().map(|s| s.k_star).collect()
    }

    fn in_state_set(&self) -> Vec<bool> {
        self.inner.steps.iter().map(|s| s.in_state_set).collect()
    }

    fn in_infinite_set(&self) -> Vec<bool> {
        self.inner.steps.iter().map(|s| s.in_infinite_set).collect()
    }

    fn final_state(&self) -> Vec<f64> {
        self.inner.final_state.iter().copied().collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

/// Governed closed-loop run. `profile` uses the same compact spec as the
/// CLI: `"constant:<w>"`, `"piecewise:<t>=<w>;…"`, or `"worst-case"`.
#[pyfunction]
#[pyo3(signature = (ladder, cfg, x0, u_nom, profile, steps))]
fn simulate(
    ladder: &PyLadder,
    cfg: &PyPenaltyConfig,
    x0: Vec<f64>,
    u_nom: Vec<f64>,
    profile: &str,
    steps: usize,
) -> PyResult<PySimTrace> {
    let parsed = sim::DisturbanceProfile::parse(
        profile,
        ladder.inner.system().num_disturbances(),
    )
    .map_err(err)?;
    let trace = sim::run(
        &ladder.inner,
        &cfg.inner,
        vec_to_dvector(x0),
        &sim::NominalControl::Constant(vec_to_dvector(u_nom)),
        &parsed,
        steps,
    )
    .map_err(err)?;
    Ok(PySimTrace { inner: trace })
}

/// The bundled car-following instance.
#[pyfunction]
fn acc_config() -> PyProblemConfig {
    PyProblemConfig { inner: speg::acc::config() }
}

#[pymodule]
fn speg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPolytope>()?;
    m.add_class::<PyLadder>()?;
    m.add_class::<PyPenaltyConfig>()?;
    m.add_class::<PyProblemConfig>()?;
    m.add_class::<PyGovernorSolution>()?;
    m.add_class::<PySimTrace>()?;
    m.add_function(wrap_pyfunction!(govern, m)?)?;
    m.add_function(wrap_pyfunction!(solve_series, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(acc_config, m)?)?;
    Ok(())
}
