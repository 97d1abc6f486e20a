//! Python bindings: `import linengine`.

use linengine::config::RunConfig;
use linengine::currents::solve_engine;
use linengine::floquet::check_stability;
use linengine::model::{EngineConfig, OccupationModel};
use linengine::oracle::run_oracle;
use linengine::report::build_report;
use linengine::sweep::{parse_axis, run_sweep};
use linengine::validate::run_suite;
use linengine::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_)
        | Error::OutOfRange { .. }
        | Error::DegenerateOccupation { .. }
        | Error::InvalidModel(_)
        | Error::Config(_)
        | Error::Toml(_)
        | Error::NotAnEngine { .. }
        | Error::UndefinedCost(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

/// A validated engine configuration.
#[pyclass(module = "linengine")]
struct Engine {
    run: RunConfig,
    config: EngineConfig,
}

#[pymethods]
impl Engine {
    /// Parse a TOML configuration string.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let run = RunConfig::from_toml_str(text).map_err(py_err)?;
        let config = run.engine().map_err(py_err)?;
        Ok(Self { run, config })
    }

    /// Load a TOML configuration file.
    #[staticmethod]
    fn from_path(path: &str) -> PyResult<Self> {
        let run = RunConfig::from_path(std::path::Path::new(path)).map_err(py_err)?;
        let config = run.engine().map_err(py_err)?;
        Ok(Self { run, config })
    }

    #[getter]
    fn n_osc(&self) -> usize {
        self.config.network.n_osc
    }

    #[getter]
    fn drive_freq(&self) -> f64 {
        self.config.network.drive_freq
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.config.reservoirs.iter().map(|r| r.label.clone()).collect()
    }

    fn to_toml(&self) -> PyResult<String> {
        self.run.to_toml_string().map_err(py_err)
    }

    fn check_stability<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let rep = py.detach(|| check_stability(&self.config)).map_err(py_err)?;
        to_py(py, &rep)
    }

    /// Full report (heat, bounds, Clausius, efficiency, cost, Planck, convergence) as a dict.
    fn solve<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let rep = py
            .detach(|| solve_engine(&self.config).and_then(|s| build_report(&s)))
            .map_err(py_err)?;
        to_py(py, &rep)
    }

    #[pyo3(signature = (quick = true))]
    fn validate<'py>(&self, py: Python<'py>, quick: bool) -> PyResult<Bound<'py, PyAny>> {
        let rep = py.detach(|| run_suite(&self.config, quick)).map_err(py_err)?;
        to_py(py, &rep)
    }

    /// Rows of a one-dimensional sweep, e.g. `engine.sweep("hot.r=0:1:5")`.
    fn sweep<'py>(&self, py: Python<'py>, axis: &str) -> PyResult<Bound<'py, PyAny>> {
        let axis = parse_axis(axis).map_err(py_err)?;
        let rows = py.detach(|| run_sweep(&self.config, &axis)).map_err(py_err)?;
        to_py(py, &rows)
    }

    /// Fitted oracle currents using the `[oracle]` settings of the configuration.
    fn oracle<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let run = py.detach(|| run_oracle(&self.config, &self.run.oracle)).map_err(py_err)?;
        to_py(py, &run.fit)
    }

    fn __repr__(&self) -> String {
        format!(
            "Engine(n_osc={}, drive_freq={}, reservoirs={:?})",
            self.config.network.n_osc,
            self.config.network.drive_freq,
            self.labels()
        )
    }
}

fn occupation_model(temperature: f64, r: f64) -> PyResult<OccupationModel> {
    let m = if r == 0.0 {
        OccupationModel::Thermal { temperature }
    } else {
        OccupationModel::SqueezedThermal { temperature, r }
    };
    m.validate().map_err(py_err)?;
    Ok(m)
}

/// Mean occupation of a (squeezed) thermal mode.
#[pyfunction]
#[pyo3(signature = (temperature, omega, r = 0.0))]
fn occupation(temperature: f64, omega: f64, r: f64) -> PyResult<f64> {
    occupation_model(temperature, r)?.occupation(omega).map_err(py_err)
}

/// Ω(ω) with coth(ω/Ω) = 2n(ω) + 1.
#[pyfunction]
#[pyo3(signature = (temperature, omega, r = 0.0))]
fn characteristic_frequency(temperature: f64, omega: f64, r: f64) -> PyResult<f64> {
    occupation_model(temperature, r)?.characteristic_frequency(omega).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "linengine")]
fn linengine_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Engine>()?;
    m.add_function(wrap_pyfunction!(occupation, m)?)?;
    m.add_function(wrap_pyfunction!(characteristic_frequency, m)?)?;
    Ok(())
}
