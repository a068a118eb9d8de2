//! Python bindings for the euler_shell solvers.
//!
//! Functions take the same keys as the CLI configuration files, either as
//! keyword arguments or as configuration text, and return plain Python
//! objects or the wrapper classes defined here.

use euler_shell::background::{solve_transonic_background, subsonic_from_mach, RadialProfile};
use euler_shell::coeffs::{linearization_coeffs, stability_poly};
use euler_shell::config::{
    BackgroundConfig, KeyValues, SConditionConfig, SubsonicConfig, TransonicBackgroundConfig, TransonicConfig,
};
use euler_shell::elliptic::s_condition_scan;
use euler_shell::grid::{ShellField, ShellGrid};
use euler_shell::residual::euler_residual_mapped;
use euler_shell::subsonic::{iterate_subsonic, SubsonicBCs, SubsonicOptions, SubsonicProblem};
use euler_shell::transonic::{
    front_map, iterate_transonic, shooting_oracle as oracle, TransonicBCs, TransonicOptions, TransonicProblem,
};
use euler_shell::{Error, GasConstants};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use std::path::PathBuf;
use std::sync::Arc;

create_exception!(euler_shell_py, SolverError, PyException);

fn py_err(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        SolverError::new_err(e.to_string())
    }
}

type PyRes<T> = PyResult<T>;

fn kv_from(kwargs: Option<&Bound<'_, PyDict>>) -> PyRes<KeyValues> {
    let mut kv = KeyValues::default();
    if let Some(d) = kwargs {
        for (k, v) in d.iter() {
            let text = match v.extract::<bool>() {
                Ok(b) if v.is_instance_of::<pyo3::types::PyBool>() => b.to_string(),
                _ => v.str()?.to_string(),
            };
            kv.push(&k.extract::<String>()?, text);
        }
    }
    Ok(kv)
}

fn to_py(py: Python<'_>, v: &serde_json::Value) -> PyRes<PyObject> {
    let text = serde_json::to_string(v).map_err(|e| SolverError::new_err(e.to_string()))?;
    Ok(py.import_bound("json")?.call_method1("loads", (text,))?.unbind())
}

fn ser<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyRes<PyObject> {
    to_py(py, &serde_json::to_value(v).map_err(|e| SolverError::new_err(e.to_string()))?)
}

fn field_dict(py: Python<'_>, f: &ShellField) -> PyRes<PyObject> {
    let g = &f.grid;
    let d = PyDict::new_bound(py);
    d.set_item("r", (0..g.n_r()).map(|i| g.r(i)).collect::<Vec<_>>())?;
    d.set_item("theta", g.sphere.theta.clone())?;
    d.set_item("phi", g.sphere.phi.clone())?;
    d.set_item("u0", f.u0.clone())?;
    d.set_item("u_theta", f.u_theta.clone())?;
    d.set_item("u_phi", f.u_phi.clone())?;
    d.set_item("p", f.p.clone())?;
    d.set_item("rho", f.rho.clone())?;
    Ok(d.into_any().unbind())
}

/// Linearization coefficients `(b, e, d1, d2)` at `(gamma, t)` and the
/// stability polynomial. The coefficients are `None` at the pole `t = 1`.
#[pyfunction]
fn coeffs(py: Python<'_>, gamma: f64, t: f64) -> PyRes<PyObject> {
    let d = PyDict::new_bound(py);
    match linearization_coeffs(gamma, t) {
        Ok(k) => {
            d.set_item("b", k.b)?;
            d.set_item("e", k.e)?;
            d.set_item("d1", k.d1)?;
            d.set_item("d2", k.d2)?;
        }
        Err(Error::Pole) => {
            for k in ["b", "e", "d1", "d2"] {
                d.set_item(k, py.None())?;
            }
        }
        Err(e) => return Err(py_err(e)),
    }
    d.set_item("stability_poly", stability_poly(gamma, t))?;
    Ok(d.into_any().unbind())
}

/// Spherically symmetric radial flow profile.
#[pyclass(name = "RadialProfile", module = "euler_shell_py")]
struct PyRadialProfile(RadialProfile);

#[pymethods]
impl PyRadialProfile {
    /// Bernoulli constant.
    #[getter]
    fn bernoulli(&self) -> f64 {
        self.0.e
    }

    /// Entropy function.
    #[getter]
    fn entropy(&self) -> f64 {
        self.0.a
    }

    #[getter]
    fn r_lo(&self) -> f64 {
        self.0.r_lo
    }

    #[getter]
    fn r_hi(&self) -> f64 {
        self.0.r_hi
    }

    /// `(u, p, rho)` at radius `r`.
    fn state(&self, r: f64) -> PyRes<(f64, f64, f64)> {
        if !(self.0.r_lo..=self.0.r_hi).contains(&r) {
            return Err(PyValueError::new_err(format!("r = {r} outside [{}, {}]", self.0.r_lo, self.0.r_hi)));
        }
        let [u, p, rho] = self.0.state(r);
        Ok((u, p, rho))
    }

    fn mach(&self, r: f64) -> f64 {
        self.0.mach(r)
    }

    /// Rows `(r, u, p, rho, M, E, A)` at the given radii.
    fn table(&self, radii: Vec<f64>) -> PyRes<Vec<[f64; 7]>> {
        self.0.table(&radii).map_err(py_err)
    }
}

/// Subsonic background from entry Mach number. Keys: gamma, r0, r1, M0,
/// p0, rho0.
#[pyfunction]
#[pyo3(signature = (**kwargs))]
fn background(kwargs: Option<&Bound<'_, PyDict>>) -> PyRes<PyRadialProfile> {
    let c = BackgroundConfig::from_kv(&kv_from(kwargs)?).map_err(py_err)?;
    let gas = GasConstants::with_gamma(c.gamma).map_err(py_err)?;
    let prof = subsonic_from_mach(&gas, c.m0, c.p0, c.rho0, c.r0, c.r1).map_err(py_err)?;
    Ok(PyRadialProfile(prof))
}

/// Spherically symmetric transonic shock solution.
#[pyclass(name = "TransonicBackground", module = "euler_shell_py")]
struct PyTransonicBackground(euler_shell::background::TransonicBackground);

#[pymethods]
impl PyTransonicBackground {
    #[getter]
    fn r_b(&self) -> f64 {
        self.0.r_b()
    }

    #[getter]
    fn exit_pressure(&self) -> f64 {
        self.0.exit_pressure()
    }

    #[getter]
    fn pressure_jump(&self) -> f64 {
        self.0.pressure_jump()
    }

    #[getter]
    fn rh_residual(&self) -> f64 {
        self.0.rh_residual()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings.clone()
    }

    /// Upstream and downstream `(u, p, rho)` at the shock.
    fn shock_states(&self) -> ((f64, f64, f64), (f64, f64, f64)) {
        let (a, b) = self.0.shock_states();
        ((a.u0, a.p, a.rho), (b.u0, b.p, b.rho))
    }

    #[getter]
    fn supersonic(&self) -> PyRadialProfile {
        PyRadialProfile(self.0.supersonic.clone())
    }

    #[getter]
    fn subsonic(&self) -> PyRadialProfile {
        PyRadialProfile(self.0.subsonic.clone())
    }
}

/// Transonic background. Keys: gamma, r0, r1, r_b, p_s, rho_s, M_s.
#[pyfunction]
#[pyo3(signature = (**kwargs))]
fn transonic_background(kwargs: Option<&Bound<'_, PyDict>>) -> PyRes<PyTransonicBackground> {
    let c = TransonicBackgroundConfig::from_kv(&kv_from(kwargs)?).map_err(py_err)?;
    Ok(PyTransonicBackground(solve_transonic_background(c.params).map_err(py_err)?))
}

/// S-condition scan over shock radii. Keys: the transonic background keys,
/// rb_grid, n_max, threshold.
#[pyfunction]
#[pyo3(signature = (**kwargs))]
fn s_condition(py: Python<'_>, kwargs: Option<&Bound<'_, PyDict>>) -> PyRes<PyObject> {
    let c = SConditionConfig::from_kv(&kv_from(kwargs)?).map_err(py_err)?;
    let scan = py.allow_threads(|| s_condition_scan(c.params, &c.rb_grid, c.n_max, c.threshold));
    let reports = PyList::empty_bound(py);
    for r in &scan.reports {
        let d = PyDict::new_bound(py);
        d.set_item("rb", r.r_b)?;
        d.set_item("thetas", r.thetas.clone())?;
        d.set_item("holds", r.holds)?;
        d.set_item("violated", r.violated.clone())?;
        d.set_item("margin", r.margin)?;
        d.set_item("n_eff", r.n_eff)?;
        reports.append(d)?;
    }
    let out = PyDict::new_bound(py);
    out.set_item("reports", reports)?;
    out.set_item("sign_changes", scan.brackets.clone())?;
    out.set_item("failures", scan.failures.clone())?;
    Ok(out.into_any().unbind())
}

/// Shock position and background for a uniform exit-pressure change.
#[pyfunction]
#[pyo3(signature = (delta_p, **kwargs))]
fn shooting_oracle(delta_p: f64, kwargs: Option<&Bound<'_, PyDict>>) -> PyRes<(f64, PyTransonicBackground)> {
    let c = TransonicBackgroundConfig::from_kv(&kv_from(kwargs)?).map_err(py_err)?;
    let tb = solve_transonic_background(c.params).map_err(py_err)?;
    let (r, tb) = oracle(&tb, delta_p).map_err(py_err)?;
    Ok((r, PyTransonicBackground(tb)))
}

/// Converged subsonic run.
#[pyclass(name = "SubsonicRun", module = "euler_shell_py")]
struct PySubsonicRun {
    field: ShellField,
    gas: GasConstants,
    report: serde_json::Value,
    config: serde_json::Value,
}

#[pymethods]
impl PySubsonicRun {
    #[getter]
    fn report(&self, py: Python<'_>) -> PyRes<PyObject> {
        to_py(py, &self.report)
    }

    #[getter]
    fn config(&self, py: Python<'_>) -> PyRes<PyObject> {
        to_py(py, &self.config)
    }

    #[getter]
    fn converged(&self) -> bool {
        self.report["converged"].as_bool().unwrap_or(false)
    }

    /// Grid coordinates and field arrays, flattened with `r` slowest and `phi` fastest.
    fn field(&self, py: Python<'_>) -> PyRes<PyObject> {
        field_dict(py, &self.field)
    }

    /// Writes the field CSV and its JSON sidecar.
    fn write(&self, path: PathBuf) -> PyRes<()> {
        self.field.write(&self.gas, &path).map_err(py_err)
    }

    /// Euler residual norms of the field.
    fn residuals(&self, py: Python<'_>) -> PyRes<PyObject> {
        let res = euler_residual_mapped(&self.field, &self.gas, None).map_err(py_err)?;
        ser(py, &res.norms)
    }
}

/// Runs the subsonic iteration from configuration text.
#[pyfunction]
fn run_subsonic(py: Python<'_>, config: &str) -> PyRes<PySubsonicRun> {
    let c = SubsonicConfig::from_kv(&KeyValues::parse(config).map_err(py_err)?).map_err(py_err)?;
    let (field, gas, report) = py
        .allow_threads(|| {
            let gas = GasConstants::with_gamma(c.gamma)?;
            let prof = subsonic_from_mach(&gas, c.m0, c.p0, c.rho0, c.r0, c.r1)?;
            let grid = Arc::new(ShellGrid::new(c.r0, c.r1, c.n_r, c.l_max)?);
            let prob = SubsonicProblem::new(&prof, grid)?;
            let bcs = SubsonicBCs::from_perturbations(&prob, &c.perturbations)?;
            let opts = SubsonicOptions {
                tol: c.tol,
                max_iter: c.max_iter,
                substeps: c.substeps,
                allow_unstable: c.allow_unstable,
                ..Default::default()
            };
            let (field, report) = iterate_subsonic(&prob, &bcs, &opts)?;
            Ok((field, gas, report))
        })
        .map_err(py_err)?;
    let report = serde_json::to_value(&report).map_err(|e| SolverError::new_err(e.to_string()))?;
    Ok(PySubsonicRun { field, gas, report, config: c.to_kv().to_json() })
}

/// Converged transonic run.
#[pyclass(name = "TransonicRun", module = "euler_shell_py")]
struct PyTransonicRun {
    sol: euler_shell::transonic::TransonicSolution,
    gas: GasConstants,
    report: serde_json::Value,
    config: serde_json::Value,
}

#[pymethods]
impl PyTransonicRun {
    #[getter]
    fn report(&self, py: Python<'_>) -> PyRes<PyObject> {
        to_py(py, &self.report)
    }

    #[getter]
    fn config(&self, py: Python<'_>) -> PyRes<PyObject> {
        to_py(py, &self.config)
    }

    /// Mean shock position.
    #[getter]
    fn r_p(&self) -> f64 {
        self.sol.report.r_p
    }

    /// Shock radius at each angular node.
    #[getter]
    fn front(&self) -> Vec<f64> {
        self.sol.front.psi.clone()
    }

    /// Spherical-harmonic coefficients of the shock front as `(n, m, value)`.
    fn front_coeffs(&self) -> Vec<(usize, i64, f64)> {
        self.sol.front.coeffs.iter().collect()
    }

    /// Field on the normalized grid; the `r` entry is the normalized radius.
    fn field(&self, py: Python<'_>) -> PyRes<PyObject> {
        field_dict(py, &self.sol.field)
    }

    /// Physical radius at every grid node.
    fn physical_radii(&self) -> Vec<f64> {
        self.sol.physical_radii().to_vec()
    }

    /// Writes the field CSV and its JSON sidecar, including the front.
    fn write(&self, path: PathBuf) -> PyRes<()> {
        self.sol.field.write_with_meta(&self.sol.meta(&self.gas), &path).map_err(py_err)
    }

    /// Euler residual norms in physical coordinates.
    fn residuals(&self, py: Python<'_>) -> PyRes<PyObject> {
        let map = front_map(&self.sol.field.grid, &self.sol.front.psi).map_err(py_err)?;
        let res = euler_residual_mapped(&self.sol.field, &self.gas, Some(map)).map_err(py_err)?;
        ser(py, &res.norms)
    }
}

/// Runs the transonic iteration from configuration text.
#[pyfunction]
fn run_transonic(py: Python<'_>, config: &str) -> PyRes<PyTransonicRun> {
    let c = TransonicConfig::from_kv(&KeyValues::parse(config).map_err(py_err)?).map_err(py_err)?;
    let (sol, gas) = py
        .allow_threads(|| {
            let tb = solve_transonic_background(c.params)?;
            let prob = TransonicProblem::new(&tb, c.n_r, c.l_max)?;
            let bcs = TransonicBCs::from_perturbations(&prob, &c.perturbations, c.march_steps)?;
            let opts = TransonicOptions {
                tol: c.tol,
                max_iter: c.max_iter,
                theta: c.theta,
                theta_min: c.theta_min,
                substeps: c.substeps,
                s_threshold: c.s_threshold,
                allow_s_violation: c.allow_s_violation,
            };
            Ok::<_, Error>((iterate_transonic(&prob, &bcs, &opts)?, tb.gas))
        })
        .map_err(py_err)?;
    let report = serde_json::to_value(&sol.report).map_err(|e| SolverError::new_err(e.to_string()))?;
    Ok(PyTransonicRun { sol, gas, report, config: c.to_kv().to_json() })
}

/// Euler residual norms of a field CSV with its JSON sidecar.
#[pyfunction]
fn residuals(py: Python<'_>, path: PathBuf) -> PyRes<PyObject> {
    let (field, meta) = ShellField::read(&path).map_err(py_err)?;
    let gas = GasConstants::with_gamma(meta.gamma).map_err(py_err)?;
    let map = match &meta.front {
        Some(psi) => Some(front_map(&field.grid, psi).map_err(py_err)?),
        None => None,
    };
    let res = euler_residual_mapped(&field, &gas, map).map_err(py_err)?;
    ser(py, &res.norms)
}

#[pymodule]
pub fn euler_shell_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SolverError", m.py().get_type_bound::<SolverError>())?;
    m.add_class::<PyRadialProfile>()?;
    m.add_class::<PyTransonicBackground>()?;
    m.add_class::<PySubsonicRun>()?;
    m.add_class::<PyTransonicRun>()?;
    m.add_function(wrap_pyfunction!(coeffs, m)?)?;
    m.add_function(wrap_pyfunction!(background, m)?)?;
    m.add_function(wrap_pyfunction!(transonic_background, m)?)?;
    m.add_function(wrap_pyfunction!(s_condition, m)?)?;
    m.add_function(wrap_pyfunction!(shooting_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(run_subsonic, m)?)?;
    m.add_function(wrap_pyfunction!(run_transonic, m)?)?;
    m.add_function(wrap_pyfunction!(residuals, m)?)?;
    Ok(())
}
