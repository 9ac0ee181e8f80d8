//! Python bindings: grids and fields, symbols, the spectral calculus,
//! class and multiplier checks, and the solvers.

use fraccalc_core::calculus::Calculus as CoreCalculus;
use fraccalc_core::multipliers::{mikhlin_certify, MultiplierSpec};
use fraccalc_core::presets::{preset_allen_cahn, MassiveParams};
use fraccalc_core::report::KvBlock;
use fraccalc_core::solvers::{self, SolveResult as CoreSolveResult, SolverOptions};
use fraccalc_core::symbols::{oscillatory_symbol, pure_fractional_symbol};
use fraccalc_core::{
    exp_symbol, fractional_symbol, laplace_symbol, lp_norm, make_grid, radial_defect, radial_project,
    Field as CoreField, Grid as CoreGrid, SampleLadder, Symbol as CoreSymbol,
};
use pyo3::create_exception;
use pyo3::exceptions::PyRuntimeError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(fraccalc, FraccalcError, PyRuntimeError);

fn py_err(e: fraccalc_core::Error) -> PyErr {
    FraccalcError::new_err(e.to_string())
}

fn kv_to_dict<'py>(py: Python<'py>, kv: &KvBlock) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    for (k, v) in kv.entries() {
        match v.as_str() {
            "true" => dict.set_item(k, true)?,
            "false" => dict.set_item(k, false)?,
            _ => match v.parse::<f64>() {
                Ok(x) => dict.set_item(k, x)?,
                Err(_) => dict.set_item(k, v)?,
            },
        }
    }
    Ok(dict)
}

/// Periodic grid of `points` nodes per axis on `[-half_width, half_width)^dim`.
#[pyclass(frozen, module = "fraccalc")]
struct Grid {
    inner: CoreGrid,
}

#[pymethods]
impl Grid {
    #[new]
    fn new(dim: usize, points: usize, half_width: f64) -> PyResult<Self> {
        Ok(Grid { inner: make_grid(dim, points, half_width).map_err(py_err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn points(&self) -> usize {
        self.inner.points_per_axis()
    }

    #[getter]
    fn half_width(&self) -> f64 {
        self.inner.half_width()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Node coordinates in row-major order, one list per node.
    fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.node(i)).collect()
    }

    fn radii(&self) -> Vec<f64> {
        self.inner.node_radii()
    }

    fn __repr__(&self) -> String {
        format!("Grid(dim={}, points={}, half_width={})", self.dim(), self.points(), self.half_width())
    }
}

/// Real nodal values on a grid, row-major.
#[pyclass(frozen, module = "fraccalc")]
struct Field {
    inner: CoreField,
}

#[pymethods]
impl Field {
    #[new]
    fn new(grid: &Grid, values: Vec<f64>) -> PyResult<Self> {
        Ok(Field { inner: CoreField::new(grid.inner, values).map_err(py_err)? })
    }

    #[staticmethod]
    fn zeros(grid: &Grid) -> Self {
        Field { inner: CoreField::zeros(grid.inner) }
    }

    #[getter]
    fn grid(&self) -> Grid {
        Grid { inner: *self.inner.grid() }
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.values().len()
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    fn lp_norm(&self, p: f64) -> PyResult<f64> {
        lp_norm(&self.inner, p).map_err(py_err)
    }

    fn radial_defect(&self) -> f64 {
        radial_defect(&self.inner)
    }

    fn radial_project(&self) -> Field {
        Field { inner: radial_project(&self.inner) }
    }
}

/// Symbol `a` of the operator `[1 + a(-Δ)]^{s/2}`.
#[pyclass(frozen, module = "fraccalc")]
struct Symbol {
    inner: CoreSymbol,
}

#[pymethods]
impl Symbol {
    #[staticmethod]
    fn laplace() -> Self {
        Symbol { inner: laplace_symbol() }
    }

    #[staticmethod]
    #[pyo3(signature = (gamma, mass = 1.0))]
    fn fractional(gamma: f64, mass: f64) -> PyResult<Self> {
        Ok(Symbol { inner: fractional_symbol(gamma, mass).map_err(py_err)? })
    }

    #[staticmethod]
    fn pure_fractional(gamma: f64) -> PyResult<Self> {
        Ok(Symbol { inner: pure_fractional_symbol(gamma).map_err(py_err)? })
    }

    #[staticmethod]
    fn exponential(rate: f64) -> PyResult<Self> {
        Ok(Symbol { inner: exp_symbol(rate).map_err(py_err)? })
    }

    #[staticmethod]
    fn oscillatory(power: u32) -> PyResult<Self> {
        Ok(Symbol { inner: oscillatory_symbol(power).map_err(py_err)? })
    }

    fn scaled(&self, factor: f64) -> PyResult<Self> {
        Ok(Symbol { inner: self.inner.clone().scaled(factor).map_err(py_err)? })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    fn __call__(&self, t: f64) -> f64 {
        self.inner.eval(t)
    }

    /// `k`-th derivative at `t`.
    fn deriv(&self, k: usize, t: f64) -> PyResult<f64> {
        self.inner.deriv(k, t).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Symbol({})", self.inner.label())
    }
}

/// `T_s`, `A` and the kernel for a symbol, order and grid.
#[pyclass(frozen, module = "fraccalc")]
struct Calculus {
    inner: CoreCalculus,
}

#[pymethods]
impl Calculus {
    #[new]
    fn new(symbol: &Symbol, s: f64, grid: &Grid) -> PyResult<Self> {
        Ok(Calculus { inner: CoreCalculus::new(symbol.inner.clone(), s, grid.inner).map_err(py_err)? })
    }

    #[getter]
    fn order(&self) -> f64 {
        self.inner.order()
    }

    fn apply_ts(&self, g: &Field) -> PyResult<Field> {
        Ok(Field { inner: self.inner.apply_ts(&g.inner).map_err(py_err)? })
    }

    fn apply_a(&self, u: &Field) -> PyResult<Field> {
        Ok(Field { inner: self.inner.apply_a(&u.inner).map_err(py_err)? })
    }

    fn h_norm(&self, u: &Field, p: f64) -> PyResult<f64> {
        self.inner.h_norm(&u.inner, p).map_err(py_err)
    }

    /// Periodized kernel; `oversample > 1` folds a finer lattice.
    #[pyo3(signature = (oversample = 1))]
    fn kernel(&self, py: Python<'_>, oversample: usize) -> PyResult<Field> {
        let k = py.detach(|| {
            if oversample > 1 {
                self.inner.kernel_k_refined(oversample)
            } else {
                self.inner.kernel_k()
            }
        });
        Ok(Field { inner: k.map_err(py_err)? })
    }
}

#[pyclass(frozen, module = "fraccalc")]
struct SolveResult {
    inner: CoreSolveResult,
}

#[pymethods]
impl SolveResult {
    #[getter]
    fn u(&self) -> Field {
        Field { inner: self.inner.u.clone() }
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn certified(&self) -> bool {
        self.inner.certified
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn final_residual(&self) -> f64 {
        self.inner.final_residual()
    }

    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        kv_to_dict(py, &self.inner.constants)
    }

    /// Rows `(iter, residual, h_norm, lp_alpha_norm, damping, projection)`.
    fn history(&self) -> Vec<(usize, f64, f64, f64, f64, bool)> {
        self.inner
            .history
            .iter()
            .map(|r| (r.iter, r.residual, r.h_norm, r.lp_alpha_norm, r.damping, r.projection))
            .collect()
    }
}

#[pyfunction]
#[pyo3(signature = (symbol, s, n))]
fn check_class<'py>(py: Python<'py>, symbol: &Symbol, s: f64, n: usize) -> PyResult<Bound<'py, PyDict>> {
    let report = fraccalc_core::check_class(&symbol.inner, s, n, &SampleLadder::default()).map_err(py_err)?;
    kv_to_dict(py, &report.to_kv())
}

/// Mikhlin certificate of `m_μ(x) = (1 + a(|x|²))^{-μ/2}`.
#[pyfunction]
#[pyo3(signature = (symbol, mu, n, seed = 0))]
fn mikhlin_m_mu<'py>(py: Python<'py>, symbol: &Symbol, mu: f64, n: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let spec = MultiplierSpec::m_mu(symbol.inner.clone(), mu).map_err(py_err)?;
    let report = py.detach(|| mikhlin_certify(&spec, n, &SampleLadder::default(), seed)).map_err(py_err)?;
    kv_to_dict(py, &report.to_kv())
}

#[pyfunction]
#[pyo3(signature = (calc, g, p = 2.0))]
fn solve_linear(calc: &Calculus, g: &Field, p: f64) -> PyResult<SolveResult> {
    Ok(SolveResult { inner: solvers::solve_linear(&calc.inner, &g.inner, p).map_err(py_err)? })
}

/// Radial Allen–Cahn solve `T_s`-fixed point with forcing `rho`.
#[pyfunction]
#[pyo3(signature = (rho, gamma = 0.5, mass = 1.0, s = 9.0, p = 2.0, kappa = 1.0, seed = 0, uncertified = false))]
#[allow(clippy::too_many_arguments)]
fn solve_allen_cahn(
    py: Python<'_>,
    rho: &Field,
    gamma: f64,
    mass: f64,
    s: f64,
    p: f64,
    kappa: f64,
    seed: u64,
    uncertified: bool,
) -> PyResult<SolveResult> {
    let grid = *rho.inner.grid();
    let mp = MassiveParams { mass, gamma, s, p };
    let opts = SolverOptions { seed, uncertified, ..Default::default() };
    let result = py.detach(|| {
        let preset = preset_allen_cahn(grid, mp, kappa, &rho.inner, uncertified)?;
        solvers::solve_radial(&preset.problem, &opts)
    });
    Ok(SolveResult { inner: result.map_err(py_err)? })
}

/// Run the command-line interface; returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("fraccalc".to_string()).chain(args).collect();
    py.detach(|| fraccalc_core::cli::run(argv))
}

#[pymodule]
fn fraccalc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FraccalcError", m.py().get_type::<FraccalcError>())?;
    m.add_class::<Grid>()?;
    m.add_class::<Field>()?;
    m.add_class::<Symbol>()?;
    m.add_class::<Calculus>()?;
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(check_class, m)?)?;
    m.add_function(wrap_pyfunction!(mikhlin_m_mu, m)?)?;
    m.add_function(wrap_pyfunction!(solve_linear, m)?)?;
    m.add_function(wrap_pyfunction!(solve_allen_cahn, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
