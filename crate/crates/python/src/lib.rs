//! Python bindings: specs, exact tables, parents, densities, regressions,
//! reconstructions and Monte Carlo checks.

use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use overlapstat::curve::{quantile_grid, Curve};
use overlapstat::mc::{self, VerifyOptions};
use overlapstat::reconstruct::{self, Tabulated};
use overlapstat::regression::{self, Direction, LemmaForm, R1Item};
use overlapstat::{
    Error, ExactRational, ModelSpec, NuDensity, OverlapSpec, ParentModel, ReconstructionResult,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Quadrature { .. } | Error::EmptyBin { .. } | Error::BudgetExceeded { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        Error::InfiniteMean(_) | Error::InvalidRegression(_) => {
            PyArithmeticError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn fraction<'py>(py: Python<'py>, v: &ExactRational) -> PyResult<Bound<'py, PyAny>> {
    let int = py.import("builtins")?.getattr("int")?;
    let num = int.call1((v.numer().to_string(),))?;
    let den = int.call1((v.denom().to_string(),))?;
    py.import("fractions")?
        .getattr("Fraction")?
        .call1((num, den))
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.getattr("loads")?.call1((text,))
}

/// Two overlapping samples and the order-statistic index taken from each.
#[pyclass(name = "OverlapSpec", frozen, eq, hash, from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PySpec {
    inner: OverlapSpec,
}

#[pymethods]
impl PySpec {
    #[new]
    fn new(r: u32, m: u32, n: u32, i: u32, j: u32) -> PyResult<Self> {
        Ok(Self {
            inner: OverlapSpec::new(r, m, n, i, j).map_err(to_py)?,
        })
    }

    #[getter]
    fn r(&self) -> u32 {
        self.inner.r
    }
    #[getter]
    fn m(&self) -> u32 {
        self.inner.m
    }
    #[getter]
    fn n(&self) -> u32 {
        self.inner.n
    }
    #[getter]
    fn i(&self) -> u32 {
        self.inner.i
    }
    #[getter]
    fn j(&self) -> u32 {
        self.inner.j
    }

    fn pooled(&self) -> u32 {
        self.inner.pooled()
    }

    fn in_support(&self, k: u32, l: u32) -> bool {
        self.inner.in_support(k, l)
    }

    fn reflected(&self) -> Self {
        Self {
            inner: self.inner.reflected(),
        }
    }

    fn __repr__(&self) -> String {
        let s = self.inner;
        format!(
            "OverlapSpec(r={}, m={}, n={}, i={}, j={})",
            s.r, s.m, s.n, s.i, s.j
        )
    }
}

/// A continuous parent distribution.
#[pyclass(name = "ParentModel", frozen, from_py_object)]
#[derive(Clone)]
struct PyParent {
    inner: ParentModel,
}

#[pymethods]
impl PyParent {
    /// `ParentModel("power", [2.0])`, `ParentModel("cb", [1.5, 1.5])`, ...
    #[new]
    #[pyo3(signature = (family, params = vec![], location = 0.0, scale = 1.0))]
    fn new(family: &str, params: Vec<f64>, location: f64, scale: f64) -> PyResult<Self> {
        let spec = ModelSpec {
            family: family.to_string(),
            params,
            location,
            scale,
        };
        Ok(Self {
            inner: spec.build().map_err(to_py)?,
        })
    }

    /// Parent whose quantile density makes `E(X_{j-1:n-2} | X_{j:n}) = X_{j:n}`.
    #[staticmethod]
    #[pyo3(signature = (j, n, location = 0.0))]
    fn from_midsample(j: u32, n: u32, location: f64) -> PyResult<Self> {
        let q = reconstruct::qdf_from_midsample(j, n).map_err(to_py)?;
        Ok(Self {
            inner: q.parent(location).map_err(to_py)?,
        })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id()
    }

    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }

    fn pdf(&self, x: f64) -> f64 {
        self.inner.pdf(x)
    }

    fn quantile(&self, u: f64) -> f64 {
        self.inner.quantile(u)
    }

    fn quantile_density(&self, u: f64) -> f64 {
        self.inner.quantile_density(u)
    }

    fn support(&self) -> (f64, f64) {
        self.inner.support()
    }

    fn has_finite_mean(&self) -> bool {
        self.inner.has_finite_mean()
    }

    fn negated(&self) -> Self {
        Self {
            inner: self.inner.negated(),
        }
    }

    fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        self.inner.sample(count, seed)
    }

    fn __repr__(&self) -> String {
        format!("ParentModel({:?})", self.inner.id())
    }
}

/// Joint density of the pair: planar part plus diagonal atom.
#[pyclass(name = "JointDensity", frozen)]
struct PyDensity {
    inner: NuDensity,
}

#[pymethods]
impl PyDensity {
    fn continuous(&self, x: f64, y: f64) -> f64 {
        self.inner.continuous(x, y)
    }

    fn atom(&self, x: f64) -> f64 {
        self.inner.atom(x)
    }

    fn atom_weight<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, &self.inner.atom_weight())
    }

    #[pyo3(signature = (tol = 1e-9))]
    fn total_mass(&self, tol: f64) -> PyResult<f64> {
        self.inner.nu_total_mass(tol).map_err(to_py)
    }

    #[pyo3(signature = (tol = 1e-9))]
    fn atom_mass(&self, tol: f64) -> PyResult<f64> {
        self.inner.atom_mass(tol).map_err(to_py)
    }

    fn rectangle_probability(&self, x: f64, y: f64) -> PyResult<f64> {
        self.inner.rectangle_probability(x, y).map_err(to_py)
    }
}

/// Exact `P(X_{i:m} = X_{k:n+r}, X^{(r)}_{j:n} = X_{l:n+r})` as a Fraction.
#[pyfunction]
fn p_overlap<'py>(py: Python<'py>, spec: &PySpec, k: u32, l: u32) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, &overlapstat::p_overlap(&spec.inner, k, l))
}

/// `{(k, l): Fraction}` over the support rectangle.
#[pyfunction]
fn probability_table<'py>(py: Python<'py>, spec: &PySpec) -> PyResult<Bound<'py, PyDict>> {
    let table = overlapstat::probability_table(&spec.inner).map_err(to_py)?;
    let out = PyDict::new(py);
    for (k, l, v) in table.support_entries() {
        out.set_item((k, l), fraction(py, v)?)?;
    }
    Ok(out)
}

#[pyfunction]
fn joint_density(spec: &PySpec, model: &PyParent) -> PyResult<PyDensity> {
    Ok(PyDensity {
        inner: overlapstat::joint_overlap_density(&spec.inner, &model.inner).map_err(to_py)?,
    })
}

fn direction(name: &str) -> PyResult<Direction> {
    match name {
        "ce" => Ok(Direction::OrigGivenExt),
        "ec" => Ok(Direction::ExtGivenOrig),
        _ => Err(PyValueError::new_err(format!(
            "direction must be 'ce' or 'ec', got {name:?}"
        ))),
    }
}

/// `E(X_{i:m} | X^{(r)}_{j:n} = t)` for "ce", `E(X^{(r)}_{j:n} | X_{i:m} = t)` for "ec".
#[pyfunction]
#[pyo3(signature = (spec, model, t, direction = "ce"))]
fn regress(spec: &PySpec, model: &PyParent, t: f64, direction: &str) -> PyResult<f64> {
    match self::direction(direction)? {
        Direction::OrigGivenExt => regression::regress_orig_given_ext(&spec.inner, &model.inner, t),
        Direction::ExtGivenOrig => regression::regress_ext_given_orig(&spec.inner, &model.inner, t),
    }
    .map_err(to_py)
}

/// Closed form for `r = 1`, `m = n = 2`; `item` is "i".."iv" or "2:2|2:2" style.
#[pyfunction]
fn closed_form_r1(item: &str, model: &PyParent, y: f64) -> PyResult<f64> {
    let item: R1Item = item.parse().map_err(to_py)?;
    regression::closed_form_r1(item, &model.inner, y).map_err(to_py)
}

/// Special forms: `kind` in "min", "max" (args m, n), "adjacent" (i, m), "single" (j, n).
#[pyfunction]
fn special_regression(kind: &str, a: u32, b: u32, model: &PyParent, x: f64) -> PyResult<f64> {
    let form = match kind {
        "min" => LemmaForm::Min { m: a, n: b },
        "max" => LemmaForm::Max { m: a, n: b },
        "adjacent" => LemmaForm::Adjacent { i: a, m: b },
        "single" => LemmaForm::Single { j: a, n: b },
        _ => return Err(PyValueError::new_err(format!("unknown form {kind:?}"))),
    };
    regression::special_form(form, &model.inner, x).map_err(to_py)
}

/// `(x, value)` lists of a general regression on a quantile grid.
#[pyfunction]
#[pyo3(signature = (spec, model, size = 99, direction = "ce"))]
fn regression_curve(
    spec: &PySpec,
    model: &PyParent,
    size: usize,
    direction: &str,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let c =
        regression::regression_curve(&spec.inner, &model.inner, self::direction(direction)?, size)
            .map_err(to_py)?;
    Ok((c.x, c.values))
}

fn curve(x: Vec<f64>, values: Vec<f64>, derivative: Option<Vec<f64>>) -> PyResult<Tabulated> {
    let mut c = Curve::new("input", x, values).map_err(to_py)?;
    if let Some(d) = derivative {
        c = c.with_derivative(d).map_err(to_py)?;
    }
    Ok(Tabulated::new(c))
}

fn result<'py>(py: Python<'py>, r: ReconstructionResult) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("x", r.cdf.x)?;
    out.set_item("cdf", r.cdf.values)?;
    out.set_item("gauge", r.gauge)?;
    out.set_item("diagnostics", json_to_py(py, &r.diagnostics)?)?;
    Ok(out)
}

/// Parent cdf from a regression curve. `method` is "min" or "max" (needs
/// `n`, `m`), "adjacent" (values are `h`, needs `i`, optional `b`) or
/// "hprime" (values are `h'`, needs `j`, `n`).
#[pyfunction]
#[pyo3(signature = (method, x, values, derivative = None, n = None, m = None, i = None, j = None, b = f64::INFINITY))]
#[allow(clippy::too_many_arguments)]
fn reconstruct_cdf<'py>(
    py: Python<'py>,
    method: &str,
    x: Vec<f64>,
    values: Vec<f64>,
    derivative: Option<Vec<f64>>,
    n: Option<u32>,
    m: Option<u32>,
    i: Option<u32>,
    j: Option<u32>,
    b: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let need = |v: Option<u32>, name: &str| {
        v.ok_or_else(|| PyValueError::new_err(format!("{method} needs {name}")))
    };
    let g = curve(x, values, derivative)?;
    let r = match method {
        "min" => reconstruct::from_min_regression(&g, need(n, "n")?, need(m, "m")?),
        "max" => reconstruct::from_max_regression(&g, need(n, "n")?, need(m, "m")?),
        "adjacent" => reconstruct::from_adjacent_regression(&g, need(i, "i")?, b),
        "hprime" => reconstruct::F_from_hprime(&g, need(j, "j")?, need(n, "n")?),
        _ => return Err(PyValueError::new_err(format!("unknown method {method:?}"))),
    }
    .map_err(to_py)?;
    result(py, r)
}

/// Interior quantile grid `g / (size + 1)`.
#[pyfunction]
fn grid(size: usize) -> Vec<f64> {
    quantile_grid(size)
}

/// Simulated `(X_{i:m}, X^{(r)}_{j:n})` pairs.
#[pyfunction]
fn simulate_pairs(
    spec: &PySpec,
    model: &PyParent,
    count: u64,
    seed: u64,
) -> PyResult<Vec<(f64, f64)>> {
    mc::simulate_pairs(&spec.inner, &model.inner, count, seed).map_err(to_py)
}

/// Monte Carlo report (as a dict) for one spec and parent.
#[pyfunction]
#[pyo3(signature = (spec, model, reps = 1_000_000, seed = 20_240_601, zmax = 4.0))]
fn verify<'py>(
    py: Python<'py>,
    spec: &PySpec,
    model: &PyParent,
    reps: u64,
    seed: u64,
    zmax: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = VerifyOptions {
        reps,
        regression_reps: reps,
        seed,
        zmax,
        ..VerifyOptions::default()
    };
    let report = py
        .detach(|| mc::verify_spec(&spec.inner, &model.inner, &opts))
        .map_err(to_py)?;
    json_to_py(py, &report)
}

#[pymodule]
fn overlapstat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PyParent>()?;
    m.add_class::<PyDensity>()?;
    m.add_function(wrap_pyfunction!(p_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(probability_table, m)?)?;
    m.add_function(wrap_pyfunction!(joint_density, m)?)?;
    m.add_function(wrap_pyfunction!(regress, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_r1, m)?)?;
    m.add_function(wrap_pyfunction!(special_regression, m)?)?;
    m.add_function(wrap_pyfunction!(regression_curve, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(grid, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
