//! Python module `loopshift`. Coefficient lists are `f_1, f_2, …` as Python
//! ints of any size.

use loopshift::codec::return_time_tail;
use loopshift::loopgraph::first_return_series;
use loopshift::series::Series;
use loopshift::shiftspec::ShiftSpec;
use loopshift::spectral::{self, EntropyConfig, DEFAULT_TOL};
use loopshift::transform::{self, LoopsLemmaConfig, PipelineConfig};
use loopshift::zeta::{self, OrbitData};
use num_bigint::BigUint;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(loopshift, LoopShiftError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    LoopShiftError::new_err(e.to_string())
}

fn series(coeffs: Vec<BigUint>) -> PyResult<Series> {
    Series::new(coeffs).map_err(err)
}

fn entropy_config(tol: f64) -> EntropyConfig {
    EntropyConfig {
        tol,
        ..EntropyConfig::default()
    }
}

/// Enclosure `(lo, hi, estimate)` of the Perron value `λ`.
#[pyfunction]
#[pyo3(signature = (coeffs, tol = DEFAULT_TOL))]
fn entropy(coeffs: Vec<BigUint>, tol: f64) -> PyResult<(f64, f64, f64)> {
    let lam = spectral::entropy_with(&series(coeffs)?, &entropy_config(tol)).map_err(err)?;
    Ok((lam.lo, lam.hi, lam.estimate))
}

/// `λ`, period, recurrence class and SPR verdict as a dict.
#[pyfunction]
#[pyo3(signature = (coeffs, tol = DEFAULT_TOL))]
fn analyze<'py>(py: Python<'py>, coeffs: Vec<BigUint>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    let rep = spectral::analyze(&series(coeffs)?, &entropy_config(tol)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("lambda", (rep.lambda.lo, rep.lambda.hi, rep.lambda.estimate))?;
    d.set_item("exact", rep.lambda.exact)?;
    d.set_item("period", rep.period)?;
    d.set_item("vere_jones", format!("{:?}", rep.vere_jones))?;
    d.set_item("spr", format!("{:?}", rep.spr))?;
    Ok(d)
}

#[pyfunction]
fn fix_counts(coeffs: Vec<BigUint>) -> PyResult<Vec<BigUint>> {
    Ok(zeta::fix_counts(&series(coeffs)?))
}

#[pyfunction]
fn orbit_counts(coeffs: Vec<BigUint>) -> PyResult<Vec<BigUint>> {
    Ok(OrbitData::of(&series(coeffs)?).orbits)
}

/// Whether `∏(1 − zⁿ)^{O_n} = 1 − f` holds to the truncation degree.
#[pyfunction]
fn product_formula_holds(coeffs: Vec<BigUint>) -> PyResult<bool> {
    let f = series(coeffs)?;
    let od = OrbitData::of(&f);
    Ok(zeta::product_formula_residual(&f, &od.orbits).is_zero())
}

/// Loop counts after deleting `r[n-1]` loops of each length `n`.
#[pyfunction]
#[pyo3(signature = (coeffs, r, require_magic = true))]
fn loops_lemma(coeffs: Vec<BigUint>, r: Vec<BigUint>, require_magic: bool) -> PyResult<Vec<BigUint>> {
    let cfg = LoopsLemmaConfig {
        require_magic,
        ..LoopsLemmaConfig::default()
    };
    let run = transform::loops_lemma_run(&series(coeffs)?, &r, &cfg).map_err(err)?;
    if !(run.checks.product_identity && run.checks.orbit_identity) {
        return Err(err("loop deletion identities failed"));
    }
    Ok(run.f_inf.coeffs().to_vec())
}

/// Common extension of two equal-entropy SPR shifts.
#[pyfunction]
#[pyo3(signature = (f, g, degree = None))]
fn almost_iso<'py>(
    py: Python<'py>,
    f: Vec<BigUint>,
    g: Vec<BigUint>,
    degree: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = PipelineConfig {
        degree,
        ..PipelineConfig::default()
    };
    let res = transform::almost_iso(&series(f)?, &series(g)?, &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("common", res.left.common_inflated().coeffs().to_vec())?;
    d.set_item("period", res.diagnostics.period)?;
    d.set_item("beta", res.diagnostics.beta.clone())?;
    d.set_item("n", res.diagnostics.n)?;
    d.set_item("stages", (res.left.levels(), res.right.levels()))?;
    d.set_item("condition_star", res.diagnostics.f.condition_star && res.diagnostics.g.condition_star)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (matrix, vertex, degree))]
fn first_return(matrix: Vec<Vec<u64>>, vertex: usize, degree: usize) -> PyResult<Vec<BigUint>> {
    Ok(first_return_series(&matrix, vertex, degree).map_err(err)?.coeffs().to_vec())
}

/// Decay ratio of the return-time tail over `1..=n_max`.
#[pyfunction]
#[pyo3(signature = (coeffs, n_max = 40, tol = DEFAULT_TOL))]
fn return_time_ratio(coeffs: Vec<BigUint>, n_max: usize, tol: f64) -> PyResult<f64> {
    let f = series(coeffs)?;
    let lam = spectral::entropy_with(&f, &entropy_config(tol)).map_err(err)?;
    Ok(return_time_tail(&f, &lam, n_max).ratio)
}

/// Coefficients of a JSON shift spec.
#[pyfunction]
#[pyo3(signature = (text, degree = None))]
fn expand_spec(text: &str, degree: Option<usize>) -> PyResult<Vec<BigUint>> {
    let spec = ShiftSpec::parse(text).map_err(err)?;
    Ok(spec.expand(degree).map_err(err)?.coeffs().to_vec())
}

#[pymodule]
#[pyo3(name = "loopshift")]
pub fn loopshift_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LoopShiftError", m.py().get_type::<LoopShiftError>())?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(fix_counts, m)?)?;
    m.add_function(wrap_pyfunction!(orbit_counts, m)?)?;
    m.add_function(wrap_pyfunction!(product_formula_holds, m)?)?;
    m.add_function(wrap_pyfunction!(loops_lemma, m)?)?;
    m.add_function(wrap_pyfunction!(almost_iso, m)?)?;
    m.add_function(wrap_pyfunction!(first_return, m)?)?;
    m.add_function(wrap_pyfunction!(return_time_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(expand_spec, m)?)?;
    Ok(())
}
