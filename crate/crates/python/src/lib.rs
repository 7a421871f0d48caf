//! Python bindings. Errors surface as `ValueError`.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use bdgas::chain::{self, ChainSpec, DEFAULT_TABLE_TOL};
use bdgas::interval::{self as iv, HeatKernelConfig};
use bdgas::types::{ContinuumConfiguration, DiscreteConfiguration, ReservoirParams};

fn py_err(e: bdgas::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn spec(n_sites: usize, lambda_left: f64, lambda_right: f64) -> PyResult<ChainSpec> {
    ReservoirParams::new(lambda_left, lambda_right)
        .and_then(|p| ChainSpec::new(n_sites, p))
        .map_err(py_err)
}

fn params(lambda_left: f64, lambda_right: f64) -> PyResult<ReservoirParams> {
    ReservoirParams::new(lambda_left, lambda_right).map_err(py_err)
}

/// Transition matrix of the absorbed walk over states 0..=N+1.
#[pyfunction]
fn transition_table(n_sites: usize, t: f64) -> PyResult<Vec<Vec<f64>>> {
    let s = spec(n_sites, 0.0, 0.0)?;
    let table = chain::transition_table(&s, t, DEFAULT_TABLE_TOL).map_err(py_err)?;
    Ok((0..table.dim()).map(|x| table.row(x).to_vec()).collect())
}

#[pyfunction]
fn chain_intensity(n_sites: usize, lambda_left: f64, lambda_right: f64, t: f64) -> PyResult<Vec<f64>> {
    chain::chain_intensity(&spec(n_sites, lambda_left, lambda_right)?, t).map_err(py_err)
}

#[pyfunction]
fn stationary_profile(n_sites: usize, lambda_left: f64, lambda_right: f64) -> PyResult<Vec<f64>> {
    Ok(chain::stationary_profile(&spec(n_sites, lambda_left, lambda_right)?))
}

/// Exact `E[lambda_L^l lambda_R^r D(xi, eta_t)]` for the chain started at
/// `initial`, with `xi = (counts, absorbed_left, absorbed_right)`.
#[pyfunction]
fn dual_expectation(
    xi: Vec<u64>,
    absorbed_left: u64,
    absorbed_right: u64,
    initial: Vec<u64>,
    lambda_left: f64,
    lambda_right: f64,
    t: f64,
) -> PyResult<f64> {
    let s = spec(initial.len(), lambda_left, lambda_right)?;
    let xi = DiscreteConfiguration::new(xi).with_absorbed(absorbed_left, absorbed_right);
    chain::dual_expectation_discrete(&xi, &DiscreteConfiguration::new(initial), t, &s).map_err(py_err)
}

/// One draw of the reservoir process at time `t`: (counts, absorbed_left, absorbed_right).
#[pyfunction]
fn simulate_reservoir(initial: Vec<u64>, lambda_left: f64, lambda_right: f64, t: f64, seed: u64) -> PyResult<(Vec<u64>, u64, u64)> {
    let s = spec(initial.len(), lambda_left, lambda_right)?;
    let mut rng = bdgas::rng::stream(seed, 0);
    let z = chain::simulate_reservoir(&DiscreteConfiguration::new(initial), t, &s, &mut rng).map_err(py_err)?;
    Ok((z.counts, z.absorbed_left, z.absorbed_right))
}

#[pyfunction]
fn abs_density(x: f64, y: f64, t: f64) -> PyResult<f64> {
    iv::abs_density(x, y, t, &HeatKernelConfig::default()).map(|v| v.value).map_err(py_err)
}

/// `(q0, q1, survive)` for absorbed Brownian motion started at `x`.
#[pyfunction]
fn absorption_split(x: f64, t: f64) -> PyResult<(f64, f64, f64)> {
    let s = iv::absorption_split(x, t, &HeatKernelConfig::default()).map_err(py_err)?;
    Ok((s.q0, s.q1, s.survive))
}

#[pyfunction]
fn gas_intensity(x: f64, t: f64, lambda_left: f64, lambda_right: f64) -> PyResult<f64> {
    iv::gas_intensity(x, t, &params(lambda_left, lambda_right)?, &HeatKernelConfig::default()).map_err(py_err)
}

/// One draw of the continuum gas: (positions, absorbed_left, absorbed_right).
#[pyfunction]
fn sample_gas(positions: Vec<f64>, lambda_left: f64, lambda_right: f64, t: f64, seed: u64) -> PyResult<(Vec<f64>, u64, u64)> {
    let p = params(lambda_left, lambda_right)?;
    let eta0 = ContinuumConfiguration::new(positions).map_err(py_err)?;
    if t == 0.0 {
        return Ok((eta0.positions, 0, 0));
    }
    let sampler = iv::BdbgSampler::new(t, &p, &HeatKernelConfig::default()).map_err(py_err)?;
    let mut rng = bdgas::rng::stream(seed, 0);
    let eta = sampler.sample(&eta0, &mut rng).map_err(py_err)?;
    Ok((eta.positions, eta.absorbed_left, eta.absorbed_right))
}

/// Runs a JSON experiment config and writes results into `out`. Returns
/// whether every check passed.
#[pyfunction]
#[pyo3(signature = (config, out, seed=None, negative_control=false))]
fn run(config: PathBuf, out: PathBuf, seed: Option<u64>, negative_control: bool) -> PyResult<bool> {
    bdgas::experiments::run(&config, &out, seed, negative_control).map_err(py_err)
}

#[pymodule]
fn pybdgas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", bdgas::VERSION)?;
    m.add_function(wrap_pyfunction!(transition_table, m)?)?;
    m.add_function(wrap_pyfunction!(chain_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_profile, m)?)?;
    m.add_function(wrap_pyfunction!(dual_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_reservoir, m)?)?;
    m.add_function(wrap_pyfunction!(abs_density, m)?)?;
    m.add_function(wrap_pyfunction!(absorption_split, m)?)?;
    m.add_function(wrap_pyfunction!(gas_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(sample_gas, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
