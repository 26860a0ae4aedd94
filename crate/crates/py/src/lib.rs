//! Python extension module exposing the chain builders, spectral
//! certificates, and model solvers. Values cross the boundary as plain
//! lists; heavy lifting stays in the core crate.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sdd_dp_core::discounting::{
    self, DiscountError, SpectralOptions, SpectralReport as CoreReport,
};
use sdd_dp_core::dp::{self, Solution as CoreSolution, ValueArray};
use sdd_dp_core::markov::{self, Ar1Spec, FiniteMarkovChain};
use sdd_dp_core::models::{self, Production, Utility};
use sdd_dp_core::util::linspace;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

type DivergenceTuple = (Vec<Option<u64>>, Vec<f64>, Option<f64>);
type SearchTuple = (Vec<f64>, Vec<bool>, Vec<f64>, Solution);

/// Finite Markov chain over an increasing state grid.
#[pyclass(name = "MarkovChain")]
struct MarkovChain {
    inner: FiniteMarkovChain,
}

#[pymethods]
impl MarkovChain {
    #[new]
    fn new(states: Vec<f64>, transition: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(MarkovChain {
            inner: FiniteMarkovChain::new(states, transition).map_err(err)?,
        })
    }

    #[getter]
    fn states(&self) -> Vec<f64> {
        self.inner.states().to_vec()
    }

    #[getter]
    fn transition(&self) -> Vec<Vec<f64>> {
        self.inner.transition().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n_states()
    }

    /// (probabilities, unique)
    fn stationary_distribution(&self) -> PyResult<(Vec<f64>, bool)> {
        let pi = markov::stationary_distribution(&self.inner).map_err(err)?;
        Ok((pi.probabilities, pi.unique))
    }

    fn simulate(&self, z0: usize, horizon: usize, seed: u64) -> PyResult<Vec<usize>> {
        if z0 >= self.inner.n_states() {
            return Err(PyValueError::new_err("initial state out of range"));
        }
        Ok(markov::simulate(&self.inner, z0, horizon, seed))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("chain serializes")
    }

    fn __repr__(&self) -> String {
        format!("MarkovChain(n_states={})", self.inner.n_states())
    }
}

/// Rouwenhorst discretization of an AR(1); give exactly one of
/// `sigma_beta` (stationary s.d.) or `sigma_eps` (innovation s.d.).
#[pyfunction]
#[pyo3(signature = (mu, rho, n_states, sigma_beta=None, sigma_eps=None))]
fn rouwenhorst(
    mu: f64,
    rho: f64,
    n_states: usize,
    sigma_beta: Option<f64>,
    sigma_eps: Option<f64>,
) -> PyResult<MarkovChain> {
    let spec = match (sigma_beta, sigma_eps) {
        (Some(sb), None) => Ar1Spec::from_sigma_beta(mu, rho, sb, n_states).map_err(err)?,
        (None, Some(se)) => Ar1Spec::from_sigma_eps(mu, rho, se, n_states).map_err(err)?,
        _ => {
            return Err(PyValueError::new_err(
                "give exactly one of sigma_beta or sigma_eps",
            ))
        }
    };
    Ok(MarkovChain {
        inner: markov::rouwenhorst(&spec),
    })
}

/// Spectral radius estimate with certified bounds.
#[pyclass(name = "SpectralReport")]
struct SpectralReport {
    inner: CoreReport,
}

#[pymethods]
impl SpectralReport {
    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius
    }

    #[getter]
    fn upper(&self) -> f64 {
        self.inner.upper
    }

    #[getter]
    fn lower(&self) -> f64 {
        self.inner.lower
    }

    #[getter]
    fn contraction_index(&self) -> Option<u64> {
        self.inner.contraction_index
    }

    #[getter]
    fn iterations(&self) -> u64 {
        self.inner.iterations
    }

    fn certifies_contraction(&self) -> bool {
        self.inner.certifies_contraction()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("report serializes")
    }

    fn __repr__(&self) -> String {
        format!(
            "SpectralReport(radius={}, bounds=[{}, {}])",
            self.inner.radius, self.inner.lower, self.inner.upper
        )
    }
}

/// The weighted transition operator `L[i][j] = weights[i] Q[i][j]`.
#[pyclass(name = "DiscountOperator")]
struct DiscountOperator {
    inner: discounting::DiscountOperator,
}

#[pymethods]
impl DiscountOperator {
    #[new]
    fn new(chain: &MarkovChain, weights: Vec<f64>) -> PyResult<Self> {
        Ok(DiscountOperator {
            inner: discounting::build_discount_operator(&chain.inner, &weights).map_err(err)?,
        })
    }

    #[pyo3(signature = (tol=1e-6, n_max=1_048_576))]
    fn spectral_radius(&self, tol: f64, n_max: u64) -> PyResult<SpectralReport> {
        let report = match discounting::spectral_radius(&self.inner, SpectralOptions { tol, n_max })
        {
            Ok(report) | Err(DiscountError::NotConverged { report }) => report,
            Err(e) => return Err(err(e)),
        };
        Ok(SpectralReport { inner: report })
    }

    #[pyo3(signature = (n_max=1_048_576))]
    fn contraction_index(&self, n_max: u64) -> Option<u64> {
        discounting::contraction_index(&self.inner, n_max)
    }

    /// `K = (I - L)^{-1} 1`; requires the certificate.
    fn resolvent_sum(&self) -> PyResult<Vec<f64>> {
        discounting::resolvent_sum(&self.inner).map_err(err)
    }

    /// First crossing time of the discounted partial sums per start state,
    /// the largest partial sums seen, and the certified bound when r < 1.
    #[pyo3(signature = (reward_lo, reward_hi, threshold, t_max))]
    fn divergence_witness(
        &self,
        reward_lo: f64,
        reward_hi: f64,
        threshold: f64,
        t_max: u64,
    ) -> DivergenceTuple {
        let report =
            discounting::divergence_witness(&self.inner, (reward_lo, reward_hi), threshold, t_max);
        (
            report.witnesses,
            report.partial_sum_max,
            report.certified_bound,
        )
    }
}

/// Contour data for the radius surface over (rho, sigma_beta), as CSV text.
#[pyfunction]
#[pyo3(signature = (mu, rho_grid, sigma_grid, n_states, tol=1e-6, n_max=1_048_576))]
fn radius_grid_csv(
    mu: f64,
    rho_grid: Vec<f64>,
    sigma_grid: Vec<f64>,
    n_states: usize,
    tol: f64,
    n_max: u64,
) -> String {
    discounting::radius_grid(
        mu,
        &rho_grid,
        &sigma_grid,
        n_states,
        SpectralOptions { tol, n_max },
    )
    .to_csv()
}

/// Solved dynamic program.
#[pyclass(name = "Solution")]
struct Solution {
    inner: CoreSolution,
}

#[pymethods]
impl Solution {
    #[getter]
    fn value(&self) -> Vec<Vec<f64>> {
        self.inner.value.to_nested()
    }

    #[getter]
    fn policy(&self) -> Vec<Vec<usize>> {
        self.inner.policy.to_nested()
    }

    #[getter]
    fn bellman_residual(&self) -> f64 {
        self.inner.bellman_residual
    }

    #[getter]
    fn iterations(&self) -> u64 {
        self.inner.iterations
    }

    #[getter]
    fn error_bound(&self) -> Option<f64> {
        self.inner.error_bound
    }

    #[getter]
    fn certificate(&self) -> SpectralReport {
        SpectralReport {
            inner: self.inner.certified.clone(),
        }
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("solution serializes")
    }
}

fn parse_utility(kind: &str, gamma: Option<f64>) -> PyResult<Utility> {
    match kind {
        "log" => Ok(Utility::Log),
        "linear" => Ok(Utility::Linear),
        "crra" => gamma
            .map(|gamma| Utility::Crra { gamma })
            .ok_or_else(|| PyValueError::new_err("crra utility needs gamma")),
        other => Err(PyValueError::new_err(format!(
            "unknown utility kind {other:?}"
        ))),
    }
}

/// Optimal growth: action = next capital on the grid.
#[pyfunction]
#[pyo3(signature = (chain, beta, k_grid, alpha, scale=1.0, utility="log", gamma=None, tol=1e-10, max_iter=200_000))]
#[allow(clippy::too_many_arguments)]
fn solve_growth(
    chain: &MarkovChain,
    beta: Vec<f64>,
    k_grid: Vec<f64>,
    alpha: f64,
    scale: f64,
    utility: &str,
    gamma: Option<f64>,
    tol: f64,
    max_iter: u64,
) -> PyResult<Solution> {
    let params = models::GrowthParams {
        utility: parse_utility(utility, gamma)?,
        production: Production::CobbDouglas { alpha, scale },
        chain: chain.inner.clone(),
        beta,
        k_grid,
    };
    let dp = models::build_growth(&params).map_err(err)?;
    let solution =
        dp::vfi(&dp, &ValueArray::zeros(dp.n_x(), dp.n_z()), tol, max_iter).map_err(err)?;
    Ok(Solution { inner: solution })
}

/// Job search; returns (value per state, accept flags, K, Solution).
#[pyfunction]
#[pyo3(signature = (chain, wages, compensation, beta, tol=1e-10, max_iter=200_000))]
fn solve_search(
    chain: &MarkovChain,
    wages: Vec<f64>,
    compensation: f64,
    beta: Vec<f64>,
    tol: f64,
    max_iter: u64,
) -> PyResult<SearchTuple> {
    let params = models::SearchParams {
        chain: chain.inner.clone(),
        wages,
        compensation,
        beta,
    };
    let result = models::solve_search(&params, tol, max_iter).map_err(err)?;
    Ok((
        result.value,
        result.accept,
        result.k,
        Solution {
            inner: result.solution,
        },
    ))
}

/// Household problem with taxation; action = next assets on the grid.
#[pyfunction]
#[pyo3(signature = (chain, gross_return, price, transfer, beta, b_grid, utility="crra", gamma=Some(0.5), tol=1e-10, max_iter=200_000))]
#[allow(clippy::too_many_arguments)]
fn solve_tax(
    chain: &MarkovChain,
    gross_return: Vec<f64>,
    price: Vec<f64>,
    transfer: Vec<f64>,
    beta: Vec<f64>,
    b_grid: Vec<f64>,
    utility: &str,
    gamma: Option<f64>,
    tol: f64,
    max_iter: u64,
) -> PyResult<Solution> {
    let params = models::TaxParams {
        chain: chain.inner.clone(),
        gross_return,
        price,
        transfer,
        beta,
        b_grid,
        utility: parse_utility(utility, gamma)?,
    };
    let dp = models::build_tax(&params).map_err(err)?;
    let solution =
        dp::vfi(&dp, &ValueArray::zeros(dp.n_x(), dp.n_z()), tol, max_iter).map_err(err)?;
    Ok(Solution { inner: solution })
}

/// Recursive preferences; returns (transformed Solution, untransformed value).
#[pyfunction]
#[pyo3(signature = (chain, rho_pref, gamma, dividend, price, beta, x_grid, tol=1e-10, max_iter=200_000))]
#[allow(clippy::too_many_arguments)]
fn solve_ez(
    chain: &MarkovChain,
    rho_pref: f64,
    gamma: f64,
    dividend: Vec<f64>,
    price: Vec<f64>,
    beta: Vec<f64>,
    x_grid: Vec<f64>,
    tol: f64,
    max_iter: u64,
) -> PyResult<(Solution, Vec<Vec<f64>>)> {
    let params = models::EzParams {
        chain: chain.inner.clone(),
        rho_pref,
        gamma,
        dividend,
        price,
        beta,
        x_grid,
    };
    let result = models::solve_ez(&params, tol, max_iter).map_err(err)?;
    Ok((
        Solution {
            inner: result.transformed,
        },
        result.value,
    ))
}

/// Homogeneous CRRA savings; returns (profile w(z), savings rates, certificate).
#[pyfunction]
#[pyo3(signature = (chain, gamma, returns, beta, savings_points=1001, tol=1e-12, max_iter=200_000))]
fn solve_homogeneous(
    chain: &MarkovChain,
    gamma: f64,
    returns: Vec<f64>,
    beta: Vec<f64>,
    savings_points: usize,
    tol: f64,
    max_iter: u64,
) -> PyResult<(Vec<f64>, Vec<f64>, SpectralReport)> {
    let params = models::HomogeneousParams {
        chain: chain.inner.clone(),
        gamma,
        returns,
        beta,
        savings_points,
    };
    let sol = models::solve_homogeneous(&params, tol, max_iter).map_err(err)?;
    Ok((
        sol.profile,
        sol.savings,
        SpectralReport {
            inner: sol.certified,
        },
    ))
}

/// Growth on a ladder of nested truncations; returns
/// (per-level base diffs, stabilized, final Solution).
#[pyfunction]
#[pyo3(signature = (chain, beta, alpha, scale, m1, levels, growth_factor=2.0, points_level1=51, utility="log", gamma=None, tol=1e-10, stab_tol=1e-6, max_iter=200_000))]
#[allow(clippy::too_many_arguments)]
fn solve_truncated(
    chain: &MarkovChain,
    beta: Vec<f64>,
    alpha: f64,
    scale: f64,
    m1: f64,
    levels: usize,
    growth_factor: f64,
    points_level1: usize,
    utility: &str,
    gamma: Option<f64>,
    tol: f64,
    stab_tol: f64,
    max_iter: u64,
) -> PyResult<(Vec<Option<f64>>, bool, Solution)> {
    let params = models::GrowthParams {
        utility: parse_utility(utility, gamma)?,
        production: Production::CobbDouglas { alpha, scale },
        chain: chain.inner.clone(),
        beta,
        k_grid: Vec::new(),
    };
    let ladder = models::TruncationLadder {
        m1,
        levels,
        growth_factor,
        points_level1,
    };
    let outcome =
        models::solve_truncated(&params, &ladder, tol, stab_tol, max_iter).map_err(err)?;
    Ok((
        outcome.levels.iter().map(|l| l.diff_on_base).collect(),
        outcome.stabilized,
        Solution {
            inner: outcome.solution,
        },
    ))
}

/// Evenly spaced grid helper mirroring the CLI's `{min, max, count}` form.
#[pyfunction]
fn grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    linspace(min, max, count)
}

#[pymodule]
fn sdd_dp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<MarkovChain>()?;
    m.add_class::<DiscountOperator>()?;
    m.add_class::<SpectralReport>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(rouwenhorst, m)?)?;
    m.add_function(wrap_pyfunction!(radius_grid_csv, m)?)?;
    m.add_function(wrap_pyfunction!(solve_growth, m)?)?;
    m.add_function(wrap_pyfunction!(solve_search, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tax, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ez, m)?)?;
    m.add_function(wrap_pyfunction!(solve_homogeneous, m)?)?;
    m.add_function(wrap_pyfunction!(solve_truncated, m)?)?;
    m.add_function(wrap_pyfunction!(grid, m)?)?;
    Ok(())
}
