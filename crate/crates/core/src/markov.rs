//! Finite Markov chains on ordered state grids: validation, stationary
//! distributions, path simulation, and Rouwenhorst discretization of
//! Gaussian AR(1) processes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::linspace;

/// Row sums may deviate from one by at most this much before the chain is
/// rejected; deviations inside the tolerance are renormalized away.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainViolation {
    #[error("row {row} sums to {sum:.17} instead of 1")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("negative entry at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize },
    #[error("state grid is not strictly increasing at index {index}")]
    NonIncreasingGrid { index: usize },
    #[error("chain must have at least one state")]
    Empty,
    #[error("transition matrix shape does not match {expected} states")]
    ShapeMismatch { expected: usize },
}

#[derive(Debug, Error)]
pub enum MarkovError {
    #[error("invalid chain: {}", format_violations(.0))]
    InvalidChain(Vec<ChainViolation>),
    #[error("invalid AR(1) specification: {0}")]
    InvalidAr1(String),
    #[error("singular system: no stationary vector met the tolerance")]
    SingularSystem,
}

fn format_violations(violations: &[ChainViolation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A finite Markov chain: a strictly increasing state grid and a
/// row-stochastic transition matrix. Construction validates every invariant
/// and renormalizes row sums that are off by less than [`ROW_SUM_TOL`].
///
/// JSON form: `{"states": [...], "transition": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainData")]
pub struct FiniteMarkovChain {
    states: Vec<f64>,
    transition: Vec<Vec<f64>>,
    /// Largest row-sum deviation absorbed by renormalization.
    #[serde(skip)]
    row_sum_correction: f64,
}

#[derive(Deserialize)]
struct ChainData {
    states: Vec<f64>,
    transition: Vec<Vec<f64>>,
}

impl TryFrom<ChainData> for FiniteMarkovChain {
    type Error = MarkovError;

    fn try_from(data: ChainData) -> Result<Self, MarkovError> {
        FiniteMarkovChain::new(data.states, data.transition)
    }
}

impl FiniteMarkovChain {
    pub fn new(states: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self, MarkovError> {
        let violations = collect_violations(&states, &transition);
        if !violations.is_empty() {
            return Err(MarkovError::InvalidChain(violations));
        }
        let mut transition = transition;
        let mut correction: f64 = 0.0;
        for row in transition.iter_mut() {
            let sum: f64 = row.iter().sum();
            correction = correction.max((sum - 1.0).abs());
            if sum != 1.0 {
                for q in row.iter_mut() {
                    *q /= sum;
                }
            }
        }
        Ok(FiniteMarkovChain {
            states,
            transition,
            row_sum_correction: correction,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn transition_row(&self, i: usize) -> &[f64] {
        &self.transition[i]
    }

    /// Row-sum deviation absorbed at construction time.
    pub fn row_sum_correction(&self) -> f64 {
        self.row_sum_correction
    }

    /// Expectation of `h` one step ahead of state `i`: `sum_j Q[i][j] h[j]`.
    pub fn expect_next(&self, i: usize, h: &[f64]) -> f64 {
        self.transition[i]
            .iter()
            .zip(h.iter())
            .map(|(q, v)| q * v)
            .sum()
    }
}

/// Checks every chain invariant and reports all violations at once.
pub fn validate_chain(states: &[f64], transition: &[Vec<f64>]) -> Result<(), Vec<ChainViolation>> {
    let violations = collect_violations(states, transition);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

fn collect_violations(states: &[f64], transition: &[Vec<f64>]) -> Vec<ChainViolation> {
    let mut violations = Vec::new();
    let n = states.len();
    if n == 0 {
        violations.push(ChainViolation::Empty);
        return violations;
    }
    for i in 1..n {
        if states[i] <= states[i - 1] {
            violations.push(ChainViolation::NonIncreasingGrid { index: i });
        }
    }
    if transition.len() != n || transition.iter().any(|row| row.len() != n) {
        violations.push(ChainViolation::ShapeMismatch { expected: n });
        return violations;
    }
    for (i, row) in transition.iter().enumerate() {
        for (j, &q) in row.iter().enumerate() {
            if q < 0.0 {
                violations.push(ChainViolation::NegativeEntry { row: i, col: j });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            violations.push(ChainViolation::NonStochasticRow { row: i, sum });
        }
    }
    violations
}

/// AR(1) process `x' = rho x + (1 - rho) mu + sigma_eps eps` to be
/// discretized on `n_states` points. Exactly one of the two dispersion
/// parameters is required; the other is derived from
/// `sigma_beta = sigma_eps / sqrt(1 - rho^2)`.
///
/// JSON form: `{"mu": .., "rho": .., "sigma_beta" | "sigma_eps": .., "n_states": ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Ar1Data")]
pub struct Ar1Spec {
    pub mu: f64,
    pub rho: f64,
    pub sigma_eps: f64,
    pub sigma_beta: f64,
    pub n_states: usize,
}

#[derive(Deserialize)]
struct Ar1Data {
    mu: f64,
    rho: f64,
    #[serde(default)]
    sigma_eps: Option<f64>,
    #[serde(default)]
    sigma_beta: Option<f64>,
    n_states: usize,
}

impl TryFrom<Ar1Data> for Ar1Spec {
    type Error = MarkovError;

    fn try_from(d: Ar1Data) -> Result<Self, MarkovError> {
        match (d.sigma_eps, d.sigma_beta) {
            (Some(se), None) => Ar1Spec::from_sigma_eps(d.mu, d.rho, se, d.n_states),
            (None, Some(sb)) => Ar1Spec::from_sigma_beta(d.mu, d.rho, sb, d.n_states),
            (Some(se), Some(sb)) => {
                let spec = Ar1Spec::from_sigma_beta(d.mu, d.rho, sb, d.n_states)?;
                let scale = se.abs().max(1.0);
                if (spec.sigma_eps - se).abs() > 1e-12 * scale {
                    return Err(MarkovError::InvalidAr1(format!(
                        "sigma_eps {} and sigma_beta {} are inconsistent",
                        se, sb
                    )));
                }
                Ok(spec)
            }
            (None, None) => Err(MarkovError::InvalidAr1(
                "one of sigma_eps or sigma_beta is required".to_string(),
            )),
        }
    }
}

impl Ar1Spec {
    pub fn from_sigma_beta(
        mu: f64,
        rho: f64,
        sigma_beta: f64,
        n_states: usize,
    ) -> Result<Self, MarkovError> {
        validate_ar1(rho, sigma_beta, n_states)?;
        Ok(Ar1Spec {
            mu,
            rho,
            sigma_eps: sigma_beta * (1.0 - rho * rho).sqrt(),
            sigma_beta,
            n_states,
        })
    }

    pub fn from_sigma_eps(
        mu: f64,
        rho: f64,
        sigma_eps: f64,
        n_states: usize,
    ) -> Result<Self, MarkovError> {
        validate_ar1(rho, sigma_eps, n_states)?;
        Ok(Ar1Spec {
            mu,
            rho,
            sigma_eps,
            sigma_beta: sigma_eps / (1.0 - rho * rho).sqrt(),
            n_states,
        })
    }
}

fn validate_ar1(rho: f64, sigma: f64, n_states: usize) -> Result<(), MarkovError> {
    if rho.is_nan() || rho.abs() >= 1.0 {
        return Err(MarkovError::InvalidAr1(format!(
            "persistence must satisfy |rho| < 1, got {}",
            rho
        )));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(MarkovError::InvalidAr1(format!(
            "dispersion must be positive, got {}",
            sigma
        )));
    }
    if n_states < 2 {
        return Err(MarkovError::InvalidAr1(format!(
            "need at least 2 states, got {}",
            n_states
        )));
    }
    Ok(())
}

/// Rouwenhorst discretization with the symmetric parameterization
/// `p = q = (1 + rho) / 2` and span `psi = sigma_beta * sqrt(N - 1)`,
/// which matches the mean, persistence, and unconditional variance of the
/// AR(1) exactly.
pub fn rouwenhorst(spec: &Ar1Spec) -> FiniteMarkovChain {
    let n = spec.n_states;
    let psi = spec.sigma_beta * ((n - 1) as f64).sqrt();
    let states = linspace(spec.mu - psi, spec.mu + psi, n);
    let p = (1.0 + spec.rho) / 2.0;
    let q = p;

    let mut theta = vec![vec![p, 1.0 - p], vec![1.0 - q, q]];
    for m in 3..=n {
        let mut next = vec![vec![0.0; m]; m];
        for (i, row) in theta.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                next[i][j] += p * v;
                next[i][j + 1] += (1.0 - p) * v;
                next[i + 1][j] += (1.0 - q) * v;
                next[i + 1][j + 1] += q * v;
            }
        }
        for row in next.iter_mut().take(m - 1).skip(1) {
            for v in row.iter_mut() {
                *v *= 0.5;
            }
        }
        theta = next;
    }

    FiniteMarkovChain::new(states, theta).expect("Rouwenhorst recursion yields a valid chain")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub probabilities: Vec<f64>,
    /// False when the chain admits more than one stationary distribution;
    /// the returned vector is then one valid choice.
    pub unique: bool,
}

/// Solves `pi Q = pi`, `sum pi = 1` by a bordered linear solve, falling back
/// to damped power iteration when the bordered system is singular.
pub fn stationary_distribution(
    chain: &FiniteMarkovChain,
) -> Result<StationaryDistribution, MarkovError> {
    let n = chain.n_states();
    if n == 1 {
        return Ok(StationaryDistribution {
            probabilities: vec![1.0],
            unique: true,
        });
    }

    // Q^T - I, with the last row replaced by the normalization sum.
    let mut bordered = crate::linalg::SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            bordered.set(
                i,
                j,
                chain.transition[j][i] - if i == j { 1.0 } else { 0.0 },
            );
        }
    }
    for j in 0..n {
        bordered.set(n - 1, j, 1.0);
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;

    let candidate = crate::linalg::lu_factor(&bordered)
        .map(|f| f.solve(&rhs))
        .ok()
        .and_then(|pi| sanitize_stationary(chain, pi));
    let pi = match candidate {
        Some(pi) => pi,
        None => damped_power_iteration(chain)?,
    };

    let unique = closed_class_count(chain) == 1;
    Ok(StationaryDistribution {
        probabilities: pi,
        unique,
    })
}

fn sanitize_stationary(chain: &FiniteMarkovChain, mut pi: Vec<f64>) -> Option<Vec<f64>> {
    for v in pi.iter_mut() {
        if *v < -1e-10 || !v.is_finite() {
            return None;
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    if total <= 0.0 {
        return None;
    }
    for v in pi.iter_mut() {
        *v /= total;
    }
    if stationary_residual(chain, &pi) <= 1e-10 {
        Some(pi)
    } else {
        None
    }
}

fn stationary_residual(chain: &FiniteMarkovChain, pi: &[f64]) -> f64 {
    let n = chain.n_states();
    (0..n)
        .map(|j| {
            let next: f64 = (0..n).map(|i| pi[i] * chain.transition[i][j]).sum();
            (next - pi[j]).abs()
        })
        .fold(0.0, f64::max)
}

fn damped_power_iteration(chain: &FiniteMarkovChain) -> Result<Vec<f64>, MarkovError> {
    let n = chain.n_states();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..2_000_000 {
        if stationary_residual(chain, &pi) <= 1e-12 {
            return Ok(pi);
        }
        let mut next = vec![0.0; n];
        for (i, &weight) in pi.iter().enumerate() {
            for (j, &q) in chain.transition[i].iter().enumerate() {
                next[j] += weight * q;
            }
        }
        // Damping removes periodicity without changing the fixed points.
        for (cur, fwd) in pi.iter_mut().zip(next.iter()) {
            *cur = 0.5 * *cur + 0.5 * fwd;
        }
    }
    if stationary_residual(chain, &pi) <= 1e-10 {
        Ok(pi)
    } else {
        Err(MarkovError::SingularSystem)
    }
}

/// Number of closed communicating classes; the stationary distribution is
/// unique exactly when there is one. Works on the sparsity pattern of `Q`,
/// so vanishingly small but positive probabilities still count as edges.
fn closed_class_count(chain: &FiniteMarkovChain) -> usize {
    let n = chain.n_states();
    // reach[i][j]: state j is reachable from i in zero or more steps
    let mut reach: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| i == j || chain.transition[i][j] > 0.0)
                .collect()
        })
        .collect();
    // Floyd-Warshall style closure; n is small everywhere this is used
    for k in 0..n {
        let via = reach[k].clone();
        for row in reach.iter_mut() {
            if row[k] {
                for (dst, &src) in row.iter_mut().zip(via.iter()) {
                    *dst = *dst || src;
                }
            }
        }
    }
    let mut closed = 0;
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &class {
            assigned[j] = true;
        }
        // the class is closed when nothing outside it is reachable
        let is_closed = class
            .iter()
            .all(|&j| (0..n).all(|k| !reach[j][k] || reach[k][j]));
        if is_closed {
            closed += 1;
        }
    }
    closed
}

/// Simulates an index path of the given length starting from `z0`.
/// The draw stream is fully determined by `seed`.
pub fn simulate(chain: &FiniteMarkovChain, z0: usize, horizon: usize, seed: u64) -> Vec<usize> {
    assert!(z0 < chain.n_states(), "initial state out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = Vec::with_capacity(horizon);
    let mut current = z0;
    for _ in 0..horizon {
        path.push(current);
        let u: f64 = rng.random();
        let row = chain.transition_row(current);
        let mut acc = 0.0;
        let mut next = current;
        for (j, &q) in row.iter().enumerate() {
            acc += q;
            if u < acc {
                next = j;
                break;
            }
            if q > 0.0 {
                next = j; // last state with mass, guards acc rounding below 1
            }
        }
        current = next;
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(states: Vec<f64>, q: Vec<Vec<f64>>) -> FiniteMarkovChain {
        FiniteMarkovChain::new(states, q).unwrap()
    }

    #[test]
    fn degenerate_single_state_chain_is_valid() {
        let c = chain(vec![0.9], vec![vec![1.0]]);
        assert_eq!(c.n_states(), 1);
    }

    #[test]
    fn row_sum_violation_is_reported_with_index() {
        let err = FiniteMarkovChain::new(vec![0.0, 1.0], vec![vec![0.5, 0.4], vec![0.3, 0.7]])
            .unwrap_err();
        match err {
            MarkovError::InvalidChain(violations) => {
                assert!(violations.iter().any(|v| matches!(
                    v,
                    ChainViolation::NonStochasticRow { row: 0, sum } if (sum - 0.9).abs() < 1e-12
                )));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn absorbing_two_state_structure_is_valid() {
        let c = chain(vec![0.99, 1.02], vec![vec![1.0, 0.0], vec![0.2, 0.8]]);
        assert!(validate_chain(c.states(), c.transition()).is_ok());
    }

    #[test]
    fn all_violations_reported_together() {
        let err = FiniteMarkovChain::new(vec![1.0, 0.5], vec![vec![1.2, -0.2], vec![0.3, 0.3]])
            .unwrap_err();
        let MarkovError::InvalidChain(violations) = err else {
            panic!("expected InvalidChain");
        };
        assert!(violations
            .iter()
            .any(|v| matches!(v, ChainViolation::NonIncreasingGrid { index: 1 })));
        assert!(violations
            .iter()
            .any(|v| matches!(v, ChainViolation::NegativeEntry { row: 0, col: 1 })));
        assert!(violations
            .iter()
            .any(|v| matches!(v, ChainViolation::NonStochasticRow { row: 1, .. })));
    }

    #[test]
    fn rouwenhorst_two_states_closed_form() {
        let spec = Ar1Spec::from_sigma_beta(1.0, 0.5, 0.1, 2).unwrap();
        let c = rouwenhorst(&spec);
        assert!((c.states()[0] - 0.9).abs() < 1e-14);
        assert!((c.states()[1] - 1.1).abs() < 1e-14);
        assert!((c.transition()[0][0] - 0.75).abs() < 1e-14);
        assert!((c.transition()[0][1] - 0.25).abs() < 1e-14);
        assert!((c.transition()[1][0] - 0.25).abs() < 1e-14);
        assert!((c.transition()[1][1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn rouwenhorst_zero_persistence_is_iid() {
        let spec = Ar1Spec::from_sigma_beta(1.0, 0.0, 0.1, 2).unwrap();
        let c = rouwenhorst(&spec);
        for row in c.transition() {
            assert!((row[0] - 0.5).abs() < 1e-14);
            assert!((row[1] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn rouwenhorst_benchmark_moments() {
        let spec = Ar1Spec::from_sigma_beta(0.985, 0.99, 0.01, 50).unwrap();
        let c = rouwenhorst(&spec);
        let pi = stationary_distribution(&c).unwrap();
        assert!(pi.unique);
        let mean: f64 = pi
            .probabilities
            .iter()
            .zip(c.states())
            .map(|(p, s)| p * s)
            .sum();
        let var: f64 = pi
            .probabilities
            .iter()
            .zip(c.states())
            .map(|(p, s)| p * (s - mean) * (s - mean))
            .sum();
        assert!((mean - 0.985).abs() < 1e-10, "mean {mean}");
        assert!((var.sqrt() - 0.01).abs() < 1e-10, "sd {}", var.sqrt());
    }

    #[test]
    fn rouwenhorst_is_reversible() {
        // detailed balance pi_i Q_ij = pi_j Q_ji under the symmetric recursion
        let spec = Ar1Spec::from_sigma_beta(0.5, 0.8, 0.2, 7).unwrap();
        let c = rouwenhorst(&spec);
        let pi = stationary_distribution(&c).unwrap().probabilities;
        for i in 0..7 {
            for j in 0..7 {
                let forward = pi[i] * c.transition()[i][j];
                let backward = pi[j] * c.transition()[j][i];
                assert!((forward - backward).abs() < 1e-12, "({i}, {j})");
            }
        }
    }

    #[test]
    fn rouwenhorst_stationary_is_binomial() {
        let spec = Ar1Spec::from_sigma_beta(0.0, 0.9, 1.0, 5).unwrap();
        let c = rouwenhorst(&spec);
        let pi = stationary_distribution(&c).unwrap();
        let expected = [1.0, 4.0, 6.0, 4.0, 1.0].map(|v| v / 16.0);
        for (got, want) in pi.probabilities.iter().zip(expected.iter()) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn identity_chain_flagged_non_unique() {
        let c = chain(vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let pi = stationary_distribution(&c).unwrap();
        assert!(!pi.unique);
        assert!(stationary_residual(&c, &pi.probabilities) < 1e-10);
        let total: f64 = pi.probabilities.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_chain_has_uniform_stationary() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.75, 0.25], vec![0.25, 0.75]]);
        let pi = stationary_distribution(&c).unwrap();
        assert!(pi.unique);
        assert!((pi.probabilities[0] - 0.5).abs() < 1e-12);
        assert!((pi.probabilities[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn absorbing_state_traps_simulation() {
        let c = chain(vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.2, 0.8]]);
        let path = simulate(&c, 0, 50, 7);
        assert_eq!(path.len(), 50);
        assert!(path.iter().all(|&z| z == 0));
    }

    #[test]
    fn zero_horizon_gives_empty_path() {
        let c = chain(vec![0.0], vec![vec![1.0]]);
        assert!(simulate(&c, 0, 0, 1).is_empty());
    }

    #[test]
    fn simulation_is_reproducible() {
        let c = chain(
            vec![0.0, 1.0, 2.0],
            vec![
                vec![0.2, 0.5, 0.3],
                vec![0.4, 0.1, 0.5],
                vec![0.3, 0.3, 0.4],
            ],
        );
        assert_eq!(simulate(&c, 1, 200, 42), simulate(&c, 1, 200, 42));
        assert_ne!(simulate(&c, 1, 200, 42), simulate(&c, 1, 200, 43));
    }

    #[test]
    fn long_run_frequencies_match_stationary() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.75, 0.25], vec![0.25, 0.75]]);
        let path = simulate(&c, 0, 1_000_000, 3);
        let ones = path.iter().filter(|&&z| z == 1).count() as f64;
        let share = ones / path.len() as f64;
        assert!((share - 0.5).abs() < 0.01, "share {share}");
    }

    #[test]
    fn chain_json_round_trip() {
        let c = chain(vec![0.9, 1.1], vec![vec![0.75, 0.25], vec![0.25, 0.75]]);
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"states\""));
        assert!(json.contains("\"transition\""));
        let back: FiniteMarkovChain = serde_json::from_str(&json).unwrap();
        assert_eq!(back.states(), c.states());
    }

    #[test]
    fn invalid_json_chain_is_rejected() {
        let json = r#"{"states": [0.0, 1.0], "transition": [[0.5, 0.4], [0.3, 0.7]]}"#;
        assert!(serde_json::from_str::<FiniteMarkovChain>(json).is_err());
    }

    #[test]
    fn ar1_sigma_identity_holds() {
        let spec = Ar1Spec::from_sigma_eps(0.985, 0.99, 0.00141, 10).unwrap();
        assert!(
            (spec.sigma_beta * (1.0 - spec.rho * spec.rho).sqrt() - spec.sigma_eps).abs() < 1e-12
        );
        let json = r#"{"mu": 0.985, "rho": 0.99, "sigma_beta": 0.01, "n_states": 50}"#;
        let spec: Ar1Spec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.n_states, 50);
        assert!((spec.sigma_eps - 0.01 * (1.0f64 - 0.99 * 0.99).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ar1_rejects_bad_parameters() {
        assert!(Ar1Spec::from_sigma_beta(1.0, 1.0, 0.1, 5).is_err());
        assert!(Ar1Spec::from_sigma_beta(1.0, 0.5, 0.0, 5).is_err());
        assert!(Ar1Spec::from_sigma_beta(1.0, 0.5, 0.1, 1).is_err());
    }

    #[test]
    fn generated_chains_validate() {
        for &(rho, n) in &[(-0.8, 3), (0.0, 4), (0.5, 7), (0.99, 25)] {
            let spec = Ar1Spec::from_sigma_beta(0.9, rho, 0.05, n).unwrap();
            let c = rouwenhorst(&spec);
            assert!(validate_chain(c.states(), c.transition()).is_ok());
        }
    }

    #[test]
    fn rouwenhorst_moments_exact_across_shapes() {
        for &(rho, n) in &[(-0.5, 2), (0.3, 6), (0.95, 12), (0.99, 31)] {
            let spec = Ar1Spec::from_sigma_beta(1.5, rho, 0.2, n).unwrap();
            let c = rouwenhorst(&spec);
            let pi = stationary_distribution(&c).unwrap().probabilities;
            let mean: f64 = pi.iter().zip(c.states()).map(|(p, s)| p * s).sum();
            let var: f64 = pi
                .iter()
                .zip(c.states())
                .map(|(p, s)| p * (s - mean) * (s - mean))
                .sum();
            assert!((mean - 1.5).abs() < 1e-9, "mean {mean} at rho={rho}, n={n}");
            assert!((var - 0.04).abs() < 1e-9, "var {var} at rho={rho}, n={n}");
        }
    }
}
