//! Recursive (Epstein-Zin) preferences over a single risky asset. The solve
//! runs entirely in the transformed value `v^(1-gamma)`, whose aggregator
//!
//! `H(x, z, a, v) = { F(x,z,a)^(1-rho) + beta(z) [E_z v(a, .)]^(1/theta) }^theta`
//!
//! with `theta = (1-gamma)/(1-rho)` is monotone and Lipschitz with weights
//! `beta^theta`; the certificate is therefore taken on that operator.

use serde::{Deserialize, Serialize};

use super::{
    certify, check_len, check_positive, upper_feasible_index, ModelError, CONSUMPTION_FLOOR,
};
use crate::dp::{vfi, Aggregator, DpError, DynamicProgram, Payoff, Solution, ValueArray};
use crate::markov::FiniteMarkovChain;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EzParams {
    pub chain: FiniteMarkovChain,
    /// Inverse elasticity parameter `rho < 1`.
    pub rho_pref: f64,
    /// Risk-aversion parameter with `rho <= gamma < 1`.
    pub gamma: f64,
    pub dividend: Vec<f64>,
    pub price: Vec<f64>,
    pub beta: Vec<f64>,
    /// Asset-holding grid inside `[0, 1]` (unit supply).
    pub x_grid: Vec<f64>,
}

impl EzParams {
    pub fn theta(&self) -> f64 {
        (1.0 - self.gamma) / (1.0 - self.rho_pref)
    }

    /// Consumption from holding `x`, buying `a`: `d x + p (x - a)`.
    pub fn consumption(&self, x: f64, i_z: usize, a: f64) -> f64 {
        self.dividend[i_z] * x + self.price[i_z] * (x - a)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let n_z = self.chain.n_states();
        check_len(&self.dividend, n_z, "dividend")?;
        check_len(&self.price, n_z, "price")?;
        check_len(&self.beta, n_z, "beta")?;
        check_positive(&self.dividend, "dividend")?;
        check_positive(&self.price, "price")?;
        if !(self.rho_pref < 1.0 && self.gamma < 1.0 && self.rho_pref <= self.gamma) {
            return Err(ModelError::InvalidParams(format!(
                "need rho <= gamma < 1, got rho={}, gamma={}",
                self.rho_pref, self.gamma
            )));
        }
        let theta = self.theta();
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(ModelError::InvalidParams(format!(
                "theta = {theta} out of (0, 1]"
            )));
        }
        if self.x_grid.is_empty()
            || self.x_grid[0] < 0.0
            || *self.x_grid.last().unwrap() > 1.0 + 1e-12
        {
            return Err(ModelError::InvalidParams(
                "asset grid must lie inside [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

struct EzAggregator {
    chain: FiniteMarkovChain,
    beta: Vec<f64>,
    theta: f64,
    /// `(floor + F(x, z, a))^(1-rho)` precomputed per (x, z, a).
    reward_pow: Vec<f64>,
    n_z: usize,
    n_a: usize,
}

impl Aggregator for EzAggregator {
    fn evaluate(&self, i_x: usize, i_z: usize, i_a: usize, v: &ValueArray) -> f64 {
        let expect = self.chain.expect_next(i_z, v.x_row(i_a));
        if expect < 0.0 {
            return f64::NAN; // transformed values must stay nonnegative
        }
        let inner = self.reward_pow[(i_x * self.n_z + i_z) * self.n_a + i_a]
            + self.beta[i_z] * expect.powf(1.0 / self.theta);
        inner.powf(self.theta)
    }
}

/// Builds the non-separable transformed program. The certificate is taken
/// on the operator with weights `beta^theta`, which also serve as the
/// program's declared discount weights.
pub fn build_ez(params: &EzParams) -> Result<DynamicProgram, ModelError> {
    params.validate()?;
    let theta = params.theta();
    let theta_weights: Vec<f64> = params.beta.iter().map(|b| b.powf(theta)).collect();
    certify(&params.chain, &theta_weights, "r(L_theta)")?;

    let n_x = params.x_grid.len();
    let n_z = params.chain.n_states();
    let mut feasible = Vec::with_capacity(n_x * n_z);
    for (i_x, &x) in params.x_grid.iter().enumerate() {
        for i_z in 0..n_z {
            let cap = (x * (params.dividend[i_z] + params.price[i_z]) / params.price[i_z]).min(1.0);
            match upper_feasible_index(&params.x_grid, cap) {
                Some(hi) => feasible.push((0, hi)),
                None => {
                    return Err(ModelError::EmptyFeasible {
                        i_x,
                        i_z,
                        reason: format!("no grid point within the holding cap {cap}"),
                    })
                }
            }
        }
    }

    let one_minus_rho = 1.0 - params.rho_pref;
    let mut reward_pow = Vec::with_capacity(n_x * n_z * n_x);
    for &x in &params.x_grid {
        for i_z in 0..n_z {
            for &a in &params.x_grid {
                let c = params.consumption(x, i_z, a).max(0.0);
                reward_pow.push((c + CONSUMPTION_FLOOR).powf(one_minus_rho));
            }
        }
    }
    let aggregator = EzAggregator {
        chain: params.chain.clone(),
        beta: params.beta.clone(),
        theta,
        reward_pow,
        n_z,
        n_a: n_x,
    };

    Ok(DynamicProgram::new(
        params.x_grid.clone(),
        params.x_grid.clone(),
        params.chain.clone(),
        feasible,
        theta_weights,
        Payoff::General(Box::new(aggregator)),
    )?
    .with_value_sample_range(0.1, 5.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct EzSolution {
    /// Fixed point in the transformed space `v^(1-gamma)`.
    pub transformed: Solution,
    /// Untransformed lifetime value `v = transformed^(1/(1-gamma))`.
    pub value: Vec<Vec<f64>>,
}

/// Strictly positive starting point: consume-at-the-bottom payoff raised to
/// `1 - gamma`, which every iterate then dominates.
pub fn ez_initial_value(params: &EzParams, dp: &DynamicProgram) -> ValueArray {
    let one_minus_gamma = 1.0 - params.gamma;
    ValueArray::from_fn(dp.n_x(), dp.n_z(), |i_x, i_z| {
        let (lo, _) = dp.feasible_range(i_x, i_z);
        let c = params
            .consumption(params.x_grid[i_x], i_z, params.x_grid[lo])
            .max(0.0);
        (CONSUMPTION_FLOOR + c).powf(one_minus_gamma)
    })
}

pub fn solve_ez(params: &EzParams, tol: f64, max_iter: u64) -> Result<EzSolution, ModelError> {
    let dp = build_ez(params)?;
    let v0 = ez_initial_value(params, &dp);
    let transformed = vfi(&dp, &v0, tol, max_iter).map_err(|e| match e {
        DpError::NonFiniteAggregator { i_x, i_z, i_a } => {
            ModelError::NegativeContinuation { i_x, i_z, i_a }
        }
        other => ModelError::Dp(other),
    })?;
    let exponent = 1.0 / (1.0 - params.gamma);
    let value = transformed
        .value
        .to_nested()
        .into_iter()
        .map(|row| row.into_iter().map(|v| v.powf(exponent)).collect())
        .collect();
    Ok(EzSolution { transformed, value })
}
