//! Job search as an optimal stopping program. Accepting an offer at state
//! `z` pays the full discounted stream `w(z) K(z)` up front, with
//! `K = (I - L_beta)^{-1} 1`, so employment needs no extra dynamics: the
//! program has a searching row and an absorbing row worth zero.

use serde::{Deserialize, Serialize};

use super::{certify, check_len, check_nonnegative, ModelError};
use crate::discounting::{build_discount_operator, resolvent_sum};
use crate::dp::{vfi, DynamicProgram, Payoff, SeparableTable, Solution, ValueArray};
use crate::markov::FiniteMarkovChain;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchParams {
    pub chain: FiniteMarkovChain,
    /// Wage offer per exogenous state.
    pub wages: Vec<f64>,
    /// Unemployment compensation while waiting.
    pub compensation: f64,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchSolution {
    /// Value of searching, per exogenous state.
    pub value: Vec<f64>,
    /// Accept region: true where taking the offer is (weakly) optimal.
    pub accept: Vec<bool>,
    /// Expected discounted period count `K(z)`.
    pub k: Vec<f64>,
    /// The underlying two-row grid solution (row 0 searching, row 1 absorbed).
    pub solution: Solution,
}

/// Builds the two-row separable encoding of the stopping problem.
/// Action 0 rejects and keeps searching; action 1 accepts and moves to the
/// absorbing row.
pub fn build_search_program(
    params: &SearchParams,
    k: &[f64],
) -> Result<DynamicProgram, ModelError> {
    let n_z = params.chain.n_states();
    check_len(&params.wages, n_z, "wages")?;
    check_len(&params.beta, n_z, "beta")?;
    check_nonnegative(&params.wages, "wages")?;
    check_nonnegative(&params.beta, "beta")?;
    if !params.compensation.is_finite() || params.compensation < 0.0 {
        return Err(ModelError::InvalidParams(format!(
            "compensation must be nonnegative, got {}",
            params.compensation
        )));
    }

    let wages = params.wages.clone();
    let c = params.compensation;
    let k = k.to_vec();
    let table = SeparableTable::from_fn(2, n_z, 2, |i_x, i_z, i_a| {
        if i_x == 1 {
            0.0 // absorbed
        } else if i_a == 1 {
            wages[i_z] * k[i_z] // accept: whole stream up front
        } else {
            c // reject: compensation now, keep searching
        }
    });
    let mut feasible = Vec::with_capacity(2 * n_z);
    feasible.extend(std::iter::repeat_n((0, 1), n_z)); // searching row
    feasible.extend(std::iter::repeat_n((1, 1), n_z)); // absorbed row stays put
    Ok(DynamicProgram::new(
        vec![0.0, 1.0],
        vec![0.0, 1.0],
        params.chain.clone(),
        feasible,
        params.beta.clone(),
        Payoff::Separable(table),
    )?)
}

pub fn solve_search(
    params: &SearchParams,
    tol: f64,
    max_iter: u64,
) -> Result<SearchSolution, ModelError> {
    certify(&params.chain, &params.beta, "r(L_beta)")?;
    let op = build_discount_operator(&params.chain, &params.beta)?;
    let k = resolvent_sum(&op)?;
    let dp = build_search_program(params, &k)?;
    let n_z = params.chain.n_states();
    let solution = vfi(&dp, &ValueArray::zeros(2, n_z), tol, max_iter)?;

    let value: Vec<f64> = (0..n_z).map(|i_z| solution.value.get(0, i_z)).collect();
    // accept exactly when the offer weakly beats continued search; ties accept
    let accept: Vec<bool> = (0..n_z)
        .map(|i_z| {
            let continuation =
                params.compensation + params.beta[i_z] * params.chain.expect_next(i_z, &value);
            params.wages[i_z] * k[i_z] >= continuation
        })
        .collect();
    Ok(SearchSolution {
        value,
        accept,
        k,
        solution,
    })
}
