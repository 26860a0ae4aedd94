//! Household consumption-savings with state-dependent interest, price level,
//! and lump-sum transfer. Action = next-period nominal assets on the grid;
//! consumption is what the budget leaves over.

use serde::{Deserialize, Serialize};

use super::{certify, check_len, check_positive, upper_feasible_index, ModelError, Utility};
use crate::dp::{DynamicProgram, Payoff, SeparableTable};
use crate::markov::FiniteMarkovChain;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaxParams {
    pub chain: FiniteMarkovChain,
    /// Gross interest `R(z) > 0`.
    pub gross_return: Vec<f64>,
    /// Price level `P(z) > 0`.
    pub price: Vec<f64>,
    /// Lump-sum transfer `T(z) >= 0`.
    pub transfer: Vec<f64>,
    pub beta: Vec<f64>,
    pub b_grid: Vec<f64>,
    pub utility: Utility,
}

/// Consumption implied by assets `x`, next assets `a`, and state `z`:
/// `x / P + T - a / (R P)`.
pub fn tax_consumption(params: &TaxParams, x: f64, i_z: usize, a: f64) -> f64 {
    let r = params.gross_return[i_z];
    let p = params.price[i_z];
    x / p + params.transfer[i_z] - a / (r * p)
}

/// Builds the separable program with feasible set `0 <= a <= x R + T R P`
/// (exactly the nonnegative-consumption range). Requires `r(L_beta) < 1`.
pub fn build_tax(params: &TaxParams) -> Result<DynamicProgram, ModelError> {
    let n_z = params.chain.n_states();
    let n_x = params.b_grid.len();
    check_len(&params.gross_return, n_z, "gross_return")?;
    check_len(&params.price, n_z, "price")?;
    check_len(&params.transfer, n_z, "transfer")?;
    check_len(&params.beta, n_z, "beta")?;
    check_positive(&params.gross_return, "gross_return")?;
    check_positive(&params.price, "price")?;
    if let Some(i) = params.transfer.iter().position(|t| *t < 0.0) {
        return Err(ModelError::InvalidParams(format!(
            "transfer[{i}] must be nonnegative"
        )));
    }
    if n_x == 0 {
        return Err(ModelError::InvalidParams("empty asset grid".into()));
    }
    certify(&params.chain, &params.beta, "r(L_beta)")?;

    let mut feasible = Vec::with_capacity(n_x * n_z);
    for (i_x, &x) in params.b_grid.iter().enumerate() {
        for i_z in 0..n_z {
            let r = params.gross_return[i_z];
            let p = params.price[i_z];
            let bound = x * r + params.transfer[i_z] * r * p;
            match upper_feasible_index(&params.b_grid, bound) {
                Some(hi) => feasible.push((0, hi)),
                None => {
                    return Err(ModelError::EmptyFeasible {
                        i_x,
                        i_z,
                        reason: format!("grid starts above the budget bound {bound}"),
                    })
                }
            }
        }
    }

    let cloned = params.clone();
    let b_grid = params.b_grid.clone();
    let table = SeparableTable::from_fn(n_x, n_z, n_x, |i_x, i_z, i_a| {
        let c = tax_consumption(&cloned, b_grid[i_x], i_z, b_grid[i_a]);
        cloned.utility.eval(c)
    });

    Ok(DynamicProgram::new(
        params.b_grid.clone(),
        params.b_grid.clone(),
        params.chain.clone(),
        feasible,
        params.beta.clone(),
        Payoff::Separable(table),
    )?)
}
