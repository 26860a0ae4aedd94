//! CRRA income fluctuation with linear budget `x' = R(z)(x - c)`. The value
//! function is homogeneous of degree `1 - gamma`, so `v(x, z) = x^(1-gamma)
//! w(z)` reduces the solve to a scalar profile over the exogenous state with
//! a savings rate `s in [0, 1]` as the action. The relevant certificate is
//! on the operator weighted by `beta R^(1-gamma)`.

use serde::{Deserialize, Serialize};

use super::{certify, check_len, check_positive, ModelError, Utility};
use crate::discounting::SpectralReport;
use crate::dp::{DynamicProgram, Payoff, SeparableTable};
use crate::markov::FiniteMarkovChain;
use crate::util::{linspace, sup_diff};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomogeneousParams {
    pub chain: FiniteMarkovChain,
    /// Curvature `gamma in (0, 1)`.
    pub gamma: f64,
    /// Gross asset return `R(z) > 0`.
    pub returns: Vec<f64>,
    pub beta: Vec<f64>,
    /// Savings-rate grid resolution on `[0, 1]`.
    pub savings_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomogeneousSolution {
    /// Scalar profile `w(z)`; the value function is `x^(1-gamma) w(z)`.
    pub profile: Vec<f64>,
    /// Optimal savings rate per state.
    pub savings: Vec<f64>,
    pub iterations: u64,
    pub residual: f64,
    /// Certificate on the growth-adjusted operator.
    pub certified: SpectralReport,
}

impl HomogeneousSolution {
    /// Value implied at an arbitrary wealth level.
    pub fn value_at(&self, x: f64, i_z: usize, gamma: f64) -> f64 {
        x.powf(1.0 - gamma) * self.profile[i_z]
    }
}

fn validate(params: &HomogeneousParams) -> Result<(), ModelError> {
    let n_z = params.chain.n_states();
    check_len(&params.returns, n_z, "returns")?;
    check_len(&params.beta, n_z, "beta")?;
    check_positive(&params.returns, "returns")?;
    if !(params.gamma > 0.0 && params.gamma < 1.0) {
        return Err(ModelError::InvalidParams(format!(
            "gamma must lie in (0, 1), got {}",
            params.gamma
        )));
    }
    if params.savings_points < 2 {
        return Err(ModelError::InvalidParams(
            "need at least 2 savings grid points".into(),
        ));
    }
    Ok(())
}

/// Iterates the scalar-profile operator
/// `(Tw)(z) = max_s (1-s)^(1-gamma)/(1-gamma) + beta(z) R(z)^(1-gamma)
/// s^(1-gamma) E_z[w]` on the savings grid.
pub fn solve_homogeneous(
    params: &HomogeneousParams,
    tol: f64,
    max_iter: u64,
) -> Result<HomogeneousSolution, ModelError> {
    validate(params)?;
    let n_z = params.chain.n_states();
    let exponent = 1.0 - params.gamma;
    let growth_weights: Vec<f64> = params
        .beta
        .iter()
        .zip(params.returns.iter())
        .map(|(b, r)| b * r.powf(exponent))
        .collect();
    let certified = certify(&params.chain, &growth_weights, "r(L_R)")?;

    let s_grid = linspace(0.0, 1.0, params.savings_points);
    let consume_pow: Vec<f64> = s_grid
        .iter()
        .map(|s| (1.0 - s).powf(exponent) / exponent)
        .collect();
    let save_pow: Vec<f64> = s_grid.iter().map(|s| s.powf(exponent)).collect();

    let mut w = vec![1.0 / exponent; n_z];
    let mut savings_idx = vec![0usize; n_z];
    let mut iterations = 0;
    let mut residual;
    loop {
        let mut next = vec![0.0; n_z];
        for i_z in 0..n_z {
            let expect = params.chain.expect_next(i_z, &w);
            let coef = growth_weights[i_z] * expect;
            let mut best = f64::NEG_INFINITY;
            let mut best_s = 0usize;
            for (j, (&c_pow, &s_pow)) in consume_pow.iter().zip(save_pow.iter()).enumerate() {
                let candidate = c_pow + coef * s_pow;
                if candidate > best {
                    best = candidate;
                    best_s = j;
                }
            }
            next[i_z] = best;
            savings_idx[i_z] = best_s;
        }
        iterations += 1;
        residual = sup_diff(&next, &w);
        w = next;
        if residual < tol {
            break;
        }
        if iterations >= max_iter {
            return Err(ModelError::IterationBudget { max_iter, residual });
        }
    }
    Ok(HomogeneousSolution {
        profile: w,
        savings: savings_idx.iter().map(|&j| s_grid[j]).collect(),
        iterations,
        residual,
        certified,
    })
}

/// Full two-dimensional grid program for cross-validation: wealth grid,
/// action = next wealth with `a <= R(z) x`, reward `u(x - a / R)`.
pub fn grid_program_for_homogeneous(
    params: &HomogeneousParams,
    x_grid: &[f64],
) -> Result<DynamicProgram, ModelError> {
    validate(params)?;
    certify(&params.chain, &params.beta, "r(L_beta)")?;
    let n_x = x_grid.len();
    let n_z = params.chain.n_states();
    let utility = Utility::Crra {
        gamma: params.gamma,
    };

    let mut feasible = Vec::with_capacity(n_x * n_z);
    for (i_x, &x) in x_grid.iter().enumerate() {
        for i_z in 0..n_z {
            let bound = params.returns[i_z] * x;
            match super::upper_feasible_index(x_grid, bound) {
                Some(hi) => feasible.push((0, hi)),
                None => {
                    return Err(ModelError::EmptyFeasible {
                        i_x,
                        i_z,
                        reason: format!("grid starts above R*x = {bound}"),
                    })
                }
            }
        }
    }

    let returns = params.returns.clone();
    let grid = x_grid.to_vec();
    let table = SeparableTable::from_fn(n_x, n_z, n_x, |i_x, i_z, i_a| {
        utility.eval(grid[i_x] - grid[i_a] / returns[i_z])
    });
    Ok(DynamicProgram::new(
        x_grid.to_vec(),
        x_grid.to_vec(),
        params.chain.clone(),
        feasible,
        params.beta.clone(),
        Payoff::Separable(table),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state_chain() -> FiniteMarkovChain {
        FiniteMarkovChain::new(vec![1.0], vec![vec![1.0]]).unwrap()
    }

    #[test]
    fn scalar_fixed_point_matches_golden_section_oracle() {
        // beta R^(1-gamma) = 0.5 with gamma = 0.5:
        // w = max_s 2 sqrt(1-s) + 0.5 sqrt(s) w
        let params = HomogeneousParams {
            chain: single_state_chain(),
            gamma: 0.5,
            returns: vec![1.0],
            beta: vec![0.5],
            savings_points: 20_001,
        };
        let sol = solve_homogeneous(&params, 1e-13, 1_000_000).unwrap();

        // independent oracle: continuous inner maximization by golden section
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let golden_max = |w: f64| -> f64 {
            let f = |s: f64| 2.0 * (1.0 - s).sqrt() + 0.5 * s.sqrt() * w;
            let (mut a, mut b) = (0.0, 1.0);
            for _ in 0..120 {
                let c = b - phi * (b - a);
                let d = a + phi * (b - a);
                if f(c) > f(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            f(0.5 * (a + b))
        };
        let mut w = 2.0;
        for _ in 0..400 {
            w = golden_max(w);
        }
        assert!(
            (sol.profile[0] - w).abs() < 1e-8,
            "{} vs oracle {}",
            sol.profile[0],
            w
        );
    }

    #[test]
    fn zero_discount_consumes_everything() {
        let params = HomogeneousParams {
            chain: single_state_chain(),
            gamma: 0.5,
            returns: vec![1.3],
            beta: vec![0.0],
            savings_points: 101,
        };
        let sol = solve_homogeneous(&params, 1e-12, 1000).unwrap();
        assert_eq!(sol.savings[0], 0.0);
        assert!((sol.profile[0] - 2.0).abs() < 1e-12); // 1/(1-gamma)
    }

    #[test]
    fn implied_value_is_exactly_homogeneous() {
        let chain =
            FiniteMarkovChain::new(vec![0.9, 1.1], vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let params = HomogeneousParams {
            chain,
            gamma: 0.4,
            returns: vec![1.0, 1.05],
            beta: vec![0.5, 0.55],
            savings_points: 501,
        };
        let sol = solve_homogeneous(&params, 1e-12, 100_000).unwrap();
        for i_z in 0..2 {
            for &x in &[0.25, 0.5, 1.0, 2.0] {
                let lhs = sol.value_at(2.0 * x, i_z, params.gamma);
                let rhs = 2.0f64.powf(1.0 - params.gamma) * sol.value_at(x, i_z, params.gamma);
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn refuses_unbounded_growth_certificate() {
        let params = HomogeneousParams {
            chain: single_state_chain(),
            gamma: 0.5,
            returns: vec![2.0],
            beta: vec![0.8], // beta R^0.5 = 1.13 > 1
            savings_points: 11,
        };
        assert!(matches!(
            solve_homogeneous(&params, 1e-10, 1000),
            Err(ModelError::RadiusNotCertified { operator, .. }) if operator == "r(L_R)"
        ));
    }

    #[test]
    fn scalar_profile_agrees_with_grid_solver() {
        let params = HomogeneousParams {
            chain: single_state_chain(),
            gamma: 0.5,
            returns: vec![1.0],
            beta: vec![0.5],
            savings_points: 4001,
        };
        let sol = solve_homogeneous(&params, 1e-12, 100_000).unwrap();
        let x_grid = linspace(0.0, 1.0, 501);
        let dp = grid_program_for_homogeneous(&params, &x_grid).unwrap();
        let grid_solution =
            crate::dp::vfi(&dp, &crate::dp::ValueArray::zeros(501, 1), 1e-11, 1_000_000).unwrap();
        // compare away from the origin where CRRA curvature is extreme
        let step = x_grid[1] - x_grid[0];
        for (i, &x) in x_grid.iter().enumerate() {
            if x < 0.2 {
                continue;
            }
            let implied = sol.value_at(x, 0, params.gamma);
            let grid_v = grid_solution.value.get(i, 0);
            // two grid steps of consumption at the local marginal utility
            let c_floor = 0.25 * x;
            let tol = 2.0 * step / c_floor.sqrt();
            assert!(
                (implied - grid_v).abs() <= tol,
                "x={x}: implied {implied}, grid {grid_v}, tol {tol}"
            );
        }
    }
}
