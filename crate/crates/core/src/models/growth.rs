//! One-sector stochastic optimal growth with a state-dependent discount:
//! choose next-period capital on the same grid, consume the rest of output.

use serde::{Deserialize, Serialize};

use super::{certify, check_len, upper_feasible_index, ModelError, Production, Utility};
use crate::dp::{DynamicProgram, Payoff, SeparableTable};
use crate::markov::FiniteMarkovChain;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthParams {
    pub utility: Utility,
    pub production: Production,
    pub chain: FiniteMarkovChain,
    /// Discount weights per exogenous state.
    pub beta: Vec<f64>,
    pub k_grid: Vec<f64>,
}

/// Builds the separable program: action = next capital on `k_grid`,
/// feasible when it does not exceed current output, reward
/// `u(f(k, z) - k')`. Requires the `L_beta` certificate.
pub fn build_growth(params: &GrowthParams) -> Result<DynamicProgram, ModelError> {
    let n_z = params.chain.n_states();
    let n_x = params.k_grid.len();
    check_len(&params.beta, n_z, "beta")?;
    if n_x == 0 {
        return Err(ModelError::InvalidParams("empty capital grid".into()));
    }
    certify(&params.chain, &params.beta, "r(L_beta)")?;

    let mut feasible = Vec::with_capacity(n_x * n_z);
    for (i_x, &k) in params.k_grid.iter().enumerate() {
        for (i_z, &z) in params.chain.states().iter().enumerate() {
            let output = params.production.eval(k, z);
            if !output.is_finite() || output < 0.0 {
                return Err(ModelError::InvalidParams(format!(
                    "production f({k}, {z}) = {output} must be nonnegative"
                )));
            }
            match upper_feasible_index(&params.k_grid, output) {
                Some(hi) => feasible.push((0, hi)),
                None => {
                    return Err(ModelError::EmptyFeasible {
                        i_x,
                        i_z,
                        reason: format!("no grid point at or below output {output}"),
                    })
                }
            }
        }
    }

    let utility = params.utility;
    let production = params.production;
    let k_grid = params.k_grid.clone();
    let states = params.chain.states().to_vec();
    let table = SeparableTable::from_fn(n_x, n_z, n_x, |i_x, i_z, i_a| {
        let c = production.eval(k_grid[i_x], states[i_z]) - k_grid[i_a];
        utility.eval(c)
    });

    Ok(DynamicProgram::new(
        params.k_grid.clone(),
        params.k_grid.clone(),
        params.chain.clone(),
        feasible,
        params.beta.clone(),
        Payoff::Separable(table),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{vfi, ValueArray};
    use crate::markov::FiniteMarkovChain;
    use crate::util::linspace;

    fn single_state_chain(z: f64) -> FiniteMarkovChain {
        FiniteMarkovChain::new(vec![z], vec![vec![1.0]]).unwrap()
    }

    /// Closed-form value of the deterministic log/Cobb-Douglas model with
    /// constant discount: `v(k) = A + B ln k`.
    fn log_growth_closed_form(alpha: f64, beta: f64, k: f64) -> f64 {
        let ab = alpha * beta;
        let b = alpha / (1.0 - ab);
        let a = ((1.0 - ab).ln() + ab / (1.0 - ab) * ab.ln()) / (1.0 - beta);
        a + b * k.ln()
    }

    #[test]
    fn log_growth_matches_closed_form() {
        let alpha = 0.36;
        let beta = 0.95;
        let params = GrowthParams {
            utility: Utility::Log,
            production: Production::CobbDouglas { alpha, scale: 1.0 },
            chain: single_state_chain(1.0),
            beta: vec![beta],
            k_grid: linspace(0.05, 0.5, 500),
        };
        let dp = build_growth(&params).unwrap();
        let solution = vfi(&dp, &ValueArray::zeros(500, 1), 1e-10, 100_000).unwrap();
        let mut worst = 0.0f64;
        for (i, &k) in params.k_grid.iter().enumerate() {
            let gap = (solution.value.get(i, 0) - log_growth_closed_form(alpha, beta, k)).abs();
            worst = worst.max(gap);
        }
        assert!(worst <= 1e-3, "worst gap {worst}");
    }

    #[test]
    fn myopic_growth_consumes_everything() {
        let params = GrowthParams {
            utility: Utility::Log,
            production: Production::CobbDouglas {
                alpha: 0.5,
                scale: 1.0,
            },
            chain: single_state_chain(1.0),
            beta: vec![0.0],
            k_grid: linspace(0.1, 1.0, 20),
        };
        let dp = build_growth(&params).unwrap();
        let solution = vfi(&dp, &ValueArray::zeros(20, 1), 1e-12, 1000).unwrap();
        for i in 0..20 {
            assert_eq!(solution.policy.get(i, 0), 0);
        }
    }

    #[test]
    fn constant_capacity_linear_utility_consumes_everything() {
        let chain =
            FiniteMarkovChain::new(vec![0.9, 1.1], vec![vec![0.6, 0.4], vec![0.3, 0.7]]).unwrap();
        let params = GrowthParams {
            utility: Utility::Linear,
            production: Production::Constant { level: 2.0 },
            chain: chain.clone(),
            beta: vec![0.8, 0.9],
            k_grid: linspace(0.0, 2.0, 11),
        };
        let dp = build_growth(&params).unwrap();
        let solution = vfi(&dp, &ValueArray::zeros(11, 2), 1e-12, 10_000).unwrap();
        // value is flat in k, so saving buys nothing: consume all output
        for i_x in 0..11 {
            for i_z in 0..2 {
                assert_eq!(solution.policy.get(i_x, i_z), 0);
            }
        }
        // hand solve: v(z) = 2 + beta(z) E v; 2x2 linear system
        let b = [0.8, 0.9];
        // v = 2 + diag(b) Q v
        let q = chain.transition();
        let det =
            (1.0 - b[0] * q[0][0]) * (1.0 - b[1] * q[1][1]) - (b[0] * q[0][1]) * (b[1] * q[1][0]);
        let v0 = (2.0 * (1.0 - b[1] * q[1][1]) + 2.0 * b[0] * q[0][1]) / det;
        let v1 = (2.0 * (1.0 - b[0] * q[0][0]) + 2.0 * b[1] * q[1][0]) / det;
        assert!((solution.value.get(0, 0) - v0).abs() < 1e-8);
        assert!((solution.value.get(0, 1) - v1).abs() < 1e-8);
    }

    #[test]
    fn small_growth_instance_agrees_across_solvers() {
        let chain =
            FiniteMarkovChain::new(vec![0.9, 1.1], vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let params = GrowthParams {
            utility: Utility::Crra { gamma: 0.5 },
            production: Production::CobbDouglas {
                alpha: 0.4,
                scale: 1.0,
            },
            chain,
            beta: vec![0.85, 1.02],
            k_grid: linspace(0.05, 0.8, 4),
        };
        let dp = build_growth(&params).unwrap();
        let vf = vfi(&dp, &ValueArray::zeros(4, 2), 1e-12, 1_000_000).unwrap();
        let sigma0 = crate::dp::PolicyArray::from_fn(4, 2, |_, _| 0);
        let hp = crate::dp::howard(&dp, &sigma0, 1e-12, 1000).unwrap();
        let oracle = crate::dp::brute_force_oracle(&dp).unwrap();
        assert!(vf.value.sup_diff(&oracle.value) < 1e-8);
        assert!(hp.value.sup_diff(&oracle.value) < 1e-8);
    }

    #[test]
    fn builder_requires_certificate() {
        let params = GrowthParams {
            utility: Utility::Log,
            production: Production::CobbDouglas {
                alpha: 0.36,
                scale: 1.0,
            },
            chain: single_state_chain(1.0),
            beta: vec![1.0],
            k_grid: linspace(0.1, 1.0, 5),
        };
        assert!(matches!(
            build_growth(&params),
            Err(ModelError::RadiusNotCertified { .. })
        ));
    }

    #[test]
    fn grid_above_output_is_rejected() {
        let params = GrowthParams {
            utility: Utility::Log,
            production: Production::CobbDouglas {
                alpha: 0.36,
                scale: 1.0,
            },
            chain: single_state_chain(1.0),
            beta: vec![0.9],
            // smallest grid point exceeds f(k, z) for small k
            k_grid: linspace(5.0, 6.0, 4),
        };
        assert!(matches!(
            build_growth(&params),
            Err(ModelError::EmptyFeasible { .. })
        ));
    }
}
