//! Seeded random small instances for oracle cross-checks. The generator
//! draws discount weights on `[0, beta_max]` — deliberately allowing values
//! above one — and accepts an instance only once its spectral radius is
//! certified under `radius_cap`, so every emitted program is solvable while
//! still exercising the eventually-contracting regime.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discounting::{
    build_discount_operator, spectral_radius, DiscountError, SpectralOptions,
};
use crate::dp::{DynamicProgram, Payoff, SeparableTable};
use crate::markov::FiniteMarkovChain;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub max_x: usize,
    pub max_z: usize,
    pub max_actions: usize,
    /// Upper end of the discount draw; above one on purpose.
    pub beta_max: f64,
    /// Instances are redrawn until the certified radius upper bound is below this.
    pub radius_cap: f64,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            max_x: 4,
            max_z: 3,
            max_actions: 3,
            beta_max: 1.3,
            radius_cap: 0.98,
        }
    }
}

#[derive(Debug)]
pub struct SampledInstance {
    pub dp: DynamicProgram,
    /// Discount draws rejected before one certified under the cap.
    pub rejected_draws: u32,
}

/// Strictly positive random stochastic row.
fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Draws a separable program with `n_x <= max_x`, `n_z <= max_z`,
/// `n_a <= min(max_actions, n_x)`, rewards in `[-1, 1]`, and a certified
/// discount operator. Fully determined by the seed.
pub fn sample_instance(cfg: &InstanceConfig, seed: u64) -> SampledInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_x = rng.random_range(1..=cfg.max_x);
    let n_z = rng.random_range(1..=cfg.max_z);
    let n_a = rng.random_range(1..=cfg.max_actions.min(n_x));

    let states: Vec<f64> = (0..n_z).map(|i| i as f64).collect();
    let rows: Vec<Vec<f64>> = (0..n_z).map(|_| random_row(&mut rng, n_z)).collect();
    let chain = FiniteMarkovChain::new(states, rows).expect("generated rows are stochastic");

    let mut rejected = 0u32;
    let weights = loop {
        let candidate: Vec<f64> = (0..n_z)
            .map(|_| cfg.beta_max * rng.random::<f64>())
            .collect();
        let op = build_discount_operator(&chain, &candidate).expect("nonnegative draws");
        let report = match spectral_radius(
            &op,
            SpectralOptions {
                tol: 1e-9,
                n_max: 1 << 16,
            },
        ) {
            Ok(report) => report,
            Err(DiscountError::NotConverged { report }) => report,
            Err(_) => unreachable!("spectral bracketing takes any nonnegative operator"),
        };
        if report.upper < cfg.radius_cap {
            break candidate;
        }
        rejected += 1;
    };

    let table = SeparableTable::from_fn(n_x, n_z, n_a, |_, _, _| 2.0 * rng.random::<f64>() - 1.0);
    let feasible: Vec<(usize, usize)> = (0..n_x * n_z)
        .map(|_| {
            let lo = rng.random_range(0..n_a);
            let hi = rng.random_range(lo..n_a);
            (lo, hi)
        })
        .collect();

    let x_grid: Vec<f64> = (0..n_x).map(|i| i as f64).collect();
    let a_grid: Vec<f64> = (0..n_a).map(|i| i as f64).collect();
    let dp = DynamicProgram::new(
        x_grid,
        a_grid,
        chain,
        feasible,
        weights,
        Payoff::Separable(table),
    )
    .expect("generated instance is well formed");
    SampledInstance {
        dp,
        rejected_draws: rejected,
    }
}

/// Rescales the instance's discount weights so the certified radius lands at
/// `target` (scaling covariance of the spectral radius). Used to force
/// divergent negative controls from an otherwise valid draw.
pub fn rescale_radius(dp: &DynamicProgram, target: f64) -> DynamicProgram {
    let op = dp
        .discount_operator()
        .expect("instance weights are nonnegative");
    let report = match spectral_radius(
        &op,
        SpectralOptions {
            tol: 1e-10,
            n_max: 1 << 22,
        },
    ) {
        Ok(report) => report,
        Err(DiscountError::NotConverged { report }) => report,
        Err(e) => panic!("{e}"),
    };
    assert!(report.radius > 0.0, "cannot rescale a nilpotent operator");
    let factor = target / report.radius;
    let weights: Vec<f64> = dp.discount_weights().iter().map(|w| w * factor).collect();
    let table = dp
        .separable_table()
        .expect("sampled instances are separable")
        .clone();
    let feasible: Vec<(usize, usize)> = (0..dp.n_x() * dp.n_z())
        .map(|c| dp.feasible_range(c / dp.n_z(), c % dp.n_z()))
        .collect();
    DynamicProgram::new(
        dp.x_grid().to_vec(),
        dp.a_grid().to_vec(),
        dp.chain().clone(),
        feasible,
        weights,
        Payoff::Separable(table),
    )
    .expect("rescaled instance is well formed")
}
