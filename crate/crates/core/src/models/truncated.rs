//! Unbounded-reward growth programs solved on a ladder of nested compact
//! truncations `[0, M_j]`. Each level must be invariant — feasible actions
//! from inside a level stay inside it — and the solutions restricted to the
//! base level are compared across levels until they stabilize.

use serde::{Deserialize, Serialize};

use super::growth::{build_growth, GrowthParams};
use super::ModelError;
use crate::dp::{vfi, Solution, ValueArray};
use crate::util::linspace;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationLadder {
    /// Bound of the base level `K_1`.
    pub m1: f64,
    /// Number of levels to solve.
    pub levels: usize,
    /// Multiplicative growth of the bound per level.
    pub growth_factor: f64,
    /// Grid points on the base level; spacing stays fixed as levels grow, so
    /// base-level grid points are shared by every level.
    pub points_level1: usize,
}

impl Default for TruncationLadder {
    fn default() -> Self {
        TruncationLadder {
            m1: 10.0,
            levels: 6,
            growth_factor: 2.0,
            points_level1: 51,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderLevel {
    pub bound: f64,
    pub n_points: usize,
    /// Sup-norm gap to the previous level, restricted to the base level.
    pub diff_on_base: Option<f64>,
    pub iterations: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationOutcome {
    pub levels: Vec<LadderLevel>,
    /// Final-level solution on the largest grid.
    #[serde(skip)]
    pub solution: Solution,
    pub stabilized: bool,
}

/// Solves the growth program restricted to each ladder level, checking
/// invariance (`max_k f(k, z) <= M_j`) before solving, and reports the
/// base-level differences between consecutive levels. Succeeds when the
/// final difference is below `stab_tol`.
pub fn solve_truncated(
    params: &GrowthParams,
    ladder: &TruncationLadder,
    vfi_tol: f64,
    stab_tol: f64,
    max_iter: u64,
) -> Result<TruncationOutcome, ModelError> {
    if ladder.levels == 0 || ladder.points_level1 < 2 || ladder.m1 <= 0.0 {
        return Err(ModelError::InvalidParams(
            "ladder needs a positive base bound, >= 2 points, >= 1 level".into(),
        ));
    }
    if ladder.growth_factor < 1.0 {
        return Err(ModelError::InvalidParams(
            "ladder bounds must be nondecreasing".into(),
        ));
    }
    let spacing = ladder.m1 / (ladder.points_level1 - 1) as f64;
    let base_points = ladder.points_level1;

    let mut levels = Vec::with_capacity(ladder.levels);
    let mut previous_base: Option<Vec<f64>> = None;
    let mut last_solution: Option<Solution> = None;
    let mut last_diff = f64::INFINITY;

    for level in 0..ladder.levels {
        let target = ladder.m1 * ladder.growth_factor.powi(level as i32);
        // snap the bound to the shared spacing so base points are a prefix
        let n_points = (target / spacing).round() as usize + 1;
        let bound = spacing * (n_points - 1) as f64;
        let grid = linspace(0.0, bound, n_points);

        // invariance: the feasible correspondence must map the level into itself
        for &k in &grid {
            for &z in params.chain.states() {
                let image = params.production.eval(k, z);
                if image > bound + 1e-9 * bound.max(1.0) {
                    return Err(ModelError::LadderNotInvariant {
                        level: level + 1,
                        k,
                        z,
                        image,
                        bound,
                    });
                }
            }
        }

        let mut level_params = params.clone();
        level_params.k_grid = grid;
        let dp = build_growth(&level_params)?;
        let solution = vfi(
            &dp,
            &ValueArray::zeros(n_points, params.chain.n_states()),
            vfi_tol,
            max_iter,
        )?;

        // restriction to the base level
        let value = &solution.value;
        let n_z = params.chain.n_states();
        let base: Vec<f64> = (0..base_points)
            .flat_map(|i_x| (0..n_z).map(move |i_z| value.get(i_x, i_z)))
            .collect();
        let diff = previous_base
            .as_ref()
            .map(|prev| crate::util::sup_diff(prev, &base));
        if let Some(d) = diff {
            last_diff = d;
        }
        levels.push(LadderLevel {
            bound,
            n_points,
            diff_on_base: diff,
            iterations: solution.iterations,
        });
        previous_base = Some(base);
        last_solution = Some(solution);
    }

    let stabilized = ladder.levels == 1 || last_diff <= stab_tol;
    let solution = last_solution.expect("at least one level solved");
    if !stabilized {
        return Err(ModelError::NotStabilized {
            levels: ladder.levels,
            tol: stab_tol,
            last_diff,
        });
    }
    Ok(TruncationOutcome {
        levels,
        solution,
        stabilized,
    })
}
