//! Model builders: each maps a parameterized economic problem onto a
//! [`DynamicProgram`](crate::dp::DynamicProgram) (or a specialized reduced
//! solver) after certifying the spectral condition its solvability rests on.
//! Builders refuse to construct programs whose certificate fails.

mod ez;
mod growth;
mod homogeneous;
mod search;
mod tax;
mod truncated;

pub use ez::{build_ez, ez_initial_value, solve_ez, EzParams, EzSolution};
pub use growth::{build_growth, GrowthParams};
pub use homogeneous::{
    grid_program_for_homogeneous, solve_homogeneous, HomogeneousParams, HomogeneousSolution,
};
pub use search::{build_search_program, solve_search, SearchParams, SearchSolution};
pub use tax::{build_tax, TaxParams};
pub use truncated::{solve_truncated, LadderLevel, TruncationLadder, TruncationOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discounting::{
    build_discount_operator, spectral_radius, DiscountError, SpectralOptions, SpectralReport,
};
use crate::dp::DpError;
use crate::markov::FiniteMarkovChain;

/// Floor inserted wherever a consumption-type argument can hit zero while
/// the utility is unbounded below there (log, CRRA with exponent above one).
pub const CONSUMPTION_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{operator} not certified below one: bounds [{lower}, {upper}]")]
    RadiusNotCertified {
        operator: String,
        lower: f64,
        upper: f64,
    },
    #[error("no feasible action at (x={i_x}, z={i_z}): {reason}")]
    EmptyFeasible {
        i_x: usize,
        i_z: usize,
        reason: String,
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("ladder level {level} not invariant: f({k}, {z}) = {image} exceeds bound {bound}")]
    LadderNotInvariant {
        level: usize,
        k: f64,
        z: f64,
        image: f64,
        bound: f64,
    },
    #[error("ladder differences still {last_diff:.3e} after {levels} levels (tol {tol:.1e})")]
    NotStabilized {
        levels: usize,
        tol: f64,
        last_diff: f64,
    },
    #[error("transformed value lost positivity at (x={i_x}, z={i_z}, a={i_a})")]
    NegativeContinuation { i_x: usize, i_z: usize, i_a: usize },
    #[error("iteration budget {max_iter} exhausted at residual {residual:.3e}")]
    IterationBudget { max_iter: u64, residual: f64 },
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Discount(#[from] DiscountError),
}

/// One-period utility over consumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Utility {
    Log,
    Crra { gamma: f64 },
    Linear,
}

impl Utility {
    pub fn eval(&self, c: f64) -> f64 {
        let c = c.max(0.0);
        match *self {
            Utility::Log => c.max(CONSUMPTION_FLOOR).ln(),
            Utility::Crra { gamma } => {
                if (gamma - 1.0).abs() < 1e-12 {
                    c.max(CONSUMPTION_FLOOR).ln()
                } else if gamma > 1.0 {
                    c.max(CONSUMPTION_FLOOR).powf(1.0 - gamma) / (1.0 - gamma)
                } else {
                    c.powf(1.0 - gamma) / (1.0 - gamma)
                }
            }
            Utility::Linear => c,
        }
    }
}

/// Production technology `f(k, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Production {
    /// `f(k, z) = scale * z * k^alpha`
    CobbDouglas { alpha: f64, scale: f64 },
    /// `f(k, z) = level` regardless of inputs
    Constant { level: f64 },
}

impl Production {
    pub fn eval(&self, k: f64, z: f64) -> f64 {
        match *self {
            Production::CobbDouglas { alpha, scale } => scale * z * k.max(0.0).powf(alpha),
            Production::Constant { level } => level,
        }
    }
}

/// Certifies `r(L) < 1` for the weighted operator, naming the operator in
/// the error so callers can tell which hypothesis failed.
pub(crate) fn certify(
    chain: &FiniteMarkovChain,
    weights: &[f64],
    operator: &str,
) -> Result<SpectralReport, ModelError> {
    let op = build_discount_operator(chain, weights)?;
    let report = match spectral_radius(&op, SpectralOptions::default()) {
        Ok(report) => report,
        Err(DiscountError::NotConverged { report }) => report,
        Err(e) => return Err(e.into()),
    };
    if report.certifies_contraction() {
        Ok(report)
    } else {
        Err(ModelError::RadiusNotCertified {
            operator: operator.to_string(),
            lower: report.lower,
            upper: report.upper,
        })
    }
}

pub(crate) fn check_positive(values: &[f64], name: &str) -> Result<(), ModelError> {
    if let Some(i) = values.iter().position(|v| !v.is_finite() || *v <= 0.0) {
        return Err(ModelError::InvalidParams(format!(
            "{name}[{i}] must be positive and finite, got {}",
            values[i]
        )));
    }
    Ok(())
}

pub(crate) fn check_nonnegative(values: &[f64], name: &str) -> Result<(), ModelError> {
    if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(ModelError::InvalidParams(format!(
            "{name}[{i}] must be nonnegative and finite, got {}",
            values[i]
        )));
    }
    Ok(())
}

pub(crate) fn check_len(values: &[f64], expected: usize, name: &str) -> Result<(), ModelError> {
    if values.len() != expected {
        return Err(ModelError::InvalidParams(format!(
            "{name} has {} entries, expected {expected}",
            values.len()
        )));
    }
    Ok(())
}

/// Largest grid index whose value does not exceed `bound` (with a hair of
/// slack for float noise), or `None` when even the first point exceeds it.
pub(crate) fn upper_feasible_index(grid: &[f64], bound: f64) -> Option<usize> {
    let limit = bound + 1e-12 * bound.abs().max(1.0);
    let mut hi = None;
    for (j, &g) in grid.iter().enumerate() {
        if g <= limit {
            hi = Some(j);
        } else {
            break;
        }
    }
    hi
}
