//! Generic dynamic programs on finite grids with a pluggable continuation
//! aggregator. Separable programs (`H = u + beta(z) * E[v]`) get a fast
//! backup path and exact policy evaluation by linear solve; non-separable
//! aggregators (recursive preferences) go through the same interfaces with
//! iterative evaluation.
//!
//! Solvers run only under a spectral certificate `r(L) < 1` on the discount
//! operator built from the program's weights. Discount factors above one at
//! individual states are fine as long as the long-run certificate holds; the
//! Bellman operator is then contracting only in `n`-step blocks, and the
//! reported error bounds use that `n`-step modulus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::discounting::{
    build_discount_operator, iterate_norm, spectral_radius, DiscountError, DiscountOperator,
    SpectralOptions, SpectralReport,
};
use crate::linalg::{solve_refined, SquareMatrix};
use crate::markov::FiniteMarkovChain;

#[derive(Debug, Error)]
pub enum DpError {
    #[error("aggregator returned a non-finite value at (x={i_x}, z={i_z}, a={i_a})")]
    NonFiniteAggregator { i_x: usize, i_z: usize, i_a: usize },
    #[error("policy action {action} infeasible at (x={i_x}, z={i_z})")]
    InfeasiblePolicy {
        i_x: usize,
        i_z: usize,
        action: usize,
    },
    #[error("empty feasible range at (x={i_x}, z={i_z})")]
    EmptyFeasible { i_x: usize, i_z: usize },
    #[error("feasible range or transition target out of bounds at (x={i_x}, z={i_z})")]
    RangeOutOfBounds { i_x: usize, i_z: usize },
    #[error("spectral radius not certified below one: bounds [{lower}, {upper}]")]
    RadiusNotCertified { lower: f64, upper: f64 },
    #[error("iteration budget {max_iter} exhausted; best residual {residual:.3e}")]
    MaxIterExceeded {
        max_iter: u64,
        residual: f64,
        best: Box<Solution>,
    },
    #[error("operation requires a separable program")]
    NotSeparable,
    #[error("singular linear system in policy evaluation")]
    SingularSystem,
    #[error("policy space too large to enumerate: {0} policies")]
    TooManyPolicies(f64),
    #[error("no enumerated policy attains the pointwise maximum everywhere")]
    OracleMaxNotAttained,
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Discount(#[from] DiscountError),
}

/// Value candidates on the product grid, stored row-major with the
/// endogenous index major.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueArray {
    n_x: usize,
    n_z: usize,
    data: Vec<f64>,
}

impl ValueArray {
    pub fn zeros(n_x: usize, n_z: usize) -> Self {
        ValueArray {
            n_x,
            n_z,
            data: vec![0.0; n_x * n_z],
        }
    }

    pub fn constant(n_x: usize, n_z: usize, value: f64) -> Self {
        ValueArray {
            n_x,
            n_z,
            data: vec![value; n_x * n_z],
        }
    }

    pub fn from_fn(n_x: usize, n_z: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_x * n_z);
        for i_x in 0..n_x {
            for i_z in 0..n_z {
                data.push(f(i_x, i_z));
            }
        }
        ValueArray { n_x, n_z, data }
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    #[inline]
    pub fn get(&self, i_x: usize, i_z: usize) -> f64 {
        self.data[i_x * self.n_z + i_z]
    }

    #[inline]
    pub fn set(&mut self, i_x: usize, i_z: usize, v: f64) {
        self.data[i_x * self.n_z + i_z] = v;
    }

    /// Row of continuation values over the exogenous state.
    #[inline]
    pub fn x_row(&self, i_x: usize) -> &[f64] {
        &self.data[i_x * self.n_z..(i_x + 1) * self.n_z]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sup_diff(&self, other: &ValueArray) -> f64 {
        crate::util::sup_diff(&self.data, &other.data)
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.n_x).map(|i| self.x_row(i).to_vec()).collect()
    }

    /// Largest gap `sup_x |v(x, z') - w(x, z')|` per exogenous state.
    pub fn column_gap(&self, other: &ValueArray) -> Vec<f64> {
        let mut gap = vec![0.0; self.n_z];
        for i_x in 0..self.n_x {
            for (g, (a, b)) in gap
                .iter_mut()
                .zip(self.x_row(i_x).iter().zip(other.x_row(i_x).iter()))
            {
                let d = (a - b).abs();
                if d > *g {
                    *g = d;
                }
            }
        }
        gap
    }
}

/// Action index per state cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyArray {
    n_x: usize,
    n_z: usize,
    actions: Vec<usize>,
}

impl PolicyArray {
    pub fn from_fn(n_x: usize, n_z: usize, mut f: impl FnMut(usize, usize) -> usize) -> Self {
        let mut actions = Vec::with_capacity(n_x * n_z);
        for i_x in 0..n_x {
            for i_z in 0..n_z {
                actions.push(f(i_x, i_z));
            }
        }
        PolicyArray { n_x, n_z, actions }
    }

    #[inline]
    pub fn get(&self, i_x: usize, i_z: usize) -> usize {
        self.actions[i_x * self.n_z + i_z]
    }

    pub fn set(&mut self, i_x: usize, i_z: usize, a: usize) {
        self.actions[i_x * self.n_z + i_z] = a;
    }

    pub fn to_nested(&self) -> Vec<Vec<usize>> {
        (0..self.n_x)
            .map(|i| self.actions[i * self.n_z..(i + 1) * self.n_z].to_vec())
            .collect()
    }
}

/// Continuation aggregator `H(x, z, a, v)`; implementations read whatever
/// slice of `v` their transition structure calls for.
pub trait Aggregator: Send + Sync {
    fn evaluate(&self, i_x: usize, i_z: usize, i_a: usize, v: &ValueArray) -> f64;
}

/// Where a separable program lands after taking action `a` in cell `(x, z)`.
#[derive(Debug, Clone)]
pub enum NextState {
    /// Actions are identified with next-period endogenous grid indices.
    Action,
    /// Explicit `(x, z, a) -> x'` table.
    Table(Vec<usize>),
}

/// Reward table plus transition rule for `H = u + beta(z) E[v(x', z')]`.
#[derive(Debug, Clone)]
pub struct SeparableTable {
    n_z: usize,
    n_a: usize,
    u: Vec<f64>,
    next: NextState,
}

impl SeparableTable {
    pub fn new(
        n_x: usize,
        n_z: usize,
        n_a: usize,
        u: Vec<f64>,
        next: NextState,
    ) -> Result<Self, DpError> {
        if u.len() != n_x * n_z * n_a {
            return Err(DpError::Shape(format!(
                "reward table has {} entries, expected {}",
                u.len(),
                n_x * n_z * n_a
            )));
        }
        if let NextState::Table(table) = &next {
            if table.len() != n_x * n_z * n_a {
                return Err(DpError::Shape("next-state table size mismatch".into()));
            }
        }
        Ok(SeparableTable { n_z, n_a, u, next })
    }

    pub fn from_fn(
        n_x: usize,
        n_z: usize,
        n_a: usize,
        mut reward: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut u = Vec::with_capacity(n_x * n_z * n_a);
        for i_x in 0..n_x {
            for i_z in 0..n_z {
                for i_a in 0..n_a {
                    u.push(reward(i_x, i_z, i_a));
                }
            }
        }
        SeparableTable {
            n_z,
            n_a,
            u,
            next: NextState::Action,
        }
    }

    #[inline]
    pub fn reward(&self, i_x: usize, i_z: usize, i_a: usize) -> f64 {
        self.u[(i_x * self.n_z + i_z) * self.n_a + i_a]
    }

    #[inline]
    pub fn next_x(&self, i_x: usize, i_z: usize, i_a: usize) -> usize {
        match &self.next {
            NextState::Action => i_a,
            NextState::Table(t) => t[(i_x * self.n_z + i_z) * self.n_a + i_a],
        }
    }
}

pub enum Payoff {
    Separable(SeparableTable),
    General(Box<dyn Aggregator>),
}

impl std::fmt::Debug for Payoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Payoff::Separable(_) => f.write_str("Payoff::Separable"),
            Payoff::General(_) => f.write_str("Payoff::General"),
        }
    }
}

/// A dynamic program on finite grids: endogenous grid, exogenous chain,
/// action grid, contiguous feasible ranges, discount weights for the
/// spectral certificate, and the payoff structure.
#[derive(Debug)]
pub struct DynamicProgram {
    x_grid: Vec<f64>,
    a_grid: Vec<f64>,
    chain: FiniteMarkovChain,
    /// Inclusive action index range per `(x, z)` cell.
    feasible: Vec<(usize, usize)>,
    discount_weights: Vec<f64>,
    payoff: Payoff,
    /// Range the Blackwell checker samples candidate values from; recursive
    /// aggregators restrict it to their positive domain.
    value_sample_range: (f64, f64),
}

impl DynamicProgram {
    pub fn new(
        x_grid: Vec<f64>,
        a_grid: Vec<f64>,
        chain: FiniteMarkovChain,
        feasible: Vec<(usize, usize)>,
        discount_weights: Vec<f64>,
        payoff: Payoff,
    ) -> Result<Self, DpError> {
        let n_x = x_grid.len();
        let n_z = chain.n_states();
        let n_a = a_grid.len();
        if feasible.len() != n_x * n_z {
            return Err(DpError::Shape(format!(
                "feasible map has {} cells, expected {}",
                feasible.len(),
                n_x * n_z
            )));
        }
        if discount_weights.len() != n_z {
            return Err(DpError::Shape(format!(
                "{} discount weights for {} exogenous states",
                discount_weights.len(),
                n_z
            )));
        }
        if let Some(i) = discount_weights.iter().position(|w| *w < 0.0) {
            return Err(DpError::Shape(format!("negative discount weight at {i}")));
        }
        for i_x in 0..n_x {
            for i_z in 0..n_z {
                let (lo, hi) = feasible[i_x * n_z + i_z];
                if lo > hi {
                    return Err(DpError::EmptyFeasible { i_x, i_z });
                }
                if hi >= n_a {
                    return Err(DpError::RangeOutOfBounds { i_x, i_z });
                }
                if let Payoff::Separable(table) = &payoff {
                    for i_a in lo..=hi {
                        if table.next_x(i_x, i_z, i_a) >= n_x {
                            return Err(DpError::RangeOutOfBounds { i_x, i_z });
                        }
                    }
                }
            }
        }
        Ok(DynamicProgram {
            x_grid,
            a_grid,
            chain,
            feasible,
            discount_weights,
            payoff,
            value_sample_range: (-5.0, 5.0),
        })
    }

    pub fn with_value_sample_range(mut self, lo: f64, hi: f64) -> Self {
        self.value_sample_range = (lo, hi);
        self
    }

    pub fn n_x(&self) -> usize {
        self.x_grid.len()
    }

    pub fn n_z(&self) -> usize {
        self.chain.n_states()
    }

    pub fn n_a(&self) -> usize {
        self.a_grid.len()
    }

    pub fn x_grid(&self) -> &[f64] {
        &self.x_grid
    }

    pub fn a_grid(&self) -> &[f64] {
        &self.a_grid
    }

    pub fn chain(&self) -> &FiniteMarkovChain {
        &self.chain
    }

    pub fn discount_weights(&self) -> &[f64] {
        &self.discount_weights
    }

    #[inline]
    pub fn feasible_range(&self, i_x: usize, i_z: usize) -> (usize, usize) {
        self.feasible[i_x * self.n_z() + i_z]
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.payoff, Payoff::Separable(_))
    }

    pub fn separable_table(&self) -> Option<&SeparableTable> {
        match &self.payoff {
            Payoff::Separable(t) => Some(t),
            Payoff::General(_) => None,
        }
    }

    /// Evaluates the aggregator at one feasible triple.
    pub fn aggregate(&self, i_x: usize, i_z: usize, i_a: usize, v: &ValueArray) -> f64 {
        match &self.payoff {
            Payoff::Separable(table) => {
                let x_next = table.next_x(i_x, i_z, i_a);
                let expect = self.chain.expect_next(i_z, v.x_row(x_next));
                table.reward(i_x, i_z, i_a) + self.discount_weights[i_z] * expect
            }
            Payoff::General(agg) => agg.evaluate(i_x, i_z, i_a, v),
        }
    }

    pub fn discount_operator(&self) -> Result<DiscountOperator, DpError> {
        Ok(build_discount_operator(
            &self.chain,
            &self.discount_weights,
        )?)
    }

    /// Spectral certificate for the program's discount operator. Solvers
    /// require `upper < 1`; an unconverged bracket still certifies when its
    /// upper bound is below one.
    pub fn certificate(&self, opts: SpectralOptions) -> Result<SpectralReport, DpError> {
        let op = self.discount_operator()?;
        let report = match spectral_radius(&op, opts) {
            Ok(report) => report,
            Err(DiscountError::NotConverged { report }) => report,
            Err(e) => return Err(e.into()),
        };
        if report.certifies_contraction() {
            Ok(report)
        } else {
            Err(DpError::RadiusNotCertified {
                lower: report.lower,
                upper: report.upper,
            })
        }
    }
}

/// Solved program: value, greedy policy, residual diagnostics, and the
/// spectral certificate that authorized the solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub value: ValueArray,
    pub policy: PolicyArray,
    /// Sup norm of `Tv - v` at the reported value.
    pub bellman_residual: f64,
    pub iterations: u64,
    /// A posteriori distance bound `residual * n / (1 - ||L^n 1||)` at the
    /// contraction index `n`, when that index is known.
    pub error_bound: Option<f64>,
    pub certified: SpectralReport,
}

impl Serialize for Solution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Solution", 6)?;
        s.serialize_field("value", &self.value.to_nested())?;
        s.serialize_field("policy", &self.policy.to_nested())?;
        s.serialize_field("bellman_residual", &self.bellman_residual)?;
        s.serialize_field("iterations", &self.iterations)?;
        s.serialize_field("error_bound", &self.error_bound)?;
        s.serialize_field("certified", &self.certified)?;
        s.end()
    }
}

impl Solution {
    /// Long-format CSV: `i_x,i_z,x,z,value,action` per row.
    pub fn to_csv(&self, x_grid: &[f64], z_grid: &[f64]) -> String {
        let mut out = String::from("i_x,i_z,x,z,value,action\n");
        for (i_x, &x) in x_grid.iter().enumerate().take(self.value.n_x()) {
            for (i_z, &z) in z_grid.iter().enumerate().take(self.value.n_z()) {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    i_x,
                    i_z,
                    x,
                    z,
                    self.value.get(i_x, i_z),
                    self.policy.get(i_x, i_z),
                ));
            }
        }
        out
    }
}

type BackupRow = (Vec<f64>, Vec<usize>);

/// One Bellman backup `Tv` with the greedy policy; argmax ties go to the
/// smallest action index. Cells are independent and processed in parallel
/// over endogenous rows; output is identical for any thread count.
pub fn bellman_backup(
    dp: &DynamicProgram,
    v: &ValueArray,
) -> Result<(ValueArray, PolicyArray), DpError> {
    let n_x = dp.n_x();
    let n_z = dp.n_z();

    // Precompute conditional expectations once for the separable path:
    // expect[x'][z] = sum_z' Q[z][z'] v(x', z').
    let expect = dp.separable_table().map(|_| {
        let rows: Vec<Vec<f64>> = (0..n_x)
            .into_par_iter()
            .map(|i_x| {
                (0..n_z)
                    .map(|i_z| dp.chain.expect_next(i_z, v.x_row(i_x)))
                    .collect()
            })
            .collect();
        rows
    });

    let rows: Vec<Result<BackupRow, DpError>> = (0..n_x)
        .into_par_iter()
        .map(|i_x| {
            let mut values = Vec::with_capacity(n_z);
            let mut actions = Vec::with_capacity(n_z);
            for i_z in 0..n_z {
                let (lo, hi) = dp.feasible_range(i_x, i_z);
                let mut best = f64::NEG_INFINITY;
                let mut best_a = lo;
                for i_a in lo..=hi {
                    let candidate = match (&dp.payoff, &expect) {
                        (Payoff::Separable(table), Some(e)) => {
                            let x_next = table.next_x(i_x, i_z, i_a);
                            table.reward(i_x, i_z, i_a) + dp.discount_weights[i_z] * e[x_next][i_z]
                        }
                        _ => dp.aggregate(i_x, i_z, i_a, v),
                    };
                    if !candidate.is_finite() {
                        return Err(DpError::NonFiniteAggregator { i_x, i_z, i_a });
                    }
                    if candidate > best {
                        best = candidate;
                        best_a = i_a;
                    }
                }
                values.push(best);
                actions.push(best_a);
            }
            Ok((values, actions))
        })
        .collect();

    let mut value = ValueArray::zeros(n_x, n_z);
    let mut policy = PolicyArray::from_fn(n_x, n_z, |_, _| 0);
    for (i_x, row) in rows.into_iter().enumerate() {
        let (values, actions) = row?;
        for i_z in 0..n_z {
            value.set(i_x, i_z, values[i_z]);
            policy.set(i_x, i_z, actions[i_z]);
        }
    }
    Ok((value, policy))
}

/// One policy backup `T_sigma v`.
pub fn policy_backup(
    dp: &DynamicProgram,
    sigma: &PolicyArray,
    v: &ValueArray,
) -> Result<ValueArray, DpError> {
    let n_x = dp.n_x();
    let n_z = dp.n_z();
    let mut out = ValueArray::zeros(n_x, n_z);
    for i_x in 0..n_x {
        for i_z in 0..n_z {
            let i_a = sigma.get(i_x, i_z);
            let (lo, hi) = dp.feasible_range(i_x, i_z);
            if i_a < lo || i_a > hi {
                return Err(DpError::InfeasiblePolicy {
                    i_x,
                    i_z,
                    action: i_a,
                });
            }
            let value = dp.aggregate(i_x, i_z, i_a, v);
            if !value.is_finite() {
                return Err(DpError::NonFiniteAggregator { i_x, i_z, i_a });
            }
            out.set(i_x, i_z, value);
        }
    }
    Ok(out)
}

fn error_bound_from(
    op: &DiscountOperator,
    certificate: &SpectralReport,
    residual: f64,
) -> Option<f64> {
    certificate.contraction_index.map(|n| {
        let modulus = iterate_norm(op, n);
        residual * n as f64 / (1.0 - modulus)
    })
}

/// Value function iteration from `v0` until the sup-norm step is below
/// `tol`. Requires the spectral certificate; errors with the best iterate
/// attached if the budget runs out.
pub fn vfi(
    dp: &DynamicProgram,
    v0: &ValueArray,
    tol: f64,
    max_iter: u64,
) -> Result<Solution, DpError> {
    let certificate = dp.certificate(SpectralOptions::default())?;
    let op = dp.discount_operator()?;
    if !v0.is_finite() {
        return Err(DpError::Shape("initial value array must be finite".into()));
    }
    let mut v = v0.clone();
    let mut iterations = 0;
    loop {
        let (next, policy) = bellman_backup(dp, &v)?;
        iterations += 1;
        let residual = next.sup_diff(&v);
        let done = residual < tol;
        v = next;
        if done || iterations >= max_iter {
            let solution = Solution {
                error_bound: error_bound_from(&op, &certificate, residual),
                value: v,
                policy,
                bellman_residual: residual,
                iterations,
                certified: certificate,
            };
            if done {
                return Ok(solution);
            }
            return Err(DpError::MaxIterExceeded {
                max_iter,
                residual,
                best: Box::new(solution),
            });
        }
    }
}

/// Exact policy value by solving `(I - D_sigma) v = u_sigma`, where
/// `D_sigma[(x,z),(x',z')] = beta(z) Q(z,z')` at the policy's next state.
/// Separable programs only.
pub fn policy_eval_exact(dp: &DynamicProgram, sigma: &PolicyArray) -> Result<ValueArray, DpError> {
    let table = dp.separable_table().ok_or(DpError::NotSeparable)?;
    let n_x = dp.n_x();
    let n_z = dp.n_z();
    let dim = n_x * n_z;
    let mut system = SquareMatrix::identity(dim);
    let mut rhs = vec![0.0; dim];
    for i_x in 0..n_x {
        for i_z in 0..n_z {
            let i_a = sigma.get(i_x, i_z);
            let (lo, hi) = dp.feasible_range(i_x, i_z);
            if i_a < lo || i_a > hi {
                return Err(DpError::InfeasiblePolicy {
                    i_x,
                    i_z,
                    action: i_a,
                });
            }
            let row = i_x * n_z + i_z;
            rhs[row] = table.reward(i_x, i_z, i_a);
            let x_next = table.next_x(i_x, i_z, i_a);
            let beta = dp.discount_weights[i_z];
            for (z_next, &q) in dp.chain.transition_row(i_z).iter().enumerate() {
                let col = x_next * n_z + z_next;
                system.set(row, col, system.get(row, col) - beta * q);
            }
        }
    }
    let (solution, _residual) =
        solve_refined(&system, &rhs, 1e-10).map_err(|_| DpError::SingularSystem)?;
    let mut value = ValueArray::zeros(n_x, n_z);
    for i_x in 0..n_x {
        for i_z in 0..n_z {
            value.set(i_x, i_z, solution[i_x * n_z + i_z]);
        }
    }
    Ok(value)
}

/// Iterative policy evaluation `T_sigma^k 0 -> v_sigma`, usable for
/// non-separable aggregators.
pub fn policy_eval_iterative(
    dp: &DynamicProgram,
    sigma: &PolicyArray,
    tol: f64,
    max_iter: u64,
) -> Result<ValueArray, DpError> {
    policy_eval_iterative_from(
        dp,
        sigma,
        &ValueArray::zeros(dp.n_x(), dp.n_z()),
        tol,
        max_iter,
    )
}

pub fn policy_eval_iterative_from(
    dp: &DynamicProgram,
    sigma: &PolicyArray,
    v0: &ValueArray,
    tol: f64,
    max_iter: u64,
) -> Result<ValueArray, DpError> {
    let certificate = dp.certificate(SpectralOptions::default())?;
    let mut v = v0.clone();
    for _ in 0..max_iter {
        let next = policy_backup(dp, sigma, &v)?;
        let diff = next.sup_diff(&v);
        v = next;
        if diff < tol {
            return Ok(v);
        }
    }
    let op = dp.discount_operator()?;
    let residual = policy_backup(dp, sigma, &v)?.sup_diff(&v);
    Err(DpError::MaxIterExceeded {
        max_iter,
        residual,
        best: Box::new(Solution {
            error_bound: error_bound_from(&op, &certificate, residual),
            value: v,
            policy: sigma.clone(),
            bellman_residual: residual,
            iterations: max_iter,
            certified: certificate,
        }),
    })
}

/// Howard policy iteration: full evaluation (exact when separable) followed
/// by greedy improvement, until the policy repeats or values stop moving.
pub fn howard(
    dp: &DynamicProgram,
    sigma0: &PolicyArray,
    tol: f64,
    max_iter: u64,
) -> Result<Solution, DpError> {
    howard_with_trace(dp, sigma0, tol, max_iter).map(|(solution, _)| solution)
}

/// Howard iteration that also returns the value of every evaluated policy,
/// in order. The trace makes the monotone-improvement property auditable.
pub fn howard_with_trace(
    dp: &DynamicProgram,
    sigma0: &PolicyArray,
    tol: f64,
    max_iter: u64,
) -> Result<(Solution, Vec<ValueArray>), DpError> {
    let certificate = dp.certificate(SpectralOptions::default())?;
    let op = dp.discount_operator()?;
    let evaluate = |sigma: &PolicyArray| -> Result<ValueArray, DpError> {
        if dp.is_separable() {
            policy_eval_exact(dp, sigma)
        } else {
            policy_eval_iterative(dp, sigma, tol.min(1e-10), 1_000_000)
        }
    };

    let mut sigma = sigma0.clone();
    let mut value = evaluate(&sigma)?;
    let mut trace = vec![value.clone()];
    let mut iterations = 1u64;
    loop {
        let (_, greedy) = bellman_backup(dp, &value)?;
        if greedy == sigma {
            break;
        }
        let next_value = evaluate(&greedy)?;
        let diff = next_value.sup_diff(&value);
        sigma = greedy;
        value = next_value;
        trace.push(value.clone());
        iterations += 1;
        if diff < tol {
            break;
        }
        if iterations >= max_iter {
            let residual = bellman_backup(dp, &value)?.0.sup_diff(&value);
            return Err(DpError::MaxIterExceeded {
                max_iter,
                residual,
                best: Box::new(Solution {
                    error_bound: error_bound_from(&op, &certificate, residual),
                    value,
                    policy: sigma,
                    bellman_residual: residual,
                    iterations,
                    certified: certificate,
                }),
            });
        }
    }
    let residual = bellman_backup(dp, &value)?.0.sup_diff(&value);
    Ok((
        Solution {
            error_bound: error_bound_from(&op, &certificate, residual),
            value,
            policy: sigma,
            bellman_residual: residual,
            iterations,
            certified: certificate,
        },
        trace,
    ))
}

/// Feasible policy count, as a float so oversized spaces stay comparable.
pub fn policy_space_size(dp: &DynamicProgram) -> f64 {
    let mut total = 1.0f64;
    for i_x in 0..dp.n_x() {
        for i_z in 0..dp.n_z() {
            let (lo, hi) = dp.feasible_range(i_x, i_z);
            total *= (hi - lo + 1) as f64;
            if !total.is_finite() {
                return f64::INFINITY;
            }
        }
    }
    total
}

/// Exhaustive optimality oracle: enumerates every stationary policy,
/// evaluates each exactly, and returns the pointwise maximum together with a
/// single policy attaining it everywhere. Separable programs with at most
/// `10^6` policies only.
pub fn brute_force_oracle(dp: &DynamicProgram) -> Result<Solution, DpError> {
    if !dp.is_separable() {
        return Err(DpError::NotSeparable);
    }
    let certificate = dp.certificate(SpectralOptions::default())?;
    let op = dp.discount_operator()?;
    let count = policy_space_size(dp);
    if count > 1e6 {
        return Err(DpError::TooManyPolicies(count));
    }
    let n_x = dp.n_x();
    let n_z = dp.n_z();

    let mut vmax = ValueArray::constant(n_x, n_z, f64::NEG_INFINITY);
    let mut enumerated = 0u64;
    for_each_policy(dp, |sigma| {
        let value = policy_eval_exact(dp, sigma)?;
        for i_x in 0..n_x {
            for i_z in 0..n_z {
                if value.get(i_x, i_z) > vmax.get(i_x, i_z) {
                    vmax.set(i_x, i_z, value.get(i_x, i_z));
                }
            }
        }
        enumerated += 1;
        Ok(())
    })?;

    // second pass: find one policy attaining the pointwise maximum everywhere
    let mut attained: Option<(PolicyArray, ValueArray)> = None;
    for_each_policy(dp, |sigma| {
        if attained.is_some() {
            return Ok(());
        }
        let value = policy_eval_exact(dp, sigma)?;
        if value.sup_diff(&vmax) <= 1e-9 {
            attained = Some((sigma.clone(), value));
        }
        Ok(())
    })?;
    let (policy, value) = attained.ok_or(DpError::OracleMaxNotAttained)?;
    let residual = bellman_backup(dp, &value)?.0.sup_diff(&value);
    Ok(Solution {
        error_bound: error_bound_from(&op, &certificate, residual),
        value,
        policy,
        bellman_residual: residual,
        iterations: enumerated,
        certified: certificate,
    })
}

fn for_each_policy(
    dp: &DynamicProgram,
    mut visit: impl FnMut(&PolicyArray) -> Result<(), DpError>,
) -> Result<(), DpError> {
    let n_x = dp.n_x();
    let n_z = dp.n_z();
    let cells: Vec<(usize, usize)> = (0..n_x * n_z)
        .map(|c| dp.feasible_range(c / n_z, c % n_z))
        .collect();
    let mut current: Vec<usize> = cells.iter().map(|&(lo, _)| lo).collect();
    loop {
        let sigma = PolicyArray {
            n_x,
            n_z,
            actions: current.clone(),
        };
        visit(&sigma)?;
        // odometer increment, last cell fastest
        let mut pos = cells.len();
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            if current[pos] < cells[pos].1 {
                current[pos] += 1;
                for reset in pos + 1..cells.len() {
                    current[reset] = cells[reset].0;
                }
                break;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlackwellViolationKind {
    /// `H(v + c) > H(v) + beta(z) E[c]`
    Additive,
    /// raising the continuation lowered `H`
    Monotonicity,
    /// `|H(v) - H(w)|` exceeded the discounted sup gap
    Lipschitz,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlackwellViolation {
    pub kind: BlackwellViolationKind,
    pub i_x: usize,
    pub i_z: usize,
    pub i_a: usize,
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlackwellReport {
    pub samples: u64,
    pub violations: Vec<BlackwellViolation>,
    pub warning: Option<String>,
}

impl BlackwellReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const BLACKWELL_SLACK: f64 = 1e-10;

/// Samples random candidate values, nonnegative shifts, and feasible
/// state-action triples, and checks the discounting inequality
/// `H(v + c) <= H(v) + beta(z) E[c]`, monotonicity of the aggregator, and
/// the Lipschitz bound driven by the declared discount weights.
pub fn blackwell_check(dp: &DynamicProgram, trials: u64, seed: u64) -> BlackwellReport {
    if trials == 0 {
        return BlackwellReport {
            samples: 0,
            violations: Vec::new(),
            warning: Some("zero trials requested; the check is vacuous".into()),
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = dp.value_sample_range;
    let span = hi - lo;
    let n_x = dp.n_x();
    let n_z = dp.n_z();
    let mut violations = Vec::new();

    for _ in 0..trials {
        let v = ValueArray::from_fn(n_x, n_z, |_, _| lo + span * rng.random::<f64>());
        let w = ValueArray::from_fn(n_x, n_z, |_, _| lo + span * rng.random::<f64>());
        let c: Vec<f64> = (0..n_z).map(|_| 0.5 * span * rng.random::<f64>()).collect();
        let bump = ValueArray::from_fn(n_x, n_z, |_, _| 0.5 * span * rng.random::<f64>());
        let i_x = rng.random_range(0..n_x);
        let i_z = rng.random_range(0..n_z);
        let (a_lo, a_hi) = dp.feasible_range(i_x, i_z);
        let i_a = rng.random_range(a_lo..=a_hi);

        let base = dp.aggregate(i_x, i_z, i_a, &v);
        let beta = dp.discount_weights()[i_z];

        // additive shift by a z-only function
        let shifted = ValueArray::from_fn(n_x, n_z, |x, z| v.get(x, z) + c[z]);
        let lhs = dp.aggregate(i_x, i_z, i_a, &shifted);
        let rhs = base + beta * dp.chain().expect_next(i_z, &c);
        if lhs > rhs + BLACKWELL_SLACK {
            violations.push(BlackwellViolation {
                kind: BlackwellViolationKind::Additive,
                i_x,
                i_z,
                i_a,
                excess: lhs - rhs,
            });
        }

        // monotonicity under a nonnegative perturbation
        let raised = ValueArray::from_fn(n_x, n_z, |x, z| v.get(x, z) + bump.get(x, z));
        let up = dp.aggregate(i_x, i_z, i_a, &raised);
        if up < base - BLACKWELL_SLACK {
            violations.push(BlackwellViolation {
                kind: BlackwellViolationKind::Monotonicity,
                i_x,
                i_z,
                i_a,
                excess: base - up,
            });
        }

        // Lipschitz bound through the declared weights
        let gap = v.column_gap(&w);
        let bound = beta * dp.chain().expect_next(i_z, &gap);
        let other = dp.aggregate(i_x, i_z, i_a, &w);
        if (base - other).abs() > bound + BLACKWELL_SLACK {
            violations.push(BlackwellViolation {
                kind: BlackwellViolationKind::Lipschitz,
                i_x,
                i_z,
                i_a,
                excess: (base - other).abs() - bound,
            });
        }
    }
    BlackwellReport {
        samples: trials,
        violations,
        warning: None,
    }
}
