//! The discount operator `L[i][j] = w_i * Q[i][j]` and its spectral
//! certificate. The solvers in this crate only run once the spectral radius
//! of `L` is certified below one, so the radius routine returns two-sided
//! bounds rather than a bare point estimate.
//!
//! Bounds come from matrix squaring: after `k` squarings the ladder holds a
//! normalized copy of `L^(2^k)` whose sup norm gives the Gelfand upper bound
//! `||L^n 1||^(1/n)`, whose diagonal gives a certified lower bound
//! (`(L^n)_ii <= r^n` for nonnegative matrices), and whose row-sum vector
//! feeds Collatz-Wielandt ratio bounds. The contraction index is the
//! smallest `n` with `||L^n 1|| < 1`, found by a direct vector scan.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{solve_refined, SquareMatrix};
use crate::markov::{rouwenhorst, Ar1Spec, FiniteMarkovChain, MarkovError};

#[derive(Debug, Error)]
pub enum DiscountError {
    #[error("weights length {got} does not match {expected} states")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative weight at state {index}")]
    NegativeWeight { index: usize },
    #[error("spectral bracket did not converge: bounds [{}, {}]", .report.lower, .report.upper)]
    NotConverged { report: SpectralReport },
    #[error("spectral radius not certified below one: bounds [{lower}, {upper}]")]
    RadiusNotCertified { lower: f64, upper: f64 },
    #[error("singular system while inverting (I - L)")]
    SingularSystem,
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

/// `L[i][j] = weights[i] * Q[i][j]` for a nonnegative weight vector.
#[derive(Debug, Clone)]
pub struct DiscountOperator {
    matrix: SquareMatrix,
    weights: Vec<f64>,
    chain: FiniteMarkovChain,
}

/// Builds the discount operator for the given chain and weight vector.
pub fn build_discount_operator(
    chain: &FiniteMarkovChain,
    weights: &[f64],
) -> Result<DiscountOperator, DiscountError> {
    let n = chain.n_states();
    if weights.len() != n {
        return Err(DiscountError::LengthMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    if let Some(index) = weights.iter().position(|&w| w < 0.0 || !w.is_finite()) {
        return Err(DiscountError::NegativeWeight { index });
    }
    let mut matrix = SquareMatrix::zeros(n);
    for (i, &w) in weights.iter().enumerate() {
        for (j, &q) in chain.transition_row(i).iter().enumerate() {
            matrix.set(i, j, w * q);
        }
    }
    Ok(DiscountOperator {
        matrix,
        weights: weights.to_vec(),
        chain: chain.clone(),
    })
}

impl DiscountOperator {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn chain(&self) -> &FiniteMarkovChain {
        &self.chain
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    /// Target width of the certified bracket.
    pub tol: f64,
    /// Horizon budget: the squaring ladder stops at `log2(n_max)` rungs and
    /// the contraction scan stops at `n_max` steps.
    pub n_max: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            tol: 1e-6,
            n_max: 1 << 20,
        }
    }
}

/// Spectral radius estimate with certified bounds and the contraction index.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub radius: f64,
    pub upper: f64,
    pub lower: f64,
    /// Smallest `n` with `||L^n 1|| < 1`, when one exists within budget.
    pub contraction_index: Option<u64>,
    /// Squaring-ladder rungs consumed.
    pub iterations: u64,
}

impl SpectralReport {
    /// The certificate every solver requires: the radius is provably below one.
    pub fn certifies_contraction(&self) -> bool {
        self.upper < 1.0
    }
}

/// Certified two-sided bounds on `r(L)` plus the contraction index.
///
/// Returns `NotConverged` carrying the report when the bracket is still wider
/// than `tol` at the ladder budget; the bounds inside remain valid.
pub fn spectral_radius(
    op: &DiscountOperator,
    opts: SpectralOptions,
) -> Result<SpectralReport, DiscountError> {
    let (mut lower, mut upper, iterations) = bracket_radius(op, opts.tol, opts.n_max);
    if lower > upper {
        // Rounding can cross the bounds by a few ulps once both sides agree.
        let mid = 0.5 * (lower + upper);
        lower = mid;
        upper = mid;
    }
    let contraction_index = if lower >= 1.0 {
        None // no n can satisfy ||L^n 1|| < 1 when r >= 1
    } else {
        contraction_scan(op, opts.n_max)
    };
    let report = SpectralReport {
        radius: 0.5 * (lower + upper),
        upper,
        lower,
        contraction_index,
        iterations,
    };
    if upper - lower <= opts.tol {
        Ok(report)
    } else {
        Err(DiscountError::NotConverged { report })
    }
}

/// Squaring ladder producing (lower, upper, rungs).
fn bracket_radius(op: &DiscountOperator, tol: f64, n_max: u64) -> (f64, f64, u64) {
    let n = op.n();
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let k_max = 63 - n_max.max(1).leading_zeros() as u64; // floor(log2(n_max)) rungs
    let l = &op.matrix;

    // Rung 0 uses L itself: CW ratios at x = 1 give min/max row sums.
    let mut upper = op.weights.iter().copied().fold(0.0, f64::max);
    let mut lower = op
        .weights
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .min(upper);
    let diag0 = (0..n).map(|i| l.get(i, i)).fold(0.0, f64::max);
    lower = lower.max(diag0);

    // Ladder state: L^(2^k) = a * exp(shift).
    let mut a = l.clone();
    let mut shift = 0.0f64;
    let mut rungs = 0u64;

    for k in 1..=k_max {
        if upper - lower <= tol {
            break;
        }
        // advance to L^(2^k), normalizing to keep entries representable
        let norm = a.inf_norm();
        if norm == 0.0 {
            lower = 0.0;
            upper = 0.0;
            rungs = k;
            break;
        }
        let scaled = a.scaled(1.0 / norm);
        a = scaled.matmul(&scaled);
        shift = 2.0 * (shift + norm.ln());
        rungs = k;

        let pow = (1u64 << k) as f64;
        let row_sums: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum::<f64>()).collect();
        let sup = row_sums.iter().copied().fold(0.0, f64::max);
        if sup == 0.0 {
            // the square underflowed: ||L^n|| < MIN_POSITIVE * exp(shift),
            // which still certifies an upper bound
            let vanished = ((f64::MIN_POSITIVE.ln() + shift) / pow).exp();
            upper = upper.min(vanished.max(0.0));
            lower = lower.min(upper);
            break;
        }

        // Gelfand upper bound ||L^n|| ^ (1/n).
        let gelfand = ((sup.ln() + shift) / pow).exp();
        upper = upper.min(gelfand);

        // Diagonal lower bound: (L^n)_ii <= r^n.
        let diag = (0..n).map(|i| a.get(i, i)).fold(0.0, f64::max);
        if diag > 0.0 {
            lower = lower.max(((diag.ln() + shift) / pow).exp());
        }

        // Collatz-Wielandt ratios on the iterated direction x = L^n 1.
        let lx = l.matvec(&row_sums);
        let mut cw_min = f64::INFINITY;
        let mut cw_max = 0.0f64;
        let mut all_positive = true;
        for (xi, yi) in row_sums.iter().zip(lx.iter()) {
            if *xi > 0.0 {
                let ratio = yi / xi;
                cw_min = cw_min.min(ratio);
                cw_max = cw_max.max(ratio);
            } else {
                all_positive = false;
            }
        }
        if cw_min.is_finite() {
            lower = lower.max(cw_min);
        }
        if all_positive {
            // max ratio is only an upper bound for strictly positive x
            upper = upper.min(cw_max);
        }
    }
    (lower, upper, rungs)
}

/// Smallest `n <= n_max` with `||L^n 1|| < 1`, by iterated vector products
/// carried in log scale so long scans neither overflow nor underflow.
pub fn contraction_index(op: &DiscountOperator, n_max: u64) -> Option<u64> {
    contraction_scan(op, n_max)
}

fn contraction_scan(op: &DiscountOperator, n_max: u64) -> Option<u64> {
    let l = &op.matrix;
    let n = op.n();
    let mut v = vec![1.0; n];
    let mut log_norm = 0.0f64;
    for step in 1..=n_max {
        v = l.matvec(&v);
        let sup = v.iter().copied().fold(0.0, f64::max);
        if sup == 0.0 {
            return Some(step);
        }
        log_norm += sup.ln();
        if log_norm < 0.0 {
            return Some(step);
        }
        for x in v.iter_mut() {
            *x /= sup;
        }
    }
    None
}

/// `||L^n 1||_inf` for one given `n`, log-carried like the scan above.
pub fn iterate_norm(op: &DiscountOperator, n: u64) -> f64 {
    let mut v = vec![1.0; op.n()];
    let mut log_norm = 0.0f64;
    for _ in 0..n {
        v = op.matrix.matvec(&v);
        let sup = v.iter().copied().fold(0.0, f64::max);
        if sup == 0.0 {
            return 0.0;
        }
        log_norm += sup.ln();
        for x in v.iter_mut() {
            *x /= sup;
        }
    }
    log_norm.exp()
}

/// Expected discounted period count `K = (I - L)^{-1} 1 = sum_t L^t 1`.
/// Requires a certificate that `r(L) < 1`.
pub fn resolvent_sum(op: &DiscountOperator) -> Result<Vec<f64>, DiscountError> {
    let report = match spectral_radius(op, SpectralOptions::default()) {
        Ok(report) => report,
        Err(DiscountError::NotConverged { report }) => report,
        Err(other) => return Err(other),
    };
    if !report.certifies_contraction() {
        return Err(DiscountError::RadiusNotCertified {
            lower: report.lower,
            upper: report.upper,
        });
    }
    let n = op.n();
    let mut system = SquareMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            system.set(i, j, system.get(i, j) - op.matrix.get(i, j));
        }
    }
    let ones = vec![1.0; n];
    let (k, _residual) =
        solve_refined(&system, &ones, 1e-10).map_err(|_| DiscountError::SingularSystem)?;
    Ok(k)
}

/// One grid cell of the Figure-style radius surface.
#[derive(Debug, Clone, Serialize)]
pub struct RadiusCell {
    pub rho: f64,
    pub sigma_beta: f64,
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusGrid {
    pub mu: f64,
    pub n_states: usize,
    pub rho_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    /// Row-major over (rho, sigma).
    pub cells: Vec<RadiusCell>,
}

impl RadiusGrid {
    pub fn radius_at(&self, i_rho: usize, i_sigma: usize) -> Option<f64> {
        self.cells[i_rho * self.sigma_grid.len() + i_sigma].radius
    }

    /// CSV with header `rho,sigma_beta,radius`; floats printed in shortest
    /// round-trip decimal form. Cells that failed to converge are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,sigma_beta,radius\n");
        for cell in &self.cells {
            match cell.radius {
                Some(r) => out.push_str(&format!("{},{},{}\n", cell.rho, cell.sigma_beta, r)),
                None => out.push_str(&format!("{},{},\n", cell.rho, cell.sigma_beta)),
            }
        }
        out
    }
}

/// Spectral radius of the Rouwenhorst discount chain over a (rho, sigma)
/// grid at fixed mean. Cells are independent and computed in parallel;
/// output order does not depend on the schedule.
pub fn radius_grid(
    mu: f64,
    rho_grid: &[f64],
    sigma_grid: &[f64],
    n_states: usize,
    opts: SpectralOptions,
) -> RadiusGrid {
    let pairs: Vec<(f64, f64)> = rho_grid
        .iter()
        .flat_map(|&rho| sigma_grid.iter().map(move |&sigma| (rho, sigma)))
        .collect();
    let cells: Vec<RadiusCell> = pairs
        .par_iter()
        .map(|&(rho, sigma)| {
            let cell = |radius, diagnostic| RadiusCell {
                rho,
                sigma_beta: sigma,
                radius,
                diagnostic,
            };
            let spec = match Ar1Spec::from_sigma_beta(mu, rho, sigma, n_states) {
                Ok(spec) => spec,
                Err(e) => return cell(None, Some(e.to_string())),
            };
            let chain = rouwenhorst(&spec);
            let weights = chain.states().to_vec();
            let op = match build_discount_operator(&chain, &weights) {
                Ok(op) => op,
                Err(e) => return cell(None, Some(e.to_string())),
            };
            match spectral_radius(&op, opts) {
                Ok(report) => cell(Some(report.radius), None),
                Err(e) => cell(None, Some(e.to_string())),
            }
        })
        .collect();
    RadiusGrid {
        mu,
        n_states,
        rho_grid: rho_grid.to_vec(),
        sigma_grid: sigma_grid.to_vec(),
        cells,
    }
}

/// Outcome of scanning the partial sums `a * sum_{s<=t} (L^s 1)(z0)`.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceReport {
    /// Per starting state: first `t` at which the partial sum exceeds the
    /// threshold, or none within `t_max`.
    pub witnesses: Vec<Option<u64>>,
    /// Largest partial sum observed per starting state.
    pub partial_sum_max: Vec<f64>,
    /// `b * ||K||_inf` when the radius is certified below one.
    pub certified_bound: Option<f64>,
}

/// Empirical necessity check: with rewards pinned in `[a, b]`, discounted
/// reward sums diverge exactly when `r(L) >= 1`. Scans the partial sums from
/// every starting state and reports the first crossing of `threshold`.
pub fn divergence_witness(
    op: &DiscountOperator,
    reward_bounds: (f64, f64),
    threshold: f64,
    t_max: u64,
) -> DivergenceReport {
    let (a, b) = reward_bounds;
    assert!(a > 0.0 && b >= a, "reward bounds must satisfy 0 < a <= b");
    let n = op.n();
    let mut v = vec![1.0; n]; // L^s 1
    let mut sums = vec![1.0; n]; // sum_{s<=t} (L^s 1), t = 0
    let mut witnesses: Vec<Option<u64>> = (0..n)
        .map(|i| (a * sums[i] > threshold).then_some(0))
        .collect();
    let mut partial_sum_max: Vec<f64> = sums.iter().map(|s| a * s).collect();
    for t in 1..=t_max {
        if witnesses.iter().all(|w| w.is_some()) {
            break;
        }
        v = op.matrix.matvec(&v);
        let mut all_overflowed = true;
        for i in 0..n {
            sums[i] += v[i];
            let scaled = a * sums[i];
            partial_sum_max[i] = partial_sum_max[i].max(scaled);
            if witnesses[i].is_none() && scaled > threshold {
                witnesses[i] = Some(t);
            }
            if sums[i].is_finite() {
                all_overflowed = false;
            }
        }
        if all_overflowed {
            break;
        }
    }
    let certified_bound = match spectral_radius(op, SpectralOptions::default()) {
        Ok(report) | Err(DiscountError::NotConverged { report }) => {
            if report.certifies_contraction() {
                resolvent_sum(op)
                    .ok()
                    .map(|k| b * k.iter().copied().fold(0.0, f64::max))
            } else {
                None
            }
        }
        Err(_) => None,
    };
    DivergenceReport {
        witnesses,
        partial_sum_max,
        certified_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::FiniteMarkovChain;

    pub(crate) fn chain(states: Vec<f64>, q: Vec<Vec<f64>>) -> FiniteMarkovChain {
        FiniteMarkovChain::new(states, q).unwrap()
    }

    fn two_state_absorbing(p: f64) -> FiniteMarkovChain {
        chain(vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![1.0 - p, p]])
    }

    fn radius(op: &DiscountOperator, tol: f64, n_max: u64) -> SpectralReport {
        spectral_radius(op, SpectralOptions { tol, n_max }).unwrap()
    }

    /// Dominant eigenvalue from the characteristic polynomial, closed form,
    /// for 2x2 and 3x3 nonnegative matrices. Independent oracle for the
    /// bracketing routine.
    pub(crate) fn dominant_eigenvalue_oracle(m: &SquareMatrix) -> f64 {
        match m.n() {
            1 => m.get(0, 0),
            2 => {
                let (a, b, c, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
                let disc = ((a - d) * (a - d) + 4.0 * b * c).max(0.0).sqrt();
                0.5 * (a + d + disc)
            }
            3 => {
                // coefficients of det(xI - M) = x^3 + p2 x^2 + p1 x + p0
                let tr = m.get(0, 0) + m.get(1, 1) + m.get(2, 2);
                let minors = m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0)
                    + m.get(0, 0) * m.get(2, 2)
                    - m.get(0, 2) * m.get(2, 0)
                    + m.get(1, 1) * m.get(2, 2)
                    - m.get(1, 2) * m.get(2, 1);
                let det = m.get(0, 0) * (m.get(1, 1) * m.get(2, 2) - m.get(1, 2) * m.get(2, 1))
                    - m.get(0, 1) * (m.get(1, 0) * m.get(2, 2) - m.get(1, 2) * m.get(2, 0))
                    + m.get(0, 2) * (m.get(1, 0) * m.get(2, 1) - m.get(1, 1) * m.get(2, 0));
                largest_real_cubic_root(-tr, minors, -det)
            }
            _ => panic!("oracle only covers n <= 3"),
        }
    }

    /// Largest real root of x^3 + a x^2 + b x + c via the trigonometric /
    /// hyperbolic closed forms, polished with a few Newton steps.
    fn largest_real_cubic_root(a: f64, b: f64, c: f64) -> f64 {
        let p = b - a * a / 3.0;
        let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
        let shift = -a / 3.0;
        let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);
        let mut root = if disc > 0.0 {
            let sq = disc.sqrt();
            let u = (-q / 2.0 + sq).cbrt();
            let v = (-q / 2.0 - sq).cbrt();
            u + v + shift
        } else if p.abs() < 1e-300 {
            (-q).cbrt() + shift
        } else {
            let m = 2.0 * (-p / 3.0).sqrt();
            let phi = (3.0 * q / (p * m)).clamp(-1.0, 1.0).acos() / 3.0;
            (0..3)
                .map(|k| m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        for _ in 0..50 {
            let f = root * root * root + a * root * root + b * root + c;
            let fp = 3.0 * root * root + 2.0 * a * root + b;
            if fp.abs() < 1e-300 {
                break;
            }
            let next = root - f / fp;
            if (next - root).abs() <= 1e-15 * root.abs().max(1.0) {
                root = next;
                break;
            }
            root = next;
        }
        root
    }

    #[test]
    fn operator_rows_scale_by_weights() {
        let c = two_state_absorbing(0.9);
        let op = build_discount_operator(&c, &[0.9, 1.05]).unwrap();
        assert!((op.matrix().get(0, 0) - 0.9).abs() < 1e-15);
        assert!((op.matrix().get(0, 1) - 0.0).abs() < 1e-15);
        assert!((op.matrix().get(1, 0) - 0.105).abs() < 1e-15);
        assert!((op.matrix().get(1, 1) - 0.945).abs() < 1e-15);
        // row sums reproduce the weights
        for i in 0..2 {
            let sum: f64 = op.matrix().row(i).iter().sum();
            assert!((sum - op.weights()[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_weights_reproduce_q() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.3, 0.7], vec![0.6, 0.4]]);
        let op = build_discount_operator(&c, &[1.0, 1.0]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(op.matrix().get(i, j), c.transition()[i][j]);
            }
        }
    }

    #[test]
    fn builder_rejects_bad_weights() {
        let c = two_state_absorbing(0.5);
        assert!(matches!(
            build_discount_operator(&c, &[0.9]),
            Err(DiscountError::LengthMismatch { .. })
        ));
        assert!(matches!(
            build_discount_operator(&c, &[0.9, -0.1]),
            Err(DiscountError::NegativeWeight { index: 1 })
        ));
    }

    #[test]
    fn constant_discount_radius_and_index() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.3, 0.7], vec![0.6, 0.4]]);
        let op = build_discount_operator(&c, &[0.95, 0.95]).unwrap();
        let report = radius(&op, 1e-10, 1 << 22);
        assert!((report.radius - 0.95).abs() < 1e-10);
        assert_eq!(report.contraction_index, Some(1));
    }

    #[test]
    fn triangular_two_state_radius_matches_eigenvalues() {
        let c = two_state_absorbing(0.9);
        let op = build_discount_operator(&c, &[0.9, 1.05]).unwrap();
        let report = radius(&op, 1e-10, 1 << 24);
        assert!((report.radius - 0.945).abs() < 1e-9, "{report:?}");
        assert!(report.lower <= 0.945 + 1e-12 && 0.945 <= report.upper + 1e-12);
    }

    #[test]
    fn iid_radius_equals_mean_weight() {
        let pi = [0.25, 0.4, 0.35];
        let states = vec![0.0, 1.0, 2.0];
        let q: Vec<Vec<f64>> = (0..3).map(|_| pi.to_vec()).collect();
        let c = chain(states, q);
        let beta = [1.2, 0.9, 0.8];
        let mean: f64 = pi.iter().zip(beta.iter()).map(|(p, b)| p * b).sum();
        let op = build_discount_operator(&c, &beta).unwrap();
        let report = radius(&op, 1e-10, 1 << 24);
        assert!((report.radius - mean).abs() < 1e-9, "{report:?} vs {mean}");
    }

    #[test]
    fn bounds_bracket_closed_form_eigenvalues() {
        // deterministic sweep of 2x2 and 3x3 cases against the polynomial oracle
        let mut lcg = 0x243f6a8885a308d3u64;
        let mut next = move || {
            lcg = lcg
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (lcg >> 11) as f64 / (1u64 << 53) as f64
        };
        for case in 0..60 {
            let n = 2 + (case % 2);
            let states: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let q: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let raw: Vec<f64> = (0..n).map(|_| next() + 1e-3).collect();
                    let total: f64 = raw.iter().sum();
                    raw.iter().map(|v| v / total).collect()
                })
                .collect();
            let weights: Vec<f64> = (0..n).map(|_| 1.3 * next()).collect();
            let c = chain(states, q);
            let op = build_discount_operator(&c, &weights).unwrap();
            let report = radius(&op, 1e-9, 1 << 26);
            let exact = dominant_eigenvalue_oracle(op.matrix());
            assert!(
                report.lower <= exact + 1e-9 && exact <= report.upper + 1e-9,
                "bounds [{}, {}] miss oracle {} (case {case})",
                report.lower,
                report.upper,
                exact
            );
            assert!((report.radius - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn defective_matrix_stalls_then_converges_with_budget() {
        // L = [[0.9, 1.0], [0, 0.9]] has a double eigenvalue 0.9 with a
        // defective structure, so the bracket narrows only like 1/n
        let c = chain(
            vec![0.0, 1.0],
            vec![vec![0.9 / 1.9, 1.0 / 1.9], vec![0.0, 1.0]],
        );
        let op = build_discount_operator(&c, &[1.9, 0.9]).unwrap();
        match spectral_radius(
            &op,
            SpectralOptions {
                tol: 1e-9,
                n_max: 1 << 4,
            },
        ) {
            Err(DiscountError::NotConverged { report }) => {
                assert!(report.lower <= 0.9 + 1e-12);
                assert!(0.9 <= report.upper + 1e-12);
                assert!(report.upper - report.lower > 1e-9);
            }
            other => panic!("expected a stalled bracket, got {other:?}"),
        }
        let report = radius(&op, 1e-9, 1 << 36);
        assert!((report.radius - 0.9).abs() < 1e-9, "{report:?}");
    }

    #[test]
    fn nilpotent_operator_certifies_zero_radius() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.0, 1.0], vec![0.5, 0.5]]);
        let op = build_discount_operator(&c, &[1.0, 0.0]).unwrap();
        // L = [[0, 1], [0, 0]] squares to zero
        let report = radius(&op, 1e-9, 1 << 10);
        assert!(report.upper < 1e-100, "{report:?}");
        assert!(report.lower >= 0.0);
        assert_eq!(report.contraction_index, Some(2));
        assert_eq!(contraction_index(&op, 10), Some(2));
    }

    #[test]
    fn contraction_index_iid_two_point() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let op = build_discount_operator(&c, &[1.2, 0.6]).unwrap();
        assert_eq!(contraction_index(&op, 100), Some(3));
        // hand-computed norms: ||L 1|| = 1.2, ||L^2 1|| = 1.08, ||L^3 1|| = 0.972
        assert!((iterate_norm(&op, 1) - 1.2).abs() < 1e-12);
        assert!((iterate_norm(&op, 2) - 1.08).abs() < 1e-12);
        assert!((iterate_norm(&op, 3) - 0.972).abs() < 1e-12);
    }

    #[test]
    fn unit_weight_never_contracts() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let op = build_discount_operator(&c, &[1.0, 1.0]).unwrap();
        assert_eq!(contraction_index(&op, 10_000), None);
    }

    #[test]
    fn zero_weights_contract_immediately() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let op = build_discount_operator(&c, &[0.0, 0.0]).unwrap();
        assert_eq!(contraction_index(&op, 10), Some(1));
        let report = radius(&op, 1e-12, 1 << 10);
        assert_eq!(report.radius, 0.0);
    }

    #[test]
    fn contraction_index_finite_iff_radius_below_one() {
        let mut lcg = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            lcg = lcg
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (lcg >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut seen_above = 0;
        let mut seen_below = 0;
        for _ in 0..200 {
            let n = 2 + (next() * 2.0) as usize;
            let states: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let q: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let raw: Vec<f64> = (0..n).map(|_| next() + 1e-3).collect();
                    let total: f64 = raw.iter().sum();
                    raw.iter().map(|v| v / total).collect()
                })
                .collect();
            let weights: Vec<f64> = (0..n).map(|_| 1.4 * next()).collect();
            let c = chain(states, q);
            let op = build_discount_operator(&c, &weights).unwrap();
            let report = match spectral_radius(
                &op,
                SpectralOptions {
                    tol: 1e-9,
                    n_max: 1 << 22,
                },
            ) {
                Ok(r) => r,
                Err(DiscountError::NotConverged { report }) => report,
                Err(e) => panic!("{e}"),
            };
            // only judge instances certified away from the boundary
            if report.upper < 0.999 {
                seen_below += 1;
                assert!(
                    contraction_index(&op, 1 << 20).is_some(),
                    "radius {} but no contraction index",
                    report.radius
                );
            } else if report.lower > 1.001 {
                seen_above += 1;
                assert!(contraction_index(&op, 4096).is_none());
            }
        }
        assert!(seen_below > 20 && seen_above > 20, "sweep was unbalanced");
    }

    #[test]
    fn resolvent_constant_discount_is_geometric() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let op = build_discount_operator(&c, &[0.9, 0.9]).unwrap();
        let k = resolvent_sum(&op).unwrap();
        for v in &k {
            assert!((v - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn resolvent_zero_discount_is_ones() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let op = build_discount_operator(&c, &[0.0, 0.0]).unwrap();
        let k = resolvent_sum(&op).unwrap();
        assert_eq!(k, vec![1.0, 1.0]);
    }

    #[test]
    fn resolvent_matches_truncated_series() {
        let c = two_state_absorbing(0.9);
        let op = build_discount_operator(&c, &[0.9, 1.05]).unwrap();
        let k = resolvent_sum(&op).unwrap();
        // independent oracle: partial sums of L^t 1
        let mut v = vec![1.0; 2];
        let mut series = [1.0; 2];
        for _ in 0..2000 {
            v = op.matrix().matvec(&v);
            for (s, vi) in series.iter_mut().zip(v.iter()) {
                *s += vi;
            }
        }
        for (got, want) in k.iter().zip(series.iter()) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert!(k.iter().all(|&v| v >= 1.0));
        // residual of (I - L) K = 1
        let lk = op.matrix().matvec(&k);
        for (ki, lki) in k.iter().zip(lk.iter()) {
            assert!((ki - lki - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn resolvent_requires_certificate() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let op = build_discount_operator(&c, &[1.1, 1.1]).unwrap();
        assert!(matches!(
            resolvent_sum(&op),
            Err(DiscountError::RadiusNotCertified { .. })
        ));
    }

    #[test]
    fn scaling_covariance_of_radius() {
        let c = chain(
            vec![0.0, 1.0, 2.0],
            vec![
                vec![0.2, 0.5, 0.3],
                vec![0.4, 0.1, 0.5],
                vec![0.3, 0.3, 0.4],
            ],
        );
        let beta = [0.9, 1.1, 0.7];
        let op = build_discount_operator(&c, &beta).unwrap();
        let base = radius(&op, 1e-10, 1 << 24).radius;
        for &scale in &[0.0, 0.5, 1.7] {
            let scaled: Vec<f64> = beta.iter().map(|b| b * scale).collect();
            let op2 = build_discount_operator(&c, &scaled).unwrap();
            let r2 = radius(&op2, 1e-10, 1 << 24).radius;
            assert!((r2 - scale * base).abs() < 1e-8, "{r2} vs {}", scale * base);
        }
    }

    #[test]
    fn upper_bound_sequence_is_non_increasing() {
        // replay the ladder and watch the Gelfand bound directly
        let c = two_state_absorbing(0.8);
        let op = build_discount_operator(&c, &[0.7, 1.2]).unwrap();
        let l = op.matrix().clone();
        let mut a = l.clone();
        let mut shift = 0.0f64;
        let mut prev = f64::INFINITY;
        for k in 1..=30u32 {
            let norm = a.inf_norm();
            let scaled = a.scaled(1.0 / norm);
            a = scaled.matmul(&scaled);
            shift = 2.0 * (shift + norm.ln());
            let sup: f64 = (0..a.n())
                .map(|i| a.row(i).iter().sum::<f64>())
                .fold(0.0, f64::max);
            let bound = ((sup.ln() + shift) / (1u64 << k) as f64).exp();
            assert!(bound <= prev + 1e-12, "rung {k}: {bound} > {prev}");
            prev = bound;
        }
        let exact = dominant_eigenvalue_oracle(op.matrix());
        assert!(prev >= exact - 1e-12);
    }

    #[test]
    fn benchmark_grid_cell_hits_golden_radius() {
        let spec = Ar1Spec::from_sigma_beta(0.985, 0.99, 0.01, 50).unwrap();
        let c = rouwenhorst(&spec);
        let weights = c.states().to_vec();
        let op = build_discount_operator(&c, &weights).unwrap();
        let report = radius(&op, 1e-8, 1 << 22);
        assert!(
            (report.radius - 0.995).abs() <= 0.002,
            "radius {}",
            report.radius
        );
    }

    #[test]
    fn vanishing_volatility_recovers_constant_discount() {
        let grid = radius_grid(
            0.985,
            &[0.9],
            &[1e-6],
            50,
            SpectralOptions {
                tol: 1e-9,
                n_max: 1 << 22,
            },
        );
        let r = grid.radius_at(0, 0).unwrap();
        assert!((r - 0.985).abs() < 1e-4, "radius {r}");
    }

    #[test]
    fn radius_grid_monotone_and_csv_shaped() {
        let rho = [0.9, 0.95, 0.99];
        let sigma = [0.002, 0.01, 0.02];
        let grid = radius_grid(
            0.985,
            &rho,
            &sigma,
            30,
            SpectralOptions {
                tol: 1e-9,
                n_max: 1 << 22,
            },
        );
        for i in 0..rho.len() {
            for j in 1..sigma.len() {
                assert!(grid.radius_at(i, j).unwrap() >= grid.radius_at(i, j - 1).unwrap());
            }
        }
        for j in 0..sigma.len() {
            for i in 1..rho.len() {
                assert!(grid.radius_at(i, j).unwrap() >= grid.radius_at(i - 1, j).unwrap());
            }
        }
        let csv = grid.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("rho,sigma_beta,radius"));
        assert_eq!(csv.lines().count(), 1 + rho.len() * sigma.len());
        // row-major: first block holds rho[0]
        let first = lines.next().unwrap();
        assert!(first.starts_with("0.9,0.002,"));
    }

    #[test]
    fn iterated_norms_match_monte_carlo_discount_products() {
        // (L^n 1)(z) is the expected product of discounts along simulated
        // paths started at z; check the identity by simulation
        let c = chain(
            vec![0.8, 1.0, 1.2],
            vec![
                vec![0.5, 0.3, 0.2],
                vec![0.2, 0.5, 0.3],
                vec![0.1, 0.3, 0.6],
            ],
        );
        let beta = [0.8, 1.0, 1.2];
        let op = build_discount_operator(&c, &beta).unwrap();
        let horizon = 5usize;
        let mut exact = vec![1.0; 3];
        for _ in 0..horizon {
            exact = op.matrix().matvec(&exact);
        }
        let replications = 200_000;
        for (z0, target) in exact.iter().enumerate() {
            let mut total = 0.0;
            for rep in 0..replications {
                let path = crate::markov::simulate(&c, z0, horizon, 1000 * z0 as u64 + rep);
                let product: f64 = path.iter().map(|&z| beta[z]).product();
                total += product;
            }
            let estimate = total / replications as f64;
            assert!(
                (estimate - target).abs() < 0.01 * target,
                "state {z0}: Monte Carlo {estimate} vs exact {target}"
            );
        }
    }

    #[test]
    fn divergence_unit_discount_crosses_at_threshold() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let op = build_discount_operator(&c, &[1.0, 1.0]).unwrap();
        let report = divergence_witness(&op, (1.0, 1.0), 100.0, 1000);
        assert_eq!(report.witnesses, vec![Some(100), Some(100)]);
    }

    #[test]
    fn divergence_bounded_when_contractive() {
        let c = chain(vec![0.0, 1.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let op = build_discount_operator(&c, &[0.9, 0.9]).unwrap();
        let report = divergence_witness(&op, (1.0, 1.0), 100.0, 10_000);
        assert_eq!(report.witnesses, vec![None, None]);
        let bound = report.certified_bound.unwrap();
        assert!((bound - 10.0).abs() < 1e-8);
        for &s in &report.partial_sum_max {
            assert!(s <= bound + 1e-9);
        }
    }

    #[test]
    fn divergence_dominant_state_escapes() {
        let c = two_state_absorbing(0.9);
        let op = build_discount_operator(&c, &[0.5, 1.2]).unwrap();
        // dominant eigenvalue p * beta_h = 1.08 > 1
        let report = divergence_witness(&op, (1.0, 1.0), 1e6, 100_000);
        assert!(report.witnesses[1].is_some(), "{report:?}");
        // state 0 is absorbing with discount 0.5: bounded there
        assert!(report.witnesses[0].is_none());
        assert!(report.partial_sum_max[0] <= 2.0 + 1e-12);
    }
}
