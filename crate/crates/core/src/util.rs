//! Shared numeric helpers.

/// Linearly spaced grid of `n` points covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * step).collect()
}

/// Sup-norm distance between two slices of equal length.
pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints_and_spacing() {
        let g = linspace(1.0, 3.0, 5);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert!((g[4] - 3.0).abs() < 1e-15);
        assert!((g[2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn linspace_degenerate() {
        assert_eq!(linspace(0.5, 9.0, 1), vec![0.5]);
    }
}
