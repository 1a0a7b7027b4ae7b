//! Least squares, permutation tests and bootstrap intervals.

mod bootstrap;
mod design;
mod ols;
mod permutation;

pub use bootstrap::{bootstrap_ci, BootstrapResult};
pub use design::{Design, GroupedSample};
pub use ols::{ols_fit, pearson, RegressionResult};
pub use permutation::{permutation_test, permutation_test_multi, Resamplable, Resample, Tails, TestResult};

/// Linear-interpolation quantile (Hyndman–Fan type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
