use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::quantile_sorted;
use crate::error::{Error, Result};
use crate::seed;

const MAX_REDRAWS: u64 = 100;

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult {
    /// Estimator on the original rows.
    pub estimate: Vec<f64>,
    /// Percentile interval per estimator component.
    pub intervals: Vec<(f64, f64)>,
    pub n_boot: usize,
    pub level: f64,
    pub seed: u64,
    /// Resamples on which the estimator failed and that were redrawn.
    pub redrawn: usize,
}

/// Percentile bootstrap over rows: `n_boot` resamples of `rows.len()` rows
/// drawn with replacement, each re-estimated. Replicate `i` uses its own
/// generator derived from `(seed, i)`; a failing replicate is redrawn from
/// a further derived generator.
pub fn bootstrap_ci<R, F>(rows: &[R], estimator: F, n_boot: usize, level: f64, seed: u64) -> Result<BootstrapResult>
where
    R: Clone + Sync,
    F: Fn(&[R]) -> Result<Vec<f64>> + Sync,
{
    if n_boot < 100 {
        return Err(Error::Precondition(format!("n_boot must be at least 100, got {n_boot}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Precondition(format!("level must lie in (0, 1), got {level}")));
    }
    if rows.is_empty() {
        return Err(Error::Precondition("bootstrap needs at least one row".into()));
    }
    let estimate = estimator(rows)?;
    let n = rows.len();

    let replicates: Vec<(Vec<f64>, usize)> = (0..n_boot)
        .into_par_iter()
        .map(|i| {
            let base = seed::derive_seed(seed, "bootstrap", i as u64);
            let mut last_err = None;
            for attempt in 0..MAX_REDRAWS {
                let mut rng = seed::stream(base, "attempt", attempt);
                let sample: Vec<R> = (0..n).map(|_| rows[rng.gen_range(0..n)].clone()).collect();
                match estimator(&sample) {
                    Ok(v) if v.len() == estimate.len() && v.iter().all(|x| x.is_finite()) => {
                        return Ok((v, attempt as usize))
                    }
                    Ok(_) => last_err = Some(Error::Precondition("estimator returned a non-finite value".into())),
                    Err(e) => last_err = Some(e),
                }
            }
            Err(last_err.expect("at least one attempt"))
        })
        .collect::<Result<_>>()?;

    let redrawn = replicates.iter().map(|(_, r)| r).sum();
    let alpha = (1.0 - level) / 2.0;
    let intervals = (0..estimate.len())
        .map(|k| {
            let mut vals: Vec<f64> = replicates.iter().map(|(v, _)| v[k]).collect();
            vals.sort_by(f64::total_cmp);
            (quantile_sorted(&vals, alpha), quantile_sorted(&vals, 1.0 - alpha))
        })
        .collect();
    Ok(BootstrapResult {
        estimate,
        intervals,
        n_boot,
        level,
        seed,
        redrawn,
    })
}
