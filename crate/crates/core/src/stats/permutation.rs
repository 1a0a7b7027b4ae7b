use std::fmt;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{Design, GroupedSample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tails {
    /// Extreme means at least as large as observed.
    One,
    /// Extreme means at least as large in absolute value.
    Two,
}

impl fmt::Display for Tails {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tails::One => "one",
            Tails::Two => "two",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resample {
    LabelShuffle,
    RowShuffle,
}

/// Data that can produce a shuffled copy of itself.
pub trait Resamplable: Sized {
    fn resample(&self, kind: Resample, rng: &mut ChaCha8Rng) -> Result<Self>;
}

impl<T: Scalar> Resamplable for GroupedSample<T> {
    fn resample(&self, _kind: Resample, rng: &mut ChaCha8Rng) -> Result<Self> {
        // for two groups, shuffling labels and shuffling values coincide
        let mut labels = self.labels.clone();
        labels.shuffle(rng);
        Ok(GroupedSample {
            values: self.values.clone(),
            labels,
        })
    }
}

impl<T: Scalar> Resamplable for Design<T> {
    fn resample(&self, kind: Resample, rng: &mut ChaCha8Rng) -> Result<Self> {
        if kind != Resample::RowShuffle {
            return Err(Error::Precondition("designs are resampled by shuffling outcome rows".into()));
        }
        let mut out = self.clone();
        out.outcome.shuffle(rng);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub tails: Tails,
    pub seed: u64,
}

fn as_extreme(perm: f64, observed: f64, tails: Tails) -> bool {
    let (perm, observed) = match tails {
        Tails::One => (perm, observed),
        Tails::Two => (perm.abs(), observed.abs()),
    };
    // tolerate rounding differences between algebraically equal statistics
    perm >= observed - 1e-12 * observed.abs().max(1.0)
}

/// Monte-Carlo permutation test with the add-one rule,
/// `p = (1 + #{as or more extreme}) / (1 + n)`.
///
/// Permutation `i` draws from its own generator derived from `(seed, i)`,
/// so the result does not depend on evaluation order or thread count.
pub fn permutation_test<D, F>(
    data: &D,
    statistic: F,
    resample: Resample,
    n: usize,
    tails: Tails,
    seed: u64,
) -> Result<TestResult>
where
    D: Resamplable + Sync,
    F: Fn(&D) -> Result<f64> + Sync,
{
    let results = permutation_test_multi(data, |d| Ok(vec![statistic(d)?]), resample, n, tails, seed)?;
    Ok(results[0])
}

/// As [`permutation_test`] for a vector of statistics sharing one set of
/// permutations.
pub fn permutation_test_multi<D, F>(
    data: &D,
    statistics: F,
    resample: Resample,
    n: usize,
    tails: Tails,
    seed: u64,
) -> Result<Vec<TestResult>>
where
    D: Resamplable + Sync,
    F: Fn(&D) -> Result<Vec<f64>> + Sync,
{
    if n == 0 {
        return Err(Error::Precondition("at least one permutation is required".into()));
    }
    let observed = statistics(data)?;
    let counts = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream(seed, "permutation", i as u64);
            let shuffled = data.resample(resample, &mut rng)?;
            let stats = statistics(&shuffled)?;
            Ok(observed
                .iter()
                .zip(&stats)
                .map(|(&o, &s)| usize::from(as_extreme(s, o, tails)))
                .collect::<Vec<usize>>())
        })
        .try_reduce(
            || vec![0; observed.len()],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
        )?;
    Ok(observed
        .iter()
        .zip(counts)
        .map(|(&statistic, count)| TestResult {
            statistic,
            p_value: (1 + count) as f64 / (1 + n) as f64,
            n_permutations: n,
            tails,
            seed,
        })
        .collect())
}
