use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// Which positions get written to memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncodingPolicy {
    /// Write when surprisal (nats) is at least `theta`.
    Threshold { theta: f64 },
    /// Write when surprisal reaches the running `1 − fraction` quantile of
    /// the surprisals observed before it.
    TopFraction { fraction: f64 },
    Always,
    Never,
}

impl EncodingPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EncodingPolicy::Threshold { theta } if !(theta >= 0.0 && theta.is_finite()) => {
                Err(Error::Precondition(format!("threshold must be finite and non-negative, got {theta}")))
            }
            EncodingPolicy::TopFraction { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                Err(Error::Precondition(format!("fraction must lie in (0, 1], got {fraction}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for EncodingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncodingPolicy::Threshold { theta } => write!(f, "threshold(theta={theta})"),
            EncodingPolicy::TopFraction { fraction } => write!(f, "top_fraction({fraction})"),
            EncodingPolicy::Always => f.write_str("always"),
            EncodingPolicy::Never => f.write_str("never"),
        }
    }
}

/// Surprisals seen so far, kept sorted for quantile queries.
#[derive(Debug, Clone, Default)]
pub struct RunningStats {
    sorted: Vec<f64>,
}

impl RunningStats {
    pub fn observe(&mut self, surprisal: f64) {
        let at = self.sorted.partition_point(|&x| x <= surprisal);
        self.sorted.insert(at, surprisal);
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn quantile(&self, q: f64) -> Option<f64> {
        (!self.sorted.is_empty()).then(|| quantile_sorted(&self.sorted, q))
    }
}

/// Gate decision for one position. `stats` holds the history before this
/// position; with no history, `TopFraction` writes.
pub fn write_gate(policy: &EncodingPolicy, surprisal: f64, stats: &RunningStats) -> bool {
    match *policy {
        EncodingPolicy::Threshold { theta } => surprisal >= theta,
        EncodingPolicy::TopFraction { fraction } => stats
            .quantile(1.0 - fraction)
            .map_or(true, |cut| surprisal >= cut),
        EncodingPolicy::Always => true,
        EncodingPolicy::Never => false,
    }
}
