use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry<T> {
    /// Final-layer hidden state at the position preceding `value`.
    pub key: Vec<T>,
    /// The token that followed.
    pub value: u32,
    pub surprisal_at_write: f64,
    pub write_step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreMode {
    /// Filled up front, then sealed against further writes.
    Static,
    /// Written online while inputs are processed.
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Euclidean distance.
    #[default]
    L2,
    /// One minus cosine similarity; a zero vector is at distance 1 from
    /// everything.
    Cosine,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::L2 => "l2",
            Metric::Cosine => "cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Metric::L2),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::Precondition(format!("unknown metric {other:?} (expected l2 or cosine)"))),
        }
    }
}

impl Metric {
    pub fn distance<T: Scalar>(self, a: &[T], b: &[T]) -> f64 {
        match self {
            Metric::L2 => a
                .iter()
                .zip(b)
                .map(|(&x, &y)| (x.f64() - y.f64()).powi(2))
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => {
                let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
                for (&x, &y) in a.iter().zip(b) {
                    let (x, y) = (x.f64(), y.f64());
                    ab += x * y;
                    aa += x * x;
                    bb += y * y;
                }
                if aa == 0.0 || bb == 0.0 {
                    1.0
                } else {
                    1.0 - (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<'a, T> {
    pub entry: &'a MemoryEntry<T>,
    pub distance: f64,
}

/// Append-ordered entries with optional capacity. When full, the entry
/// with the lowest write-time surprisal is evicted (oldest on ties).
#[derive(Debug, Clone)]
pub struct MemoryStore<T> {
    dim: usize,
    capacity: Option<usize>,
    mode: StoreMode,
    sealed: bool,
    entries: Vec<MemoryEntry<T>>,
    evictions: usize,
}

impl<T: Scalar> MemoryStore<T> {
    pub fn new(dim: usize, capacity: Option<usize>, mode: StoreMode) -> Self {
        MemoryStore {
            dim,
            capacity,
            mode,
            sealed: false,
            entries: Vec::new(),
            evictions: 0,
        }
    }

    pub fn dynamic(dim: usize, capacity: Option<usize>) -> Self {
        Self::new(dim, capacity, StoreMode::Dynamic)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MemoryEntry<T>] {
        &self.entries
    }

    pub fn mode(&self) -> StoreMode {
        self.mode
    }

    pub fn evictions(&self) -> usize {
        self.evictions
    }

    /// Freezes a static store; later writes fail.
    pub fn seal(&mut self) {
        if self.mode == StoreMode::Static {
            self.sealed = true;
        }
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    /// Appends `entry`, evicting first when at capacity. Returns `false`
    /// only for a zero-capacity store.
    pub fn write(&mut self, entry: MemoryEntry<T>) -> Result<bool> {
        if self.sealed {
            return Err(Error::SealedStore);
        }
        if entry.key.len() != self.dim {
            return Err(Error::DimensionMismatch(entry.key.len(), self.dim));
        }
        if !(entry.surprisal_at_write >= 0.0 && entry.surprisal_at_write.is_finite()) {
            return Err(Error::Precondition(format!(
                "surprisal_at_write must be finite and non-negative, got {}",
                entry.surprisal_at_write
            )));
        }
        match self.capacity {
            Some(0) => return Ok(false),
            Some(cap) if self.entries.len() >= cap => {
                let victim = self
                    .entries
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| {
                        a.surprisal_at_write
                            .total_cmp(&b.surprisal_at_write)
                            .then(a.write_step.cmp(&b.write_step))
                    })
                    .map(|(i, _)| i)
                    .expect("store at capacity is non-empty");
                self.entries.remove(victim);
                self.evictions += 1;
            }
            _ => {}
        }
        self.entries.push(entry);
        Ok(true)
    }

    /// Exact `k` nearest entries by `metric`, ascending distance, ties by
    /// `write_step`. An empty store yields an empty list.
    pub fn retrieve(&self, query: &[T], k: usize, metric: Metric) -> Result<Vec<Neighbor<'_, T>>> {
        if k == 0 {
            return Err(Error::Precondition("k must be at least 1".into()));
        }
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch(query.len(), self.dim));
        }
        let mut all: Vec<Neighbor<'_, T>> = self
            .entries
            .iter()
            .map(|entry| Neighbor {
                entry,
                distance: metric.distance(query, &entry.key),
            })
            .collect();
        all.sort_by(|a, b| {
            a.distance
                .total_cmp(&b.distance)
                .then(a.entry.write_step.cmp(&b.entry.write_step))
        });
        all.truncate(k);
        Ok(all)
    }
}
