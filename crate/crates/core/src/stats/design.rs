use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Regression design: named predictor columns, an outcome, and the ids of
/// the rows that survived listwise deletion.
#[derive(Debug, Clone, PartialEq)]
pub struct Design<T> {
    pub names: Vec<String>,
    /// Row-major `n × p`.
    pub predictors: Vec<T>,
    pub outcome: Vec<T>,
    pub row_ids: Vec<usize>,
    pub dropped_rows: usize,
}

impl<T: Scalar> Design<T> {
    /// Builds a design from rows with possibly missing cells; any row with a
    /// missing or non-finite cell is dropped and counted.
    pub fn from_rows<I>(names: Vec<String>, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, Vec<Option<T>>, Option<T>)>,
    {
        let p = names.len();
        let mut design = Design {
            names,
            predictors: Vec::new(),
            outcome: Vec::new(),
            row_ids: Vec::new(),
            dropped_rows: 0,
        };
        for (id, cells, y) in rows {
            if cells.len() != p {
                return Err(Error::DimensionMismatch(cells.len(), p));
            }
            let complete: Option<Vec<T>> = cells.into_iter().map(|c| c.filter(|v| v.is_finite())).collect();
            match (complete, y.filter(|v| v.is_finite())) {
                (Some(cells), Some(y)) => {
                    design.predictors.extend(cells);
                    design.outcome.push(y);
                    design.row_ids.push(id);
                }
                _ => design.dropped_rows += 1,
            }
        }
        if design.n() <= p {
            return Err(Error::Precondition(format!(
                "design has {} complete rows for {p} predictors",
                design.n()
            )));
        }
        Ok(design)
    }

    pub fn new(names: Vec<String>, predictors: Vec<T>, outcome: Vec<T>) -> Result<Self> {
        let n = outcome.len();
        let rows = (0..n).map(|i| {
            let cells = predictors[i * names.len()..(i + 1) * names.len()]
                .iter()
                .map(|&v| Some(v))
                .collect();
            (i, cells, Some(outcome[i]))
        });
        if predictors.len() != n * names.len() {
            return Err(Error::DimensionMismatch(predictors.len(), n * names.len()));
        }
        Self::from_rows(names.clone(), rows.collect::<Vec<_>>())
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.predictors[row * self.p() + col]
    }

    pub fn column(&self, col: usize) -> Vec<T> {
        (0..self.n()).map(|r| self.get(r, col)).collect()
    }

    /// Rows `indices` (repeats allowed), in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let p = self.p();
        let mut out = Design {
            names: self.names.clone(),
            predictors: Vec::with_capacity(indices.len() * p),
            outcome: Vec::with_capacity(indices.len()),
            row_ids: Vec::with_capacity(indices.len()),
            dropped_rows: self.dropped_rows,
        };
        for &i in indices {
            out.predictors.extend_from_slice(&self.predictors[i * p..(i + 1) * p]);
            out.outcome.push(self.outcome[i]);
            out.row_ids.push(self.row_ids[i]);
        }
        out
    }

    /// Centers each predictor and divides by its sample standard deviation
    /// (`n − 1` denominator). The outcome is left as is.
    pub fn zscore_columns(&self) -> Result<Self> {
        let (n, p) = (self.n(), self.p());
        let mut out = self.clone();
        for j in 0..p {
            let col = self.column(j);
            let mean = col.iter().copied().sum::<T>() / T::of(n as f64);
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::of((n - 1) as f64);
            let sd = var.sqrt();
            if !(sd > T::zero()) || sd <= mean.abs() * T::epsilon() * T::of(n as f64) {
                return Err(Error::DegeneratePredictor(self.names[j].clone()));
            }
            for (r, v) in col.iter().enumerate() {
                out.predictors[r * p + j] = (*v - mean) / sd;
            }
        }
        Ok(out)
    }
}

/// Values carrying a two-group label, for label-shuffle tests.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample<T> {
    pub values: Vec<T>,
    /// `true` marks the first group.
    pub labels: Vec<bool>,
}

impl<T: Scalar> GroupedSample<T> {
    pub fn new(first: &[T], second: &[T]) -> Self {
        GroupedSample {
            values: first.iter().chain(second).copied().collect(),
            labels: std::iter::repeat(true)
                .take(first.len())
                .chain(std::iter::repeat(false).take(second.len()))
                .collect(),
        }
    }

    /// Mean of the first group minus mean of the second.
    pub fn mean_difference(&self) -> f64 {
        let (mut s1, mut n1, mut s2, mut n2) = (0.0, 0usize, 0.0, 0usize);
        for (v, &l) in self.values.iter().zip(&self.labels) {
            if l {
                s1 += v.f64();
                n1 += 1;
            } else {
                s2 += v.f64();
                n2 += 1;
            }
        }
        s1 / n1 as f64 - s2 / n2 as f64
    }
}
