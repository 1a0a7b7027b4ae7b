use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Interpolated {
    pub probs: Vec<f64>,
    /// No neighbors were available while `lambda > 0`; `probs` is `p_lm`.
    pub fell_back: bool,
}

/// `λ·p_knn + (1 − λ)·p_lm`, where `p_knn(w) ∝ Σ exp(−d/τ)` over neighbors
/// whose value is `w`. `neighbors` holds `(value, distance)` pairs.
pub fn interpolate(p_lm: &[f64], neighbors: &[(u32, f64)], lambda: f64, tau: f64) -> Result<Interpolated> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Precondition(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Precondition(format!("tau must be positive, got {tau}")));
    }
    if let Some(&(v, _)) = neighbors.iter().find(|(v, _)| *v as usize >= p_lm.len()) {
        return Err(Error::OutOfRange {
            what: "neighbor value",
            index: v as usize,
            range: format!("[0, {})", p_lm.len()),
        });
    }
    if lambda == 0.0 || neighbors.is_empty() {
        return Ok(Interpolated {
            probs: p_lm.to_vec(),
            fell_back: lambda > 0.0,
        });
    }

    let d_min = neighbors.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
    let mut knn = vec![0.0; p_lm.len()];
    let mut total = 0.0;
    for &(v, d) in neighbors {
        let w = (-(d - d_min) / tau).exp();
        knn[v as usize] += w;
        total += w;
    }
    let probs = p_lm
        .iter()
        .zip(&knn)
        .map(|(&p, &k)| lambda * (k / total) + (1.0 - lambda) * p)
        .collect();
    Ok(Interpolated {
        probs,
        fell_back: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lambda_zero_is_identity() {
        let p = [0.1, 0.2, 0.7];
        let out = interpolate(&p, &[(0, 0.3)], 0.0, 1.0).unwrap();
        assert_eq!(out.probs, p);
        assert!(!out.fell_back);
    }

    #[test]
    fn lambda_one_single_neighbor_is_one_hot() {
        let out = interpolate(&[0.25; 4], &[(2, 5.0)], 1.0, 1.0).unwrap();
        assert_eq!(out.probs, [0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_neighbor_closed_form() {
        let tau = 0.7;
        let out = interpolate(&[0.5, 0.5, 0.0], &[(0, 0.0), (1, 2f64.ln() * tau)], 1.0, tau).unwrap();
        assert!((out.probs[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((out.probs[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_neighbors_fall_back() {
        let out = interpolate(&[0.5, 0.5], &[], 0.3, 1.0).unwrap();
        assert!(out.fell_back);
        assert_eq!(out.probs, [0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(interpolate(&[1.0], &[], 1.5, 1.0).is_err());
        assert!(interpolate(&[1.0], &[], 0.5, 0.0).is_err());
        assert!(interpolate(&[1.0], &[(3, 0.0)], 0.5, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn normalized_and_affine(raw in proptest::collection::vec(0.01f64..1.0, 5),
                                 nb in proptest::collection::vec((0u32..5, 0.0f64..10.0), 1..6),
                                 lambda in 0.0f64..=1.0, tau in 0.1f64..5.0) {
            let total: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let mixed = interpolate(&p, &nb, lambda, tau).unwrap().probs;
            prop_assert!((mixed.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            let knn = interpolate(&p, &nb, 1.0, tau).unwrap().probs;
            for i in 0..p.len() {
                prop_assert!((mixed[i] - (p[i] + lambda * (knn[i] - p[i]))).abs() < 1e-12);
            }
        }
    }
}
