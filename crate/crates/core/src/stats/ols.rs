use serde::Serialize;

use super::design::Design;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize)]
pub struct RegressionResult<T> {
    pub names: Vec<String>,
    pub intercept: T,
    pub beta: Vec<T>,
    pub r_squared: T,
    pub n_used: usize,
    pub dropped_rows: usize,
    #[serde(skip)]
    pub residuals: Vec<T>,
}

/// Least squares with an intercept column prepended, solved by Householder
/// QR on the `n × (p + 1)` design.
pub fn ols_fit<T: Scalar>(design: &Design<T>) -> Result<RegressionResult<T>> {
    let (n, p) = (design.n(), design.p());
    let m = p + 1;
    if n < m {
        return Err(Error::SingularDesign(format!("{n} rows for {m} coefficients")));
    }

    // column-major copy of [1 | X]
    let mut a = vec![T::zero(); n * m];
    for r in 0..n {
        a[r] = T::one();
        for c in 0..p {
            a[(c + 1) * n + r] = design.get(r, c);
        }
    }
    let col_norms: Vec<T> = (0..m)
        .map(|c| a[c * n..(c + 1) * n].iter().map(|&v| v * v).sum::<T>().sqrt())
        .collect();
    let mut b = design.outcome.clone();
    let tol = T::epsilon().sqrt() * T::of(1e-2);

    for j in 0..m {
        let norm = a[j * n + j..(j + 1) * n].iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm <= tol * col_norms[j] || norm == T::zero() {
            let name = if j == 0 { "intercept" } else { design.names[j - 1].as_str() };
            return Err(Error::SingularDesign(format!(
                "column {name:?} is (numerically) a combination of earlier columns"
            )));
        }
        let x0 = a[j * n + j];
        let alpha = if x0 > T::zero() { -norm } else { norm };
        // v = x - alpha e1, stored in place; R_jj = alpha
        let mut v: Vec<T> = a[j * n + j..(j + 1) * n].to_vec();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        let reflect = |col: &mut [T]| {
            let s = v.iter().zip(col.iter()).map(|(&vi, &ci)| vi * ci).sum::<T>();
            let f = T::of(2.0) * s / vnorm2;
            col.iter_mut().zip(&v).for_each(|(c, &vi)| *c -= f * vi);
        };
        for c in j + 1..m {
            reflect(&mut a[c * n + j..(c + 1) * n]);
        }
        reflect(&mut b[j..]);
        a[j * n + j] = alpha;
        a[j * n + j + 1..(j + 1) * n].iter_mut().for_each(|x| *x = T::zero());
    }

    // back-substitute R coef = Qᵀy
    let mut coef = vec![T::zero(); m];
    for i in (0..m).rev() {
        let mut s = b[i];
        for c in i + 1..m {
            s -= a[c * n + i] * coef[c];
        }
        coef[i] = s / a[i * n + i];
    }

    let residuals: Vec<T> = (0..n)
        .map(|r| {
            let fitted = coef[0] + (0..p).map(|c| coef[c + 1] * design.get(r, c)).sum::<T>();
            design.outcome[r] - fitted
        })
        .collect();
    let mean_y = design.outcome.iter().copied().sum::<T>() / T::of(n as f64);
    let ss_tot: T = design.outcome.iter().map(|&y| (y - mean_y) * (y - mean_y)).sum();
    let ss_res: T = residuals.iter().map(|&e| e * e).sum();
    let r_squared = if ss_tot > T::zero() {
        (T::one() - ss_res / ss_tot).max(T::zero()).min(T::one())
    } else {
        return Err(Error::Precondition("outcome has zero variance".into()));
    };

    Ok(RegressionResult {
        names: design.names.clone(),
        intercept: coef[0],
        beta: coef[1..].to_vec(),
        r_squared,
        n_used: n,
        dropped_rows: design.dropped_rows,
        residuals,
    })
}

/// Pearson correlation, accumulated in `f64`.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().map(|v| v.f64()).sum::<f64>() / n;
    let my = y.iter().map(|v| v.f64()).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a.f64() - mx, b.f64() - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let d: Design<f64> = Design::new(vec!["x".into()], vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        let fit = ols_fit(&d).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_outcome_has_zero_r2() {
        // x centered, y centered and orthogonal to x
        let d: Design<f64> = Design::new(vec!["x".into()], vec![-1.0, 0.0, 1.0, 0.0], vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let fit = ols_fit(&d).unwrap();
        assert!(fit.r_squared.abs() < 1e-10);
    }

    #[test]
    fn collinear_columns_are_singular() {
        let d = Design::new(
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0],
            vec![1.0, 3.0, 2.0, 5.0],
        )
        .unwrap();
        assert!(matches!(ols_fit(&d), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let d = Design::<f32>::new(vec!["x".into()], vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 3.0, 5.0, 7.0]).unwrap();
        let fit = ols_fit(&d).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-5);
        assert!((fit.intercept - 1.0).abs() < 1e-5);
    }
}
