//! Rubin's rules.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledEstimate<T> {
    pub point: T,
    /// Mean of the per-imputation variances, W.
    pub within_var: T,
    /// Variance of the per-imputation points (denominator m - 1), B.
    pub between_var: T,
    /// W + (1 + 1/m) B.
    pub total_var: T,
    /// Degrees of freedom; infinite when B = 0.
    pub df: f64,
    pub ci95: (T, T),
    pub m: usize,
}

/// Pool `m >= 2` point estimates and their variances.
pub fn rubin_pool<T: Scalar>(points: &[T], variances: &[T]) -> Result<PooledEstimate<T>> {
    if points.len() != variances.len() {
        return Err(Error::Dimension(format!("{} points but {} variances", points.len(), variances.len())));
    }
    let m = points.len();
    if m < 2 {
        return Err(Error::TooFewImputations(m));
    }
    if points.iter().chain(variances).any(|v| !v.is_finite()) || variances.iter().any(|&v| v < T::zero()) {
        return Err(Error::Domain("points and variances must be finite, variances nonnegative".into()));
    }
    let mf = T::from_count(m);
    let point = points.iter().copied().sum::<T>() / mf;
    let within = variances.iter().copied().sum::<T>() / mf;
    let between = points.iter().map(|&p| (p - point) * (p - point)).sum::<T>() / (mf - T::one());
    let inflated = (T::one() + T::one() / mf) * between;
    let total = within + inflated;
    let df = if inflated > T::zero() {
        let r = (within / inflated).as_f64();
        (m as f64 - 1.0) * (1.0 + r) * (1.0 + r)
    } else {
        f64::INFINITY
    };
    // Past this the t quantile equals the normal one to ~1e-6, and the t
    // inverse CDF becomes very slow.
    let q = if df < 1e6 {
        StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Domain(e.to_string()))?.inverse_cdf(0.975)
    } else {
        Normal::new(0.0, 1.0).map_err(|e| Error::Domain(e.to_string()))?.inverse_cdf(0.975)
    };
    let half = T::lit(q) * total.sqrt();
    Ok(PooledEstimate {
        point,
        within_var: within,
        between_var: between,
        total_var: total,
        df,
        ci95: (point - half, point + half),
        m,
    })
}
