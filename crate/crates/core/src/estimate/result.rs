use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// A probability in [0, 1] (survival or cumulative incidence).
    Probability,
    /// A difference of two probabilities, in [-1, 1].
    Difference,
}

impl Scale {
    pub fn range<T: Scalar>(self) -> (T, T) {
        match self {
            Scale::Probability => (T::zero(), T::one()),
            Scale::Difference => (-T::one(), T::one()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics<T> {
    pub weight_min: Option<T>,
    pub weight_max: Option<T>,
    /// Probabilities raised to the truncation floor.
    pub truncated: usize,
    /// Every underlying model fit converged.
    pub converged: bool,
    pub separation: usize,
    /// Fluctuation coefficients of a targeting step, one per stage.
    pub fluctuation: Vec<T>,
    pub bootstrap_failures: usize,
    pub warnings: Vec<String>,
}

impl<T: Scalar> Diagnostics<T> {
    pub fn ok() -> Self {
        Diagnostics { converged: true, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult<T> {
    pub estimand: String,
    pub method: String,
    pub horizon: usize,
    pub scale: Scale,
    pub point: T,
    pub se: Option<T>,
    pub ci95: Option<(T, T)>,
    pub n_used: usize,
    pub diagnostics: Diagnostics<T>,
}

/// 0.975 standard normal quantile.
pub fn z975() -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.975)
}

/// Wald interval clipped to the scale's range.
pub fn wald_ci<T: Scalar>(point: T, se: T, scale: Scale) -> (T, T) {
    let half = T::lit(z975()) * se;
    let (lo, hi) = scale.range::<T>();
    ((point - half).max(lo), (point + half).min(hi))
}

impl<T: Scalar> EstimateResult<T> {
    pub fn new(estimand: impl Into<String>, method: impl Into<String>, horizon: usize, scale: Scale, point: T, n_used: usize) -> Self {
        EstimateResult {
            estimand: estimand.into(),
            method: method.into(),
            horizon,
            scale,
            point,
            se: None,
            ci95: None,
            n_used,
            diagnostics: Diagnostics::ok(),
        }
    }

    pub fn with_se(mut self, se: T) -> Self {
        self.se = Some(se);
        self.ci95 = Some(wald_ci(self.point, se, self.scale));
        self
    }

    pub fn in_range(&self) -> bool {
        let (lo, hi) = self.scale.range::<T>();
        self.point >= lo && self.point <= hi
    }
}

/// Regime contrast `e1 - e0` of two probability estimates at the same horizon
/// (survival under the first regime minus survival under the second). The
/// standard error assumes independent estimates; use a bootstrap over the
/// difference for paired inference.
pub fn contrast<T: Scalar>(e1: &EstimateResult<T>, e0: &EstimateResult<T>) -> Result<EstimateResult<T>> {
    if e1.scale != Scale::Probability || e0.scale != Scale::Probability {
        return Err(Error::InvalidSpec("contrast needs two probability-scale estimates".into()));
    }
    if e1.horizon != e0.horizon {
        return Err(Error::InvalidSpec(format!("horizons differ: {} vs {}", e1.horizon, e0.horizon)));
    }
    let point = e1.point - e0.point;
    let mut out = EstimateResult::new(
        format!("{} - {}", e1.estimand, e0.estimand),
        if e1.method == e0.method { e1.method.clone() } else { format!("{} / {}", e1.method, e0.method) },
        e1.horizon,
        Scale::Difference,
        point,
        e1.n_used + e0.n_used,
    );
    if let (Some(s1), Some(s0)) = (e1.se, e0.se) {
        out = out.with_se((s1 * s1 + s0 * s0).sqrt());
    }
    out.diagnostics.converged = e1.diagnostics.converged && e0.diagnostics.converged;
    out.diagnostics.warnings = e1.diagnostics.warnings.iter().chain(&e0.diagnostics.warnings).cloned().collect();
    Ok(out)
}
