//! Discrete-time product-limit survival with Greenwood standard errors.

use serde::Serialize;

use super::result::{EstimateResult, Scale};
use crate::data::{Outcome, TrialDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint<T> {
    pub t: usize,
    pub survival: T,
    pub se: T,
    pub at_risk: usize,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve<T> {
    pub points: Vec<CurvePoint<T>>,
    pub n: usize,
}

impl<T: Scalar> SurvivalCurve<T> {
    /// S(t) for t in 0..=K.
    pub fn at(&self, t: usize) -> T {
        if t == 0 {
            T::one()
        } else {
            self.points[t - 1].survival
        }
    }

    pub fn estimate(&self, t: usize, label: &str) -> Result<EstimateResult<T>> {
        if t == 0 || t > self.points.len() {
            return Err(Error::TimeOutOfRange { t, k: self.points.len() });
        }
        let p = self.points[t - 1];
        Ok(EstimateResult::new(label, "kaplan-meier", t, Scale::Probability, p.survival, self.n).with_se(p.se))
    }
}

/// Product-limit estimate over discrete risk sets, optionally within one arm.
pub fn kaplan_meier<T: Scalar>(ds: &TrialDataset<T>, arm: Option<u32>) -> Result<SurvivalCurve<T>> {
    let subjects: Vec<_> = ds.subjects().iter().filter(|s| arm.map_or(true, |a| s.arm() == Some(a))).collect();
    if subjects.is_empty() {
        return Err(Error::EmptyArm(arm.unwrap_or(0)));
    }
    let k = ds.k();
    let mut s = T::one();
    let mut green = T::zero();
    let mut points = Vec::with_capacity(k);
    for t in 1..=k {
        let mut n = 0usize;
        let mut d = 0usize;
        for subj in &subjects {
            if subj.at_risk(t) {
                n += 1;
                if subj.y_at(t) == Outcome::Event {
                    d += 1;
                }
            }
        }
        if n > 0 && d > 0 {
            let (nf, df) = (T::from_count(n), T::from_count(d));
            s = s * (T::one() - df / nf);
            if n > d {
                green = green + df / (nf * (nf - df));
            }
        }
        let se = if s > T::zero() { s * green.sqrt() } else { T::zero() };
        points.push(CurvePoint { t, survival: s, se, at_risk: n, events: d });
    }
    Ok(SurvivalCurve { points, n: subjects.len() })
}
