//! Cumulative incidence under competing risks via discrete Aalen-Johansen.

use serde::Serialize;

use super::result::{EstimateResult, Scale};
use crate::data::Outcome;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::strategy::CompetingDataset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CifCurve<T> {
    /// Index t-1 holds the value at follow-up t.
    pub cif_pe: Vec<T>,
    pub cif_ce: Vec<T>,
    pub survival: Vec<T>,
    pub at_risk: Vec<usize>,
    pub n: usize,
    pub warnings: Vec<String>,
}

/// CIF_k(t) = sum_{u<=t} S(u-1) d_k(u) / n(u), with S the all-cause product-limit survival.
pub fn aalen_johansen<T: Scalar>(cds: &CompetingDataset<T>, arm: Option<u32>) -> Result<CifCurve<T>> {
    let subjects: Vec<_> = cds.subjects().iter().filter(|s| arm.map_or(true, |a| s.arm() == Some(a))).collect();
    if subjects.is_empty() {
        return Err(Error::EmptyArm(arm.unwrap_or(0)));
    }
    let k = cds.k();
    let (mut f1, mut f2, mut s) = (T::zero(), T::zero(), T::one());
    let mut out = CifCurve {
        cif_pe: Vec::with_capacity(k),
        cif_ce: Vec::with_capacity(k),
        survival: Vec::with_capacity(k),
        at_risk: Vec::with_capacity(k),
        n: subjects.len(),
        warnings: Vec::new(),
    };
    for t in 1..=k {
        let mut n = 0usize;
        let (mut d1, mut d2) = (0usize, 0usize);
        for r in &subjects {
            if r.at_risk(t) {
                n += 1;
                if r.y_pe[t - 1] == Outcome::Event {
                    d1 += 1;
                } else if r.y_ce[t - 1] == Outcome::Event {
                    d2 += 1;
                }
            }
        }
        if n == 0 {
            if out.warnings.is_empty() && s > T::zero() {
                out.warnings.push(format!("empty risk set from t = {t}; curves held flat"));
            }
        } else {
            let nf = T::from_count(n);
            let (h1, h2) = (T::from_count(d1) / nf, T::from_count(d2) / nf);
            f1 = f1 + s * h1;
            f2 = f2 + s * h2;
            s = s * (T::one() - h1 - h2);
            // Same value in exact arithmetic; this form makes CIF_PE = 1 - KM
            // hold to the last bit while no competing event has occurred.
            if f2 == T::zero() {
                f1 = T::one() - s;
            }
        }
        out.cif_pe.push(f1);
        out.cif_ce.push(f2);
        out.survival.push(s);
        out.at_risk.push(n);
    }
    Ok(out)
}

/// CIF of each cause at `horizon`, as (primary event, competing event).
pub fn aalen_johansen_cif<T: Scalar>(
    cds: &CompetingDataset<T>,
    arm: Option<u32>,
    horizon: usize,
) -> Result<(EstimateResult<T>, EstimateResult<T>)> {
    if horizon == 0 || horizon > cds.k() {
        return Err(Error::TimeOutOfRange { t: horizon, k: cds.k() });
    }
    let curve = aalen_johansen(cds, arm)?;
    let make = |label: &str, v: T| {
        let mut r = EstimateResult::new(format!("{label}({horizon})"), "aalen-johansen", horizon, Scale::Probability, v, curve.n);
        r.diagnostics.warnings = curve.warnings.clone();
        r
    };
    Ok((make("CIF_PE", curve.cif_pe[horizon - 1]), make("CIF_CE", curve.cif_ce[horizon - 1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SubjectRecord, Timeline, TrialDataset};
    use crate::strategy::{apply_competing_risk, IceRecord};

    #[test]
    fn hand_three_subjects() {
        let subjects = vec![
            SubjectRecord::<f64>::with_times("1", 0, vec![], 2, Some(1), None),
            SubjectRecord::with_times("2", 0, vec![], 2, None, None),
            SubjectRecord::with_times("3", 0, vec![], 2, None, None),
        ];
        let ds = TrialDataset::new(Timeline::new(2).unwrap(), vec![], vec![], subjects).unwrap();
        let cds = apply_competing_risk(&ds, &[IceRecord::new("2", "death", 2, true)], "death").unwrap();
        let c = aalen_johansen(&cds, None).unwrap();
        assert!((c.cif_pe[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.cif_ce[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.cif_pe[1] + c.cif_ce[1] + c.survival[1] - 1.0).abs() < 1e-15);
    }
}
