//! Sequential discrete-hazard imputation models, one per follow-up.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Censoring, Outcome, SubjectRecord, TrialDataset};
use crate::error::{Error, Result};
use crate::estimate::design::{FeatureMap, Form};
use crate::estimate::linalg::{dot, Cholesky, Matrix};
use crate::estimate::logistic::{fit_logistic, LogisticOptions};
use crate::rng::stream_rng;
use crate::scalar::{expit, Scalar};

/// Covariates of the imputation models. Earlier outcomes enter through the
/// risk set: the model for Y(t) is fit on subjects with Y(t-1) = 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputationCovariates {
    /// Baseline covariates by name; `None` takes all.
    pub baseline: Option<Vec<String>>,
    /// Indicators of non-reference arm codes.
    pub arm: bool,
    /// Last observed L before t (carried forward).
    pub time_varying: bool,
    /// Main terms or main plus quadratic terms.
    pub form: Form,
}

impl Default for ImputationCovariates {
    fn default() -> Self {
        ImputationCovariates { baseline: None, arm: true, time_varying: true, form: Form::Main }
    }
}

#[derive(Debug, Clone)]
enum Hazard<T> {
    Logistic { map: FeatureMap, coefficients: Vec<T>, covariance: Option<Matrix<T>> },
    Rate(T),
}

#[derive(Debug, Clone)]
struct Layout<T> {
    w_idx: Vec<usize>,
    /// Arm codes with an indicator column (all codes present except the smallest).
    arm_codes: Vec<u32>,
    l_width: usize,
    /// Per t, L values used when a subject has no observed L before t.
    l_fill: Vec<Vec<T>>,
}

/// P(Y(t) = 1 | Y(t-1) = 0, W, arm, L) for t = 1..K.
#[derive(Debug, Clone)]
pub struct ImputationModels<T> {
    hazards: Vec<Hazard<T>>,
    layout: Layout<T>,
    pub warnings: Vec<String>,
}

/// L(u) for the latest u < t with L observed.
fn last_l<T: Scalar>(s: &SubjectRecord<T>, t: usize) -> Option<&Vec<T>> {
    (1..t).rev().find_map(|u| s.l.get(u - 1).and_then(Option::as_ref))
}

impl<T: Scalar> Layout<T> {
    fn raw(&self, s: &SubjectRecord<T>, t: usize) -> Vec<T> {
        let mut v: Vec<T> = self.w_idx.iter().map(|&j| s.w[j]).collect();
        let arm = s.arm();
        v.extend(self.arm_codes.iter().map(|&c| if arm == Some(c) { T::one() } else { T::zero() }));
        if self.l_width > 0 && t >= 2 {
            match last_l(s, t) {
                Some(l) => v.extend_from_slice(l),
                None => v.extend_from_slice(&self.l_fill[t - 1]),
            }
        }
        v
    }
}

impl<T: Scalar> ImputationModels<T> {
    pub fn k(&self) -> usize {
        self.hazards.len()
    }

    /// Models imputing with the same probability `p` at every follow-up.
    pub fn constant(k: usize, p: T) -> Self {
        ImputationModels {
            hazards: vec![Hazard::Rate(p); k],
            layout: Layout { w_idx: vec![], arm_codes: vec![], l_width: 0, l_fill: vec![vec![]; k] },
            warnings: vec![],
        }
    }

    /// Coefficients of the follow-up-t model, or `None` where it fell back to a rate.
    pub fn coefficients(&self, t: usize) -> Option<&[T]> {
        match &self.hazards[t - 1] {
            Hazard::Logistic { coefficients, .. } => Some(coefficients),
            Hazard::Rate(_) => None,
        }
    }

    pub fn probability(&self, s: &SubjectRecord<T>, t: usize) -> Result<T> {
        match &self.hazards[t - 1] {
            Hazard::Rate(p) => Ok(*p),
            Hazard::Logistic { map, coefficients, .. } => {
                let x = map
                    .row(&self.layout.raw(s, t))
                    .ok_or_else(|| Error::Domain("covariate pattern outside the imputation model".into()))?;
                Ok(expit(dot(&x, coefficients)))
            }
        }
    }

    /// One posterior-approximating draw: beta* ~ N(beta, Cov) per follow-up.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut out = self.clone();
        for h in &mut out.hazards {
            if let Hazard::Logistic { coefficients, covariance: Some(cov), .. } = h {
                if let Ok(ch) = Cholesky::new(cov, T::epsilon()) {
                    let z: Vec<T> = (0..coefficients.len()).map(|_| T::std_normal(rng)).collect();
                    let f = ch.factor();
                    for (a, b) in coefficients.iter_mut().enumerate() {
                        *b = *b + (0..=a).fold(T::zero(), |acc, c| acc + f.get(a, c) * z[c]);
                    }
                }
            }
        }
        out
    }
}

/// Fit the follow-up models in t order on subjects event-free at t-1 with Y(t)
/// observed. A follow-up with one response level, no rows or a singular design
/// falls back to an empirical rate.
pub fn fit_imputation_models<T: Scalar>(ds: &TrialDataset<T>, cov: &ImputationCovariates) -> Result<ImputationModels<T>> {
    if cov.form == Form::Saturated {
        return Err(Error::InvalidSpec("imputation models take main or quadratic terms".into()));
    }
    let names = ds.covariate_names();
    let w_idx = match &cov.baseline {
        None => (0..names.len()).collect(),
        Some(sel) => sel
            .iter()
            .map(|n| names.iter().position(|c| c == n).ok_or_else(|| Error::UnknownColumn(format!("W_{n}"))))
            .collect::<Result<Vec<_>>>()?,
    };
    let arms = ds.arms();
    let arm_codes = if cov.arm { arms.iter().skip(1).copied().collect() } else { vec![] };
    let l_width = if cov.time_varying { ds.tv_covariate_names().len() } else { 0 };
    let k = ds.k();
    let mut layout = Layout { w_idx, arm_codes, l_width, l_fill: vec![vec![T::zero(); l_width]; k] };

    let rows_at = |t: usize| -> Vec<&SubjectRecord<T>> {
        ds.subjects()
            .iter()
            .filter(|s| (t == 1 || s.y_at(t - 1) == Outcome::Free) && s.y_at(t) != Outcome::Na)
            .collect()
    };
    let (mut events, mut total) = (0usize, 0usize);
    for t in 1..=k {
        for s in rows_at(t) {
            total += 1;
            events += usize::from(s.y_at(t) == Outcome::Event);
        }
    }
    let pooled = if total > 0 { T::from_count(events) / T::from_count(total) } else { T::zero() };

    let opts = LogisticOptions::default();
    let mut hazards = Vec::with_capacity(k);
    let mut warnings = Vec::new();
    for t in 1..=k {
        let rows = rows_at(t);
        if l_width > 0 && t >= 2 {
            let obs: Vec<&Vec<T>> = rows.iter().filter_map(|s| last_l(s, t)).collect();
            if !obs.is_empty() {
                let n = T::from_count(obs.len());
                layout.l_fill[t - 1] = (0..l_width).map(|c| obs.iter().map(|l| l[c]).sum::<T>() / n).collect();
            }
        }
        if rows.is_empty() {
            warnings.push(format!("t = {t}: no observed rows; using the pooled hazard"));
            hazards.push(Hazard::Rate(pooled));
            continue;
        }
        let y: Vec<T> = rows.iter().map(|s| if s.y_at(t) == Outcome::Event { T::one() } else { T::zero() }).collect();
        let rate = y.iter().copied().sum::<T>() / T::from_count(y.len());
        if y.iter().all(|&v| v == y[0]) {
            warnings.push(format!("t = {t}: single response level; imputing at the empirical rate"));
            hazards.push(Hazard::Rate(rate));
            continue;
        }
        let raws: Vec<Vec<T>> = rows.iter().map(|s| layout.raw(s, t)).collect();
        let map = FeatureMap::build(cov.form, &raws);
        let fit = map.matrix(&raws).and_then(|x| fit_logistic(&x, &y, None, &opts));
        match fit {
            Ok(f) => {
                if f.separation {
                    warnings.push(format!("t = {t}: separation; coefficients capped"));
                }
                hazards.push(Hazard::Logistic { map, coefficients: f.coefficients, covariance: f.covariance });
            }
            Err(e) => {
                warnings.push(format!("t = {t}: {e}; imputing at the empirical rate"));
                hazards.push(Hazard::Rate(rate));
            }
        }
    }
    Ok(ImputationModels { hazards, layout, warnings })
}

/// Fill the NA tail of one record forward in time, then mark it uncensored
/// and carry L forward.
pub(crate) fn impute_subject<T: Scalar, R: Rng + ?Sized>(
    models: &ImputationModels<T>,
    s: &SubjectRecord<T>,
    rng: &mut R,
) -> Result<SubjectRecord<T>> {
    let mut r = s.clone();
    if let Some(first) = r.y.iter().position(|y| y.is_na()) {
        for t in first + 1..=r.k() {
            if t >= 2 && r.y_at(t - 1) == Outcome::Event {
                r.y[t - 1] = Outcome::Event;
                continue;
            }
            let p = models.probability(&r, t)?;
            r.y[t - 1] = Outcome::from_flag(T::unit_open(rng) < p);
        }
    }
    complete_record(&mut r);
    Ok(r)
}

/// Mark every node uncensored and fill missing L by carrying the last value forward.
pub(crate) fn complete_record<T: Scalar>(r: &mut SubjectRecord<T>) {
    r.c.iter_mut().for_each(|c| *c = Censoring::Uncensored);
    let mut last: Option<Vec<T>> = None;
    for cell in &mut r.l {
        match cell {
            Some(v) => last = Some(v.clone()),
            None => *cell = last.clone(),
        }
    }
}

/// Single imputation of every NA cell with `models` as given (no parameter draw).
/// Subject i draws from stream (seed, i).
pub fn impute_car<T: Scalar>(ds: &TrialDataset<T>, models: &ImputationModels<T>, seed: u64) -> Result<TrialDataset<T>> {
    if models.k() != ds.k() {
        return Err(Error::Dimension(format!("models cover K = {}, data K = {}", models.k(), ds.k())));
    }
    let subjects = ds
        .subjects()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.has_na() {
                impute_subject(models, s, &mut stream_rng(seed, i as u64))
            } else {
                Ok(s.clone())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ds.with_subjects(subjects)
}
