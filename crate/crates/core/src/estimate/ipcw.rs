//! Inverse probability of censoring weighting under a static regime.
//!
//! Within the population assigned `abar(0)`, a subject stays "uncensored" at
//! node u while C(u) is uncensored and, for u >= 1, A(u) = abar(u). Departure
//! from the regime is treated as artificial censoring.

use serde::{Deserialize, Serialize};

use super::design::{CovariateSpec, Form, LHistory};
use super::logistic::LogisticOptions;
use super::node::NodeModel;
use super::result::{Diagnostics, EstimateResult, Scale};
use crate::data::{Outcome, SubjectRecord, Treatment, TrialDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::strategy::RegimeSpec;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum CensorModel {
    /// One probability per follow-up within the arm.
    #[default]
    Saturated,
    /// A logistic model per follow-up on the given covariates.
    PerTimeLogistic { covariates: CovariateSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IpcwOptions {
    /// Lower bound applied to each per-node probability of staying uncensored.
    pub floor: f64,
}

impl Default for IpcwOptions {
    fn default() -> Self {
        IpcwOptions { floor: 0.01 }
    }
}

/// Subject is at risk at node u: no event by u, uncensored through C(u-1)
/// and on the regime through A(u-1).
pub(crate) fn at_node<T>(s: &SubjectRecord<T>, regime: &RegimeSpec, u: usize) -> bool {
    (u == 0 || (s.y[u - 1] == Outcome::Free && !s.c[u - 1].is_censored())) && regime.followed_by(s, u)
}

/// Stays uncensored and on the regime at node u.
pub(crate) fn remains<T>(s: &SubjectRecord<T>, regime: &RegimeSpec, u: usize) -> bool {
    s.a[u] == Treatment::Code(regime.at(u)) && !s.c[u].is_censored()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpcwCurve<T> {
    /// Weighted survival for t = 1..=horizon.
    pub survival: Vec<T>,
    /// Weights of subjects uncensored and on the regime through t, per t.
    pub weights: Vec<Vec<T>>,
    pub population: usize,
    pub diagnostics: Diagnostics<T>,
}

/// Weighted survival curve. Each subject still uncensored and on the regime
/// carries w = prod 1 / P(remain at u) over the nodes it passed; S(t) is the
/// w-weighted share of event-free subjects among those uncensored through t or
/// their event. With the saturated model this reproduces the product-limit
/// estimate exactly.
pub fn ipcw_curve<T: Scalar>(
    ds: &TrialDataset<T>,
    regime: &RegimeSpec,
    model: &CensorModel,
    horizon: usize,
    opts: &IpcwOptions,
) -> Result<IpcwCurve<T>> {
    regime.check_k(ds.k())?;
    if horizon == 0 || horizon > ds.k() {
        return Err(Error::TimeOutOfRange { t: horizon, k: ds.k() });
    }
    let pop: Vec<&SubjectRecord<T>> =
        ds.subjects().iter().filter(|s| s.a[0] == Treatment::Code(regime.at(0))).collect();
    if pop.is_empty() {
        return Err(Error::EmptyArm(regime.at(0)));
    }
    let (spec, form) = match model {
        CensorModel::Saturated => (CovariateSpec { baseline: Some(vec![]), time_varying: LHistory::None, form: Form::Saturated }, Form::Saturated),
        CensorModel::PerTimeLogistic { covariates } => (covariates.clone(), covariates.form),
    };
    let resolved = spec.resolve(ds.covariate_names(), ds.tv_covariate_names())?;
    let floor = T::lit(opts.floor);
    let lopts = LogisticOptions::default();

    let mut diag = Diagnostics::ok();
    // Running product of inverse probabilities; None once off the at-risk path.
    let mut cum: Vec<Option<T>> = vec![Some(T::one()); pop.len()];
    let mut survival = Vec::with_capacity(horizon);
    let mut weights = Vec::with_capacity(horizon);
    let mut done: Vec<Option<T>> = vec![None; pop.len()];
    for u in 0..horizon {
        let idx: Vec<usize> = (0..pop.len()).filter(|&i| cum[i].is_some() && at_node(pop[i], regime, u)).collect();
        let mut next = vec![None; pop.len()];
        if !idx.is_empty() {
            let raws = idx.iter().map(|&i| resolved.raw(pop[i], u)).collect::<Result<Vec<_>>>()?;
            let y: Vec<T> = idx.iter().map(|&i| if remains(pop[i], regime, u) { T::one() } else { T::zero() }).collect();
            let m = NodeModel::fit(form, &raws, &y, &lopts)?;
            diag.converged &= m.converged();
            diag.separation += usize::from(m.separation());
            for ((&i, raw), &stay) in idx.iter().zip(&raws).zip(&y) {
                if stay == T::zero() {
                    continue;
                }
                let mut p = m.predict(raw)?;
                if p < floor {
                    p = floor;
                    diag.truncated += 1;
                }
                next[i] = cum[i].map(|c| c / p);
            }
        }
        cum = next;
        let at_risk = cum.iter().any(Option::is_some);
        let t = u + 1;
        let (mut num, mut den) = (T::zero(), T::zero());
        let mut w_t = Vec::new();
        for (i, s) in pop.iter().enumerate() {
            if let Some(c) = cum[i] {
                den = den + c;
                w_t.push(c);
                if s.y_at(t) == Outcome::Free {
                    num = num + c;
                } else {
                    // Event observed: the weight is frozen from here on.
                    done[i] = Some(c);
                    cum[i] = None;
                }
            } else if let Some(c) = done[i] {
                den = den + c;
            }
        }
        let mut st = if at_risk && den > T::zero() {
            num / den
        } else {
            // Empty risk set: hold the curve, as the product-limit estimate does.
            diag.warnings.push(format!("no subject at risk at t = {t}; curve held flat"));
            survival.last().copied().unwrap_or_else(T::one)
        };
        if let Some(&prev) = survival.last() {
            if st > prev {
                st = prev;
                diag.warnings.push(format!("weighted curve increased at t = {t}; held at the previous value"));
            }
        }
        survival.push(st);
        weights.push(w_t);
    }
    if let Some(last) = weights.last() {
        diag.weight_min = last.iter().copied().reduce(T::min);
        diag.weight_max = last.iter().copied().reduce(T::max);
    }
    if diag.truncated > 0 {
        diag.warnings.push(format!("{} probabilities raised to the floor {}", diag.truncated, opts.floor));
    }
    Ok(IpcwCurve { survival, weights, population: pop.len(), diagnostics: diag })
}

/// IPCW estimate of S(horizon) under `regime`. No standard error is attached;
/// use [`bootstrap_se`](super::bootstrap::bootstrap_se) for inference.
pub fn ipcw_survival<T: Scalar>(
    ds: &TrialDataset<T>,
    regime: &RegimeSpec,
    model: &CensorModel,
    horizon: usize,
    opts: &IpcwOptions,
) -> Result<EstimateResult<T>> {
    let curve = ipcw_curve(ds, regime, model, horizon, opts)?;
    let point = curve.survival[horizon - 1];
    let mut r = EstimateResult::new(format!("S({horizon}) under {:?}", regime.abar()), "ipcw", horizon, Scale::Probability, point, curve.population);
    r.diagnostics = curve.diagnostics;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Timeline;
    use crate::estimate::km::kaplan_meier;

    fn ds(subjects: Vec<SubjectRecord<f64>>) -> TrialDataset<f64> {
        let k = subjects[0].k();
        TrialDataset::new(Timeline::new(k).unwrap(), vec![], vec![], subjects).unwrap()
    }

    #[test]
    fn no_censoring_gives_unit_weights() {
        let d = ds((0..6).map(|i| SubjectRecord::with_times(i.to_string(), 0, vec![], 3, (i < 2).then_some(i + 1), None)).collect());
        let r = ipcw_curve(&d, &RegimeSpec::constant(0, 3).unwrap(), &CensorModel::Saturated, 3, &IpcwOptions::default()).unwrap();
        assert!(r.weights.iter().flatten().all(|&w| w == 1.0));
        assert!((r.survival[2] - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn half_censored_at_first_node_doubles_weight() {
        let d = ds(vec![
            SubjectRecord::with_times("a", 0, vec![], 2, None, Some(1)),
            SubjectRecord::with_times("b", 0, vec![], 2, None, None),
        ]);
        let r = ipcw_curve(&d, &RegimeSpec::constant(0, 2).unwrap(), &CensorModel::Saturated, 1, &IpcwOptions::default()).unwrap();
        assert_eq!(r.weights[0], vec![2.0]);
        assert_eq!(r.survival[0], 1.0);
    }

    #[test]
    fn saturated_matches_product_limit() {
        let d = ds(vec![
            SubjectRecord::with_times("1", 0, vec![], 4, Some(1), None),
            SubjectRecord::with_times("2", 0, vec![], 4, None, Some(2)),
            SubjectRecord::with_times("3", 0, vec![], 4, Some(3), None),
            SubjectRecord::with_times("4", 0, vec![], 4, None, None),
            SubjectRecord::with_times("5", 0, vec![], 4, None, Some(4)),
            SubjectRecord::with_times("6", 0, vec![], 4, Some(4), None),
        ]);
        let r = ipcw_curve(&d, &RegimeSpec::constant(0, 4).unwrap(), &CensorModel::Saturated, 4, &IpcwOptions::default()).unwrap();
        let km = kaplan_meier(&d, Some(0)).unwrap();
        for t in 1..=4 {
            assert!((r.survival[t - 1] - km.at(t)).abs() < 1e-12, "t = {t}");
        }
    }
}
