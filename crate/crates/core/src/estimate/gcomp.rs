//! Sequential-regression g-computation (iterated conditional expectations)
//! for `S(t*)` under a static regime, with an optional targeting step.
//!
//! Stage t regresses the pseudo-outcome on (W, L(1..t-1)) among subjects at
//! risk at t, uncensored through C(t-1) and on the regime through A(t-1).
//! The pseudo-outcome is Y(t*) at the last stage and otherwise 1 if Y(t) = 1,
//! else the next stage's prediction. The regime filter fixes A, so treatment
//! does not enter the design.

use serde::Serialize;

use super::design::{CovariateSpec, ResolvedSpec};
use super::ipcw::{at_node, remains};
use super::logistic::{fit_logistic_offset, LogisticOptions};
use super::linalg::Matrix;
use super::node::NodeModel;
use super::result::{Diagnostics, EstimateResult, Scale};
use crate::data::{Outcome, SubjectRecord, TrialDataset};
use crate::error::{Error, Result};
use crate::scalar::{expit, logit, Scalar};
use crate::strategy::RegimeSpec;

const LOGIT_BOUND: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct GcompProblem<'a, T> {
    pub data: &'a TrialDataset<T>,
    pub regime: &'a RegimeSpec,
    pub horizon: usize,
    pub covariates: CovariateSpec,
    pub logistic: LogisticOptions<T>,
}

impl<'a, T: Scalar> GcompProblem<'a, T> {
    pub fn new(data: &'a TrialDataset<T>, regime: &'a RegimeSpec, horizon: usize, covariates: CovariateSpec) -> Self {
        GcompProblem { data, regime, horizon, covariates, logistic: LogisticOptions::default() }
    }

    fn check(&self) -> Result<ResolvedSpec> {
        self.regime.check_k(self.data.k())?;
        if self.horizon == 0 || self.horizon > self.data.k() {
            return Err(Error::TimeOutOfRange { t: self.horizon, k: self.data.k() });
        }
        if self.data.is_empty() {
            return Err(Error::InvalidDataset("no subjects".into()));
        }
        self.covariates.resolve(self.data.covariate_names(), self.data.tv_covariate_names())
    }
}

/// Fitting set of stage t.
fn in_stage<T: Scalar>(s: &SubjectRecord<T>, regime: &RegimeSpec, t: usize) -> bool {
    s.at_risk(t) && regime.followed_by(s, t)
}

/// Subjects whose stage-t prediction feeds the stage below: everyone at t = 1,
/// otherwise those in stage t-1 still event-free at t-1.
fn needs_prediction<T: Scalar>(s: &SubjectRecord<T>, regime: &RegimeSpec, t: usize) -> bool {
    t == 1 || (in_stage(s, regime, t - 1) && s.y_at(t - 1) == Outcome::Free)
}

/// Cumulative probabilities of staying uncensored and on the regime:
/// `gcum[u][i] = prod_{v<=u} g_v(i)` for subjects still on the path after node u.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulativeWeights<T> {
    pub gcum: Vec<Vec<Option<T>>>,
    pub floor: f64,
    pub truncated: usize,
}

/// Fit the per-node models of `1{A(u) = abar(u), C(u) uncensored}` among
/// subjects at risk at node u, u = 0..horizon-1, and accumulate.
pub fn fit_cumulative_weights<T: Scalar>(
    problem: &GcompProblem<'_, T>,
    g_covariates: &CovariateSpec,
    floor: f64,
) -> Result<CumulativeWeights<T>> {
    problem.check()?;
    let ds = problem.data;
    let regime = problem.regime;
    let spec = g_covariates.resolve(ds.covariate_names(), ds.tv_covariate_names())?;
    let n = ds.len();
    let mut running: Vec<Option<T>> = vec![Some(T::one()); n];
    let mut gcum = Vec::with_capacity(problem.horizon);
    let mut truncated = 0;
    let fl = T::lit(floor);
    for u in 0..problem.horizon {
        let idx: Vec<usize> = (0..n).filter(|&i| running[i].is_some() && at_node(&ds.subjects()[i], regime, u)).collect();
        let mut next = vec![None; n];
        if !idx.is_empty() {
            let raws = idx.iter().map(|&i| spec.raw(&ds.subjects()[i], u)).collect::<Result<Vec<_>>>()?;
            let y: Vec<T> =
                idx.iter().map(|&i| if remains(&ds.subjects()[i], regime, u) { T::one() } else { T::zero() }).collect();
            let m = NodeModel::fit(g_covariates.form, &raws, &y, &problem.logistic)?;
            for ((&i, raw), &stay) in idx.iter().zip(&raws).zip(&y) {
                if stay == T::zero() {
                    continue;
                }
                let mut g = running[i].unwrap_or_else(T::one) * m.predict(raw)?;
                if g < fl {
                    g = fl;
                    truncated += 1;
                }
                next[i] = Some(g);
            }
        }
        gcum.push(next.clone());
        running = next;
    }
    Ok(CumulativeWeights { gcum, floor, truncated })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageSummary<T> {
    pub t: usize,
    pub n_fit: usize,
    pub converged: bool,
    pub separation: bool,
    /// Fluctuation coefficient when targeted.
    pub epsilon: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GcompFit<T> {
    pub result: EstimateResult<T>,
    pub stages: Vec<StageSummary<T>>,
    /// Stage-1 predictions of P(event by t*), one per subject.
    pub predictions: Vec<T>,
}

fn clamp_logit<T: Scalar>(p: T) -> T {
    let b = T::lit(LOGIT_BOUND);
    logit(p).max(-b).min(b)
}

fn recursion<T: Scalar>(problem: &GcompProblem<'_, T>, weights: Option<&CumulativeWeights<T>>) -> Result<GcompFit<T>> {
    let spec = problem.check()?;
    let ds = problem.data;
    let regime = problem.regime;
    let subjects = ds.subjects();
    let n = subjects.len();
    if let Some(w) = weights {
        if w.gcum.len() < problem.horizon || w.gcum.iter().any(|g| g.len() != n) {
            return Err(Error::Dimension("cumulative weights do not match the problem".into()));
        }
    }
    let mut next_q: Vec<Option<T>> = vec![None; n];
    let mut stages = Vec::with_capacity(problem.horizon);
    let mut ic = vec![T::zero(); n];
    let mut fluct_failed = false;

    for t in (1..=problem.horizon).rev() {
        let fit_idx: Vec<usize> = (0..n).filter(|&i| in_stage(&subjects[i], regime, t)).collect();
        if fit_idx.is_empty() {
            return Err(Error::NotIdentifiable { stage: t, reason: "no regime-consistent subjects at risk".into() });
        }
        let z: Vec<T> = fit_idx
            .iter()
            .map(|&i| {
                let s = &subjects[i];
                match s.y_at(t) {
                    Outcome::Event => Ok(T::one()),
                    Outcome::Free if t == problem.horizon => Ok(T::zero()),
                    Outcome::Free => next_q[i].ok_or_else(|| Error::NotIdentifiable {
                        stage: t + 1,
                        reason: format!("no prediction for subject `{}`", s.id),
                    }),
                    Outcome::Na => Err(Error::InvalidDataset(format!("subject `{}`: Y({t}) is NA while uncensored", s.id))),
                }
            })
            .collect::<Result<_>>()?;
        let raws = fit_idx.iter().map(|&i| spec.raw(&subjects[i], t - 1)).collect::<Result<Vec<_>>>()?;
        let model = NodeModel::fit(spec.form(), &raws, &z, &problem.logistic)
            .map_err(|e| Error::NotIdentifiable { stage: t, reason: e.to_string() })?;

        // Predictions over the fitting set and the set the next stage down needs.
        let mut q: Vec<Option<T>> = vec![None; n];
        for i in 0..n {
            let s = &subjects[i];
            if in_stage(s, regime, t) || needs_prediction(s, regime, t) {
                let p = model
                    .predict(&spec.raw(s, t - 1)?)
                    .map_err(|e| Error::NotIdentifiable { stage: t, reason: format!("subject `{}`: {e}", s.id) })?;
                q[i] = Some(p);
            }
        }

        let mut epsilon = None;
        if let Some(w) = weights {
            let h: Vec<T> = fit_idx
                .iter()
                .map(|&i| {
                    w.gcum[t - 1][i].map(|g| T::one() / g).ok_or_else(|| Error::NotIdentifiable {
                        stage: t,
                        reason: format!("no weight for subject `{}`", subjects[i].id),
                    })
                })
                .collect::<Result<_>>()?;
            let offset: Vec<T> = fit_idx.iter().map(|&i| clamp_logit(q[i].unwrap_or_else(T::zero))).collect();
            let x = Matrix::from_vec(fit_idx.len(), 1, vec![T::one(); fit_idx.len()])?;
            let eps = match fit_logistic_offset(&x, &z, Some(&h), Some(&offset), &problem.logistic) {
                Ok(f) if f.converged && !f.separation => f.coefficients[0],
                _ => {
                    fluct_failed = true;
                    T::zero()
                }
            };
            for qi in q.iter_mut().flatten() {
                *qi = expit(clamp_logit(*qi) + eps);
            }
            for (k, &i) in fit_idx.iter().enumerate() {
                ic[i] = ic[i] + h[k] * (z[k] - q[i].unwrap_or_else(T::zero));
            }
            epsilon = Some(eps);
        }

        stages.push(StageSummary {
            t,
            n_fit: fit_idx.len(),
            converged: model.converged(),
            separation: model.separation(),
            epsilon,
        });
        next_q = q;
    }
    stages.reverse();

    let predictions: Vec<T> = next_q.iter().map(|q| q.unwrap_or_else(T::zero)).collect();
    let nf = T::from_count(n);
    let psi = predictions.iter().copied().sum::<T>() / nf;
    let point = T::one() - psi;
    let method = if weights.is_some() { "tmle (one logistic fluctuation per stage)" } else { "seq-gcomp" };
    let mut result = EstimateResult::new(
        format!("S({}) under {:?}", problem.horizon, regime.abar()),
        method,
        problem.horizon,
        Scale::Probability,
        point,
        n,
    );
    let mut diag = Diagnostics::ok();
    diag.converged = stages.iter().all(|s| s.converged);
    diag.separation = stages.iter().filter(|s| s.separation).count();
    if let Some(w) = weights {
        diag.fluctuation = stages.iter().filter_map(|s| s.epsilon).collect();
        diag.truncated = w.truncated;
        let all: Vec<T> = w.gcum.iter().take(problem.horizon).flatten().flatten().map(|&g| T::one() / g).collect();
        diag.weight_min = all.iter().copied().reduce(T::min);
        diag.weight_max = all.iter().copied().reduce(T::max);
        if fluct_failed {
            diag.converged = false;
            diag.warnings.push("fluctuation did not converge at some stage; that stage was left untargeted".into());
        }
        let var = predictions
            .iter()
            .zip(&ic)
            .map(|(&q, &d)| {
                let v = d + q - psi;
                v * v
            })
            .sum::<T>()
            / nf;
        result = result.with_se((var / nf).sqrt());
    }
    if diag.separation > 0 {
        diag.warnings.push(format!("{} stage model(s) hit the coefficient cap", diag.separation));
    }
    result.diagnostics = diag;
    Ok(GcompFit { result, stages, predictions })
}

/// Untargeted sequential g-computation. The result carries no standard error;
/// pair with [`bootstrap_se`](super::bootstrap::bootstrap_se).
pub fn seq_gcomp<T: Scalar>(problem: &GcompProblem<'_, T>) -> Result<GcompFit<T>> {
    recursion(problem, None)
}

/// Re-runs the recursion with a logistic fluctuation at each stage: offset
/// logit(Q_t), intercept only, weights 1 / gcum. The standard error comes from
/// the empirical influence curve. A fluctuation that fails to converge leaves
/// that stage untargeted and is flagged in the diagnostics.
pub fn targeted_update<T: Scalar>(problem: &GcompProblem<'_, T>, weights: &CumulativeWeights<T>) -> Result<GcompFit<T>> {
    recursion(problem, Some(weights))
}
