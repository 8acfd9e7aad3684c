//! Multiple imputation of censored outcomes under censoring-at-random,
//! copy-reference and jump-to-reference, pooled with Rubin's rules.
//!
//! Each imputation runs the four steps: build the tentative dataset, draw
//! model parameters and impute the NA cells forward in time, apply the
//! monotone convention, then restore the original arm codes and complete cases.

mod models;
mod rubin;
mod tentative;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use models::{fit_imputation_models, impute_car, ImputationCovariates, ImputationModels};
pub use rubin::{rubin_pool, PooledEstimate};
pub use tentative::{
    make_tentative_car, make_tentative_cr, make_tentative_j2r, monotone_adjust, monotone_adjust_subject, restore_original,
    Assumption, Ledger, TentativeDataset,
};

use crate::data::{SubjectRecord, TrialDataset};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, stream_seed};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiSpec {
    pub assumption: Assumption,
    pub m: usize,
    pub seed: u64,
    #[serde(default)]
    pub reference_arm: Option<u32>,
    /// Downstream estimator applied to each completed dataset.
    #[serde(default = "default_estimator")]
    pub estimator: String,
    #[serde(default)]
    pub covariates: ImputationCovariates,
    /// Draw model coefficients from their approximate posterior per imputation.
    #[serde(default = "default_true")]
    pub proper: bool,
}

fn default_estimator() -> String {
    "km".into()
}

fn default_true() -> bool {
    true
}

impl MiSpec {
    pub fn new(assumption: Assumption, m: usize, seed: u64, reference_arm: Option<u32>) -> Self {
        MiSpec {
            assumption,
            m,
            seed,
            reference_arm,
            estimator: default_estimator(),
            covariates: ImputationCovariates::default(),
            proper: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::TooFewImputations(self.m));
        }
        if self.assumption != Assumption::Car && self.reference_arm.is_none() {
            return Err(Error::InvalidSpec(format!("{:?} needs a reference arm", self.assumption)));
        }
        Ok(())
    }
}

/// Per-ICE-kind assumptions for imputing cells censored by different ICEs in
/// the same imputation. Censored subjects without a tag use `untagged`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinedSpec {
    #[serde(default)]
    pub by_kind: BTreeMap<String, Assumption>,
    #[serde(default = "default_untagged")]
    pub untagged: Assumption,
    pub m: usize,
    pub seed: u64,
    #[serde(default)]
    pub reference_arm: Option<u32>,
    #[serde(default)]
    pub covariates: ImputationCovariates,
    #[serde(default = "default_true")]
    pub proper: bool,
}

fn default_untagged() -> Assumption {
    Assumption::Car
}

impl From<&MiSpec> for CombinedSpec {
    fn from(s: &MiSpec) -> Self {
        CombinedSpec {
            by_kind: BTreeMap::new(),
            untagged: s.assumption,
            m: s.m,
            seed: s.seed,
            reference_arm: s.reference_arm,
            covariates: s.covariates.clone(),
            proper: s.proper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiRun<T> {
    pub pooled: PooledEstimate<T>,
    /// (point, variance) of each successful imputation, in imputation order.
    pub estimates: Vec<(T, T)>,
    pub failures: usize,
    pub warnings: Vec<String>,
}

/// Subject streams for imputation j: (seed, j, original subject index).
fn subject_seed(seed: u64, j: usize) -> u64 {
    stream_seed(seed, j as u64)
}

/// Parameter-draw stream for imputation j and one assumption.
fn parameter_seed(seed: u64, j: usize) -> u64 {
    stream_seed(stream_seed(seed, j as u64), u64::MAX)
}

struct Arm<T> {
    assumption: Assumption,
    tentative: TentativeDataset<T>,
    models: ImputationModels<T>,
    /// Original position -> tentative row.
    row_of: Vec<Option<usize>>,
}

/// The completed datasets of a combined run, one per imputation.
pub fn completed_datasets<T: Scalar>(
    ds: &TrialDataset<T>,
    tags: &[Option<String>],
    spec: &CombinedSpec,
) -> Result<(Vec<Result<TrialDataset<T>>>, Vec<String>)> {
    if tags.len() != ds.len() {
        return Err(Error::Dimension(format!("{} tags for {} subjects", tags.len(), ds.len())));
    }
    if spec.m < 2 {
        return Err(Error::TooFewImputations(spec.m));
    }
    let assumption_of = |tag: &Option<String>| -> Result<Assumption> {
        match tag {
            None => Ok(spec.untagged),
            Some(kind) => spec
                .by_kind
                .get(kind)
                .copied()
                .ok_or_else(|| Error::InvalidSpec(format!("no assumption for ICE kind `{kind}`"))),
        }
    };
    let per_subject: Vec<Assumption> = tags.iter().map(assumption_of).collect::<Result<_>>()?;
    let mut used: Vec<Assumption> = per_subject.clone();
    used.sort();
    used.dedup();

    let mut warnings = Vec::new();
    let mut arms: BTreeMap<Assumption, Arm<T>> = BTreeMap::new();
    for &a in &used {
        let tentative = match a {
            Assumption::Car => make_tentative_car(ds),
            Assumption::Cr | Assumption::J2r => {
                let r = spec
                    .reference_arm
                    .ok_or_else(|| Error::InvalidSpec(format!("{a:?} needs a reference arm")))?;
                if a == Assumption::Cr { make_tentative_cr(ds, r)? } else { make_tentative_j2r(ds, r)? }
            }
        };
        let models = fit_imputation_models(&tentative.data, &spec.covariates)?;
        warnings.extend(models.warnings.iter().map(|w| format!("{a:?} model, {w}")));
        let mut row_of = vec![None; ds.len()];
        for (row, &pos) in tentative.ledger.positions.iter().enumerate() {
            row_of[pos] = Some(row);
        }
        arms.insert(a, Arm { assumption: a, tentative, models, row_of });
    }

    let completed = (0..spec.m)
        .into_par_iter()
        .map(|j| {
            let drawn: BTreeMap<Assumption, ImputationModels<T>> = arms
                .iter()
                .map(|(&a, arm)| {
                    let m = if spec.proper {
                        arm.models.draw(&mut stream_rng(parameter_seed(spec.seed, j), a.index()))
                    } else {
                        arm.models.clone()
                    };
                    (a, m)
                })
                .collect();
            let sseed = subject_seed(spec.seed, j);
            let subjects = ds
                .subjects()
                .iter()
                .enumerate()
                .map(|(i, original)| -> Result<SubjectRecord<T>> {
                    let arm = &arms[&per_subject[i]];
                    let Some(row) = arm.row_of[i] else {
                        // Deleted complete case: reinserted as is.
                        return Ok(original.clone());
                    };
                    let tentative_row = &arm.tentative.data.subjects()[row];
                    let imputed = if tentative_row.has_na() {
                        models::impute_subject(&drawn[&arm.assumption], tentative_row, &mut stream_rng(sseed, i as u64))?
                    } else {
                        tentative_row.clone()
                    };
                    if tentative_row == original {
                        Ok(imputed)
                    } else {
                        tentative::restore_record(arm.assumption, original, imputed)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            ds.with_subjects(subjects)
        })
        .collect();
    Ok((completed, warnings))
}

/// Impute cells censored by each ICE kind under that kind's assumption,
/// estimate on every completed dataset, and pool. `tags[i]` names the ICE
/// kind that censored subject i, if any. `estimator` returns (point, variance).
pub fn combined_mi<T, F>(ds: &TrialDataset<T>, tags: &[Option<String>], spec: &CombinedSpec, estimator: F) -> Result<MiRun<T>>
where
    T: Scalar,
    F: Fn(&TrialDataset<T>) -> Result<(T, T)> + Sync,
{
    let (completed, mut warnings) = completed_datasets(ds, tags, spec)?;
    let results: Vec<Result<(T, T)>> = completed.into_par_iter().map(|c| c.and_then(|d| estimator(&d))).collect();
    let mut estimates = Vec::with_capacity(results.len());
    let mut failures = 0;
    for (j, r) in results.into_iter().enumerate() {
        match r {
            Ok(e) => estimates.push(e),
            Err(e) => {
                failures += 1;
                warnings.push(format!("imputation {j} excluded: {e}"));
            }
        }
    }
    if estimates.len() < 2 {
        return Err(Error::TooFewImputations(estimates.len()));
    }
    let points: Vec<T> = estimates.iter().map(|e| e.0).collect();
    let vars: Vec<T> = estimates.iter().map(|e| e.1).collect();
    let pooled = rubin_pool(&points, &vars)?;
    Ok(MiRun { pooled, estimates, failures, warnings })
}

/// Single-assumption multiple imputation: `combined_mi` with every subject
/// under `spec.assumption`.
pub fn run_mi<T, F>(ds: &TrialDataset<T>, spec: &MiSpec, estimator: F) -> Result<MiRun<T>>
where
    T: Scalar,
    F: Fn(&TrialDataset<T>) -> Result<(T, T)> + Sync,
{
    spec.validate()?;
    combined_mi(ds, &vec![None; ds.len()], &CombinedSpec::from(spec), estimator)
}
