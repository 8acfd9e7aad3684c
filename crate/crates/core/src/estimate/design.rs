//! Covariate specifications and design-matrix construction for node regressions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::linalg::Matrix;
use crate::data::SubjectRecord;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// Intercept plus main terms.
    #[default]
    Main,
    /// Main terms, squares and pairwise products.
    Quadratic,
    /// One indicator per distinct covariate pattern (no intercept).
    Saturated,
}

/// Which time-varying covariates enter a node regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LHistory {
    None,
    /// Only the most recent L.
    Last,
    #[default]
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovariateSpec {
    /// Baseline covariate names; `None` uses all of them.
    pub baseline: Option<Vec<String>>,
    pub time_varying: LHistory,
    pub form: Form,
}

impl CovariateSpec {
    pub fn saturated() -> Self {
        CovariateSpec { form: Form::Saturated, ..Default::default() }
    }

    pub fn intercept_only() -> Self {
        CovariateSpec { baseline: Some(vec![]), time_varying: LHistory::None, form: Form::Main }
    }

    /// Bind names to column positions. With no time-varying columns the L
    /// history is ignored.
    pub fn resolve(&self, covariate_names: &[String], tv_names: &[String]) -> Result<ResolvedSpec> {
        let w_idx = match &self.baseline {
            None => (0..covariate_names.len()).collect(),
            Some(names) => names
                .iter()
                .map(|n| {
                    covariate_names
                        .iter()
                        .position(|c| c == n)
                        .ok_or_else(|| Error::UnknownColumn(format!("W_{n}")))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let time_varying = if tv_names.is_empty() { LHistory::None } else { self.time_varying };
        Ok(ResolvedSpec { w_idx, time_varying, form: self.form })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedSpec {
    w_idx: Vec<usize>,
    time_varying: LHistory,
    form: Form,
}

impl ResolvedSpec {
    pub fn form(&self) -> Form {
        self.form
    }

    /// Raw covariates of `s` using L(1..=upto).
    pub fn raw<T: Scalar>(&self, s: &SubjectRecord<T>, upto: usize) -> Result<Vec<T>> {
        let mut v: Vec<T> = self.w_idx.iter().map(|&j| s.w[j]).collect();
        let range = match self.time_varying {
            LHistory::None => 0..0,
            LHistory::Last => upto.max(1)..upto + 1,
            LHistory::All => 1..upto + 1,
        };
        for t in range {
            if t == 0 || t > s.l.len() {
                continue;
            }
            match &s.l[t - 1] {
                Some(l) => v.extend_from_slice(l),
                None => {
                    return Err(Error::Domain(format!("subject `{}`: L({t}) is NA where it is needed", s.id)));
                }
            }
        }
        Ok(v)
    }
}

fn expand_quadratic<T: Scalar>(raw: &[T]) -> Vec<T> {
    let p = raw.len();
    let mut v = raw.to_vec();
    for i in 0..p {
        for j in i..p {
            v.push(raw[i] * raw[j]);
        }
    }
    v
}

fn pattern_key<T: Scalar>(raw: &[T]) -> Vec<u64> {
    raw.iter().map(|x| x.as_f64().to_bits()).collect()
}

/// Maps raw covariate vectors to design rows. Built from the fitting rows so
/// that constant and repeated columns (a binary square, say) are dropped and
/// saturated patterns are enumerated.
#[derive(Debug, Clone)]
pub enum FeatureMap {
    Terms { quadratic: bool, keep: Vec<usize> },
    Patterns(HashMap<Vec<u64>, usize>),
}

impl FeatureMap {
    pub fn build<T: Scalar>(form: Form, rows: &[Vec<T>]) -> Self {
        match form {
            Form::Main | Form::Quadratic => {
                let quadratic = form == Form::Quadratic;
                let expanded: Vec<Vec<T>> =
                    rows.iter().map(|r| if quadratic { expand_quadratic(r) } else { r.clone() }).collect();
                let p = expanded.first().map_or(0, Vec::len);
                let mut keep: Vec<usize> = Vec::new();
                for j in 0..p {
                    let varies = expanded.iter().any(|r| r[j] != expanded[0][j]);
                    let duplicate = keep.iter().any(|&k| expanded.iter().all(|r| r[j] == r[k]));
                    if varies && !duplicate {
                        keep.push(j);
                    }
                }
                FeatureMap::Terms { quadratic, keep }
            }
            Form::Saturated => {
                let mut map = HashMap::new();
                for r in rows {
                    let n = map.len();
                    map.entry(pattern_key(r)).or_insert(n);
                }
                FeatureMap::Patterns(map)
            }
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FeatureMap::Terms { keep, .. } => keep.len() + 1,
            FeatureMap::Patterns(m) => m.len(),
        }
    }

    /// Design row, or `None` for a saturated pattern never seen when fitting.
    pub fn row<T: Scalar>(&self, raw: &[T]) -> Option<Vec<T>> {
        match self {
            FeatureMap::Terms { quadratic, keep } => {
                let x = if *quadratic { expand_quadratic(raw) } else { raw.to_vec() };
                let mut out = Vec::with_capacity(keep.len() + 1);
                out.push(T::one());
                out.extend(keep.iter().map(|&j| x[j]));
                Some(out)
            }
            FeatureMap::Patterns(m) => {
                let idx = *m.get(&pattern_key(raw))?;
                let mut out = vec![T::zero(); m.len()];
                out[idx] = T::one();
                Some(out)
            }
        }
    }

    pub fn matrix<T: Scalar>(&self, rows: &[Vec<T>]) -> Result<Matrix<T>> {
        let mapped = rows
            .iter()
            .map(|r| self.row(r).ok_or_else(|| Error::Domain("covariate pattern outside the fitted strata".into())))
            .collect::<Result<Vec<_>>>()?;
        if mapped.is_empty() {
            return Ok(Matrix::zeros(0, self.width()));
        }
        Matrix::from_rows(&mapped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_columns_dropped() {
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let fm = FeatureMap::build(Form::Main, &rows);
        assert_eq!(fm.width(), 2);
        assert_eq!(fm.row(&[4.0, 5.0]).unwrap(), vec![1.0, 4.0]);
    }

    #[test]
    fn saturated_patterns() {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let fm = FeatureMap::build(Form::Saturated, &rows);
        assert_eq!(fm.width(), 2);
        assert_eq!(fm.row(&[1.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert!(fm.row(&[1.0, 0.0]).is_none());
    }

    #[test]
    fn quadratic_expansion() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 3.0], vec![0.5, -1.0]];
        let fm = FeatureMap::build(Form::Quadratic, &rows);
        assert_eq!(fm.width(), 6);
        assert_eq!(fm.row(&[2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
    }

    #[test]
    fn binary_square_dropped() {
        let rows = vec![vec![0.0, 1.5], vec![1.0, 2.0], vec![1.0, -1.0]];
        let fm = FeatureMap::build(Form::Quadratic, &rows);
        // x0^2 repeats x0
        assert_eq!(fm.width(), 5);
    }

    #[test]
    fn unknown_baseline_name() {
        let spec = CovariateSpec { baseline: Some(vec!["zz".into()]), ..Default::default() };
        assert!(matches!(spec.resolve(&["W1".to_string()], &[]), Err(Error::UnknownColumn(_))));
    }
}
