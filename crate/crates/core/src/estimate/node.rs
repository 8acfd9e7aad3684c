//! One fitted node regression: a logistic model, per-pattern cell means, or a constant.

use std::collections::HashMap;

use super::design::{FeatureMap, Form};
use super::logistic::{fit_logistic, LogisticFit, LogisticOptions};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub enum NodeModel<T> {
    /// Every response identical.
    Constant(T),
    /// Saturated fit in closed form: the mean response of each covariate pattern.
    Cells(HashMap<Vec<u64>, T>),
    Logistic { map: FeatureMap, fit: LogisticFit<T> },
}

fn key<T: Scalar>(raw: &[T]) -> Vec<u64> {
    raw.iter().map(|x| x.as_f64().to_bits()).collect()
}

impl<T: Scalar> NodeModel<T> {
    /// Fit `E[y | raw]` with responses in [0, 1]. Fractional responses are
    /// handled by the same quasi-likelihood.
    pub fn fit(form: Form, raws: &[Vec<T>], y: &[T], opts: &LogisticOptions<T>) -> Result<Self> {
        if raws.is_empty() {
            return Err(Error::Domain("no rows to fit".into()));
        }
        if y.len() != raws.len() {
            return Err(Error::Dimension(format!("{} responses for {} rows", y.len(), raws.len())));
        }
        // Cells even for constant responses, so unseen patterns stay unpredictable.
        if form == Form::Saturated {
            let mut cells: HashMap<Vec<u64>, (T, usize)> = HashMap::new();
            for (r, &v) in raws.iter().zip(y) {
                let e = cells.entry(key(r)).or_insert((T::zero(), 0));
                e.0 = e.0 + v;
                e.1 += 1;
            }
            return Ok(NodeModel::Cells(cells.into_iter().map(|(k, (s, n))| (k, s / T::from_count(n))).collect()));
        }
        if y.iter().all(|&v| v == y[0]) {
            return Ok(NodeModel::Constant(y[0]));
        }
        let map = FeatureMap::build(form, raws);
        let x = map.matrix(raws)?;
        let fit = fit_logistic(&x, y, None, opts)?;
        Ok(NodeModel::Logistic { map, fit })
    }

    pub fn predict(&self, raw: &[T]) -> Result<T> {
        match self {
            NodeModel::Constant(c) => Ok(*c),
            NodeModel::Cells(cells) => cells
                .get(&key(raw))
                .copied()
                .ok_or_else(|| Error::Domain("covariate pattern outside the fitted strata".into())),
            NodeModel::Logistic { map, fit } => {
                let x = map.row(raw).ok_or_else(|| Error::Domain("covariate pattern outside the fitted strata".into()))?;
                Ok(fit.predict(&x))
            }
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            NodeModel::Logistic { fit, .. } => fit.converged,
            _ => true,
        }
    }

    pub fn separation(&self) -> bool {
        match self {
            NodeModel::Logistic { fit, .. } => fit.separation,
            _ => false,
        }
    }
}
