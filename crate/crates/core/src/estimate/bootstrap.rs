//! Subject-level nonparametric bootstrap.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::statistics::{Data, OrderStatistics};

use crate::data::TrialDataset;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::strategy::CompetingDataset;

/// Datasets that can be rebuilt from a multiset of their subjects.
pub trait Resample: Sized + Sync {
    fn n_subjects(&self) -> usize;
    /// Subjects at `indices`, in order; repeated subjects get distinct ids.
    fn resample(&self, indices: &[usize]) -> Result<Self>;
}

fn renamed(id: &str, j: usize) -> String {
    format!("{id}#{j}")
}

impl<T: Scalar> Resample for TrialDataset<T> {
    fn n_subjects(&self) -> usize {
        self.len()
    }

    fn resample(&self, indices: &[usize]) -> Result<Self> {
        let subjects = indices
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                let mut s = self.subjects()[i].clone();
                s.id = renamed(&s.id, j);
                s
            })
            .collect();
        self.with_subjects(subjects)
    }
}

impl<T: Scalar> Resample for CompetingDataset<T> {
    fn n_subjects(&self) -> usize {
        self.len()
    }

    fn resample(&self, indices: &[usize]) -> Result<Self> {
        let subjects = indices
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                let mut s = self.subjects()[i].clone();
                s.id = renamed(&s.id, j);
                s
            })
            .collect();
        self.with_subjects(subjects)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary<T> {
    pub se: T,
    /// Percentile interval.
    pub ci95: (T, T),
    pub replicates: usize,
    pub failures: usize,
    pub estimates: Vec<T>,
}

/// Resample subjects with replacement `b` times and re-run `estimator`.
/// Replicate j draws from stream (seed, j), so results do not depend on
/// scheduling. Failed replicates are dropped and counted.
pub fn bootstrap_se<D, T, F>(data: &D, estimator: F, b: usize, seed: u64) -> Result<BootstrapSummary<T>>
where
    D: Resample,
    T: Scalar,
    F: Fn(&D) -> Result<T> + Sync,
{
    if b < 2 {
        return Err(Error::InvalidSpec(format!("bootstrap needs B >= 2, got {b}")));
    }
    let n = data.n_subjects();
    if n == 0 {
        return Err(Error::InvalidDataset("no subjects to resample".into()));
    }
    let draws: Vec<Option<T>> = (0..b)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, j as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            data.resample(&idx).and_then(|d| estimator(&d)).ok().filter(|v| v.is_finite())
        })
        .collect();
    let estimates: Vec<T> = draws.into_iter().flatten().collect();
    let failures = b - estimates.len();
    if estimates.len() < 2 {
        return Err(Error::InvalidSpec(format!("only {} of {b} bootstrap replicates succeeded", estimates.len())));
    }
    // Shifted by the first replicate so identical replicates give exactly zero.
    let shift = estimates[0];
    let m = T::from_count(estimates.len());
    let mean = estimates.iter().map(|&v| v - shift).sum::<T>() / m;
    let ss = estimates.iter().map(|&v| (v - shift - mean) * (v - shift - mean)).sum::<T>();
    let se = (ss / (m - T::one())).sqrt();
    let mut sorted = Data::new(estimates.iter().map(|v| v.as_f64()).collect::<Vec<_>>());
    let ci95 = (T::lit(sorted.quantile(0.025)), T::lit(sorted.quantile(0.975)));
    Ok(BootstrapSummary { se, ci95, replicates: estimates.len(), failures, estimates })
}
