//! Discrete-time longitudinal trial data.
//!
//! For K follow-ups the node order per subject is
//! `W, A(0), C(0), Y(1), L(1), A(1), C(1), Y(2), ..., A(K-1), C(K-1), Y(K)`.
//! Vectors are stored zero-based: `a[j]` is A(j) and `c[j]` is C(j) for
//! j = 0..K-1, `y[t-1]` is Y(t) and `l[t-1]` is L(t).

mod conventions;

pub use conventions::{apply_conventions, conform_subject, risk_set, validate_dataset, Rule, Violation};

use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Outcome cell Y(t).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// The primary event has not occurred by t.
    Free,
    /// The primary event has occurred at or before t.
    Event,
    /// Not observed (censored).
    Na,
}

impl Outcome {
    pub fn is_na(self) -> bool {
        matches!(self, Outcome::Na)
    }

    pub fn from_flag(event: bool) -> Self {
        if event {
            Outcome::Event
        } else {
            Outcome::Free
        }
    }
}

/// Censoring node C(j).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Censoring {
    Uncensored,
    Censored,
}

impl Censoring {
    pub fn is_censored(self) -> bool {
        matches!(self, Censoring::Censored)
    }
}

/// Treatment node A(j): a nonnegative code, or absent after discontinuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Treatment {
    Code(u32),
    Absent,
}

impl Treatment {
    pub fn code(self) -> Option<u32> {
        match self {
            Treatment::Code(c) => Some(c),
            Treatment::Absent => None,
        }
    }
}

/// Number of follow-ups K plus the (metadata-only) time unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timeline {
    k: usize,
    unit: String,
}

impl Timeline {
    pub fn new(k: usize) -> Result<Self> {
        Self::with_unit(k, "month")
    }

    pub fn with_unit(k: usize, unit: impl Into<String>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("timeline needs K >= 1".into()));
        }
        Ok(Timeline { k, unit: unit.into() })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord<T> {
    pub id: String,
    /// Baseline covariates W.
    pub w: Vec<T>,
    /// A(0..K-1).
    pub a: Vec<Treatment>,
    /// C(0..K-1).
    pub c: Vec<Censoring>,
    /// Y(1..K).
    pub y: Vec<Outcome>,
    /// L(1..K-1); `None` is NA.
    pub l: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> SubjectRecord<T> {
    /// A conforming record of a subject on a constant arm with no event, no
    /// censoring and no time-varying covariates.
    pub fn event_free(id: impl Into<String>, arm: u32, w: Vec<T>, k: usize) -> Self {
        SubjectRecord {
            id: id.into(),
            w,
            a: vec![Treatment::Code(arm); k],
            c: vec![Censoring::Uncensored; k],
            y: vec![Outcome::Free; k],
            l: vec![None; k.saturating_sub(1)],
        }
    }

    /// Conforming record with the event at follow-up `event` and/or censoring
    /// from follow-up `censor` (Y(censor) is the first NA cell).
    pub fn with_times(
        id: impl Into<String>,
        arm: u32,
        w: Vec<T>,
        k: usize,
        event: Option<usize>,
        censor: Option<usize>,
    ) -> Self {
        let mut s = Self::event_free(id, arm, w, k);
        if let Some(te) = event {
            for t in te..=k {
                s.y[t - 1] = Outcome::Event;
            }
        }
        if let Some(tc) = censor {
            if event.map_or(true, |te| te >= tc) {
                for t in tc..=k {
                    s.y[t - 1] = Outcome::Na;
                    s.c[t - 1] = Censoring::Censored;
                }
            }
        }
        s
    }

    pub fn k(&self) -> usize {
        self.y.len()
    }

    /// Y(t), t = 1..K.
    pub fn y_at(&self, t: usize) -> Outcome {
        self.y[t - 1]
    }

    /// Assigned arm, A(0).
    pub fn arm(&self) -> Option<u32> {
        self.a.first().and_then(|a| a.code())
    }

    /// First follow-up with Y(t) = 1.
    pub fn event_time(&self) -> Option<usize> {
        self.y.iter().position(|&y| y == Outcome::Event).map(|i| i + 1)
    }

    /// First follow-up t whose C(t-1) is censored.
    pub fn censor_time(&self) -> Option<usize> {
        self.c.iter().position(|c| c.is_censored()).map(|j| j + 1)
    }

    /// Never censored: the event or survival through K was observed.
    pub fn is_complete(&self) -> bool {
        self.censor_time().is_none()
    }

    pub fn has_na(&self) -> bool {
        self.y.iter().any(|y| y.is_na())
    }

    /// At risk at follow-up t: no event by t-1 and C(t-1) uncensored.
    pub fn at_risk(&self, t: usize) -> bool {
        (t == 1 || self.y[t - 2] == Outcome::Free) && !self.c[t - 1].is_censored()
    }
}

/// A validated-shape collection of subject records sharing one timeline.
///
/// Construction checks structure (lengths, covariate dimensions, unique ids);
/// the outcome/censoring conventions are checked by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset<T> {
    timeline: Timeline,
    covariate_names: Vec<String>,
    tv_covariate_names: Vec<String>,
    treatment_labels: BTreeMap<u32, String>,
    subjects: Vec<SubjectRecord<T>>,
}

impl<T: Scalar> TrialDataset<T> {
    pub fn new(
        timeline: Timeline,
        covariate_names: Vec<String>,
        tv_covariate_names: Vec<String>,
        subjects: Vec<SubjectRecord<T>>,
    ) -> Result<Self> {
        let k = timeline.k();
        let mut seen = HashSet::with_capacity(subjects.len());
        for s in &subjects {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate subject id `{}`", s.id)));
            }
            if s.a.len() != k || s.c.len() != k || s.y.len() != k || s.l.len() != k - 1 {
                return Err(Error::InvalidDataset(format!(
                    "subject `{}`: node sequences do not match K = {k}",
                    s.id
                )));
            }
            if s.w.len() != covariate_names.len() {
                return Err(Error::InvalidDataset(format!(
                    "subject `{}`: {} baseline covariates, expected {}",
                    s.id,
                    s.w.len(),
                    covariate_names.len()
                )));
            }
            for l in s.l.iter().flatten() {
                if l.len() != tv_covariate_names.len() {
                    return Err(Error::InvalidDataset(format!(
                        "subject `{}`: {} time-varying covariates, expected {}",
                        s.id,
                        l.len(),
                        tv_covariate_names.len()
                    )));
                }
            }
        }
        Ok(TrialDataset {
            timeline,
            covariate_names,
            tv_covariate_names,
            treatment_labels: BTreeMap::new(),
            subjects,
        })
    }

    /// Same metadata, new subjects.
    pub fn with_subjects(&self, subjects: Vec<SubjectRecord<T>>) -> Result<Self> {
        let mut ds = Self::new(
            self.timeline.clone(),
            self.covariate_names.clone(),
            self.tv_covariate_names.clone(),
            subjects,
        )?;
        ds.treatment_labels = self.treatment_labels.clone();
        Ok(ds)
    }

    pub fn with_treatment_labels(mut self, labels: BTreeMap<u32, String>) -> Self {
        self.treatment_labels = labels;
        self
    }

    pub fn timeline(&self) -> &Timeline {
        &self.timeline
    }

    pub fn k(&self) -> usize {
        self.timeline.k()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn tv_covariate_names(&self) -> &[String] {
        &self.tv_covariate_names
    }

    pub fn treatment_labels(&self) -> &BTreeMap<u32, String> {
        &self.treatment_labels
    }

    pub fn subjects(&self) -> &[SubjectRecord<T>] {
        &self.subjects
    }

    pub fn into_subjects(self) -> Vec<SubjectRecord<T>> {
        self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectRecord<T>> {
        self.subjects.iter().find(|s| s.id == id)
    }

    /// Distinct assigned arms in ascending order.
    pub fn arms(&self) -> Vec<u32> {
        let mut arms: Vec<u32> = self.subjects.iter().filter_map(|s| s.arm()).collect();
        arms.sort_unstable();
        arms.dedup();
        arms
    }
}
