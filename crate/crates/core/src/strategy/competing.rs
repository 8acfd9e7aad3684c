//! Two-dimensional absorbing outcome (primary event, competing event).

use crate::data::{Censoring, Outcome, SubjectRecord, Timeline, Treatment, TrialDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CompetingRecord<T> {
    pub id: String,
    pub w: Vec<T>,
    pub a: Vec<Treatment>,
    pub c: Vec<Censoring>,
    /// Y_PE(1..K).
    pub y_pe: Vec<Outcome>,
    /// Y_CE(1..K).
    pub y_ce: Vec<Outcome>,
    pub l: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> CompetingRecord<T> {
    /// A single-outcome record with no competing event.
    pub fn from_subject(s: &SubjectRecord<T>) -> Self {
        let y_ce = s.y.iter().map(|y| if y.is_na() { Outcome::Na } else { Outcome::Free }).collect();
        CompetingRecord {
            id: s.id.clone(),
            w: s.w.clone(),
            a: s.a.clone(),
            c: s.c.clone(),
            y_pe: s.y.clone(),
            y_ce,
            l: s.l.clone(),
        }
    }

    pub fn k(&self) -> usize {
        self.y_pe.len()
    }

    pub fn arm(&self) -> Option<u32> {
        self.a.first().and_then(|a| a.code())
    }

    pub fn pe_time(&self) -> Option<usize> {
        self.y_pe.iter().position(|&y| y == Outcome::Event).map(|i| i + 1)
    }

    pub fn ce_time(&self) -> Option<usize> {
        self.y_ce.iter().position(|&y| y == Outcome::Event).map(|i| i + 1)
    }

    pub fn censor_time(&self) -> Option<usize> {
        self.c.iter().position(|c| c.is_censored()).map(|j| j + 1)
    }

    /// At risk for either cause at follow-up t.
    pub fn at_risk(&self, t: usize) -> bool {
        (t == 1 || (self.y_pe[t - 2] == Outcome::Free && self.y_ce[t - 2] == Outcome::Free))
            && !self.c[t - 1].is_censored()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompetingDataset<T> {
    timeline: Timeline,
    covariate_names: Vec<String>,
    tv_covariate_names: Vec<String>,
    subjects: Vec<CompetingRecord<T>>,
}

impl<T: Scalar> CompetingDataset<T> {
    pub fn new(
        timeline: Timeline,
        covariate_names: Vec<String>,
        tv_covariate_names: Vec<String>,
        subjects: Vec<CompetingRecord<T>>,
    ) -> Result<Self> {
        let k = timeline.k();
        for s in &subjects {
            if s.a.len() != k || s.c.len() != k || s.y_pe.len() != k || s.y_ce.len() != k || s.l.len() != k - 1 {
                return Err(Error::InvalidDataset(format!("subject `{}`: node sequences do not match K = {k}", s.id)));
            }
            if s.w.len() != covariate_names.len() {
                return Err(Error::InvalidDataset(format!("subject `{}`: wrong baseline covariate count", s.id)));
            }
        }
        Ok(CompetingDataset { timeline, covariate_names, tv_covariate_names, subjects })
    }

    pub fn from_trial(ds: &TrialDataset<T>) -> Self {
        CompetingDataset {
            timeline: ds.timeline().clone(),
            covariate_names: ds.covariate_names().to_vec(),
            tv_covariate_names: ds.tv_covariate_names().to_vec(),
            subjects: ds.subjects().iter().map(CompetingRecord::from_subject).collect(),
        }
    }

    pub fn with_subjects(&self, subjects: Vec<CompetingRecord<T>>) -> Result<Self> {
        Self::new(self.timeline.clone(), self.covariate_names.clone(), self.tv_covariate_names.clone(), subjects)
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

    pub fn subjects(&self) -> &[CompetingRecord<T>] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }
}

/// Mark a competing event at follow-up `m` unless the primary event came
/// first (ties go to the primary event), a competing event is already
/// recorded earlier, or the subject was censored before `m`.
/// Returns whether the record changed, and whether a same-month tie occurred.
pub(crate) fn mark_competing<T: Scalar>(r: &mut CompetingRecord<T>, m: usize) -> (bool, bool) {
    let k = r.k();
    if let Some(te) = r.pe_time() {
        if te <= m {
            return (false, te == m);
        }
    }
    if r.ce_time().is_some_and(|tc| tc <= m) {
        return (false, false);
    }
    if r.censor_time().is_some_and(|tc| tc < m) {
        return (false, false);
    }
    for t in 1..=k {
        if t >= m {
            r.y_pe[t - 1] = Outcome::Free;
            r.y_ce[t - 1] = Outcome::Event;
        }
        r.c[t - 1] = Censoring::Uncensored;
    }
    (true, false)
}

/// Invariant violations of a competing-outcome dataset, as `(subject, t, reason)`.
pub fn validate_competing<T: Scalar>(cds: &CompetingDataset<T>) -> Vec<(String, usize, &'static str)> {
    let mut out = Vec::new();
    for s in cds.subjects() {
        let k = s.k();
        for t in 1..=k {
            let (pe, ce) = (s.y_pe[t - 1], s.y_ce[t - 1]);
            if pe == Outcome::Event && ce == Outcome::Event {
                out.push((s.id.clone(), t, "both outcomes equal 1"));
            }
            let censored = s.c[t - 1].is_censored();
            if pe.is_na() != censored || ce.is_na() != censored {
                out.push((s.id.clone(), t, "missingness convention"));
            }
        }
        if let Some(te) = s.pe_time() {
            if s.y_pe[te - 1..].iter().any(|&y| y != Outcome::Event) {
                out.push((s.id.clone(), te, "primary outcome not monotone"));
            }
            if s.y_ce[te - 1..].iter().any(|&y| y != Outcome::Free) {
                out.push((s.id.clone(), te, "competing outcome after primary event"));
            }
        }
        if let Some(tc) = s.ce_time() {
            if s.y_ce[tc - 1..].iter().any(|&y| y != Outcome::Event) {
                out.push((s.id.clone(), tc, "competing outcome not monotone"));
            }
            if s.y_pe[tc - 1..].iter().any(|&y| y != Outcome::Free) {
                out.push((s.id.clone(), tc, "primary outcome after competing event"));
            }
        }
        if let Some(first) = s.c.iter().position(|c| c.is_censored()) {
            if s.c[first..].iter().any(|c| !c.is_censored()) {
                out.push((s.id.clone(), first, "censoring not absorbing"));
            }
        }
    }
    out
}
