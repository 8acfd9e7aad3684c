//! Continuous event, censoring and ICE times to discrete follow-up nodes.
//!
//! Times are rounded up to whole follow-ups. An event and a censoring that land
//! in the same follow-up count as an event.

use crate::data::{Censoring, Outcome, SubjectRecord, Timeline, Treatment};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventTimes<T> {
    /// Time to the primary event.
    pub t_event: T,
    /// Time to censoring.
    pub t_censor: T,
    /// Time to the intercurrent event, if any.
    pub t_ice: Option<T>,
}

impl<T: Scalar> EventTimes<T> {
    pub fn new(t_event: T, t_censor: T, t_ice: Option<T>) -> Self {
        EventTimes { t_event, t_censor, t_ice }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscretizedRow {
    /// Observed follow-up, in 1..=K+1 (K+1 means followed through K event-free).
    pub observed: usize,
    /// true for an event, false for censoring / administrative end.
    pub event: bool,
    /// Y(1..K).
    pub row: Vec<Outcome>,
    /// ICE follow-up, when the ICE falls at or before both the observed time and K.
    pub ice_month: Option<usize>,
}

impl DiscretizedRow {
    /// Censoring nodes implied by the row: C(j) censored iff Y(j+1) is NA.
    pub fn censoring(&self) -> Vec<Censoring> {
        self.row
            .iter()
            .map(|y| if y.is_na() { Censoring::Censored } else { Censoring::Uncensored })
            .collect()
    }

    /// A conforming subject record on a constant arm.
    pub fn to_subject<T: Scalar>(&self, id: impl Into<String>, arm: u32, w: Vec<T>) -> SubjectRecord<T> {
        let k = self.row.len();
        SubjectRecord {
            id: id.into(),
            w,
            a: vec![Treatment::Code(arm); k],
            c: self.censoring(),
            y: self.row.clone(),
            l: vec![None; k - 1],
        }
    }
}

fn ceil_month<T: Scalar>(x: T, what: &str, cap: usize) -> Result<usize> {
    if !(x > T::zero()) || x.is_nan() {
        return Err(Error::Domain(format!("{what} must be strictly positive, got {x}")));
    }
    let c = x.ceil();
    // Anything beyond the horizon behaves identically; cap to avoid overflow.
    Ok(match c.to_usize() {
        Some(m) if m <= cap => m,
        _ => cap,
    })
}

/// Discretize a primary-event time and a censoring time (any ICE time ignored).
pub fn discretize_subject<T: Scalar>(timeline: &Timeline, times: &EventTimes<T>) -> Result<DiscretizedRow> {
    let k = timeline.k();
    let cap = k + 1;
    let y = ceil_month(times.t_event, "event time", cap)?;
    let c = ceil_month(times.t_censor, "censoring time", cap)?;

    let (observed, event) = if y <= k {
        if c > k {
            (y, true)
        } else {
            (y.min(c), c >= y)
        }
    } else if c <= k {
        (c, false)
    } else {
        (k + 1, false)
    };

    let mut row = vec![Outcome::Free; k];
    if y <= k {
        for cell in &mut row[y - 1..] {
            *cell = Outcome::Event;
        }
    }
    if !event && observed <= k {
        for cell in &mut row[observed - 1..] {
            *cell = Outcome::Na;
        }
    }
    Ok(DiscretizedRow { observed, event, row, ice_month: None })
}

/// As [`discretize_subject`], additionally reporting the ICE follow-up
/// `ceil(t_ice)` when it is no later than min(observed, K).
pub fn discretize_with_ice<T: Scalar>(timeline: &Timeline, times: &EventTimes<T>) -> Result<DiscretizedRow> {
    let mut out = discretize_subject(timeline, times)?;
    if let Some(ti) = times.t_ice {
        let m = ceil_month(ti, "ICE time", timeline.k() + 1)?;
        if m <= out.observed.min(timeline.k()) {
            out.ice_month = Some(m);
        }
    }
    Ok(out)
}
