use std::fmt;

use serde::Serialize;

use super::{Censoring, Outcome, SubjectRecord, TrialDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// Y(t) = 1 implies Y(t') = 1 for t' >= t.
    OutcomeMonotonicity,
    /// C(t-1) censored implies C(t') censored for t' >= t-1.
    CensoringAbsorbency,
    /// Y(t) is NA exactly when C(t-1) is censored.
    MissingnessConvention,
    /// L(t) is NA from the first censored follow-up on.
    CovariateAfterCensoring,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::OutcomeMonotonicity => "outcome-monotonicity",
            Rule::CensoringAbsorbency => "censoring-absorbency",
            Rule::MissingnessConvention => "missingness-convention",
            Rule::CovariateAfterCensoring => "covariate-after-censoring",
        };
        f.write_str(s)
    }
}

/// One broken invariant. `index` is the follow-up t for Y/L rules and the
/// node index j of C(j) for the absorbency rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub subject: String,
    pub index: usize,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "subject {} index {}: {}", self.subject, self.index, self.rule)
    }
}

fn subject_violations<T: Scalar>(s: &SubjectRecord<T>, out: &mut Vec<Violation>) {
    let k = s.k();
    let push = |out: &mut Vec<Violation>, index, rule| {
        out.push(Violation { subject: s.id.clone(), index, rule })
    };

    if let Some(te) = s.event_time() {
        for t in te + 1..=k {
            if s.y_at(t) != Outcome::Event {
                push(out, t, Rule::OutcomeMonotonicity);
            }
        }
    }
    if let Some(first) = s.c.iter().position(|c| c.is_censored()) {
        for j in first + 1..k {
            if !s.c[j].is_censored() {
                push(out, j, Rule::CensoringAbsorbency);
            }
        }
    }
    for t in 1..=k {
        if s.y_at(t).is_na() != s.c[t - 1].is_censored() {
            push(out, t, Rule::MissingnessConvention);
        }
    }
    if let Some(tc) = s.censor_time() {
        for t in tc..k {
            if s.l[t - 1].is_some() {
                push(out, t, Rule::CovariateAfterCensoring);
            }
        }
    }
}

/// Every violated record invariant, in subject order. Empty on success.
pub fn validate_dataset<T: Scalar>(ds: &TrialDataset<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in ds.subjects() {
        subject_violations(s, &mut out);
    }
    out
}

/// Bring one record into the carried-forward / NA-after-censoring form.
///
/// The censoring follow-up is the earlier of the first censored C node and the
/// first NA outcome. An event strictly before it wins and clears the later
/// censoring; an event at or after it is a conflict.
pub fn conform_subject<T: Scalar>(s: &SubjectRecord<T>) -> Result<SubjectRecord<T>> {
    let k = s.k();
    let mut out = s.clone();
    let from_c = s.censor_time();
    let from_y = s.y.iter().position(|y| y.is_na()).map(|i| i + 1);
    let censor = match (from_c, from_y) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let event = s.event_time();

    match (event, censor) {
        (Some(te), Some(tc)) if te >= tc => {
            return Err(Error::ConventionConflict { id: s.id.clone(), t: te });
        }
        (Some(te), _) => {
            for t in te..=k {
                out.y[t - 1] = Outcome::Event;
            }
            for c in out.c.iter_mut() {
                *c = Censoring::Uncensored;
            }
        }
        (None, Some(tc)) => {
            for t in tc..=k {
                out.y[t - 1] = Outcome::Na;
                out.c[t - 1] = Censoring::Censored;
            }
            for t in tc..k {
                out.l[t - 1] = None;
            }
        }
        (None, None) => {}
    }
    Ok(out)
}

/// Apply the outcome carry-forward and censoring conventions to every subject.
pub fn apply_conventions<T: Scalar>(raw: &TrialDataset<T>) -> Result<TrialDataset<T>> {
    let subjects = raw.subjects().iter().map(conform_subject).collect::<Result<Vec<_>>>()?;
    raw.with_subjects(subjects)
}

/// Ids at risk at follow-up t (no event by t-1, C(t-1) uncensored),
/// optionally restricted to an assigned arm.
pub fn risk_set<'a, T: Scalar>(
    ds: &'a TrialDataset<T>,
    t: usize,
    arm: Option<u32>,
) -> Result<Vec<&'a str>> {
    let k = ds.k();
    if t == 0 || t > k {
        return Err(Error::TimeOutOfRange { t, k });
    }
    Ok(ds
        .subjects()
        .iter()
        .filter(|s| arm.map_or(true, |a| s.arm() == Some(a)))
        .filter(|s| s.at_risk(t))
        .map(|s| s.id.as_str())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Timeline, Treatment};

    fn raw(id: &str, y: &[Outcome], c: &[Censoring]) -> SubjectRecord<f64> {
        let k = y.len();
        SubjectRecord {
            id: id.into(),
            w: vec![],
            a: vec![Treatment::Code(0); k],
            c: c.to_vec(),
            y: y.to_vec(),
            l: vec![None; k - 1],
        }
    }

    fn ds(subjects: Vec<SubjectRecord<f64>>) -> TrialDataset<f64> {
        let k = subjects[0].k();
        TrialDataset::new(Timeline::new(k).unwrap(), vec![], vec![], subjects).unwrap()
    }

    use Censoring::{Censored as X, Uncensored as U};
    use Outcome::{Event as E, Free as F, Na as N};

    #[test]
    fn monotonicity_violation_reported_once() {
        let d = ds(vec![raw("s", &[F, E, F], &[U, U, U])]);
        let v = validate_dataset(&d);
        assert_eq!(v, vec![Violation { subject: "s".into(), index: 3, rule: Rule::OutcomeMonotonicity }]);
    }

    #[test]
    fn missingness_violation_reported_once() {
        let d = ds(vec![raw("s", &[F, F], &[U, X])]);
        let v = validate_dataset(&d);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::MissingnessConvention);
        assert_eq!(v[0].index, 2);
    }

    #[test]
    fn conforming_dataset_is_clean() {
        let d = ds(vec![raw("a", &[F, E, E], &[U, U, U]), raw("b", &[F, N, N], &[U, X, X])]);
        assert!(validate_dataset(&d).is_empty());
    }

    #[test]
    fn absorbency_violation() {
        let d = ds(vec![raw("s", &[N, F, F], &[X, U, U])]);
        let rules: Vec<_> = validate_dataset(&d).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::CensoringAbsorbency));
    }

    #[test]
    fn conventions_carry_forward_and_mask() {
        let d = ds(vec![raw("a", &[F, E, F, F], &[U, U, U, U]), raw("b", &[F, F, F, F], &[U, U, X, U])]);
        let out = apply_conventions(&d).unwrap();
        assert_eq!(out.subjects()[0].y, vec![F, E, E, E]);
        assert_eq!(out.subjects()[1].y, vec![F, F, N, N]);
        assert_eq!(out.subjects()[1].c, vec![U, U, X, X]);
        assert!(validate_dataset(&out).is_empty());
    }

    #[test]
    fn event_after_censoring_is_conflict() {
        let d = ds(vec![raw("bad", &[F, F, E], &[U, X, X])]);
        match apply_conventions(&d) {
            Err(Error::ConventionConflict { id, t }) => {
                assert_eq!(id, "bad");
                assert_eq!(t, 3);
            }
            other => panic!("expected conflict, got {other:?}"),
        }
    }

    #[test]
    fn event_before_censoring_clears_it() {
        let d = ds(vec![raw("a", &[E, F, F], &[U, X, X])]);
        let out = apply_conventions(&d).unwrap();
        assert_eq!(out.subjects()[0].y, vec![E, E, E]);
        assert_eq!(out.subjects()[0].c, vec![U, U, U]);
    }

    #[test]
    fn risk_set_range_checked() {
        let d = ds(vec![raw("a", &[F, F], &[U, U])]);
        assert!(matches!(risk_set(&d, 0, None), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(risk_set(&d, 3, None), Err(Error::TimeOutOfRange { .. })));
        assert_eq!(risk_set(&d, 1, None).unwrap(), vec!["a"]);
    }

    #[test]
    fn censored_at_first_follow_up_never_at_risk() {
        let d = ds(vec![raw("a", &[N, N, N], &[X, X, X]), raw("b", &[F, F, F], &[U, U, U])]);
        for t in 1..=3 {
            assert_eq!(risk_set(&d, t, None).unwrap(), vec!["b"]);
        }
    }
}
