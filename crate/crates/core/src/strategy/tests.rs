use super::*;
use crate::data::Timeline;
use Censoring::{Censored as X, Uncensored as U};
use Outcome::{Event as E, Free as F, Na as N};

fn ds(subjects: Vec<SubjectRecord<f64>>) -> TrialDataset<f64> {
    let k = subjects[0].k();
    TrialDataset::new(Timeline::new(k).unwrap(), vec![], vec![], subjects).unwrap()
}

fn subj(id: &str, event: Option<usize>, censor: Option<usize>) -> SubjectRecord<f64> {
    SubjectRecord::with_times(id, 1, vec![], 12, event, censor)
}

fn run(n_free: usize, n_event: usize, rest: Outcome) -> Vec<Outcome> {
    let mut v = vec![F; n_free];
    v.extend(std::iter::repeat(rest).take(n_event));
    v
}

#[test]
fn composite_terminal_ice_at_five() {
    // Censored by the competing death at month 5.
    let d = ds(vec![subj("4", None, Some(5))]);
    let ices = [IceRecord::new("4", "death_other", 5, true)];
    let out = apply_composite(&d, &ices, "death_other").unwrap();
    let s = &out.subjects()[0];
    assert_eq!(s.y, run(4, 8, E));
    assert_eq!(s.c, vec![U; 12]);
}

#[test]
fn composite_keeps_earlier_primary_event() {
    let d = ds(vec![subj("a", Some(3), None)]);
    let ices = [IceRecord::new("a", "x", 8, false)];
    assert_eq!(apply_composite(&d, &ices, "x").unwrap(), d);
}

#[test]
fn composite_non_terminal_after_censoring_conflicts() {
    let d = ds(vec![subj("a", None, Some(4))]);
    let ices = [IceRecord::new("a", "x", 6, false)];
    assert!(matches!(apply_composite(&d, &ices, "x"), Err(Error::IceConflict { .. })));
    // Terminal ICE after censoring keeps the earlier censoring.
    let ices = [IceRecord::new("a", "x", 6, true)];
    assert_eq!(apply_composite(&d, &ices, "x").unwrap(), d);
}

#[test]
fn composite_identity_without_ice() {
    let d = ds(vec![subj("a", None, None), subj("b", Some(2), None)]);
    assert_eq!(apply_composite(&d, &[], "x").unwrap(), d);
}

#[test]
fn treatment_policy_restores_initial_code() {
    let mut s = subj("5", Some(7), None);
    for a in &mut s.a[4..] {
        *a = Treatment::Absent;
    }
    let d = ds(vec![s.clone()]);
    let ices = [IceRecord::new("5", "discontinuation", 4, false)];
    let out = apply_treatment_policy(&d, &ices, "discontinuation").unwrap();
    let r = &out.subjects()[0];
    assert_eq!(r.a, vec![Treatment::Code(1); 12]);
    assert_eq!(r.y, s.y);
    assert_eq!(r.c, s.c);
    assert_eq!(r.y, run(6, 6, E));
}

#[test]
fn treatment_policy_rewrites_rescue_code() {
    let mut s = subj("r", None, None);
    for j in 5..=7 {
        s.a[j] = Treatment::Code(2);
    }
    let d = ds(vec![s]);
    let out = apply_treatment_policy(&d, &[IceRecord::new("r", "rescue", 5, false)], "rescue").unwrap();
    assert_eq!(out.subjects()[0].a, vec![Treatment::Code(1); 12]);
}

#[test]
fn hypothetical_censors_from_ice_month() {
    let d = ds(vec![subj("6", None, Some(8)), subj("other", None, Some(8))]);
    let out = apply_hypothetical(&d, &[IceRecord::new("6", "rescue", 2, false)], "rescue").unwrap();
    let s = &out.subjects()[0];
    let mut c = vec![U];
    c.extend([X; 11]);
    assert_eq!(s.c, c);
    assert_eq!(s.y, run(1, 11, N));
    assert_eq!(out.subjects()[1], d.subjects()[1]);
}

#[test]
fn hypothetical_keeps_prior_event() {
    let d = ds(vec![subj("a", Some(2), None)]);
    let out = apply_hypothetical(&d, &[IceRecord::new("a", "r", 12, false)], "r").unwrap();
    assert_eq!(out, d);
}

#[test]
fn regime_while_on_treatment() {
    assert_eq!(make_regime_while_on_treatment(3, 10).unwrap().abar(), &[1, 1, 1, 0, 0, 0, 0, 0, 0, 0]);
    assert_eq!(make_regime_while_on_treatment(10, 10).unwrap().abar(), &[1; 10]);
    assert_eq!(make_regime_while_on_treatment(0, 10).unwrap().abar(), &[0; 10]);
    assert!(make_regime_while_on_treatment(11, 10).is_err());
}

#[test]
fn competing_risk_marks_competing_event() {
    let d = ds(vec![subj("4", None, Some(5)), subj("2", Some(9), None), subj("1", None, None)]);
    let ices = [IceRecord::new("4", "death_other", 5, true)];
    let cds = apply_competing_risk(&d, &ices, "death_other").unwrap();
    let s4 = &cds.subjects()[0];
    assert_eq!(s4.y_ce, run(4, 8, E));
    assert_eq!(s4.y_pe, vec![F; 12]);
    assert_eq!(s4.c, vec![U; 12]);
    let s2 = &cds.subjects()[1];
    assert_eq!(s2.y_pe, run(8, 4, E));
    assert_eq!(s2.y_ce, vec![F; 12]);
    let s1 = &cds.subjects()[2];
    assert_eq!((s1.y_pe.clone(), s1.y_ce.clone()), (vec![F; 12], vec![F; 12]));
    assert!(validate_competing(&cds).is_empty());
}

#[test]
fn competing_risk_tie_goes_to_primary_event() {
    let d = ds(vec![subj("a", Some(5), None)]);
    let cds = apply_competing_risk(&d, &[IceRecord::new("a", "d", 5, true)], "d").unwrap();
    assert_eq!(cds.subjects()[0].pe_time(), Some(5));
    assert_eq!(cds.subjects()[0].ce_time(), None);
}

#[test]
fn competing_risk_requires_terminal() {
    let d = ds(vec![subj("a", None, None)]);
    assert!(apply_competing_risk(&d, &[IceRecord::new("a", "d", 5, false)], "d").is_err());
}

#[test]
fn plan_rejects_duplicate_kinds() {
    let r = StrategyPlan::new(vec![("a".into(), Strategy::Composite), ("a".into(), Strategy::CompetingRisk)]);
    assert!(matches!(r, Err(Error::InvalidPlan(_))));
}

#[test]
fn default_order_puts_terminal_first() {
    let p = StrategyPlan::with_default_order(vec![
        ("rescue".into(), Strategy::Hypothetical),
        ("disc".into(), Strategy::TreatmentPolicy),
        ("death".into(), Strategy::CompetingRisk),
    ])
    .unwrap();
    let kinds: Vec<_> = p.steps().iter().map(|s| s.kind.as_str()).collect();
    assert_eq!(kinds, ["death", "disc", "rescue"]);
}

#[test]
fn compose_requires_every_kind() {
    let d = ds(vec![subj("a", None, None)]);
    let plan = StrategyPlan::new(vec![("x".into(), Strategy::Hypothetical)]).unwrap();
    let r = compose_plan(&d, &[IceRecord::new("a", "y", 3, false)], &plan);
    assert!(matches!(r, Err(Error::PlanIncomplete(k)) if k == "y"));
}

#[test]
fn compose_empty_plan_is_identity() {
    let d = ds(vec![subj("a", None, None), subj("b", Some(4), None), subj("c", None, Some(6))]);
    let out = compose_plan(&d, &[], &StrategyPlan::default()).unwrap();
    assert_eq!(out.data.trial().unwrap(), &d);
    assert!(out.censoring_tags.iter().all(Option::is_none));
}

#[test]
fn hypothetical_vs_treatment_policy_differ_in_expected_nodes() {
    let mut s = subj("r", Some(10), None);
    for j in 3..12 {
        s.a[j] = Treatment::Code(2);
    }
    let d = ds(vec![s]);
    let ices = [IceRecord::new("r", "rescue", 3, false)];
    let hyp = compose_plan(&d, &ices, &StrategyPlan::new(vec![("rescue".into(), Strategy::Hypothetical)]).unwrap()).unwrap();
    let tp = compose_plan(&d, &ices, &StrategyPlan::new(vec![("rescue".into(), Strategy::TreatmentPolicy)]).unwrap()).unwrap();
    let h = &hyp.data.trial().unwrap().subjects()[0];
    let p = &tp.data.trial().unwrap().subjects()[0];
    let o = &d.subjects()[0];
    // Hypothetical touches only C/Y from the ICE on; treatment policy only A.
    assert_eq!(h.a, o.a);
    assert_eq!(&h.y[..2], &o.y[..2]);
    assert!(h.y[2..].iter().all(|y| y.is_na()));
    assert!(h.c[2..].iter().all(|c| c.is_censored()));
    assert_eq!((p.y.clone(), p.c.clone()), (o.y.clone(), o.c.clone()));
    assert_eq!(p.a, vec![Treatment::Code(1); 12]);
    assert_eq!(hyp.censoring_tags[0], Some(("rescue".into(), Strategy::Hypothetical)));
    assert_eq!(tp.censoring_tags[0], None);
}

#[test]
fn alt2_records_no_treatment_after_ice() {
    let mut s = subj("d", None, None);
    for a in &mut s.a[4..] {
        *a = Treatment::Absent;
    }
    let d = ds(vec![s]);
    let plan = StrategyPlan::new(vec![("disc".into(), Strategy::WhileOnTreatmentAlt2)]).unwrap();
    let out = compose_plan(&d, &[IceRecord::new("d", "disc", 4, false)], &plan).unwrap();
    let a = &out.data.trial().unwrap().subjects()[0].a;
    let regime = make_regime_while_on_treatment(4, 12).unwrap();
    assert!(regime.followed_by(&out.data.trial().unwrap().subjects()[0], 12));
    assert_eq!(a[3], Treatment::Code(1));
    assert_eq!(a[4], Treatment::Code(0));
}

#[test]
fn unknown_subject_or_bad_month_rejected() {
    let d = ds(vec![subj("a", None, None)]);
    assert!(apply_hypothetical(&d, &[IceRecord::new("zzz", "r", 2, false)], "r").is_err());
    assert!(apply_hypothetical(&d, &[IceRecord::new("a", "r", 13, false)], "r").is_err());
    assert!(apply_hypothetical(&d, &[IceRecord::new("a", "r", 0, false)], "r").is_err());
}

#[test]
fn composite_after_plan_censoring_is_ignored() {
    let d = ds(vec![subj("a", None, None)]);
    let ices = [IceRecord::new("a", "rescue", 2, false), IceRecord::new("a", "stop", 6, false)];
    let plan = StrategyPlan::new(vec![("rescue".into(), Strategy::Hypothetical), ("stop".into(), Strategy::Composite)]).unwrap();
    let out = compose_plan(&d, &ices, &plan).unwrap();
    let s = &out.data.trial().unwrap().subjects()[0];
    assert_eq!(s.y, run(1, 11, N));
    assert_eq!(out.notes.len(), 1);

    // The same ICE after censoring already in the input is still a conflict.
    let censored = ds(vec![subj("a", None, Some(2))]);
    let plan = StrategyPlan::new(vec![("stop".into(), Strategy::Composite)]).unwrap();
    assert!(compose_plan(&censored, &ices[1..], &plan).is_err());
}
