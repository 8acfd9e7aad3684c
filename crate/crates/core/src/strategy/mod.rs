//! Intercurrent-event (ICE) handling strategies as rewrites of the A/C/Y nodes.

mod competing;

pub use competing::{validate_competing, CompetingDataset, CompetingRecord};

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::{validate_dataset, Censoring, Outcome, SubjectRecord, Treatment, TrialDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IceRecord {
    pub id: String,
    pub kind: String,
    /// Follow-up in 1..=K at which the ICE occurred.
    pub month: usize,
    pub terminal: bool,
}

impl IceRecord {
    pub fn new(id: impl Into<String>, kind: impl Into<String>, month: usize, terminal: bool) -> Self {
        IceRecord { id: id.into(), kind: kind.into(), month, terminal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    Composite,
    TreatmentPolicy,
    Hypothetical,
    /// Censor at the ICE; the censored cells are imputed under a "no
    /// treatment after the ICE" assumption by the MI module.
    WhileOnTreatmentAlt1,
    /// Record treatment as 0 from the ICE on, for use with a
    /// treat-then-stop regime.
    WhileOnTreatmentAlt2,
    CompetingRisk,
    PrincipalStratum,
}

impl Strategy {
    fn default_rank(self) -> u8 {
        match self {
            Strategy::Composite | Strategy::CompetingRisk | Strategy::PrincipalStratum => 0,
            Strategy::TreatmentPolicy | Strategy::WhileOnTreatmentAlt2 => 1,
            Strategy::Hypothetical | Strategy::WhileOnTreatmentAlt1 => 2,
        }
    }

    /// Strategies that turn ICE follow-up into censoring.
    pub fn censors(self) -> bool {
        matches!(self, Strategy::Hypothetical | Strategy::WhileOnTreatmentAlt1)
    }
}

/// Ordered ICE kind → strategy assignment.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<PlanStep>", into = "Vec<PlanStep>")]
pub struct StrategyPlan {
    steps: Vec<PlanStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub kind: String,
    pub strategy: Strategy,
}

impl StrategyPlan {
    /// Steps applied in the given order.
    pub fn new(steps: Vec<(String, Strategy)>) -> Result<Self> {
        let steps: Vec<PlanStep> = steps.into_iter().map(|(kind, strategy)| PlanStep { kind, strategy }).collect();
        Self::try_from(steps)
    }

    /// Steps reordered: terminal-ICE strategies, then treatment-policy, then
    /// hypothetical. Ties keep their given order.
    pub fn with_default_order(steps: Vec<(String, Strategy)>) -> Result<Self> {
        let mut plan = Self::new(steps)?;
        plan.steps.sort_by_key(|s| s.strategy.default_rank());
        Ok(plan)
    }

    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    pub fn strategy_for(&self, kind: &str) -> Option<Strategy> {
        self.steps.iter().find(|s| s.kind == kind).map(|s| s.strategy)
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl TryFrom<Vec<PlanStep>> for StrategyPlan {
    type Error = Error;

    fn try_from(steps: Vec<PlanStep>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &steps {
            if !seen.insert(s.kind.as_str()) {
                return Err(Error::InvalidPlan(format!("ICE kind `{}` mapped more than once", s.kind)));
            }
        }
        Ok(StrategyPlan { steps })
    }
}

impl From<StrategyPlan> for Vec<PlanStep> {
    fn from(p: StrategyPlan) -> Self {
        p.steps
    }
}

/// Static treatment regime ā = (a(0), ..., a(K-1)).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegimeSpec {
    abar: Vec<u32>,
}

impl RegimeSpec {
    pub fn new(abar: Vec<u32>) -> Result<Self> {
        if abar.is_empty() {
            return Err(Error::InvalidSpec("regime must have length K >= 1".into()));
        }
        Ok(RegimeSpec { abar })
    }

    pub fn constant(code: u32, k: usize) -> Result<Self> {
        Self::new(vec![code; k])
    }

    pub fn abar(&self) -> &[u32] {
        &self.abar
    }

    pub fn len(&self) -> usize {
        self.abar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abar.is_empty()
    }

    pub fn at(&self, j: usize) -> u32 {
        self.abar[j]
    }

    /// The code of a regime that never switches.
    pub fn constant_code(&self) -> Option<u32> {
        let first = *self.abar.first()?;
        self.abar.iter().all(|&a| a == first).then_some(first)
    }

    /// Subject follows the regime on A(0..until).
    pub fn followed_by<T>(&self, s: &SubjectRecord<T>, until: usize) -> bool {
        s.a[..until].iter().zip(&self.abar).all(|(a, r)| *a == Treatment::Code(*r))
    }

    pub fn check_k(&self, k: usize) -> Result<()> {
        if self.abar.len() != k {
            return Err(Error::InvalidSpec(format!("regime has length {}, timeline has K = {k}", self.abar.len())));
        }
        Ok(())
    }
}

/// Treat for the first `k` follow-ups, then stop: (1 × k, 0 × (K - k)).
pub fn make_regime_while_on_treatment(k: usize, horizon: usize) -> Result<RegimeSpec> {
    if k > horizon {
        return Err(Error::Domain(format!("k = {k} exceeds K = {horizon}")));
    }
    let mut abar = vec![1; k];
    abar.resize(horizon, 0);
    RegimeSpec::new(abar)
}

/// Earliest ICE of `kind` per subject, checked against the dataset.
fn ice_index(ds_ids: &HashMap<&str, usize>, k: usize, ices: &[IceRecord], kind: &str) -> Result<HashMap<usize, (usize, bool)>> {
    let mut out: HashMap<usize, (usize, bool)> = HashMap::new();
    for ice in ices.iter().filter(|i| i.kind == kind) {
        let &idx = ds_ids
            .get(ice.id.as_str())
            .ok_or_else(|| Error::InvalidSpec(format!("ICE record for unknown subject `{}`", ice.id)))?;
        if ice.month == 0 || ice.month > k {
            return Err(Error::Domain(format!("ICE month {} for subject `{}` outside 1..={k}", ice.month, ice.id)));
        }
        let e = out.entry(idx).or_insert((ice.month, ice.terminal));
        if ice.month < e.0 {
            *e = (ice.month, ice.terminal);
        }
    }
    Ok(out)
}

fn id_map<'a, I: Iterator<Item = &'a str>>(ids: I) -> HashMap<&'a str, usize> {
    ids.enumerate().map(|(i, id)| (id, i)).collect()
}

fn composite_subject<T: Scalar>(s: &mut SubjectRecord<T>, m: usize, terminal: bool) -> Result<bool> {
    let k = s.k();
    if let Some(tc) = s.censor_time() {
        if m > tc {
            if terminal {
                return Ok(false);
            }
            return Err(Error::IceConflict {
                id: s.id.clone(),
                reason: format!("non-terminal ICE at follow-up {m} after censoring at {tc}"),
            });
        }
    }
    let te = s.event_time();
    if let Some(te) = te {
        if te <= m {
            return Ok(false);
        }
    }
    for t in m..=k {
        s.y[t - 1] = Outcome::Event;
    }
    for c in s.c.iter_mut() {
        *c = Censoring::Uncensored;
    }
    Ok(true)
}

fn treatment_policy_subject<T>(s: &mut SubjectRecord<T>, m: usize) -> Result<bool> {
    let initial = s.a[0]
        .code()
        .ok_or_else(|| Error::IceConflict { id: s.id.clone(), reason: "no initially assigned treatment".into() })?;
    let mut changed = false;
    for a in s.a.iter_mut().skip(m) {
        if *a != Treatment::Code(initial) {
            *a = Treatment::Code(initial);
            changed = true;
        }
    }
    Ok(changed)
}

fn hypothetical_subject<T: Scalar>(s: &mut SubjectRecord<T>, m: usize) -> bool {
    let k = s.k();
    if s.event_time().is_some_and(|te| te <= m) {
        return false;
    }
    if s.censor_time().is_some_and(|tc| tc <= m) {
        return false;
    }
    for t in m..=k {
        s.y[t - 1] = Outcome::Na;
        s.c[t - 1] = Censoring::Censored;
    }
    for t in m..k {
        s.l[t - 1] = None;
    }
    true
}

fn stop_treatment_subject<T>(s: &mut SubjectRecord<T>, m: usize) -> bool {
    let mut changed = false;
    for a in s.a.iter_mut().skip(m) {
        if *a != Treatment::Code(0) {
            *a = Treatment::Code(0);
            changed = true;
        }
    }
    changed
}

/// Per-subject rewrite driver; returns the new dataset and the indices of changed subjects.
fn rewrite<T: Scalar, F>(ds: &TrialDataset<T>, ices: &[IceRecord], kind: &str, mut f: F) -> Result<(TrialDataset<T>, Vec<usize>)>
where
    F: FnMut(&mut SubjectRecord<T>, usize, bool) -> Result<bool>,
{
    let ids = id_map(ds.subjects().iter().map(|s| s.id.as_str()));
    let idx = ice_index(&ids, ds.k(), ices, kind)?;
    let mut subjects = ds.subjects().to_vec();
    let mut changed = Vec::new();
    let mut order: Vec<_> = idx.into_iter().collect();
    order.sort_unstable();
    for (i, (m, terminal)) in order {
        if f(&mut subjects[i], m, terminal)? {
            changed.push(i);
        }
    }
    Ok((ds.with_subjects(subjects)?, changed))
}

/// Composite variable: the outcome becomes the earlier of the primary event and the ICE.
pub fn apply_composite<T: Scalar>(ds: &TrialDataset<T>, ices: &[IceRecord], kind: &str) -> Result<TrialDataset<T>> {
    rewrite(ds, ices, kind, composite_subject).map(|r| r.0)
}

/// Treatment policy: treatment nodes from the ICE on are reset to the initially assigned code.
pub fn apply_treatment_policy<T: Scalar>(ds: &TrialDataset<T>, ices: &[IceRecord], kind: &str) -> Result<TrialDataset<T>> {
    rewrite(ds, ices, kind, |s, m, _| treatment_policy_subject(s, m)).map(|r| r.0)
}

/// Hypothetical: data from the ICE follow-up on are treated as censored.
/// An event at or before the ICE follow-up is kept.
pub fn apply_hypothetical<T: Scalar>(ds: &TrialDataset<T>, ices: &[IceRecord], kind: &str) -> Result<TrialDataset<T>> {
    rewrite(ds, ices, kind, |s, m, _| Ok(hypothetical_subject(s, m))).map(|r| r.0)
}

/// Competing risk: a terminal ICE becomes a competing event that freezes the primary outcome at 0.
pub fn apply_competing_risk<T: Scalar>(ds: &TrialDataset<T>, ices: &[IceRecord], kind: &str) -> Result<CompetingDataset<T>> {
    let cds = CompetingDataset::from_trial(ds);
    Ok(competing_rewrite(&cds, ices, kind)?.0)
}

fn competing_rewrite<T: Scalar>(cds: &CompetingDataset<T>, ices: &[IceRecord], kind: &str) -> Result<(CompetingDataset<T>, usize)> {
    let ids = id_map(cds.subjects().iter().map(|s| s.id.as_str()));
    let idx = ice_index(&ids, cds.k(), ices, kind)?;
    let mut subjects = cds.subjects().to_vec();
    let mut ties = 0;
    for (&i, &(m, terminal)) in &idx {
        if !terminal {
            return Err(Error::InvalidPlan(format!(
                "competing-risk strategy needs terminal ICEs; `{kind}` for subject `{}` is not terminal",
                subjects[i].id
            )));
        }
        let (_, tie) = competing::mark_competing(&mut subjects[i], m);
        ties += usize::from(tie);
    }
    Ok((cds.with_subjects(subjects)?, ties))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Composed<T> {
    Trial(TrialDataset<T>),
    Competing(CompetingDataset<T>),
}

impl<T: Scalar> Composed<T> {
    pub fn trial(&self) -> Option<&TrialDataset<T>> {
        match self {
            Composed::Trial(d) => Some(d),
            Composed::Competing(_) => None,
        }
    }

    pub fn competing(&self) -> Option<&CompetingDataset<T>> {
        match self {
            Composed::Competing(d) => Some(d),
            Composed::Trial(_) => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Composed::Trial(d) => d.len(),
            Composed::Competing(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Output of [`compose_plan`].
#[derive(Debug, Clone)]
pub struct ComposedData<T> {
    pub data: Composed<T>,
    /// Per subject (dataset order): the ICE kind and strategy whose rewrite
    /// censored the subject, if any. Censoring already present in the input
    /// is untagged.
    pub censoring_tags: Vec<Option<(String, Strategy)>>,
    pub notes: Vec<String>,
}

/// Apply every plan step in order. Competing-risk steps are applied last, in
/// their declared relative order, since they change the outcome shape.
pub fn compose_plan<T: Scalar>(ds: &TrialDataset<T>, ices: &[IceRecord], plan: &StrategyPlan) -> Result<ComposedData<T>> {
    let kinds: BTreeSet<&str> = ices.iter().map(|i| i.kind.as_str()).collect();
    for kind in kinds {
        if plan.strategy_for(kind).is_none() {
            return Err(Error::PlanIncomplete(kind.to_string()));
        }
    }

    let mut current = ds.clone();
    let mut tags: Vec<Option<(String, Strategy)>> = vec![None; ds.len()];
    let mut notes = Vec::new();
    let mut competing_kinds = Vec::new();

    for step in plan.steps() {
        let kind = step.kind.as_str();
        let (next, changed) = match step.strategy {
            Strategy::Composite => {
                let ids = id_map(current.subjects().iter().map(|s| s.id.as_str()));
                let idx = ice_index(&ids, current.k(), ices, kind)?;
                let ties = idx
                    .iter()
                    .filter(|(&i, &(m, _))| current.subjects()[i].event_time() == Some(m))
                    .count();
                if ties > 0 {
                    notes.push(format!("{kind}: {ties} same-month primary-event/ICE ties resolved as composite event at that month"));
                }
                // An ICE after censoring made by an earlier step never happens
                // in that step's hypothetical world.
                let plan_censored: HashSet<&str> = current
                    .subjects()
                    .iter()
                    .zip(&tags)
                    .filter(|(_, tag)| tag.is_some())
                    .map(|(s, _)| s.id.as_str())
                    .collect();
                let mut skipped = 0;
                let out = rewrite(&current, ices, kind, |s, m, terminal| {
                    if plan_censored.contains(s.id.as_str()) && s.censor_time().is_some_and(|tc| m > tc) {
                        skipped += 1;
                        return Ok(false);
                    }
                    composite_subject(s, m, terminal)
                })?;
                if skipped > 0 {
                    notes.push(format!("{kind}: {skipped} ICE(s) after plan-induced censoring ignored"));
                }
                out
            }
            Strategy::TreatmentPolicy => rewrite(&current, ices, kind, |s, m, _| treatment_policy_subject(s, m))?,
            Strategy::Hypothetical | Strategy::WhileOnTreatmentAlt1 => {
                rewrite(&current, ices, kind, |s, m, _| Ok(hypothetical_subject(s, m)))?
            }
            Strategy::WhileOnTreatmentAlt2 => rewrite(&current, ices, kind, |s, m, _| Ok(stop_treatment_subject(s, m)))?,
            Strategy::CompetingRisk => {
                competing_kinds.push(kind);
                continue;
            }
            Strategy::PrincipalStratum => {
                notes.push(format!("{kind}: principal-stratum handling leaves the data unchanged"));
                continue;
            }
        };
        if step.strategy.censors() {
            for &i in &changed {
                tags[i] = Some((kind.to_string(), step.strategy));
            }
        }
        current = next;
    }

    let violations = validate_dataset(&current);
    if let Some(v) = violations.first() {
        return Err(Error::InvalidDataset(format!("plan produced a non-conforming record: {v}")));
    }

    let data = if competing_kinds.is_empty() {
        Composed::Trial(current)
    } else {
        let mut cds = CompetingDataset::from_trial(&current);
        for kind in competing_kinds {
            let (next, ties) = competing_rewrite(&cds, ices, kind)?;
            if ties > 0 {
                notes.push(format!("{kind}: {ties} same-month primary-event/competing-event ties resolved in favour of the primary event"));
            }
            cds = next;
        }
        if let Some(v) = validate_competing(&cds).first() {
            return Err(Error::InvalidDataset(format!("competing outcome invariant broken for `{}` at {}: {}", v.0, v.1, v.2)));
        }
        Composed::Competing(cds)
    };
    Ok(ComposedData { data, censoring_tags: tags, notes })
}

#[cfg(test)]
mod tests;
