//! Step 1 tentative datasets for reference-based imputation and their reversal.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Censoring, Outcome, SubjectRecord, Treatment, TrialDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Assumption {
    /// Censoring at random.
    #[serde(rename = "CAR")]
    Car,
    /// Copy reference.
    #[serde(rename = "CR")]
    Cr,
    /// Jump to reference.
    #[serde(rename = "J2R")]
    J2r,
}

impl Assumption {
    pub(crate) fn index(self) -> u64 {
        match self {
            Assumption::Car => 0,
            Assumption::Cr => 1,
            Assumption::J2r => 2,
        }
    }
}

/// Everything needed to undo Step 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Ledger<T> {
    pub assumption: Assumption,
    pub reference_arm: Option<u32>,
    /// Complete non-reference subjects removed, with their original position.
    pub deleted: Vec<(usize, SubjectRecord<T>)>,
    /// Original records of rewritten subjects, by original position.
    pub overwritten: Vec<(usize, SubjectRecord<T>)>,
    /// Original position of each tentative row.
    pub positions: Vec<usize>,
    pub original_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TentativeDataset<T> {
    pub data: TrialDataset<T>,
    pub ledger: Ledger<T>,
}

/// CAR needs no Step 1: the dataset itself with an empty ledger.
pub fn make_tentative_car<T: Scalar>(ds: &TrialDataset<T>) -> TentativeDataset<T> {
    TentativeDataset {
        data: ds.clone(),
        ledger: Ledger {
            assumption: Assumption::Car,
            reference_arm: None,
            deleted: vec![],
            overwritten: vec![],
            positions: (0..ds.len()).collect(),
            original_len: ds.len(),
        },
    }
}

fn make<T: Scalar>(ds: &TrialDataset<T>, reference: u32, assumption: Assumption) -> Result<TentativeDataset<T>> {
    let arms = ds.arms();
    if !arms.contains(&reference) {
        return Err(Error::EmptyArm(reference));
    }
    if arms.len() < 2 {
        return Err(Error::InvalidSpec("reference-based imputation needs a non-reference arm".into()));
    }
    let mut ledger = Ledger {
        assumption,
        reference_arm: Some(reference),
        deleted: vec![],
        overwritten: vec![],
        positions: vec![],
        original_len: ds.len(),
    };
    let mut rows = Vec::new();
    for (i, s) in ds.subjects().iter().enumerate() {
        if s.arm() == Some(reference) {
            rows.push(s.clone());
            ledger.positions.push(i);
        } else if s.is_complete() {
            ledger.deleted.push((i, s.clone()));
        } else {
            let mut r = s.clone();
            r.a.iter_mut().for_each(|a| *a = Treatment::Code(reference));
            if assumption == Assumption::J2r {
                r.y.iter_mut().for_each(|y| *y = Outcome::Na);
                r.c.iter_mut().for_each(|c| *c = Censoring::Censored);
                r.l.iter_mut().for_each(|l| *l = None);
            }
            ledger.overwritten.push((i, s.clone()));
            ledger.positions.push(i);
            rows.push(r);
        }
    }
    Ok(TentativeDataset { data: ds.with_subjects(rows)?, ledger })
}

/// Drop complete non-reference subjects and relabel the rest as the reference arm.
pub fn make_tentative_cr<T: Scalar>(ds: &TrialDataset<T>, reference_arm: u32) -> Result<TentativeDataset<T>> {
    make(ds, reference_arm, Assumption::Cr)
}

/// As copy-reference, and also treat every retained non-reference subject as
/// censored right after baseline.
pub fn make_tentative_j2r<T: Scalar>(ds: &TrialDataset<T>, reference_arm: u32) -> Result<TentativeDataset<T>> {
    make(ds, reference_arm, Assumption::J2r)
}

/// Carry the first event forward. Rejects records with NA outcomes.
pub fn monotone_adjust_subject<T: Scalar>(s: &mut SubjectRecord<T>) -> Result<()> {
    let mut seen = false;
    for (j, y) in s.y.iter_mut().enumerate() {
        match *y {
            Outcome::Na => {
                return Err(Error::Domain(format!("subject `{}`: Y({}) is NA", s.id, j + 1)));
            }
            Outcome::Event => seen = true,
            Outcome::Free if seen => *y = Outcome::Event,
            Outcome::Free => {}
        }
    }
    Ok(())
}

pub fn monotone_adjust<T: Scalar>(ds: &TrialDataset<T>) -> Result<TrialDataset<T>> {
    let mut subjects = ds.subjects().to_vec();
    for s in &mut subjects {
        monotone_adjust_subject(s)?;
    }
    ds.with_subjects(subjects)
}

/// Step 4 for one row: put back the original treatment codes and, under
/// jump-to-reference, the originally observed outcomes and covariates.
pub(crate) fn restore_record<T: Scalar>(
    assumption: Assumption,
    original: &SubjectRecord<T>,
    mut imputed: SubjectRecord<T>,
) -> Result<SubjectRecord<T>> {
    imputed.a = original.a.clone();
    if assumption == Assumption::J2r {
        for (y, o) in imputed.y.iter_mut().zip(&original.y) {
            if !o.is_na() {
                *y = *o;
            }
        }
        for (l, o) in imputed.l.iter_mut().zip(&original.l) {
            if o.is_some() {
                *l = o.clone();
            }
        }
        super::models::complete_record(&mut imputed);
        monotone_adjust_subject(&mut imputed)?;
    }
    Ok(imputed)
}

/// Undo Step 1 on a completed tentative dataset: restore arm codes, re-insert
/// deleted complete cases and, for jump-to-reference, restore observed cells
/// over the imputations (then re-apply the monotone convention).
pub fn restore_original<T: Scalar>(tentative: &TentativeDataset<T>, completed: &TrialDataset<T>) -> Result<TrialDataset<T>> {
    let ledger = &tentative.ledger;
    if completed.len() != tentative.data.len() {
        return Err(Error::Dimension(format!(
            "completed dataset has {} rows, tentative has {}",
            completed.len(),
            tentative.data.len()
        )));
    }
    let originals: HashMap<usize, &SubjectRecord<T>> = ledger.overwritten.iter().map(|(i, s)| (*i, s)).collect();
    let mut out: Vec<Option<SubjectRecord<T>>> = vec![None; ledger.original_len];
    for (i, s) in &ledger.deleted {
        out[*i] = Some(s.clone());
    }
    for (row, (&pos, s)) in ledger.positions.iter().zip(completed.subjects()).enumerate() {
        if s.id != tentative.data.subjects()[row].id {
            return Err(Error::InvalidDataset(format!("row {row}: id `{}` does not match the tentative dataset", s.id)));
        }
        let restored = match originals.get(&pos) {
            Some(orig) => restore_record(ledger.assumption, orig, s.clone())?,
            None => s.clone(),
        };
        out[pos] = Some(restored);
    }
    let subjects = out
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::InvalidDataset(format!("ledger does not cover original row {i}"))))
        .collect::<Result<Vec<_>>>()?;
    completed.with_subjects(subjects)
}
