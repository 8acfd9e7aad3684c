//! Random conforming datasets shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tte_estimand::data::{Censoring, Outcome, SubjectRecord, Timeline, Treatment, TrialDataset};
use tte_estimand::strategy::IceRecord;

pub struct Shape {
    pub n: usize,
    pub k: usize,
    /// Number of binary baseline covariates.
    pub w: usize,
    /// Emit one time-varying covariate.
    pub l: bool,
    /// Treatment may switch after baseline.
    pub switching: bool,
    pub hazard: f64,
    pub censor: f64,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Monotone, NA-after-censoring records with arms 0/1.
pub fn dataset(r: &mut impl Rng, shape: &Shape) -> TrialDataset<f64> {
    let Shape { n, k, .. } = *shape;
    let subjects = (0..n)
        .map(|i| {
            let w: Vec<f64> = (0..shape.w).map(|_| f64::from(r.gen_bool(0.5) as u8)).collect();
            let arm = u32::from(r.gen_bool(0.5));
            let mut s = SubjectRecord {
                id: format!("s{i}"),
                w: w.clone(),
                a: vec![Treatment::Code(arm); k],
                c: vec![Censoring::Uncensored; k],
                y: vec![Outcome::Free; k],
                l: vec![None; k - 1],
            };
            let mut a = arm;
            let bump = w.iter().sum::<f64>() * 0.05;
            for t in 1..=k {
                if shape.switching && t > 1 && r.gen_bool(0.15) {
                    a = 1 - a;
                }
                s.a[t - 1] = Treatment::Code(a);
                if r.gen_bool(shape.censor) {
                    for u in t..=k {
                        s.c[u - 1] = Censoring::Censored;
                        s.y[u - 1] = Outcome::Na;
                    }
                    break;
                }
                let h = (shape.hazard + bump - 0.04 * f64::from(a)).clamp(0.01, 0.95);
                if r.gen_bool(h) {
                    for u in t..=k {
                        s.y[u - 1] = Outcome::Event;
                    }
                    break;
                }
                if shape.l && t < k {
                    s.l[t - 1] = Some(vec![r.gen_range(-1.0..1.0)]);
                }
            }
            s
        })
        .collect();
    let tv = if shape.l { vec!["L".to_string()] } else { vec![] };
    let names = (1..=shape.w).map(|j| format!("W{j}")).collect();
    TrialDataset::new(Timeline::new(k).unwrap(), names, tv, subjects).unwrap()
}

/// ICE records of the given kinds, each observed no later than censoring.
/// Kinds flagged `true` are always terminal, the others 30% of the time.
pub fn ices(r: &mut impl Rng, ds: &TrialDataset<f64>, kinds: &[(&str, bool)], rate: f64) -> Vec<IceRecord> {
    let mut out = Vec::new();
    for s in ds.subjects() {
        for &(kind, terminal) in kinds {
            if !r.gen_bool(rate) {
                continue;
            }
            let last = s.censor_time().unwrap_or(ds.k()).min(ds.k());
            out.push(IceRecord::new(s.id.clone(), kind, r.gen_range(1..=last), terminal || r.gen_bool(0.3)));
        }
    }
    out
}

/// Day-by-day scan with 30-day months: the first month holding the event or
/// the censoring ends follow-up, and the event wins within a month.
/// Returns (T, delta, row) with T = K + 1 for administrative end.
pub fn scan_discretize(k: usize, t_event: f64, t_censor: f64) -> (usize, bool, Vec<Outcome>) {
    let (ey, ec) = (t_event * 30.0, t_censor * 30.0);
    let mut ended: Option<(usize, bool)> = None;
    for m in 1..=k {
        let (mut ev, mut ce) = (false, false);
        for day in (m - 1) * 30 + 1..=m * 30 {
            let d = day as f64;
            ev |= d >= ey && d - 1.0 < ey;
            ce |= d >= ec && d - 1.0 < ec;
        }
        if ev || ce {
            ended = Some((m, ev));
            break;
        }
    }
    let mut row = vec![Outcome::Free; k];
    match ended {
        Some((m, true)) => row[m - 1..].fill(Outcome::Event),
        Some((m, false)) => row[m - 1..].fill(Outcome::Na),
        None => {}
    }
    let (t, delta) = ended.unwrap_or((k + 1, false));
    (t, delta, row)
}

/// Plug-in g-formula by enumeration: average over the empirical W
/// distribution of the probability of every outcome path, with transition
/// probabilities estimated by counting regime-followers at risk in the W
/// stratum. Returns survival at `horizon`, or None if a reachable stratum is empty.
pub fn gformula(ds: &TrialDataset<f64>, regime: &[u32], horizon: usize) -> Option<f64> {
    let n = ds.len() as f64;
    let mut patterns: Vec<Vec<f64>> = ds.subjects().iter().map(|s| s.w.clone()).collect();
    patterns.sort_by(|a, b| a.partial_cmp(b).unwrap());
    patterns.dedup();
    let mut total = 0.0;
    for w in patterns {
        let stratum: Vec<&SubjectRecord<f64>> = ds.subjects().iter().filter(|s| s.w == w).collect();
        let pw = stratum.len() as f64 / n;
        // P(Y(t) = 1 | Y(t-1) = 0, uncensored, on regime through t-1, w)
        let mut hazard = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let risk: Vec<_> = stratum
                .iter()
                .filter(|s| (1..t).all(|u| s.y[u - 1] == Outcome::Free))
                .filter(|s| !s.c[t - 1].is_censored())
                .filter(|s| (0..t).all(|j| s.a[j] == Treatment::Code(regime[j])))
                .collect();
            if risk.is_empty() {
                // Unreachable once every path has had the event.
                if hazard.contains(&1.0) {
                    hazard.push(0.0);
                    continue;
                }
                return None;
            }
            let events = risk.iter().filter(|s| s.y[t - 1] == Outcome::Event).count();
            hazard.push(events as f64 / risk.len() as f64);
        }
        total += pw * paths(&hazard, 0, false, 1.0);
    }
    Some(total)
}

/// Sum of path probabilities ending event-free, over all 0/1 paths.
fn paths(hazard: &[f64], t: usize, dead: bool, p: f64) -> f64 {
    if t == hazard.len() {
        return if dead { 0.0 } else { p };
    }
    if dead {
        return paths(hazard, t + 1, true, p);
    }
    paths(hazard, t + 1, true, p * hazard[t]) + paths(hazard, t + 1, false, p * (1.0 - hazard[t]))
}

/// The six subjects of the worked example, K = 12, all assigned code 1.
pub fn worked_example_subjects() -> TrialDataset<f64> {
    let k = 12;
    let s1 = SubjectRecord::with_times("1", 1, vec![], k, None, None);
    let s2 = SubjectRecord::with_times("2", 1, vec![], k, Some(9), None);
    let s3 = SubjectRecord::with_times("3", 1, vec![], k, None, Some(11));
    // death from another cause ends observation of the primary outcome
    let s4 = SubjectRecord::with_times("4", 1, vec![], k, None, Some(5));
    let mut s5 = SubjectRecord::with_times("5", 1, vec![], k, Some(7), None);
    for a in &mut s5.a[4..] {
        *a = Treatment::Absent;
    }
    let mut s6 = SubjectRecord::with_times("6", 1, vec![], k, None, Some(8));
    for a in &mut s6.a[2..] {
        *a = Treatment::Code(2);
    }
    TrialDataset::new(Timeline::new(k).unwrap(), vec![], vec![], vec![s1, s2, s3, s4, s5, s6]).unwrap()
}
