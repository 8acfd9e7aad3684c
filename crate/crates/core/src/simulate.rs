//! Synthetic two-arm trials with exponential-noise accelerated event times.
//!
//! For subject covariates W = (W1, W2), W1 ~ Unif(0, 1), W2 ~ Norm(0, 1):
//!
//! ```text
//! T_P = exp(b_y + coef_y·W + coef_a·A) · (offset + e_y),  e_y ~ Exp(rate_y)
//! C   = exp(b_c + coef_c·W)            · (offset + e_c),  e_c ~ Exp(rate_c)
//! T_I = exp(b_i + coef_i·W + coef_a_ice·A) · (offset + e_i),  e_i ~ Exp(rate_i)
//! ```
//!
//! Each subject draws from its own seed stream, so a subject's covariates and
//! noise are identical across the observed trial, its censoring-free
//! counterpart and both potential outcomes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Outcome, SubjectRecord, Timeline, TrialDataset, Treatment};
use crate::discretize::{discretize_with_ice, EventTimes};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamRng};
use crate::scalar::Scalar;
use crate::strategy::IceRecord;

pub const COVARIATES: [&str; 2] = ["W1", "W2"];
pub const SYNTHETIC_L: &str = "synth_w2";

/// What an ICE does to the recorded treatment nodes from its month on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IceTreatment {
    #[default]
    Unchanged,
    Discontinue,
    Rescue(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IceConfig {
    pub kind: String,
    pub terminal: bool,
    pub treatment: IceTreatment,
}

impl Default for IceConfig {
    fn default() -> Self {
        IceConfig { kind: "ice".into(), terminal: false, treatment: IceTreatment::Unchanged }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub n: usize,
    pub k: usize,
    pub intercept_y: f64,
    pub intercept_c: f64,
    pub intercept_i: f64,
    pub coef_y: Vec<f64>,
    pub coef_c: Vec<f64>,
    pub coef_i: Vec<f64>,
    /// Treatment coefficient inside the primary-event exponent.
    pub coef_a: f64,
    /// Treatment coefficient inside the ICE exponent.
    pub coef_a_ice: f64,
    pub noise_rate_y: f64,
    pub noise_rate_c: f64,
    pub noise_rate_i: f64,
    pub noise_offset: f64,
    /// When false no subject is censored before K.
    pub censoring: bool,
    /// ICE generation; `None` disables ICEs.
    pub ice: Option<IceConfig>,
    /// Emit L(t) = W2 + N(0, 0.25) while observed. Synthetic, for model-fitting exercise only.
    pub synthetic_l: bool,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n: 400,
            k: 10,
            intercept_y: 1.0,
            intercept_c: 1.0,
            intercept_i: 1.0,
            coef_y: vec![0.5, 0.5],
            coef_c: vec![0.25, -0.5],
            coef_i: vec![-0.1, -0.2],
            coef_a: -0.5,
            coef_a_ice: 0.0,
            noise_rate_y: 1.0,
            noise_rate_c: 2.0,
            noise_rate_i: 3.0,
            noise_offset: 2.0,
            censoring: true,
            ice: Some(IceConfig::default()),
            synthetic_l: false,
            seed: 123,
        }
    }
}

impl DgpConfig {
    /// Defaults with the primary-event W coefficients of the accompanying R listing, (-0.5, 0.5).
    pub fn listing_variant() -> Self {
        DgpConfig { coef_y: vec![-0.5, 0.5], ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let d = COVARIATES.len();
        for (name, v) in [("coef_y", &self.coef_y), ("coef_c", &self.coef_c), ("coef_i", &self.coef_i)] {
            if v.len() != d {
                return Err(Error::Dimension(format!("{name} has length {}, expected {d}", v.len())));
            }
        }
        if self.n == 0 || !self.n.is_multiple_of(2) {
            return Err(Error::InvalidSpec(format!("n = {} must be positive and even", self.n)));
        }
        if self.k == 0 {
            return Err(Error::InvalidSpec("k must be >= 1".into()));
        }
        for (name, r) in [
            ("noise_rate_y", self.noise_rate_y),
            ("noise_rate_c", self.noise_rate_c),
            ("noise_rate_i", self.noise_rate_i),
        ] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidSpec(format!("{name} must be positive and finite")));
            }
        }
        if !(self.noise_offset > 0.0) {
            return Err(Error::InvalidSpec("noise_offset must be positive".into()));
        }
        Ok(())
    }

    fn arm_of(&self, index: usize) -> u32 {
        u32::from(index >= self.n / 2)
    }
}

/// Per-subject latent draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latent<T> {
    pub w: [T; 2],
    /// Exponential noise for (event, censoring, ICE), already scaled by 1/rate.
    pub noise: [T; 3],
}

fn draw_latent<T: Scalar>(cfg: &DgpConfig, rng: &mut StreamRng) -> Latent<T> {
    let w1 = T::unit_open(rng);
    let w2 = T::std_normal(rng);
    let ey = T::std_exponential(rng) / T::lit(cfg.noise_rate_y);
    let ec = T::std_exponential(rng) / T::lit(cfg.noise_rate_c);
    let ei = T::std_exponential(rng) / T::lit(cfg.noise_rate_i);
    Latent { w: [w1, w2], noise: [ey, ec, ei] }
}

fn linear<T: Scalar>(intercept: f64, coef: &[f64], w: &[T; 2]) -> T {
    T::lit(intercept) + T::lit(coef[0]) * w[0] + T::lit(coef[1]) * w[1]
}

/// Event times of one subject under arm `arm` given its latent draws.
///
/// The treatment enters as a multiplicative factor `exp(coef_a * arm)`, so the
/// treated time is exactly the control time times `exp(coef_a)`.
pub fn event_times<T: Scalar>(cfg: &DgpConfig, latent: &Latent<T>, arm: u32) -> EventTimes<T> {
    let off = T::lit(cfg.noise_offset);
    let a = T::lit(f64::from(arm));
    let ty = linear(cfg.intercept_y, &cfg.coef_y, &latent.w).exp() * (off + latent.noise[0]);
    let ty = ty * (T::lit(cfg.coef_a) * a).exp();
    let tc = if cfg.censoring {
        linear(cfg.intercept_c, &cfg.coef_c, &latent.w).exp() * (off + latent.noise[1])
    } else {
        T::infinity()
    };
    let ti = cfg.ice.as_ref().map(|_| {
        linear(cfg.intercept_i, &cfg.coef_i, &latent.w).exp()
            * (off + latent.noise[2])
            * (T::lit(cfg.coef_a_ice) * a).exp()
    });
    EventTimes::new(ty, tc, ti)
}

#[derive(Debug, Clone)]
pub struct SimulatedTrial<T> {
    pub dataset: TrialDataset<T>,
    pub times: Vec<EventTimes<T>>,
    pub ices: Vec<IceRecord>,
}

fn subject_id(i: usize) -> String {
    (i + 1).to_string()
}

/// Simulate one observed trial: first n/2 subjects control (A = 0), the rest treated.
pub fn simulate_trial<T: Scalar>(cfg: &DgpConfig) -> Result<SimulatedTrial<T>> {
    cfg.validate()?;
    let timeline = Timeline::new(cfg.k)?;
    let k = cfg.k;
    let rows: Vec<(SubjectRecord<T>, EventTimes<T>, Option<IceRecord>)> = (0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            let latent = draw_latent::<T>(cfg, &mut rng);
            let arm = cfg.arm_of(i);
            let times = event_times(cfg, &latent, arm);
            let disc = discretize_with_ice(&timeline, &times)?;
            let mut s = disc.to_subject(subject_id(i), arm, latent.w.to_vec());
            if cfg.synthetic_l {
                for t in 1..k {
                    let noise = T::std_normal(&mut rng) * T::lit(0.5);
                    if s.y_at(t) != Outcome::Na {
                        s.l[t - 1] = Some(vec![latent.w[1] + noise]);
                    }
                }
            }
            let ice = match (&cfg.ice, disc.ice_month) {
                (Some(ic), Some(m)) => {
                    let code = match ic.treatment {
                        IceTreatment::Unchanged => None,
                        IceTreatment::Discontinue => Some(Treatment::Absent),
                        IceTreatment::Rescue(c) => Some(Treatment::Code(c)),
                    };
                    if let Some(code) = code {
                        for j in m..k {
                            s.a[j] = code;
                        }
                    }
                    Some(IceRecord::new(s.id.clone(), ic.kind.clone(), m, ic.terminal))
                }
                _ => None,
            };
            Ok((s, times, ice))
        })
        .collect::<Result<_>>()?;

    let tv = if cfg.synthetic_l { vec![SYNTHETIC_L.to_string()] } else { vec![] };
    let mut subjects = Vec::with_capacity(cfg.n);
    let mut times = Vec::with_capacity(cfg.n);
    let mut ices = Vec::new();
    for (s, t, ice) in rows {
        subjects.push(s);
        times.push(t);
        ices.extend(ice);
    }
    let names = COVARIATES.iter().map(|s| s.to_string()).collect();
    let dataset = TrialDataset::new(timeline, names, tv, subjects)?;
    Ok(SimulatedTrial { dataset, times, ices })
}

/// Principal stratum by potential ICE occurrence at K: first letter under
/// always-treat, second under never-treat; A = alive (no ICE), D = ICE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stratum {
    AA,
    AD,
    DA,
    DD,
}

impl Stratum {
    pub fn label(self) -> &'static str {
        match self {
            Stratum::AA => "AA",
            Stratum::AD => "AD",
            Stratum::DA => "DA",
            Stratum::DD => "DD",
        }
    }
}

/// Both potential worlds of one subject, sharing covariates and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialRecord<T> {
    pub id: String,
    pub w: [T; 2],
    /// Primary-event time under arm 0 and arm 1.
    pub t_event: [T; 2],
    /// ICE time under arm 0 and arm 1, when ICEs are generated.
    pub t_ice: [Option<T>; 2],
}

impl<T: Scalar> PotentialRecord<T> {
    /// Y^a(K): event by follow-up K under arm a.
    pub fn event_by(&self, arm: u32, k: usize) -> bool {
        self.t_event[arm as usize] <= T::from_count(k)
    }

    /// Y_D^a(K): ICE by follow-up K under arm a.
    pub fn ice_by(&self, arm: u32, k: usize) -> Option<bool> {
        self.t_ice[arm as usize].map(|t| t <= T::from_count(k))
    }
}

fn potential_record<T: Scalar>(cfg: &DgpConfig, i: usize) -> PotentialRecord<T> {
    let mut rng = stream_rng(cfg.seed, i as u64);
    let latent = draw_latent::<T>(cfg, &mut rng);
    let t0 = event_times(cfg, &latent, 0);
    let t1 = event_times(cfg, &latent, 1);
    PotentialRecord {
        id: subject_id(i),
        w: latent.w,
        t_event: [t0.t_event, t1.t_event],
        t_ice: [t0.t_ice, t1.t_ice],
    }
}

/// Potential times under both arms for the same subjects `simulate_trial` draws.
pub fn simulate_potential<T: Scalar>(cfg: &DgpConfig) -> Result<Vec<PotentialRecord<T>>> {
    cfg.validate()?;
    Ok((0..cfg.n).into_par_iter().map(|i| potential_record(cfg, i)).collect())
}

/// Monte-Carlo E[1 - Y^a(horizon)] over `draws` subjects drawn with `seed`
/// as the root seed. Pass a seed different from the trial's for an
/// independent oracle.
pub fn oracle_survival(cfg: &DgpConfig, arm: u32, horizon: usize, draws: usize, seed: u64) -> Result<f64> {
    let mut c = cfg.clone();
    c.seed = seed;
    c.n = draws + draws % 2;
    c.validate()?;
    let alive: usize = (0..draws)
        .into_par_iter()
        .map(|i| usize::from(!potential_record::<f64>(&c, i).event_by(arm, horizon)))
        .sum();
    Ok(alive as f64 / draws as f64)
}

/// Label subjects from (Y_D under always-treat, Y_D under never-treat) pairs.
pub fn classify_principal_strata(pairs: &[(Option<bool>, Option<bool>)]) -> Result<Vec<Stratum>> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| match *p {
            (Some(false), Some(false)) => Ok(Stratum::AA),
            (Some(false), Some(true)) => Ok(Stratum::AD),
            (Some(true), Some(false)) => Ok(Stratum::DA),
            (Some(true), Some(true)) => Ok(Stratum::DD),
            _ => Err(Error::MissingPotential(format!("subject at position {i} lacks a potential ICE indicator"))),
        })
        .collect()
}

/// Strata of simulated potential records at follow-up `k`.
pub fn strata_at<T: Scalar>(records: &[PotentialRecord<T>], k: usize) -> Result<Vec<Stratum>> {
    let pairs: Vec<_> = records.iter().map(|r| (r.ice_by(1, k), r.ice_by(0, k))).collect();
    classify_principal_strata(&pairs)
}

/// Survivor average causal effect within the AA stratum, computed from
/// potential outcomes. `None` when the stratum is empty.
pub fn sace_oracle<T: Scalar>(records: &[PotentialRecord<T>], k: usize) -> Result<Option<f64>> {
    let strata = strata_at(records, k)?;
    let (mut n, mut sum) = (0usize, 0i64);
    for (r, s) in records.iter().zip(&strata) {
        if *s == Stratum::AA {
            n += 1;
            sum += i64::from(r.event_by(0, k)) - i64::from(r.event_by(1, k));
        }
    }
    Ok((n > 0).then(|| sum as f64 / n as f64))
}
