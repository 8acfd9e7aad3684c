//! Estimand specification: summary measure, regimes, horizon and ICE handling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strategy::{RegimeSpec, Strategy, StrategyPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Summary {
    /// E[1 - Y^a(t*)].
    SurvivalAtK,
    /// E[1 - Y^a1(t*)] - E[1 - Y^a0(t*)].
    SurvivalDifference,
    /// Cumulative incidence of the primary event at t* with competing events.
    CifAtK,
    /// Survivor average causal effect in the always-ICE-free stratum; simulation oracle only.
    SaceOracle,
}

impl Summary {
    pub fn regime_count(self) -> usize {
        match self {
            Summary::SurvivalAtK | Summary::CifAtK => 1,
            Summary::SurvivalDifference | Summary::SaceOracle => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimandSpec {
    pub summary: Summary,
    pub regimes: Vec<RegimeSpec>,
    pub horizon: usize,
    #[serde(default)]
    pub plan: StrategyPlan,
}

impl EstimandSpec {
    pub fn validate(&self, k: usize) -> Result<()> {
        let want = self.summary.regime_count();
        if self.regimes.len() != want {
            return Err(Error::InvalidSpec(format!(
                "{:?} needs exactly {want} regime(s), got {}",
                self.summary,
                self.regimes.len()
            )));
        }
        for r in &self.regimes {
            r.check_k(k)?;
        }
        if self.horizon == 0 || self.horizon > k {
            return Err(Error::TimeOutOfRange { t: self.horizon, k });
        }
        let competing = self.plan.steps().iter().any(|s| s.strategy == Strategy::CompetingRisk);
        if self.summary == Summary::CifAtK && !competing {
            return Err(Error::InvalidSpec("CIF_AT_K needs a COMPETING_RISK step in the plan".into()));
        }
        if competing && self.summary != Summary::CifAtK {
            return Err(Error::InvalidSpec("a COMPETING_RISK plan yields a cumulative-incidence estimand; use CIF_AT_K".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(summary: Summary, n: usize) -> EstimandSpec {
        EstimandSpec {
            summary,
            regimes: vec![RegimeSpec::constant(1, 4).unwrap(); n],
            horizon: 4,
            plan: StrategyPlan::default(),
        }
    }

    #[test]
    fn regime_counts() {
        assert!(spec(Summary::SurvivalAtK, 1).validate(4).is_ok());
        assert!(spec(Summary::SurvivalDifference, 1).validate(4).is_err());
        assert!(spec(Summary::SurvivalDifference, 2).validate(4).is_ok());
        assert!(spec(Summary::SaceOracle, 3).validate(4).is_err());
    }

    #[test]
    fn horizon_within_timeline() {
        let mut s = spec(Summary::SurvivalAtK, 1);
        s.horizon = 5;
        assert!(s.validate(4).is_err());
        assert!(spec(Summary::SurvivalAtK, 1).validate(5).is_err());
    }

    #[test]
    fn cif_needs_competing_plan() {
        let mut s = spec(Summary::CifAtK, 1);
        assert!(s.validate(4).is_err());
        s.plan = StrategyPlan::new(vec![("death".into(), Strategy::CompetingRisk)]).unwrap();
        assert!(s.validate(4).is_ok());
    }

    #[test]
    fn serde_names() {
        let s: Summary = serde_json::from_str("\"SURVIVAL_AT_K\"").unwrap();
        assert_eq!(s, Summary::SurvivalAtK);
    }
}
