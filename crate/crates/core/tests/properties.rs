mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use tte_estimand::data::{apply_conventions, risk_set, validate_dataset};
use tte_estimand::mi::{completed_datasets, monotone_adjust, Assumption, CombinedSpec, ImputationCovariates};
use tte_estimand::strategy::{compose_plan, validate_competing, Strategy, StrategyPlan};

use common::Shape;

const STRATEGIES: [Strategy; 7] = [
    Strategy::Composite,
    Strategy::TreatmentPolicy,
    Strategy::Hypothetical,
    Strategy::WhileOnTreatmentAlt1,
    Strategy::WhileOnTreatmentAlt2,
    Strategy::CompetingRisk,
    Strategy::PrincipalStratum,
];

fn shape(n: usize, k: usize, l: bool) -> Shape {
    Shape { n, k, w: 2, l, switching: true, hazard: 0.15, censor: 0.1 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conventions_are_idempotent(seed in any::<u64>(), n in 1usize..40, k in 1usize..8, l in any::<bool>()) {
        let ds = common::dataset(&mut common::rng(seed), &shape(n, k, l));
        prop_assert!(validate_dataset(&ds).is_empty());
        let once = apply_conventions(&ds).unwrap();
        prop_assert_eq!(&once, &ds);
        prop_assert_eq!(apply_conventions(&once).unwrap(), once);
    }

    #[test]
    fn risk_sets_shrink(seed in any::<u64>(), n in 1usize..40, k in 2usize..8) {
        let ds = common::dataset(&mut common::rng(seed), &shape(n, k, false));
        for arm in [None, Some(0), Some(1)] {
            for t in 1..k {
                let now: BTreeSet<&str> = risk_set(&ds, t, arm).unwrap().into_iter().collect();
                let next: BTreeSet<&str> = risk_set(&ds, t + 1, arm).unwrap().into_iter().collect();
                prop_assert!(next.is_subset(&now));
            }
        }
    }

    #[test]
    fn plans_yield_conforming_data(
        seed in any::<u64>(),
        n in 1usize..40,
        k in 1usize..8,
        picks in proptest::collection::vec(0usize..7, 2),
    ) {
        let mut r = common::rng(seed);
        let ds = common::dataset(&mut r, &shape(n, k, true));
        let (sx, sy) = (STRATEGIES[picks[0]], STRATEGIES[picks[1]]);
        let competing = |s| s == Strategy::CompetingRisk;
        let ices = common::ices(&mut r, &ds, &[("x", competing(sx)), ("y", competing(sy))], 0.3);
        let plan = StrategyPlan::new(vec![("x".into(), sx), ("y".into(), sy)]).unwrap();
        let out = compose_plan(&ds, &ices, &plan).unwrap();
        if let Some(t) = out.data.trial() {
            prop_assert!(validate_dataset(t).is_empty());
        }
        if let Some(c) = out.data.competing() {
            prop_assert!(validate_competing(c).is_empty());
        }
        let again = compose_plan(&ds, &ices, &plan).unwrap();
        prop_assert_eq!(format!("{:?}", again.data), format!("{:?}", out.data));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn imputations_conform_and_replay(seed in any::<u64>(), k in 2usize..6, a in 0usize..3) {
        let ds = common::dataset(&mut common::rng(seed), &shape(80, k, false));
        let assumption = [Assumption::Car, Assumption::Cr, Assumption::J2r][a];
        let spec = CombinedSpec {
            untagged: assumption,
            m: 2,
            seed,
            reference_arm: Some(0),
            by_kind: Default::default(),
            covariates: ImputationCovariates::default(),
            proper: true,
        };
        let tags = vec![None; ds.len()];
        let (first, _) = completed_datasets(&ds, &tags, &spec).unwrap();
        let (second, _) = completed_datasets(&ds, &tags, &spec).unwrap();
        for (x, y) in first.into_iter().zip(second) {
            let Ok(x) = x else { continue };
            prop_assert!(validate_dataset(&x).is_empty());
            prop_assert!(!x.subjects().iter().any(|s| s.has_na()));
            let adjusted = monotone_adjust(&x).unwrap();
            prop_assert_eq!(&adjusted, &x);
            prop_assert_eq!(monotone_adjust(&adjusted).unwrap(), adjusted);
            prop_assert_eq!(y.unwrap(), x);
        }
    }
}
