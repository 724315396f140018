#![allow(dead_code)]

use std::sync::Arc;

use coinflip_core::params::ThresholdOverrides;
use coinflip_core::prob::{Rational, Scalar};
use coinflip_core::zoo::{self, Constant, TwoRoundToy};
use coinflip_core::{AttackParameters, Evaluator, Protocol, Transcript};

/// Every zoo protocol small enough to enumerate quickly.
pub fn enumerable_zoo() -> Vec<Arc<dyn Protocol>> {
    vec![
        Arc::new(zoo::majority_single_turn(1).unwrap()),
        Arc::new(zoo::majority_single_turn(3).unwrap()),
        Arc::new(zoo::majority_single_turn(5).unwrap()),
        Arc::new(zoo::majority_single_turn(7).unwrap()),
        Arc::new(zoo::majority_many_turn(1, 3).unwrap()),
        Arc::new(zoo::majority_many_turn(3, 3).unwrap()),
        Arc::new(zoo::biased_and(2).unwrap()),
        Arc::new(zoo::biased_and(4).unwrap()),
        Arc::new(zoo::punishing_majority(3, 3, 2).unwrap()),
        Arc::new(Constant::new(true, 2, 3).unwrap()),
        Arc::new(Constant::new(false, 1, 2).unwrap()),
        Arc::new(TwoRoundToy),
    ]
}

pub fn params(n: usize, lambda: f64, threshold: Option<f64>) -> AttackParameters {
    AttackParameters::for_n(n)
        .unwrap()
        .with_lambda(lambda)
        .unwrap()
        .with_overrides(ThresholdOverrides {
            neg_jump_threshold: threshold,
            ..Default::default()
        })
        .unwrap()
}

pub fn exact_value(p: Arc<dyn Protocol>) -> Rational {
    Evaluator::<Rational>::new(p).value(&Transcript::new()).unwrap()
}

pub fn q(n: i64, d: i64) -> Rational {
    Rational::from_int(n) / Rational::from_int(d)
}
