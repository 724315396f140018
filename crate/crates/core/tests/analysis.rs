mod common;

use std::sync::Arc;

use coinflip_core::adversary::{Labeling, NormalAttacker};
use coinflip_core::analyzer::*;
use coinflip_core::normalizer::{normalize, semantics_difference, validate_normal};
use coinflip_core::prob::Rational;
use coinflip_core::zoo::{self, TwoRoundToy};
use coinflip_core::{Evaluator, PartyId, Protocol, DEFAULT_NODE_BUDGET};
use common::*;

#[test]
fn normalization_of_the_zoo() {
    for p in enumerable_zoo() {
        let n = p.num_parties();
        for threshold in [None, Some(0.2), Some(0.6)] {
            let pr = params(n, 1.0, threshold);
            let ev = Arc::new(Evaluator::<Rational>::new(p.clone()));
            let (normalized, mapping) = normalize(ev, &pr).unwrap();
            let ne = Evaluator::<Rational>::new(normalized.clone());
            let report = validate_normal(&ne, &pr, Some(PartyId(0))).unwrap();
            assert!(report.all_passed(), "{}: {:?}", p.name(), report);
            assert_eq!(
                semantics_difference(p.as_ref(), normalized.as_ref(), DEFAULT_NODE_BUDGET).unwrap(),
                None
            );
            assert!(mapping.reachable_pseudo_parties().len() <= mapping.declared_pseudo_parties());
        }
    }
}

#[test]
fn martingale_identities_hold_exactly() {
    for n in [3, 5] {
        let p: Arc<dyn Protocol> = Arc::new(zoo::majority_single_turn(n).unwrap());
        let r = martingale_diagnostics(&Evaluator::<Rational>::new(p), &[0.6, 0.8, 1.0]).unwrap();
        assert!(r.exact);
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.output_variance, 0.25);
        assert_eq!(r.doob.len(), 3);
    }
}

#[test]
fn martingale_on_every_zoo_protocol() {
    for p in enumerable_zoo() {
        let r = martingale_diagnostics(&Evaluator::<Rational>::new(p.clone()), &[0.5, 1.0]).unwrap();
        assert!(r.passed(), "{}: {r:?}", p.name());
    }
}

#[test]
fn kl_chain_rule_and_joint_agree() {
    for (p, n) in [
        (Arc::new(zoo::majority_single_turn(5).unwrap()) as Arc<dyn Protocol>, 5),
        (Arc::new(zoo::majority_many_turn(3, 3).unwrap()), 3),
        (Arc::new(TwoRoundToy), 4),
    ] {
        let pr = params(n, 1.0, None);
        let ev = Evaluator::<f64>::new(p);
        let adv = NormalAttacker::new(
            Arc::new(Evaluator::new(ev.protocol().clone())),
            pr.clone(),
            Labeling::Normalized,
        );
        let kl = kl_attacked_vs_honest(&ev, &adv, &pr).unwrap();
        assert!(kl.agree, "{kl:?}");
        assert!(kl.bound.bound > 0.0);
        let (acc, cmp) = variance_accounting(&ev, &adv, &pr).unwrap();
        assert_eq!(cmp.measured, acc.robust);
    }
}

fn toy_setup() -> (Evaluator<f64>, NormalAttacker, coinflip_core::AttackParameters) {
    let p: Arc<dyn Protocol> = Arc::new(TwoRoundToy);
    let pr = params(4, 1.0, None);
    let ev = Evaluator::new(p.clone());
    let adv = NormalAttacker::new(Arc::new(Evaluator::new(p)), pr.clone(), Labeling::Normalized);
    (ev, adv, pr)
}

#[test]
fn monte_carlo_agrees_with_enumeration() {
    let (ev, adv, pr) = toy_setup();
    let exact = exact_attacked_distribution(&ev, &adv, &pr).unwrap();
    let mc = monte_carlo(
        &ev,
        &adv,
        &pr,
        McConfig {
            trials: 50_000,
            base_seed: 11,
            workers: 1,
            keep_records: false,
        },
    )
    .unwrap()
    .report;
    assert!((mc.outcome_frequency - exact.prob_one).abs() <= 4.0 * mc.outcome_standard_error);
    assert!((mc.mean_corruptions - exact.expected_corruptions).abs() <= 4.0 * mc.corruptions_standard_error);
    assert_eq!(mc.coupling_violations, 0);
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let (ev, adv, pr) = toy_setup();
    let run = |workers| {
        let r = monte_carlo(
            &ev,
            &adv,
            &pr,
            McConfig {
                trials: 40_000,
                base_seed: 5,
                workers,
                keep_records: true,
            },
        )
        .unwrap();
        (serde_json::to_string(&r.report).unwrap(), r.records)
    };
    let (a, ra) = run(1);
    let (b, rb) = run(3);
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(ra.len(), 40_000);
    assert_eq!(ra[7].seed, trial_seed(5, 7));
}

#[test]
fn traces_follow_the_running_expectation() {
    let (ev, adv, pr) = toy_setup();
    for i in 0..50 {
        let (rec, trace) = run_trial(&ev, &adv, &pr, i, 3, true).unwrap();
        let trace = trace.unwrap();
        assert_eq!(trace.outcome, rec.outcome);
        let last = trace.rounds.last().unwrap();
        assert_eq!(last.s_after, if rec.outcome { 1.0 } else { 0.0 });
        for r in &trace.rounds {
            assert!((r.s_after - r.s_before - r.x).abs() < 1e-12);
        }
        assert!(trace.rounds.iter().filter(|r| r.corrupted).count() <= rec.corruptions + 1);
    }
}
