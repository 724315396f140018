use std::hint::black_box;
use std::sync::Arc;

use coinflip_core::adversary::{Labeling, NormalAttacker};
use coinflip_core::analyzer::{exact_attacked_distribution, monte_carlo, run_trial, McConfig};
use coinflip_core::prob::Rational;
use coinflip_core::zoo;
use coinflip_core::{AttackParameters, Evaluator, Protocol, Transcript};
use criterion::{criterion_group, criterion_main, Criterion};

fn params(n: usize) -> AttackParameters {
    AttackParameters::for_n(n).unwrap().with_lambda(1.0).unwrap()
}

fn evaluator(c: &mut Criterion) {
    let p: Arc<dyn Protocol> = Arc::new(zoo::majority_many_turn(3, 3).unwrap());
    c.bench_function("evaluate many_turn(3,3) f64", |b| {
        b.iter(|| Evaluator::<f64>::new(p.clone()).value(&Transcript::new()).unwrap())
    });
    c.bench_function("evaluate many_turn(3,3) rational", |b| {
        b.iter(|| Evaluator::<Rational>::new(p.clone()).value(&Transcript::new()).unwrap())
    });
}

fn exact_attack(c: &mut Criterion) {
    let p: Arc<dyn Protocol> = Arc::new(zoo::majority_single_turn(7).unwrap());
    let pr = params(7);
    let ev = Arc::new(Evaluator::<f64>::new(p));
    let adv = NormalAttacker::new(ev.clone(), pr.clone(), Labeling::Normalized);
    c.bench_function("exact normal attack majority(7)", |b| {
        b.iter(|| exact_attacked_distribution(&ev, &adv, &pr).unwrap().prob_one)
    });
}

fn sampling(c: &mut Criterion) {
    let p: Arc<dyn Protocol> = Arc::new(zoo::majority_single_turn(5).unwrap());
    let pr = params(5);
    let ev = Arc::new(Evaluator::<f64>::new(p));
    let adv = NormalAttacker::new(ev.clone(), pr.clone(), Labeling::Normalized);
    c.bench_function("monte carlo 10k trials majority(5)", |b| {
        b.iter(|| {
            let cfg = McConfig {
                trials: 10_000,
                base_seed: 1,
                workers: 1,
                keep_records: false,
            };
            monte_carlo(&ev, &adv, &pr, cfg).unwrap().report.outcome_frequency
        })
    });

    let big: Arc<dyn Protocol> = Arc::new(zoo::majority_single_turn(1001).unwrap());
    let pr = params(1001).with_lambda(4.0).unwrap();
    let ev = Arc::new(Evaluator::<f64>::new(big));
    let adv = NormalAttacker::new(ev.clone(), pr.clone(), Labeling::Normalized);
    let mut seed = 0;
    c.bench_function("single trial majority(1001)", |b| {
        b.iter(|| {
            seed += 1;
            run_trial(&ev, &adv, &pr, black_box(seed), 7, false)
                .unwrap()
                .0
                .corruptions
        })
    });
}

criterion_group!(benches, evaluator, exact_attack, sampling);
criterion_main!(benches);
