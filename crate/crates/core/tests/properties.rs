use coinflip_core::prob::*;
use coinflip_core::{FiniteDistribution, Transcript};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
    (1usize..=8).prop_flat_map(|k| (prop::collection::vec(1i64..=30, k), prop::collection::vec(-9i64..=9, k)))
}

fn build(weights: &[i64], raw: &[i64]) -> (FiniteDistribution<u32, Rational>, Vec<Rational>) {
    let total: i64 = weights.iter().sum();
    let d = FiniteDistribution::new(
        weights
            .iter()
            .enumerate()
            .map(|(i, w)| (i as u32, Rational::from_int(*w) / Rational::from_int(total))),
    )
    .unwrap();
    let mean = d.expect(|v| Rational::from_int(raw[*v as usize]));
    let f = raw.iter().map(|g| Rational::from_int(*g) - mean.clone()).collect();
    (d, f)
}

fn max_negative(f: &[Rational]) -> Rational {
    f.iter()
        .map(|x| -x.clone())
        .fold(Rational::from_int(0), |a, b| if b > a { b } else { a })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn biased_is_a_distribution_with_the_predicted_shift((w, raw) in instance(), share in 1i64..=16) {
        let (d, f) = build(&w, &raw);
        let m = max_negative(&f);
        let alpha = if m == Rational::from_int(0) { Rational::from_int(1) } else { Rational::from_int(share) / (Rational::from_int(16) * m) };
        let u = |v: &u32| f[*v as usize].clone();
        let b = biased(&d, u, &alpha).unwrap();
        let total = b.atoms().iter().fold(Rational::from_int(0), |s, (_, p)| s + p.clone());
        prop_assert_eq!(total, Rational::from_int(1));
        prop_assert_eq!(b.expect(u), alpha.clone() * d.variance(u));
        let joint = coupling_joint(&d, u, &alpha).unwrap();
        prop_assert!(joint.support().all(|(a, b)| u(b) >= u(a)));
    }

    #[test]
    fn divergences_are_consistent(a in prop::collection::vec(1u32..=20, 1..6), b in prop::collection::vec(1u32..=20, 1..6)) {
        let k = a.len().min(b.len());
        let norm = |x: &[u32]| {
            let t: u32 = x[..k].iter().sum();
            FiniteDistribution::new(x[..k].iter().enumerate().map(|(i, v)| (i as u32, *v as f64 / t as f64))).unwrap()
        };
        let (p, q) = (norm(&a), norm(&b));
        prop_assert!(kl_divergence(&p, &q) >= 0.0);
        prop_assert!(pinsker_check(&p, &q));
        let sd = statistical_distance(&p, &q);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&sd));
        prop_assert!((sd - statistical_distance(&q, &p)).abs() < 1e-15);
    }

    #[test]
    fn transcript_prefixes(values in prop::collection::vec(0u32..4, 0..12), cut in 0usize..12) {
        let t = Transcript::from_values(values.clone());
        let k = cut.min(values.len());
        let p = t.prefix(k);
        prop_assert_eq!(p.len(), k);
        prop_assert_eq!(p.messages(), &t.messages()[..k]);
        let mut back = p.clone();
        for m in &t.messages()[k..] {
            back.push(*m);
        }
        prop_assert_eq!(back, t);
    }
}
