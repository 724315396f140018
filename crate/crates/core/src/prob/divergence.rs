use super::{FiniteDistribution, Scalar};

/// `KL(P ‖ Q) = Σ P(x) log2(P(x)/Q(x))`, `+∞` when `supp P ⊄ supp Q`.
pub fn kl_divergence<T, S>(p: &FiniteDistribution<T, S>, q: &FiniteDistribution<T, S>) -> f64
where
    T: Ord + Clone,
    S: Scalar,
{
    let mut total = 0.0;
    for (v, pv) in p.atoms() {
        let qv = q.prob(v);
        if qv.is_zero() {
            return f64::INFINITY;
        }
        let ratio = (pv.clone() / qv).to_f64();
        total += pv.to_f64() * ratio.log2();
    }
    // Rounding can leave a tiny negative residue when P = Q.
    total.max(0.0)
}

/// Total variation distance `½ Σ |P(x) − Q(x)|`.
pub fn statistical_distance<T, S>(p: &FiniteDistribution<T, S>, q: &FiniteDistribution<T, S>) -> S
where
    T: Ord + Clone,
    S: Scalar,
{
    let mut values: Vec<&T> = p.support().chain(q.support()).collect();
    values.sort();
    values.dedup();
    let sum = values
        .into_iter()
        .fold(S::zero(), |acc, v| acc + (p.prob(v) - q.prob(v)).abs_val());
    sum / S::from_int(2)
}

/// Pinsker: `SD(P, Q) <= sqrt(KL(P ‖ Q) / 2)`. KL here is in bits, which
/// only makes the right-hand side larger than the nats version.
pub fn pinsker_check<T, S>(p: &FiniteDistribution<T, S>, q: &FiniteDistribution<T, S>) -> bool
where
    T: Ord + Clone,
    S: Scalar,
{
    let sd = statistical_distance(p, q).to_f64();
    sd <= (kl_divergence(p, q) / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(entries: &[(u32, f64)]) -> FiniteDistribution<u32> {
        FiniteDistribution::new(entries.iter().copied()).unwrap()
    }

    #[test]
    fn identical_distributions() {
        let p = d(&[(0, 0.3), (1, 0.7)]);
        assert_eq!(kl_divergence(&p, &p), 0.0);
        assert_eq!(statistical_distance(&p, &p), 0.0);
        assert!(pinsker_check(&p, &p));
    }

    #[test]
    fn point_against_fair_coin_is_one_bit() {
        let p = d(&[(1, 1.0)]);
        let q = d(&[(0, 0.5), (1, 0.5)]);
        assert!((kl_divergence(&p, &q) - 1.0).abs() < 1e-15);
        assert_eq!(kl_divergence(&q, &p), f64::INFINITY);
    }

    #[test]
    fn distances() {
        assert_eq!(statistical_distance(&d(&[(1, 1.0)]), &d(&[(0, 1.0)])), 1.0);
        let p = d(&[(0, 0.5), (1, 0.5)]);
        let q = d(&[(0, 0.25), (1, 0.75)]);
        assert!((statistical_distance(&p, &q) - 0.25).abs() < 1e-15);
        assert!(pinsker_check(&q, &p));
    }
}
