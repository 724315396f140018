//! Monotone coupling of `X` with its biased variant.
//!
//! Draw `a ~ X`. Keep `b = a` when `f(a) >= 0`; otherwise keep it with
//! probability `1 + αf(a)` and else redraw `b` from `X⁺`, the distribution with
//! mass proportional to `P(x)f(x)` on `{f > 0}`. Then `a ~ X`,
//! `b ~ biased(X, f, α)` and `f(b) >= f(a)` on every outcome.
//!
//! The normaliser of `X⁺` is `E[f⁺(X)]`, which for centered `f` equals
//! `E[|f(X)|] / 2`; that is what makes the `b` marginal come out right.

use rand::Rng;

use super::dist::sample_index;
use super::{biased::check_utility, FiniteDistribution, Scalar};
use crate::{Error, Result};

/// The auxiliary distribution `X⁺`, mass `P(x)f(x) / E[f⁺]` on `f(x) > 0`.
pub fn positive_part<T, S>(x: &FiniteDistribution<T, S>, f: impl Fn(&T) -> S) -> Result<FiniteDistribution<T, S>>
where
    T: Ord + Clone,
    S: Scalar,
{
    let weights: Vec<(T, S)> = x
        .atoms()
        .iter()
        .filter_map(|(v, p)| {
            let fv = f(v);
            (fv > S::zero()).then(|| (v.clone(), p.clone() * fv))
        })
        .collect();
    let total = weights.iter().fold(S::zero(), |acc, (_, w)| acc + w.clone());
    if total.is_zero() {
        return Err(Error::InvalidDistribution("utility has no positive part".into()));
    }
    Ok(FiniteDistribution::from_sorted_unchecked(
        weights.into_iter().map(|(v, w)| (v, w / total.clone())).collect(),
    ))
}

/// Exact joint law of the coupled pair `(a, b)`.
pub fn coupling_joint<T, S>(
    x: &FiniteDistribution<T, S>,
    f: impl Fn(&T) -> S,
    alpha: &S,
) -> Result<FiniteDistribution<(T, T), S>>
where
    T: Ord + Clone,
    S: Scalar,
{
    check_utility(x, &f, alpha)?;
    let plus = positive_part(x, &f).ok();
    let mut atoms = Vec::new();
    for (a, pa) in x.atoms() {
        let fa = f(a);
        if fa >= S::zero() || alpha.is_zero() {
            atoms.push(((a.clone(), a.clone()), pa.clone()));
            continue;
        }
        let stay = S::one() + alpha.clone() * fa.clone();
        let stay = if stay < S::zero() { S::zero() } else { stay };
        atoms.push(((a.clone(), a.clone()), pa.clone() * stay.clone()));
        let moved = pa.clone() * (S::one() - stay);
        let plus = plus
            .as_ref()
            .expect("a negative utility value implies a positive one for centered f");
        for (b, pb) in plus.atoms() {
            atoms.push(((a.clone(), b.clone()), moved.clone() * pb.clone()));
        }
    }
    atoms.retain(|(_, p)| !p.is_zero());
    FiniteDistribution::new(atoms)
}

/// Samples one coupled pair.
pub fn monotone_coupling<T, S, R>(
    x: &FiniteDistribution<T, S>,
    f: impl Fn(&T) -> S,
    alpha: &S,
    rng: &mut R,
) -> Result<(T, T)>
where
    T: Ord + Clone,
    S: Scalar,
    R: Rng + ?Sized,
{
    check_utility(x, &f, alpha)?;
    let probs: Vec<f64> = x.atoms().iter().map(|(_, p)| p.to_f64()).collect();
    let utility: Vec<f64> = x.atoms().iter().map(|(v, _)| f(v).to_f64()).collect();
    let (a, b) = sample_coupled_indices(&probs, &utility, alpha.to_f64(), rng);
    Ok((x.atoms()[a].0.clone(), x.atoms()[b].0.clone()))
}

/// Index-level coupling sampler on float masses, shared with the simulator.
pub fn sample_coupled_indices<R: Rng + ?Sized>(
    probs: &[f64],
    utility: &[f64],
    alpha: f64,
    rng: &mut R,
) -> (usize, usize) {
    let a = sample_index(probs.iter().copied(), rng);
    let fa = utility[a];
    if fa >= 0.0 || alpha == 0.0 {
        return (a, a);
    }
    let stay: f64 = 1.0 + alpha * fa;
    if rng.random::<f64>() < stay {
        return (a, a);
    }
    let weights = probs
        .iter()
        .zip(utility)
        .map(|(p, u)| if *u > 0.0 { p * u } else { 0.0 });
    let total: f64 = weights.clone().sum();
    let b = sample_index(weights.map(|w| w / total), rng);
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{biased, Rational};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn fair_sign_joint() {
        let x = FiniteDistribution::<i64, Rational>::uniform([-1, 1]).unwrap();
        let joint = coupling_joint(&x, |v| Rational::from_int(*v), &q(1, 2)).unwrap();
        assert_eq!(joint.prob(&(-1, -1)), q(1, 4));
        assert_eq!(joint.prob(&(-1, 1)), q(1, 4));
        assert_eq!(joint.prob(&(1, 1)), q(1, 2));
        assert_eq!(joint.len(), 3);
    }

    #[test]
    fn marginals_of_a_skewed_instance() {
        let x = FiniteDistribution::new([(0u32, q(1, 2)), (1, q(1, 3)), (2, q(1, 6))]).unwrap();
        // f centered: 1/2·(-1) + 1/3·(1/2) + 1/6·2 = 0
        let f = |v: &u32| match v {
            0 => q(-1, 1),
            1 => q(1, 2),
            _ => q(2, 1),
        };
        let alpha = q(3, 4);
        let joint = coupling_joint(&x, f, &alpha).unwrap();
        let target = biased(&x, f, &alpha).unwrap();
        for v in 0u32..3 {
            let a: Rational = joint
                .atoms()
                .iter()
                .filter(|((a, _), _)| *a == v)
                .fold(q(0, 1), |s, (_, p)| s + p.clone());
            let b: Rational = joint
                .atoms()
                .iter()
                .filter(|((_, b), _)| *b == v)
                .fold(q(0, 1), |s, (_, p)| s + p.clone());
            assert_eq!(a, x.prob(&v));
            assert_eq!(b, target.prob(&v));
        }
        assert!(joint.support().all(|(a, b)| f(b) >= f(a)));
    }

    #[test]
    fn nonnegative_draw_is_kept() {
        let x = FiniteDistribution::<i64, f64>::uniform([-1, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (a, b) = monotone_coupling(&x, |v| *v as f64, &0.5, &mut rng).unwrap();
            if a >= 0 {
                assert_eq!(a, b);
            }
            assert!(b >= a);
        }
        for _ in 0..50 {
            let (a, b) = monotone_coupling(&x, |_| 0.0, &0.5, &mut rng).unwrap();
            assert_eq!(a, b);
        }
    }
}
