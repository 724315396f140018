use super::{FiniteDistribution, Scalar, CENTERING_TOLERANCE};
use crate::{Error, Result};

/// Float slack when testing `1 + αf(x) >= 0` at the boundary.
const BOUNDARY_SLACK: f64 = 1e-12;

/// Checks the preconditions of the biased reweighting: `α >= 0`,
/// `E[f(X)] = 0`, and `f(x) >= -1/α` on the support.
pub fn check_utility<T, S>(x: &FiniteDistribution<T, S>, f: impl Fn(&T) -> S, alpha: &S) -> Result<()>
where
    T: Ord + Clone,
    S: Scalar,
{
    if *alpha < S::zero() {
        return Err(Error::InvalidParameter(format!(
            "bias strength must be nonnegative, got {}",
            alpha.to_f64()
        )));
    }
    let mean = x.expect(&f);
    if !mean.approx_eq(&S::zero(), CENTERING_TOLERANCE) {
        return Err(Error::InvalidUtility { mean: mean.to_f64() });
    }
    if alpha.is_zero() {
        return Ok(());
    }
    for v in x.support() {
        let weight = S::one() + alpha.clone() * f(v);
        let below = if S::EXACT {
            weight < S::zero()
        } else {
            weight.to_f64() < -BOUNDARY_SLACK
        };
        if below {
            return Err(Error::InvalidBias {
                value: f(v).to_f64(),
                bound: -1.0 / alpha.to_f64(),
            });
        }
    }
    Ok(())
}

/// The reweighted distribution with mass `P(x)(1 + αf(x))`.
///
/// `f` must be centered under `x` and bounded below by `-1/α`. Float results
/// are renormalised to absorb rounding; exact results sum to one by
/// construction.
pub fn biased<T, S>(x: &FiniteDistribution<T, S>, f: impl Fn(&T) -> S, alpha: &S) -> Result<FiniteDistribution<T, S>>
where
    T: Ord + Clone,
    S: Scalar,
{
    check_utility(x, &f, alpha)?;
    if alpha.is_zero() {
        return Ok(x.clone());
    }
    let mut atoms: Vec<(T, S)> = x
        .atoms()
        .iter()
        .map(|(v, p)| {
            let mut w = S::one() + alpha.clone() * f(v);
            if w < S::zero() {
                w = S::zero();
            }
            (v.clone(), p.clone() * w)
        })
        .collect();
    if !S::EXACT {
        let total = atoms.iter().fold(S::zero(), |acc, (_, p)| acc + p.clone());
        for (_, p) in atoms.iter_mut() {
            *p = p.clone() / total.clone();
        }
    }
    atoms.retain(|(_, p)| !p.is_zero());
    Ok(FiniteDistribution::from_sorted_unchecked(atoms))
}

/// `E[f(B)]` for `B` the biased distribution. Equals `α · Var[f(X)]`.
pub fn biased_mean_shift<T, S>(x: &FiniteDistribution<T, S>, f: impl Fn(&T) -> S, alpha: &S) -> Result<S>
where
    T: Ord + Clone,
    S: Scalar,
{
    let b = biased(x, &f, alpha)?;
    Ok(b.expect(&f))
}

/// Checks `p · biased(α) + (1 − p) · X == biased(p·α)` pointwise.
pub fn mixture_identity_check<T, S>(x: &FiniteDistribution<T, S>, f: impl Fn(&T) -> S, alpha: &S, p: &S) -> Result<bool>
where
    T: Ord + Clone,
    S: Scalar,
{
    if *p < S::zero() || *p > S::one() {
        return Err(Error::InvalidParameter(format!(
            "mixture weight must lie in [0, 1], got {}",
            p.to_f64()
        )));
    }
    let full = biased(x, &f, alpha)?;
    let lhs = full.mix(p, x)?;
    let rhs = biased(x, &f, &(p.clone() * alpha.clone()))?;
    Ok(lhs.approx_eq(&rhs, 1e-12))
}
