use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Scalar, MASS_TOLERANCE};
use crate::{Error, Result};

/// A probability distribution with finite support.
///
/// Atoms are kept sorted by value with distinct values and strictly positive
/// mass; zero-mass entries handed to [`FiniteDistribution::new`] are dropped,
/// so `support()` is the set of values with positive probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDistribution<T, S = f64> {
    atoms: Vec<(T, S)>,
}

impl<T: Ord + Clone, S: Scalar> FiniteDistribution<T, S> {
    pub fn new(entries: impl IntoIterator<Item = (T, S)>) -> Result<Self> {
        let mut atoms: Vec<(T, S)> = entries.into_iter().collect();
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDistribution("duplicate support value".into()));
        }
        if atoms.iter().any(|(_, p)| *p < S::zero()) {
            return Err(Error::InvalidDistribution("negative probability".into()));
        }
        atoms.retain(|(_, p)| !p.is_zero());
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let total = atoms.iter().fold(S::zero(), |acc, (_, p)| acc + p.clone());
        let tol = MASS_TOLERANCE * atoms.len().max(1) as f64;
        if !total.approx_eq(&S::one(), tol) {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {} instead of 1",
                total.to_f64()
            )));
        }
        Ok(Self { atoms })
    }

    /// Builds from atoms already sorted, distinct and positive. Callers
    /// guarantee the invariants; checked in debug builds.
    pub(crate) fn from_sorted_unchecked(atoms: Vec<(T, S)>) -> Self {
        debug_assert!(atoms.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(atoms.iter().all(|(_, p)| *p > S::zero()));
        Self { atoms }
    }

    pub fn point(value: T) -> Self {
        Self {
            atoms: vec![(value, S::one())],
        }
    }

    pub fn uniform(values: impl IntoIterator<Item = T>) -> Result<Self> {
        let values: Vec<T> = values.into_iter().collect();
        let n = S::from_int(values.len() as i64);
        Self::new(values.into_iter().map(|v| (v, S::one() / n.clone())))
    }

    pub fn atoms(&self) -> &[(T, S)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = &T> {
        self.atoms.iter().map(|(v, _)| v)
    }

    pub fn contains(&self, value: &T) -> bool {
        self.index_of(value).is_some()
    }

    pub fn index_of(&self, value: &T) -> Option<usize> {
        self.atoms.binary_search_by(|(v, _)| v.cmp(value)).ok()
    }

    /// Mass at `value`, zero outside the support.
    pub fn prob(&self, value: &T) -> S {
        self.index_of(value)
            .map(|i| self.atoms[i].1.clone())
            .unwrap_or_else(S::zero)
    }

    pub fn expect(&self, f: impl Fn(&T) -> S) -> S {
        self.atoms.iter().fold(S::zero(), |acc, (v, p)| acc + p.clone() * f(v))
    }

    pub fn variance(&self, f: impl Fn(&T) -> S) -> S {
        let mean = self.expect(&f);
        self.expect(|v| {
            let d = f(v) - mean.clone();
            d.clone() * d
        })
    }

    pub fn map_probs<S2: Scalar>(&self, f: impl Fn(&S) -> S2) -> FiniteDistribution<T, S2> {
        FiniteDistribution {
            atoms: self
                .atoms
                .iter()
                .map(|(v, p)| (v.clone(), f(p)))
                .filter(|(_, p)| !p.is_zero())
                .collect(),
        }
    }

    pub fn to_f64(&self) -> FiniteDistribution<T, f64> {
        self.map_probs(|p| p.to_f64())
    }

    /// `weight · self + (1 − weight) · other`.
    pub fn mix(&self, weight: &S, other: &Self) -> Result<Self> {
        let mut values: Vec<T> = self.support().chain(other.support()).cloned().collect();
        values.sort();
        values.dedup();
        let rest = S::one() - weight.clone();
        Self::new(values.into_iter().map(|v| {
            let p = weight.clone() * self.prob(&v) + rest.clone() * other.prob(&v);
            (v, p)
        }))
    }

    /// Draws a value by inverse-CDF sampling on the float masses.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &T {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (v, p) in &self.atoms {
            acc += p.to_f64();
            if u < acc {
                return v;
            }
        }
        &self.atoms[self.atoms.len() - 1].0
    }

    /// Pointwise equality of masses over the union of supports.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let mut values: Vec<&T> = self.support().chain(other.support()).collect();
        values.sort();
        values.dedup();
        values.into_iter().all(|v| self.prob(v).approx_eq(&other.prob(v), tol))
    }
}

/// Inverse-CDF draw over a slice of float masses; returns the index.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: impl IntoIterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Rational;
    use num_traits::One;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn zero_mass_entries_leave_the_support() {
        let d = FiniteDistribution::new([(0u32, q(0, 1)), (1, q(1, 1))]).unwrap();
        assert_eq!(d.len(), 1);
        assert!(!d.contains(&0));
    }

    #[test]
    fn rejects_bad_mass_and_duplicates() {
        assert!(FiniteDistribution::new([(0u32, 0.5), (1, 0.4)]).is_err());
        assert!(FiniteDistribution::new([(0u32, 0.5), (0, 0.5)]).is_err());
        assert!(FiniteDistribution::new([(0u32, -0.5), (1, 1.5)]).is_err());
        assert!(FiniteDistribution::<u32, f64>::new([]).is_err());
    }

    #[test]
    fn exact_moments() {
        let d = FiniteDistribution::uniform([-1i64, 1])
            .map(|d: FiniteDistribution<i64, Rational>| d)
            .unwrap();
        assert_eq!(d.expect(|v| Rational::from_int(*v)), q(0, 1));
        assert_eq!(d.variance(|v| Rational::from_int(*v)), Rational::one());
    }

    #[test]
    fn sampling_frequencies_track_masses() {
        let d = FiniteDistribution::new([(0u32, 0.25), (1, 0.75)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ones = (0..20_000).filter(|_| *d.sample(&mut rng) == 1).count();
        let freq = ones as f64 / 20_000.0;
        assert!((freq - 0.75).abs() < 0.015, "{freq}");
    }
}
