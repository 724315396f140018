//! Attack constants and the thresholds derived from them.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Upper bound on one-shot iterations whatever the formula for `t` says.
pub const HARD_ITERATION_LIMIT: usize = 10_000;

/// Largest value the default `ε`/`δ` formulas are allowed to take; they
/// reach or exceed 1 for very small `n`.
const DEFAULT_CLAMP: f64 = 0.99;

/// Explicit values that replace derived thresholds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neg_jump_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub large_var_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub small_corrupt_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

/// The constants `n, ε, λ, δ`.
///
/// Thresholds are computed on demand: `1/(λ√n)`, `1/(λn)`, `16λ²/√n` and
/// `λ²/√n`, unless overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackParameters {
    pub n: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub delta: f64,
    #[serde(default)]
    pub overrides: ThresholdOverrides,
}

impl AttackParameters {
    /// Default constants for `n` parties: `ε = (log log n)^(-1/50)`,
    /// `λ = 100/ε⁵`, `δ = 1/log² n` (base 2).
    pub fn for_n(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        let epsilon = default_epsilon(n);
        let p = Self {
            n,
            epsilon,
            lambda: 100.0 / epsilon.powi(5),
            delta: default_delta(n),
            overrides: ThresholdOverrides::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn new(n: usize, epsilon: f64, lambda: f64, delta: f64) -> Result<Self> {
        let p = Self {
            n,
            epsilon,
            lambda,
            delta,
            overrides: ThresholdOverrides::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_overrides(mut self, overrides: ThresholdOverrides) -> Result<Self> {
        self.overrides = overrides;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0,1)");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive and finite");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0,1)");
        }
        let o = &self.overrides;
        for (name, v) in [
            ("neg_jump_threshold", o.neg_jump_threshold),
            ("large_var_threshold", o.large_var_threshold),
            ("posterior_cap", o.posterior_cap),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("{name} must be positive")));
                }
            }
        }
        if let Some(p) = o.small_corrupt_prob {
            if !(0.0..=1.0).contains(&p) {
                return bad("small_corrupt_prob must lie in [0,1]");
            }
        }
        if o.max_iterations == Some(0) {
            return bad("max_iterations must be at least 1");
        }
        Ok(())
    }

    fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    /// `1/(λ√n)`: a jump at or below its negation makes a round non-robust.
    pub fn neg_jump_threshold(&self) -> f64 {
        self.overrides
            .neg_jump_threshold
            .unwrap_or_else(|| 1.0 / (self.lambda * self.sqrt_n()))
    }

    /// `1/(λn)`: jump variance at or above it makes a round large.
    pub fn large_var_threshold(&self) -> f64 {
        self.overrides
            .large_var_threshold
            .unwrap_or_else(|| 1.0 / (self.lambda * self.n as f64))
    }

    /// `16λ²/√n`: a small-jumps party biases only while its corruption
    /// posterior is at most this.
    pub fn posterior_cap(&self) -> f64 {
        self.overrides
            .posterior_cap
            .unwrap_or_else(|| 16.0 * self.lambda * self.lambda / self.sqrt_n())
    }

    /// `λ²/√n`, unclamped.
    pub fn small_corrupt_prob(&self) -> f64 {
        self.overrides
            .small_corrupt_prob
            .unwrap_or_else(|| self.lambda * self.lambda / self.sqrt_n())
    }

    /// Lottery probability for a large-jump party, `λ²√v`, unclamped.
    pub fn large_corrupt_prob(&self, variance: f64) -> f64 {
        self.lambda * self.lambda * variance.max(0.0).sqrt()
    }

    /// Iteration limit `t` for the one-shot phase: `√n·λ/δ`, capped.
    pub fn max_iterations(&self) -> usize {
        self.overrides.max_iterations.unwrap_or_else(|| {
            let t = self.sqrt_n() * self.lambda / self.delta;
            if t.is_finite() {
                (t.ceil() as usize).clamp(1, HARD_ITERATION_LIMIT)
            } else {
                HARD_ITERATION_LIMIT
            }
        })
    }

    /// Bound `2/λ` on the summed conditional variance of the coupled
    /// honest increments.
    pub fn variance_bound(&self) -> f64 {
        2.0 / self.lambda
    }

    /// Bound `16³λ³` on KL between attacked and honest transcripts.
    pub fn kl_bound(&self) -> f64 {
        16f64.powi(3) * self.lambda.powi(3)
    }
}

fn default_epsilon(n: usize) -> f64 {
    let ll = (n as f64).log2().log2();
    let e = ll.powf(-1.0 / 50.0);
    if e.is_finite() && e > 0.0 && e < 1.0 {
        e.min(DEFAULT_CLAMP)
    } else {
        DEFAULT_CLAMP
    }
}

fn default_delta(n: usize) -> f64 {
    let l = (n as f64).log2();
    let d = 1.0 / (l * l);
    if d.is_finite() && d > 0.0 && d < 1.0 {
        d.min(DEFAULT_CLAMP)
    } else {
        DEFAULT_CLAMP
    }
}

/// Clamps a probability into `[0,1]`, reporting whether it had to.
pub fn clamp_probability(p: f64) -> (f64, bool) {
    if p > 1.0 {
        (1.0, true)
    } else if p < 0.0 {
        (0.0, true)
    } else {
        (p, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_thresholds() {
        let p = AttackParameters::new(100, 0.5, 2.0, 0.1).unwrap();
        assert!((p.neg_jump_threshold() - 0.05).abs() < 1e-15);
        assert!((p.large_var_threshold() - 0.005).abs() < 1e-15);
        assert!((p.posterior_cap() - 6.4).abs() < 1e-12);
        assert!((p.small_corrupt_prob() - 0.4).abs() < 1e-15);
        assert_eq!(p.max_iterations(), 200);
    }

    #[test]
    fn defaults_for_small_and_large_n() {
        for n in [1, 2, 3, 4, 5, 1001, 1 << 20] {
            let p = AttackParameters::for_n(n).unwrap();
            assert!(p.epsilon > 0.0 && p.epsilon < 1.0);
            assert!(p.delta > 0.0 && p.delta < 1.0);
            assert!(p.lambda >= 100.0);
            assert!(p.max_iterations() <= HARD_ITERATION_LIMIT);
        }
        let p = AttackParameters::for_n(1 << 16).unwrap();
        assert!((p.delta - 1.0 / 256.0).abs() < 1e-15);
        assert!((p.epsilon - 4f64.powf(-0.02)).abs() < 1e-15);
    }

    #[test]
    fn overrides_and_validation() {
        let o = ThresholdOverrides {
            neg_jump_threshold: Some(0.6),
            ..Default::default()
        };
        let p = AttackParameters::new(3, 0.3, 1.0, 0.1)
            .unwrap()
            .with_overrides(o)
            .unwrap();
        assert_eq!(p.neg_jump_threshold(), 0.6);
        assert!(AttackParameters::new(3, 1.0, 1.0, 0.1).is_err());
        assert!(AttackParameters::new(3, 0.5, -1.0, 0.1).is_err());
        assert!(AttackParameters::for_n(0).is_err());
        assert_eq!(clamp_probability(1.5), (1.0, true));
        assert_eq!(clamp_probability(0.5), (0.5, false));
    }
}
