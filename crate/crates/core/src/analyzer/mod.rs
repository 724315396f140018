//! Exact attacked-tree oracle, Monte Carlo harness and martingale
//! diagnostics.

mod exact;
mod martingale;
mod monte_carlo;

use serde::{Deserialize, Serialize};

pub use exact::{
    exact_attacked_distribution, joint_level, kl_attacked_vs_honest, variance_accounting, ExactAttack, JointNode,
    KlReport,
};
pub use martingale::{martingale_diagnostics, DoobCheck, MartingaleReport};
pub use monte_carlo::{
    monte_carlo, run_trial, trial_seed, ExecutionTrace, ExperimentReport, McConfig, McResult, RoundRecord, TrialRecord,
    REPORT_SCHEMA_VERSION,
};

use crate::protocol::RoundClass;

/// Summed conditional variances of the honest increments, split by round
/// class. `robust` is `small + large`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VarianceAccounting {
    pub robust: f64,
    pub small: f64,
    pub large: f64,
    pub nonrobust: f64,
}

impl VarianceAccounting {
    pub fn add(&mut self, class: RoundClass, v: f64) {
        match class {
            RoundClass::NonRobustJump => self.nonrobust += v,
            RoundClass::LargeJump => {
                self.large += v;
                self.robust += v;
            }
            RoundClass::SmallJump => {
                self.small += v;
                self.robust += v;
            }
        }
    }

    pub fn scaled(self, w: f64) -> Self {
        Self {
            robust: self.robust * w,
            small: self.small * w,
            large: self.large * w,
            nonrobust: self.nonrobust * w,
        }
    }

    pub fn plus(self, o: Self) -> Self {
        Self {
            robust: self.robust + o.robust,
            small: self.small + o.small,
            large: self.large + o.large,
            nonrobust: self.nonrobust + o.nonrobust,
        }
    }
}

/// A measured quantity next to an asymptotic bound. Informational only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    pub measured: f64,
    pub bound: f64,
    pub within: bool,
}

impl BoundComparison {
    pub fn new(measured: f64, bound: f64) -> Self {
        Self {
            measured,
            bound,
            within: measured <= bound,
        }
    }
}
