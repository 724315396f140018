//! Canonical protocol generators.

mod majority;
mod misc;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use majority::{BiasedAnd, Majority, PunishingMajority};
pub use misc::{Constant, TwoRoundToy};

use crate::protocol::{Message, MessageDist, Prob, Protocol};
use crate::{Error, FiniteDistribution, Result};

/// A generator name plus its parameters, as written in config files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZooSpec {
    MajoritySingleTurn { n: usize },
    MajorityManyTurn { n: usize, k: usize },
    BiasedAnd { n: usize },
    PunishingMajority { n: usize, k: usize, run_len: usize },
    Constant { value: bool, parties: usize, rounds: usize },
    TwoRoundToy,
}

impl ZooSpec {
    pub fn build(&self) -> Result<Arc<dyn Protocol>> {
        Ok(match *self {
            ZooSpec::MajoritySingleTurn { n } => Arc::new(majority_single_turn(n)?),
            ZooSpec::MajorityManyTurn { n, k } => Arc::new(majority_many_turn(n, k)?),
            ZooSpec::BiasedAnd { n } => Arc::new(biased_and(n)?),
            ZooSpec::PunishingMajority { n, k, run_len } => Arc::new(punishing_majority(n, k, run_len)?),
            ZooSpec::Constant { value, parties, rounds } => Arc::new(Constant::new(value, parties, rounds)?),
            ZooSpec::TwoRoundToy => Arc::new(TwoRoundToy),
        })
    }
}

/// `n` parties, one unbiased bit each in order, majority output.
pub fn majority_single_turn(n: usize) -> Result<Majority> {
    Majority::new(n, 1)
}

/// `n` parties each sending `k` bits round-robin, majority of all bits.
pub fn majority_many_turn(n: usize, k: usize) -> Result<Majority> {
    Majority::new(n, k)
}

/// Every party sends a bit that is 0 with probability `1/n`; output AND.
pub fn biased_and(n: usize) -> Result<BiasedAnd> {
    BiasedAnd::new(n)
}

/// Many-turn majority ignoring parties whose bits contain a 1-run of length
/// `run_len`; ties go to 0.
pub fn punishing_majority(n: usize, k: usize, run_len: usize) -> Result<PunishingMajority> {
    PunishingMajority::new(n, k, run_len)
}

/// Bit distribution with `Pr[1] = p_one`.
pub(crate) fn bit_dist(p_one: Prob) -> MessageDist {
    let zero = Prob::from_integer(1) - p_one;
    let atoms: Vec<_> = [(Message(0), zero), (Message(1), p_one)]
        .into_iter()
        .filter(|(_, p)| *p != Prob::from_integer(0))
        .collect();
    FiniteDistribution::from_sorted_unchecked(atoms)
}

pub(crate) fn fair_bit() -> MessageDist {
    bit_dist(Prob::new(1, 2))
}

pub(crate) fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidProtocol(what.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_roundtrip() {
        let s = ZooSpec::PunishingMajority { n: 3, k: 3, run_len: 2 };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"generator":"punishing_majority","n":3,"k":3,"run_len":2}"#);
        assert_eq!(serde_json::from_str::<ZooSpec>(&j).unwrap(), s);
        let t: ZooSpec = serde_json::from_str(r#"{"generator":"two_round_toy"}"#).unwrap();
        assert_eq!(t, ZooSpec::TwoRoundToy);
    }

    #[test]
    fn bad_parameters() {
        assert!(majority_single_turn(4).is_err());
        assert!(majority_many_turn(2, 3).is_err());
        assert!(biased_and(0).is_err());
        assert!(ZooSpec::Constant {
            value: true,
            parties: 0,
            rounds: 2
        }
        .build()
        .is_err());
    }
}
