//! Stateless full-information protocols as probabilistic trees.

mod eval;
mod transcript;

use std::fmt::{self, Debug};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

pub use eval::{classify_round, is_robust, Evaluator, Robustness, RoundView};
pub use transcript::{PrefixSummary, Transcript};

use crate::prob::FiniteDistribution;
use crate::Result;

/// Exact probability used inside protocol descriptions.
pub type Prob = Ratio<i64>;

/// Per-round honest message distribution.
pub type MessageDist = FiniteDistribution<Message, Prob>;

/// A broadcast message; an opaque token from a finite per-round alphabet.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Message(pub u32);

impl Debug for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub u32);

impl Debug for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// How a round looks to an attacker that wants to push the outcome up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundClass {
    /// Some supported message lowers the expected outcome by at least the
    /// negative-jump threshold.
    NonRobustJump,
    /// Jump variance at or above the large-variance threshold.
    LargeJump,
    SmallJump,
}

/// A full-information coin-flipping protocol.
///
/// The speaker and message distribution of every round depend only on the
/// public transcript so far; the output is a function of the full transcript.
/// Implementations must be total on every reachable prefix.
pub trait Protocol: Send + Sync + Debug {
    fn name(&self) -> String;

    fn num_parties(&self) -> usize;

    /// Number of rounds `ℓ`; every complete transcript has this length.
    fn num_rounds(&self) -> usize;

    fn next_party(&self, prefix: &Transcript) -> Result<PartyId>;

    fn next_message_dist(&self, prefix: &Transcript) -> Result<MessageDist>;

    fn output(&self, transcript: &Transcript) -> Result<bool>;

    /// Optional closed form for `E[output | prefix]` in float arithmetic.
    /// Lets the evaluator handle protocols far too large to enumerate.
    fn closed_form_outcome(&self, _summary: PrefixSummary) -> Option<f64> {
        None
    }
}
