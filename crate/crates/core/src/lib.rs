//! Simulation and attack toolkit for full-information coin-flipping protocols.
//!
//! A protocol is a finite probabilistic tree: before every round a single
//! party, determined by the public transcript so far, broadcasts a message
//! drawn from a distribution that also depends only on that transcript. The
//! final transcript determines an output bit.
//!
//! The crate is organised in layers:
//!
//! * [`prob`]: exact and floating-point finite distributions, the biased
//!   reweighting `P(x)(1 + αf(x))`, KL divergence, statistical distance and the
//!   monotone coupling between a distribution and its biased variant.
//! * [`protocol`]: the [`Protocol`] trait, transcripts, memoised backward
//!   induction ([`Evaluator`]) and per-round views (jumps and conditional
//!   variances).
//! * [`zoo`] and [`description`]: canonical protocol generators and the
//!   declarative protocol description file.
//! * [`normalizer`]: the pseudo-party refinement that turns any protocol into
//!   a normal one, plus a validator for the four normality conditions.
//! * [`adversary`]: adaptive adversaries (the variance-driven attacker on
//!   robust protocols, the one-shot negative-jump attacker, composition,
//!   derandomisation and the full two-phase attack).
//! * [`analyzer`]: exact attacked-tree enumeration, KL/variance accounting,
//!   martingale diagnostics and the deterministic Monte Carlo harness.
//! * [`verify`]: randomized property batteries over the identities above.

pub mod adversary;
pub mod analyzer;
pub mod description;
pub mod error;
pub mod normalizer;
pub mod params;
pub mod prob;
pub mod protocol;
pub mod verify;
pub mod zoo;

pub use error::{Error, Result};
pub use params::AttackParameters;
pub use prob::{FiniteDistribution, Scalar};
pub use protocol::{Evaluator, Message, MessageDist, PartyId, Prob, Protocol, RoundClass, RoundView, Transcript};

/// Default cap on the number of tree nodes any exact operation may visit.
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;
