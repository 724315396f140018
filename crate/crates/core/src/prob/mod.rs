//! Finite probability toolkit.
//!
//! Everything here is generic over a [`Scalar`] so the same code runs with
//! exact rationals (for identities that must hold with equality) and with
//! `f64` (for simulation). Logarithms are base 2 throughout.

mod biased;
mod coupling;
mod dist;
mod divergence;
mod scalar;

pub use biased::{biased, biased_mean_shift, check_utility, mixture_identity_check};
pub use coupling::{coupling_joint, monotone_coupling, positive_part, sample_coupled_indices};
pub(crate) use dist::sample_index;
pub use dist::FiniteDistribution;
pub use divergence::{kl_divergence, pinsker_check, statistical_distance};
pub use scalar::{Rational, Scalar};

/// Float tolerance for the centering check `E[f(X)] = 0`.
pub const CENTERING_TOLERANCE: f64 = 1e-9;
/// Float tolerance for `Σ p = 1`.
pub const MASS_TOLERANCE: f64 = 1e-12;
