use std::sync::Arc;

use dashmap::DashMap;

use super::{Message, MessageDist, PartyId, Protocol, RoundClass, Transcript};
use crate::params::AttackParameters;
use crate::prob::{FiniteDistribution, Scalar};
use crate::{Error, Result, DEFAULT_NODE_BUDGET};

/// Memoised backward induction over a protocol tree.
///
/// Values are cached per prefix and the cache is safe for concurrent use, so
/// one evaluator can be shared by all Monte Carlo workers. In float mode a
/// protocol's closed form, when it has one, bypasses the tree entirely.
#[derive(Debug)]
pub struct Evaluator<S: Scalar = f64> {
    protocol: Arc<dyn Protocol>,
    memo: DashMap<Transcript, S>,
    budget: usize,
}

/// Everything an attacker sees before round `round` is played.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundView<S = f64> {
    /// 1-based index of the round about to be played.
    pub round: usize,
    pub party: PartyId,
    pub honest: MessageDist,
    /// Honest masses in the evaluator's arithmetic, aligned with `honest`.
    pub probs: Vec<S>,
    /// Expected outcome given the prefix.
    pub value: S,
    /// `E[out | prefix, m] − E[out | prefix]`, aligned with `honest`.
    pub jumps: Vec<S>,
    /// Variance of the jump under the honest distribution.
    pub variance: S,
}

impl<S: Scalar> RoundView<S> {
    pub fn messages(&self) -> impl Iterator<Item = Message> + '_ {
        self.honest.support().copied()
    }

    pub fn jump(&self, m: Message) -> Option<&S> {
        self.honest.index_of(&m).map(|i| &self.jumps[i])
    }

    pub fn min_jump(&self) -> S {
        self.jumps
            .iter()
            .cloned()
            .reduce(|a, b| if b < a { b } else { a })
            .unwrap_or_else(S::zero)
    }

    /// `E[jump]` under the honest distribution; zero up to rounding.
    pub fn jump_mean(&self) -> S {
        self.probs
            .iter()
            .zip(&self.jumps)
            .fold(S::zero(), |acc, (p, j)| acc + p.clone() * j.clone())
    }

    pub fn honest_dist(&self) -> FiniteDistribution<Message, S> {
        FiniteDistribution::from_sorted_unchecked(self.messages().zip(self.probs.iter().cloned()).collect())
    }
}

/// Exact probability of ever reaching a non-robust round under honest play.
#[derive(Debug, Clone, PartialEq)]
pub struct Robustness<S = f64> {
    pub probability: S,
    pub robust: bool,
}

impl<S: Scalar> Evaluator<S> {
    pub fn new(protocol: Arc<dyn Protocol>) -> Self {
        Self::with_budget(protocol, DEFAULT_NODE_BUDGET)
    }

    pub fn with_budget(protocol: Arc<dyn Protocol>, budget: usize) -> Self {
        Self {
            protocol,
            memo: DashMap::new(),
            budget,
        }
    }

    pub fn protocol(&self) -> &Arc<dyn Protocol> {
        &self.protocol
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn cached_nodes(&self) -> usize {
        self.memo.len()
    }

    /// Rejects prefixes that leave the support of some round's honest
    /// distribution or run past the last round.
    pub fn check_reachable(&self, prefix: &Transcript) -> Result<()> {
        if prefix.len() > self.protocol.num_rounds() {
            return Err(Error::InvalidPrefix(format!(
                "{prefix} is longer than {} rounds",
                self.protocol.num_rounds()
            )));
        }
        let mut walk = Transcript::new();
        for &m in prefix.messages() {
            let dist = self.protocol.next_message_dist(&walk)?;
            if !dist.contains(&m) {
                return Err(Error::InvalidPrefix(format!(
                    "message {m} after {walk} is outside the honest support"
                )));
            }
            walk.push(m);
        }
        Ok(())
    }

    /// `E[output | prefix]`, validating the prefix first.
    pub fn expected_outcome(&self, prefix: &Transcript) -> Result<S> {
        self.check_reachable(prefix)?;
        self.value(prefix)
    }

    /// `E[output | prefix]` for a prefix the caller knows is reachable.
    pub fn value(&self, prefix: &Transcript) -> Result<S> {
        if prefix.len() > self.protocol.num_rounds() {
            return Err(Error::InvalidPrefix(format!("{prefix} is too long")));
        }
        let mut walk = prefix.clone();
        self.compute(&mut walk)
    }

    fn compute(&self, prefix: &mut Transcript) -> Result<S> {
        if !S::EXACT {
            if let Some(v) = self.protocol.closed_form_outcome(prefix.summary()) {
                return Ok(S::from_f64(v));
            }
        }
        if let Some(v) = self.memo.get(prefix) {
            return Ok(v.clone());
        }
        let value = if prefix.len() == self.protocol.num_rounds() {
            if self.protocol.output(prefix)? {
                S::one()
            } else {
                S::zero()
            }
        } else {
            let dist = self.protocol.next_message_dist(prefix)?;
            let mut acc = S::zero();
            for (m, p) in dist.atoms() {
                prefix.push(*m);
                let child = self.compute(prefix);
                prefix.pop();
                acc = acc + S::from_ratio(p) * child?;
            }
            acc
        };
        if self.memo.len() >= self.budget {
            return Err(Error::BudgetExceeded { budget: self.budget });
        }
        self.memo.insert(prefix.clone(), value.clone());
        Ok(value)
    }

    /// Round view after validating the prefix.
    pub fn round_view(&self, prefix: &Transcript) -> Result<RoundView<S>> {
        self.check_reachable(prefix)?;
        self.view(prefix)
    }

    /// Round view for a prefix the caller knows is reachable.
    pub fn view(&self, prefix: &Transcript) -> Result<RoundView<S>> {
        if prefix.len() >= self.protocol.num_rounds() {
            return Err(Error::NoNextRound);
        }
        let party = self.protocol.next_party(prefix)?;
        let honest = self.protocol.next_message_dist(prefix)?;
        let probs: Vec<S> = honest.atoms().iter().map(|(_, p)| S::from_ratio(p)).collect();
        let (value, jumps) = match self.closed_form_view(prefix, &honest) {
            Some(v) => v,
            None => {
                let mut walk = prefix.clone();
                let value = self.compute(&mut walk)?;
                let mut jumps = Vec::with_capacity(honest.len());
                for (m, _) in honest.atoms() {
                    walk.push(*m);
                    let child = self.compute(&mut walk);
                    walk.pop();
                    jumps.push(child? - value.clone());
                }
                (value, jumps)
            }
        };
        let mean = probs
            .iter()
            .zip(&jumps)
            .fold(S::zero(), |acc, (p, j)| acc + p.clone() * j.clone());
        let variance = probs.iter().zip(&jumps).fold(S::zero(), |acc, (p, j)| {
            let d = j.clone() - mean.clone();
            acc + p.clone() * d.clone() * d
        });
        Ok(RoundView {
            round: prefix.len() + 1,
            party,
            honest,
            probs,
            value,
            jumps,
            variance,
        })
    }
}

impl<S: Scalar> Evaluator<S> {
    /// Value and jumps from the closed form alone, skipping the transcript
    /// copies the general path needs.
    fn closed_form_view(&self, prefix: &Transcript, honest: &MessageDist) -> Option<(S, Vec<S>)> {
        if S::EXACT {
            return None;
        }
        let s = prefix.summary();
        let value = self.protocol.closed_form_outcome(s)?;
        let mut jumps = Vec::with_capacity(honest.len());
        for (m, _) in honest.atoms() {
            jumps.push(S::from_f64(self.protocol.closed_form_outcome(s.extended(*m))? - value));
        }
        Some((S::from_f64(value), jumps))
    }
}

/// NonRobust when some jump is at most `-1/(λ√n)`; else Large when the jump
/// variance is at least `1/(λn)`; else Small.
pub fn classify_round<S: Scalar>(view: &RoundView<S>, params: &AttackParameters) -> RoundClass {
    let neg = S::from_f64(params.neg_jump_threshold());
    if view.jumps.iter().any(|j| *j <= -neg.clone()) {
        RoundClass::NonRobustJump
    } else if view.variance >= S::from_f64(params.large_var_threshold()) {
        RoundClass::LargeJump
    } else {
        RoundClass::SmallJump
    }
}

/// Probability that an honest execution passes through at least one
/// non-robust round, and whether it is at most `δ`.
pub fn is_robust<S: Scalar>(eval: &Evaluator<S>, params: &AttackParameters) -> Result<Robustness<S>> {
    let mut visited = 0usize;
    let mut walk = Transcript::new();
    let probability = robust_walk(eval, params, &mut walk, S::one(), &mut visited)?;
    let robust = probability <= S::from_f64(params.delta);
    Ok(Robustness { probability, robust })
}

fn robust_walk<S: Scalar>(
    eval: &Evaluator<S>,
    params: &AttackParameters,
    prefix: &mut Transcript,
    weight: S,
    visited: &mut usize,
) -> Result<S> {
    *visited += 1;
    if *visited > eval.budget() {
        return Err(Error::BudgetExceeded { budget: eval.budget() });
    }
    if prefix.len() == eval.protocol().num_rounds() {
        return Ok(S::zero());
    }
    let view = eval.view(prefix)?;
    if classify_round(&view, params) == RoundClass::NonRobustJump {
        return Ok(weight);
    }
    let mut acc = S::zero();
    for ((m, _), p) in view.honest.atoms().iter().zip(&view.probs) {
        prefix.push(*m);
        let sub = robust_walk(eval, params, prefix, weight.clone() * p.clone(), visited);
        prefix.pop();
        acc = acc + sub?;
    }
    Ok(acc)
}
