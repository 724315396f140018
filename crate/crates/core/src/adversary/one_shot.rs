use std::sync::Arc;

use dashmap::DashMap;

use super::DeterministicAdversary;
use crate::protocol::{Evaluator, Message, MessageDist, PartyId, Protocol, Transcript};
use crate::{AttackParameters, FiniteDistribution, Result, Scalar};

/// Corrupts at most one message per execution: at the first prefix whose
/// round offers a jump at or below `-1/(λ√n)`, it forces the message with
/// the smallest jump (ties broken by message order).
#[derive(Debug)]
pub struct OneShot<S: Scalar = f64> {
    eval: Arc<Evaluator<S>>,
    threshold: S,
    qualifying: DashMap<Transcript, Option<Message>>,
    armed: DashMap<Transcript, bool>,
}

impl<S: Scalar> OneShot<S> {
    pub fn new(eval: Arc<Evaluator<S>>, params: &AttackParameters) -> Self {
        Self {
            eval,
            threshold: S::from_f64(params.neg_jump_threshold()),
            qualifying: DashMap::new(),
            armed: DashMap::new(),
        }
    }

    pub fn target(&self) -> &Arc<dyn Protocol> {
        self.eval.protocol()
    }

    /// Minimizing message if the round after `prefix` qualifies.
    pub fn qualifies(&self, prefix: &Transcript) -> Result<Option<Message>> {
        if let Some(hit) = self.qualifying.get(prefix) {
            return Ok(*hit);
        }
        let view = self.eval.view(prefix)?;
        let bound = -self.threshold.clone();
        let mut best: Option<(Message, &S)> = None;
        for (m, j) in view.messages().zip(&view.jumps) {
            if *j <= bound && best.is_none_or(|(_, b)| *j < *b) {
                best = Some((m, j));
            }
        }
        let out = best.map(|(m, _)| m);
        self.qualifying.insert(prefix.clone(), out);
        Ok(out)
    }

    /// Whether no proper prefix of `prefix` qualified.
    fn is_armed(&self, prefix: &Transcript) -> Result<bool> {
        if prefix.is_empty() {
            return Ok(true);
        }
        if let Some(hit) = self.armed.get(prefix) {
            return Ok(*hit);
        }
        let parent = prefix.prefix(prefix.len() - 1);
        let armed = self.is_armed(&parent)? && self.qualifies(&parent)?.is_none();
        self.armed.insert(prefix.clone(), armed);
        Ok(armed)
    }
}

impl<S: Scalar> DeterministicAdversary for OneShot<S> {
    fn name(&self) -> String {
        format!("one_shot({})", self.eval.protocol().name())
    }

    fn forced(&self, prefix: &Transcript) -> Result<Option<Message>> {
        if prefix.len() >= self.eval.protocol().num_rounds() || !self.is_armed(prefix)? {
            return Ok(None);
        }
        self.qualifies(prefix)
    }
}

/// `Π_B`: the protocol in which a deterministic adversary's forced messages
/// replace honest sampling.
#[derive(Debug)]
pub struct AttackedProtocol {
    base: Arc<dyn Protocol>,
    adversary: Arc<dyn DeterministicAdversary>,
}

impl AttackedProtocol {
    pub fn new(base: Arc<dyn Protocol>, adversary: Arc<dyn DeterministicAdversary>) -> Self {
        Self { base, adversary }
    }

    pub fn base(&self) -> &Arc<dyn Protocol> {
        &self.base
    }
}

impl Protocol for AttackedProtocol {
    fn name(&self) -> String {
        format!("{} under {}", self.base.name(), self.adversary.name())
    }

    fn num_parties(&self) -> usize {
        self.base.num_parties()
    }

    fn num_rounds(&self) -> usize {
        self.base.num_rounds()
    }

    fn next_party(&self, prefix: &Transcript) -> Result<PartyId> {
        self.base.next_party(prefix)
    }

    fn next_message_dist(&self, prefix: &Transcript) -> Result<MessageDist> {
        match self.adversary.forced(prefix)? {
            Some(m) => Ok(FiniteDistribution::point(m)),
            None => self.base.next_message_dist(prefix),
        }
    }

    fn output(&self, transcript: &Transcript) -> Result<bool> {
        self.base.output(transcript)
    }
}

/// One-shot attacker on the evaluator's protocol, returned as the attacked
/// protocol together with the adversary.
pub fn one_shot_attacker<S: Scalar>(
    eval: Arc<Evaluator<S>>,
    params: &AttackParameters,
) -> (Arc<AttackedProtocol>, Arc<OneShot<S>>) {
    let base = eval.protocol().clone();
    let b = Arc::new(OneShot::new(eval, params));
    (Arc::new(AttackedProtocol::new(base, b.clone())), b)
}

/// Composition of deterministic adversaries `B_k ∘ … ∘ B_1`, where `B_{i+1}`
/// attacks the protocol already attacked by `B_1..B_i`. The latest step
/// takes precedence, matching the nested attacked protocols.
#[derive(Debug, Clone, Default)]
pub struct Chain {
    pub steps: Vec<Arc<dyn DeterministicAdversary>>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl DeterministicAdversary for Chain {
    fn name(&self) -> String {
        format!("chain of {} one-shot steps", self.steps.len())
    }

    fn forced(&self, prefix: &Transcript) -> Result<Option<Message>> {
        for s in self.steps.iter().rev() {
            if let Some(m) = s.forced(prefix)? {
                return Ok(Some(m));
            }
        }
        Ok(None)
    }
}
