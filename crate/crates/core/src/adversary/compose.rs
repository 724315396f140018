use std::sync::Arc;

use super::{Adversary, AdversaryState, Arm, AsAdversary, DeterministicAdversary, Emission, Plan, PlanContext};
use crate::protocol::{Message, Transcript};
use crate::{Error, Result};

/// `B ∘ A`: `outer` attacks the protocol already attacked by the
/// deterministic `inner`. Wherever `inner` forces a message it replaces the
/// outer plan's honest and biased emissions (both are the point mass in
/// `Π_A`); an outer `Fixed` emission still wins. The outer plan is kept as a
/// shadow so its state evolves as it would on `Π_A`.
#[derive(Debug, Clone)]
pub struct Composed {
    outer: Arc<dyn Adversary>,
    inner: Arc<dyn DeterministicAdversary>,
}

/// Composes `outer` with `inner`, which must be deterministic.
pub fn compose(outer: Arc<dyn Adversary>, inner: Arc<dyn Adversary>) -> Result<Composed> {
    let inner = inner
        .deterministic()
        .ok_or_else(|| Error::CompositionContract(inner.name()))?;
    Ok(Composed { outer, inner })
}

impl Composed {
    pub fn new(outer: Arc<dyn Adversary>, inner: Arc<dyn DeterministicAdversary>) -> Self {
        Self { outer, inner }
    }
}

impl Adversary for Composed {
    fn name(&self) -> String {
        format!("{} ∘ {}", self.outer.name(), self.inner.name())
    }

    fn begin(&self) -> AdversaryState {
        self.outer.begin()
    }

    fn plan(&self, ctx: &PlanContext<'_>, state: &AdversaryState) -> Result<Plan> {
        let plan = self.outer.plan(ctx, state)?;
        let Some(m) = self.inner.forced(ctx.prefix)? else {
            return Ok(plan);
        };
        let arms = plan
            .arms
            .iter()
            .map(|a| match a.emission {
                Emission::Fixed(own) => Arm {
                    prob: a.prob,
                    emission: Emission::Fixed(own),
                    corrupts: true,
                },
                _ => Arm {
                    prob: a.prob,
                    emission: Emission::Fixed(m),
                    corrupts: true,
                },
            })
            .collect();
        Ok(Plan {
            arms,
            note: plan.note.clone(),
            halt: plan.halt,
            step: None,
            shadow: Some(Box::new(plan)),
        })
    }

    fn observe(
        &self,
        ctx: &PlanContext<'_>,
        state: &mut AdversaryState,
        plan: &Plan,
        arm: usize,
        message: Message,
    ) -> Result<()> {
        let own = plan.shadow.as_deref().unwrap_or(plan);
        self.outer.observe(ctx, state, own, arm, message)
    }

    fn deterministic(&self) -> Option<Arc<dyn DeterministicAdversary>> {
        let outer = self.outer.deterministic()?;
        Some(Arc::new(DeterministicPair {
            outer,
            inner: self.inner.clone(),
        }))
    }
}

#[derive(Debug)]
struct DeterministicPair {
    outer: Arc<dyn DeterministicAdversary>,
    inner: Arc<dyn DeterministicAdversary>,
}

impl DeterministicAdversary for DeterministicPair {
    fn name(&self) -> String {
        format!("{} ∘ {}", self.outer.name(), self.inner.name())
    }

    fn forced(&self, prefix: &Transcript) -> Result<Option<Message>> {
        match self.outer.forced(prefix)? {
            Some(m) => Ok(Some(m)),
            None => self.inner.forced(prefix),
        }
    }
}

impl From<Arc<dyn DeterministicAdversary>> for AsAdversary {
    fn from(d: Arc<dyn DeterministicAdversary>) -> Self {
        AsAdversary(d)
    }
}

/// Corrupts each speaker with probability `prob` and forces `message` when
/// it is in the round's support.
#[derive(Debug, Clone)]
pub struct RandomForcing {
    pub prob: f64,
    pub message: Message,
}

impl Adversary for RandomForcing {
    fn name(&self) -> String {
        format!("random_forcing(p={}, m={})", self.prob, self.message)
    }

    fn plan(&self, ctx: &PlanContext<'_>, _: &AdversaryState) -> Result<Plan> {
        if !ctx.view.honest.contains(&self.message) {
            return Ok(Plan::honest());
        }
        Ok(Plan {
            arms: vec![
                Arm {
                    prob: self.prob,
                    emission: Emission::Fixed(self.message),
                    corrupts: true,
                },
                Arm::honest(1.0 - self.prob),
            ],
            ..Plan::honest()
        })
    }
}
