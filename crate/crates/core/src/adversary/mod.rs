//! Adaptive adversaries as strategy objects.
//!
//! An adversary is consulted before every round with the public prefix and
//! its private [`AdversaryState`]. It answers with a [`Plan`]: a lottery over
//! [`Arm`]s, each saying how the speaker's message is produced and whether
//! the speaker gets corrupted. The driver (Monte Carlo runner, exact
//! enumerator or derandomizer) enforces the corruption budget, draws the
//! arm and the message, and reports both back through
//! [`Adversary::observe`].

mod compose;
mod derandomize;
mod full;
mod normal;
mod one_shot;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::sync::Arc;

pub use compose::{compose, Composed, RandomForcing};
pub use derandomize::{derandomize, Derandomized, Direction};
pub use full::{full_attack, iterate_one_shot, AttackMode, FullAttack, OneShotIteration, StopReason};
pub use normal::{corruption_posterior, Labeling, NormalAttacker};
pub use one_shot::{one_shot_attacker, AttackedProtocol, Chain, OneShot};

use crate::normalizer::{NormalizerState, PseudoParty};
use crate::protocol::{Message, PartyId, Protocol, RoundClass, RoundView, Transcript};
use crate::{Error, Result};

/// Identity under which the normal attacker runs its corruption lottery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Party(PartyId),
    Pseudo(PseudoParty),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelState {
    /// Lottery outcome; hidden from the public.
    pub designated: bool,
    /// `Pr[designated | transcript]`; a function of the public transcript.
    pub posterior: f64,
}

/// Per-execution adversary state. Confined to one execution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdversaryState {
    pub corrupted: BTreeSet<PartyId>,
    pub budget: Option<usize>,
    pub halted: bool,
    pub labels: BTreeMap<Label, LabelState>,
    pub normalizer: NormalizerState<f64>,
}

/// The hidden part of a state. Everything else is determined by the public
/// transcript, so two states at the same prefix with equal keys are equal.
pub type HiddenKey = (Vec<PartyId>, bool, Vec<(Label, bool)>);

impl AdversaryState {
    pub fn corruptions(&self) -> usize {
        self.corrupted.len()
    }

    pub fn hidden_key(&self) -> HiddenKey {
        (
            self.corrupted.iter().copied().collect(),
            self.halted,
            self.labels.iter().map(|(l, s)| (*l, s.designated)).collect(),
        )
    }
}

/// How the speaker's message is produced on one arm of a plan.
#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    Honest,
    /// `probs[i]·(1 + α·utility[i])` over `messages`.
    Biased {
        messages: Vec<Message>,
        probs: Vec<f64>,
        utility: Vec<f64>,
        alpha: f64,
    },
    Fixed(Message),
}

impl Emission {
    /// Message distribution as `(message, mass)` pairs, checked against the
    /// honest support of the round.
    pub fn distribution(&self, view: &RoundView<f64>) -> Result<Vec<(Message, f64)>> {
        match self {
            Emission::Honest => Ok(view.messages().zip(view.probs.iter().copied()).collect()),
            Emission::Fixed(m) => {
                if view.honest.contains(m) {
                    Ok(vec![(*m, 1.0)])
                } else {
                    Err(illegal(view, *m))
                }
            }
            Emission::Biased {
                messages,
                probs,
                utility,
                alpha,
            } => {
                let mut out = Vec::with_capacity(messages.len());
                for ((m, p), u) in messages.iter().zip(probs).zip(utility) {
                    let w = (p * (1.0 + alpha * u)).max(0.0);
                    if w > 0.0 {
                        if !view.honest.contains(m) {
                            return Err(illegal(view, *m));
                        }
                        out.push((*m, w));
                    }
                }
                let total: f64 = out.iter().map(|(_, w)| w).sum();
                for e in &mut out {
                    e.1 /= total;
                }
                Ok(out)
            }
        }
    }
}

fn illegal(view: &RoundView<f64>, m: Message) -> Error {
    Error::AttackInfeasible {
        round: view.round,
        reason: format!("message {m} is outside the honest support"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub prob: f64,
    pub emission: Emission,
    /// Whether the speaker must be corrupted to follow this arm.
    pub corrupts: bool,
}

impl Arm {
    pub fn honest(prob: f64) -> Self {
        Self {
            prob,
            emission: Emission::Honest,
            corrupts: false,
        }
    }
}

/// Diagnostics attached to a plan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundNote {
    pub class: Option<RoundClass>,
    pub variance: f64,
    pub clamped: bool,
    pub nonrobust: bool,
}

/// What the normal attacker needs to update a label's posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelStep {
    pub label: Label,
    pub lottery: bool,
    /// Posterior before this message (the lottery probability on a label's
    /// first message).
    pub prior: f64,
    pub messages: Vec<Message>,
    pub honest: Vec<f64>,
    /// Emission of the label if it is designated.
    pub designated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub arms: Vec<Arm>,
    pub note: RoundNote,
    /// Abort the attack from this round on.
    pub halt: bool,
    pub step: Option<LabelStep>,
    /// The outer plan when a composition rewrote the arms.
    pub shadow: Option<Box<Plan>>,
}

impl Plan {
    pub fn honest() -> Self {
        Self {
            arms: vec![Arm::honest(1.0)],
            note: RoundNote::default(),
            halt: false,
            step: None,
            shadow: None,
        }
    }

    pub fn single(emission: Emission, corrupts: bool) -> Self {
        Self {
            arms: vec![Arm {
                prob: 1.0,
                emission,
                corrupts,
            }],
            ..Self::honest()
        }
    }
}

/// Public information handed to an adversary before a round.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub prefix: &'a Transcript,
    /// View of the protocol under attack, computed by the driver.
    pub view: &'a RoundView<f64>,
    pub protocol: &'a Arc<dyn Protocol>,
}

pub trait Adversary: Send + Sync + Debug {
    fn name(&self) -> String;

    fn begin(&self) -> AdversaryState {
        AdversaryState::default()
    }

    fn plan(&self, ctx: &PlanContext<'_>, state: &AdversaryState) -> Result<Plan>;

    /// Called after the arm with index `arm` was drawn and `message` sent.
    fn observe(
        &self,
        _ctx: &PlanContext<'_>,
        _state: &mut AdversaryState,
        _plan: &Plan,
        _arm: usize,
        _message: Message,
    ) -> Result<()> {
        Ok(())
    }

    /// The same strategy as a deterministic adversary, if it is one.
    fn deterministic(&self) -> Option<Arc<dyn DeterministicAdversary>> {
        None
    }
}

/// An adversary without randomness: a function from prefixes to forced
/// messages. Forcing a message corrupts the speaker.
pub trait DeterministicAdversary: Send + Sync + Debug {
    fn name(&self) -> String;

    fn forced(&self, prefix: &Transcript) -> Result<Option<Message>>;
}

/// Runs a deterministic adversary through the general interface.
#[derive(Debug, Clone)]
pub struct AsAdversary(pub Arc<dyn DeterministicAdversary>);

impl Adversary for AsAdversary {
    fn name(&self) -> String {
        self.0.name()
    }

    fn plan(&self, ctx: &PlanContext<'_>, _: &AdversaryState) -> Result<Plan> {
        Ok(match self.0.forced(ctx.prefix)? {
            Some(m) => Plan::single(Emission::Fixed(m), true),
            None => Plan::honest(),
        })
    }

    fn deterministic(&self) -> Option<Arc<dyn DeterministicAdversary>> {
        Some(self.0.clone())
    }
}

/// Never interferes.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl DeterministicAdversary for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn forced(&self, _: &Transcript) -> Result<Option<Message>> {
        Ok(None)
    }
}

pub fn identity() -> Arc<dyn Adversary> {
    Arc::new(AsAdversary(Arc::new(Identity)))
}

/// Caps the number of corrupted parties; the attack aborts, leaving the rest
/// of the execution honest, when another corruption would exceed the cap.
#[derive(Debug, Clone)]
pub struct WithBudget {
    pub inner: Arc<dyn Adversary>,
    pub budget: usize,
}

impl Adversary for WithBudget {
    fn name(&self) -> String {
        format!("{} (budget {})", self.inner.name(), self.budget)
    }

    fn begin(&self) -> AdversaryState {
        let mut s = self.inner.begin();
        s.budget = Some(self.budget);
        s
    }

    fn plan(&self, ctx: &PlanContext<'_>, state: &AdversaryState) -> Result<Plan> {
        self.inner.plan(ctx, state)
    }

    fn observe(
        &self,
        ctx: &PlanContext<'_>,
        state: &mut AdversaryState,
        plan: &Plan,
        arm: usize,
        message: Message,
    ) -> Result<()> {
        self.inner.observe(ctx, state, plan, arm, message)
    }
}

/// An arm after budget enforcement.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    /// Index into the plan's arms.
    pub arm: usize,
    pub prob: f64,
    pub emission: Emission,
    pub new_corruption: bool,
    pub halts: bool,
}

/// Applies the budget and halting rules to a plan. Arms with zero
/// probability are dropped.
pub fn resolve(plan: &Plan, state: &AdversaryState, speaker: PartyId) -> Vec<Resolved> {
    if state.halted || plan.halt {
        return vec![Resolved {
            arm: 0,
            prob: 1.0,
            emission: Emission::Honest,
            new_corruption: false,
            halts: !state.halted,
        }];
    }
    let room = state.budget.is_none_or(|b| state.corrupted.len() < b);
    plan.arms
        .iter()
        .enumerate()
        .filter(|(_, a)| a.prob > 0.0)
        .map(|(i, a)| {
            let new = a.corrupts && !state.corrupted.contains(&speaker);
            if new && !room {
                Resolved {
                    arm: i,
                    prob: a.prob,
                    emission: Emission::Honest,
                    new_corruption: false,
                    halts: true,
                }
            } else {
                Resolved {
                    arm: i,
                    prob: a.prob,
                    emission: a.emission.clone(),
                    new_corruption: new,
                    halts: false,
                }
            }
        })
        .collect()
}

/// Advances the state after `resolved` was drawn and `message` sent.
pub fn advance(
    adv: &dyn Adversary,
    ctx: &PlanContext<'_>,
    state: &mut AdversaryState,
    plan: &Plan,
    resolved: &Resolved,
    message: Message,
) -> Result<()> {
    if resolved.new_corruption {
        state.corrupted.insert(ctx.view.party);
    }
    if resolved.halts {
        state.halted = true;
    }
    if !state.halted {
        adv.observe(ctx, state, plan, resolved.arm, message)?;
    }
    Ok(())
}
