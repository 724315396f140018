use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{advance, resolve, Adversary, AdversaryState, DeterministicAdversary, Emission, HiddenKey, PlanContext};
use crate::protocol::{Evaluator, Message, Protocol, Transcript};
use crate::{Error, Result};

/// Improvements smaller than this do not change a decision.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b + TIE_TOLERANCE,
            Direction::Minimize => a < b - TIE_TOLERANCE,
        }
    }
}

/// A deterministic adversary given by an explicit table of forced messages.
#[derive(Debug, Clone)]
pub struct Derandomized {
    name: String,
    decisions: BTreeMap<Transcript, Message>,
    value: f64,
}

impl Derandomized {
    pub fn decisions(&self) -> &BTreeMap<Transcript, Message> {
        &self.decisions
    }

    /// Expected outcome the derandomized adversary achieves.
    pub fn value(&self) -> f64 {
        self.value
    }
}

impl DeterministicAdversary for Derandomized {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn forced(&self, prefix: &Transcript) -> Result<Option<Message>> {
        Ok(self.decisions.get(prefix).copied())
    }
}

#[derive(Debug, Clone, Copy)]
enum Choice {
    Honest { arm: usize },
    Force { arm: usize, message: Message },
    Leaf,
}

struct Solver<'a> {
    eval: &'a Evaluator<f64>,
    protocol: Arc<dyn Protocol>,
    adv: &'a dyn Adversary,
    direction: Direction,
    memo: HashMap<(Transcript, HiddenKey), (f64, Choice)>,
}

impl Solver<'_> {
    fn child(
        &self,
        prefix: &Transcript,
        state: &AdversaryState,
        arm: usize,
        m: Message,
    ) -> Result<(Transcript, AdversaryState)> {
        let view = self.eval.view(prefix)?;
        let ctx = PlanContext {
            prefix,
            view: &view,
            protocol: &self.protocol,
        };
        let plan = self.adv.plan(&ctx, state)?;
        let resolved = resolve(&plan, state, view.party);
        let r = resolved
            .iter()
            .find(|r| r.arm == arm)
            .expect("choice refers to a resolved arm");
        let mut next = state.clone();
        advance(self.adv, &ctx, &mut next, &plan, r, m)?;
        Ok((prefix.extended(m), next))
    }

    fn solve(&mut self, prefix: &Transcript, state: &AdversaryState) -> Result<(f64, Choice)> {
        if prefix.len() == self.protocol.num_rounds() {
            let v = if self.protocol.output(prefix)? { 1.0 } else { 0.0 };
            return Ok((v, Choice::Leaf));
        }
        if state.halted {
            return Ok((self.eval.value(prefix)?, Choice::Honest { arm: 0 }));
        }
        let key = (prefix.clone(), state.hidden_key());
        if let Some(hit) = self.memo.get(&key) {
            return Ok(*hit);
        }
        if self.memo.len() >= self.eval.budget() {
            return Err(Error::BudgetExceeded {
                budget: self.eval.budget(),
            });
        }
        let view = self.eval.view(prefix)?;
        let protocol = self.protocol.clone();
        let ctx = PlanContext {
            prefix,
            view: &view,
            protocol: &protocol,
        };
        let plan = self.adv.plan(&ctx, state)?;
        let direction = self.direction;
        let mut best: Option<(f64, Choice)> = None;
        for r in resolve(&plan, state, view.party) {
            let consider = |v: f64, c: Choice, best: &mut Option<(f64, Choice)>| {
                if best.is_none_or(|(b, _)| direction.better(v, b)) {
                    *best = Some((v, c));
                }
            };
            let outcome = |solver: &mut Self, m: Message| -> Result<f64> {
                let mut next = state.clone();
                advance(solver.adv, &ctx, &mut next, &plan, &r, m)?;
                Ok(solver.solve(&prefix.extended(m), &next)?.0)
            };
            match &r.emission {
                Emission::Honest => {
                    let mut v = 0.0;
                    for (m, q) in view.messages().zip(&view.probs) {
                        v += q * outcome(self, m)?;
                    }
                    consider(v, Choice::Honest { arm: r.arm }, &mut best);
                }
                e => {
                    for (m, _) in e.distribution(&view)? {
                        let v = outcome(self, m)?;
                        consider(v, Choice::Force { arm: r.arm, message: m }, &mut best);
                    }
                }
            }
        }
        let best = best.expect("a plan resolves to at least one arm");
        self.memo.insert(key, best);
        Ok(best)
    }

    fn extract(
        &mut self,
        prefix: &Transcript,
        state: &AdversaryState,
        out: &mut BTreeMap<Transcript, Message>,
    ) -> Result<()> {
        if prefix.len() == self.protocol.num_rounds() || state.halted {
            return Ok(());
        }
        match self.solve(prefix, state)?.1 {
            Choice::Leaf => Ok(()),
            Choice::Honest { arm } => {
                let support: Vec<Message> = self.protocol.next_message_dist(prefix)?.support().copied().collect();
                for m in support {
                    let (t, s) = self.child(prefix, state, arm, m)?;
                    self.extract(&t, &s, out)?;
                }
                Ok(())
            }
            Choice::Force { arm, message } => {
                out.insert(prefix.clone(), message);
                let (t, s) = self.child(prefix, state, arm, message)?;
                self.extract(&t, &s, out)
            }
        }
    }
}

/// Fixes every random choice of `adv` (lottery arm, and the message on a
/// corrupting arm) to one that weakly improves the exact conditional
/// expected outcome in `direction`. The evaluator's protocol is the one
/// under attack.
pub fn derandomize(eval: &Evaluator<f64>, adv: &dyn Adversary, direction: Direction) -> Result<Derandomized> {
    let mut solver = Solver {
        eval,
        protocol: eval.protocol().clone(),
        adv,
        direction,
        memo: HashMap::new(),
    };
    let start = adv.begin();
    let root = Transcript::new();
    let (value, _) = solver.solve(&root, &start)?;
    let mut decisions = BTreeMap::new();
    solver.extract(&root, &start, &mut decisions)?;
    Ok(Derandomized {
        name: format!("derandomized({})", adv.name()),
        decisions,
        value,
    })
}
