use std::borrow::Cow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Adversary, AdversaryState, Arm, Emission, Label, LabelState, LabelStep, Plan, PlanContext, RoundNote};
use crate::params::clamp_probability;
use crate::protocol::{classify_round, Evaluator, Message, Protocol, RoundClass, RoundView, Transcript};
use crate::{AttackParameters, Error, Result};

/// Float slack when checking `1 + αf >= 0`.
const FEASIBILITY_SLACK: f64 = 1e-12;

/// Which identities the corruption lottery runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labeling {
    /// The protocol's own parties; meant for protocols that are already
    /// normal.
    Original,
    /// Pseudo-parties of the normalized protocol, tracked incrementally.
    #[default]
    Normalized,
}

/// The variance-driven attacker for robust protocols.
///
/// On a label's first (robust) message it corrupts the label with
/// probability `λ²√v` for a large-jump round or `λ²/√n` for a small-jumps
/// round, clamped to `[0,1]`. A designated label then sends from
/// `biased(Q, jump, α)` with `α = 1/√v` on large-jump rounds and `α = √n`
/// on small-jumps rounds, the latter only while the public posterior that
/// it is designated is at most `16λ²/√n`. Non-robust rounds pass through
/// honestly, or abort the attack in strict mode.
///
/// A designated label counts as a corruption only from its first message
/// that differs in distribution from honest play.
#[derive(Debug)]
pub struct NormalAttacker {
    eval: Arc<Evaluator<f64>>,
    params: AttackParameters,
    labeling: Labeling,
    strict: bool,
}

impl NormalAttacker {
    pub fn new(eval: Arc<Evaluator<f64>>, params: AttackParameters, labeling: Labeling) -> Self {
        Self {
            eval,
            params,
            labeling,
            strict: false,
        }
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn target(&self) -> &Arc<dyn Protocol> {
        self.eval.protocol()
    }

    pub fn params(&self) -> &AttackParameters {
        &self.params
    }

    fn target_view<'a>(&self, ctx: &PlanContext<'a>) -> Result<Cow<'a, RoundView<f64>>> {
        if Arc::ptr_eq(ctx.protocol, self.eval.protocol()) {
            Ok(Cow::Borrowed(ctx.view))
        } else {
            Ok(Cow::Owned(self.eval.view(ctx.prefix)?))
        }
    }

    fn label(&self, state: &AdversaryState, view: &RoundView<f64>, class: RoundClass) -> Label {
        match self.labeling {
            Labeling::Original => Label::Party(view.party),
            Labeling::Normalized => Label::Pseudo(state.normalizer.peek(view.party, class)),
        }
    }

    /// Emission of a designated label, or `None` when it would be honest.
    fn designated_emission(
        &self,
        view: &RoundView<f64>,
        class: RoundClass,
        posterior: f64,
    ) -> Result<Option<(f64, Vec<f64>)>> {
        let alpha = match class {
            RoundClass::LargeJump => 1.0 / view.variance.sqrt(),
            RoundClass::SmallJump if posterior <= self.params.posterior_cap() => (self.params.n as f64).sqrt(),
            _ => return Ok(None),
        };
        if !alpha.is_finite() || view.jumps.iter().all(|j| (alpha * j).abs() < 1e-15) {
            return Ok(None);
        }
        let mut probs = Vec::with_capacity(view.jumps.len());
        for ((m, p), j) in view.messages().zip(&view.probs).zip(&view.jumps) {
            let w = 1.0 + alpha * j;
            if w < -FEASIBILITY_SLACK {
                return Err(Error::AttackInfeasible {
                    round: view.round,
                    reason: format!("message {m} has jump {j:.6} below -1/alpha = {:.6}", -1.0 / alpha),
                });
            }
            probs.push(p * w.max(0.0));
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Some((alpha, probs)))
    }
}

impl Adversary for NormalAttacker {
    fn name(&self) -> String {
        let l = match self.labeling {
            Labeling::Original => "original",
            Labeling::Normalized => "normalized",
        };
        format!("normal[{l}]({})", self.eval.protocol().name())
    }

    fn plan(&self, ctx: &PlanContext<'_>, state: &AdversaryState) -> Result<Plan> {
        let view = self.target_view(ctx)?;
        let class = classify_round(&view, &self.params);
        let mut note = RoundNote {
            class: Some(class),
            variance: view.variance,
            ..Default::default()
        };
        if class == RoundClass::NonRobustJump {
            note.nonrobust = true;
            return Ok(Plan {
                note,
                halt: self.strict,
                ..Plan::honest()
            });
        }
        let label = self.label(state, &view, class);
        let existing = state.labels.get(&label).copied();
        let (prior, lottery) = match existing {
            Some(s) => (s.posterior, false),
            None => {
                let raw = match class {
                    RoundClass::LargeJump => self.params.large_corrupt_prob(view.variance),
                    _ => self.params.small_corrupt_prob(),
                };
                let (p, clamped) = clamp_probability(raw);
                note.clamped = clamped;
                (p, true)
            }
        };
        let designated = self.designated_emission(&view, class, prior)?;
        let designated_probs = match &designated {
            Some((_, p)) => p.clone(),
            None => view.probs.clone(),
        };
        let emission = match designated {
            Some((alpha, _)) => Emission::Biased {
                messages: view.messages().collect(),
                probs: view.probs.clone(),
                utility: view.jumps.clone(),
                alpha,
            },
            None => Emission::Honest,
        };
        let corrupts = emission != Emission::Honest;
        let arms = match existing {
            None => vec![
                Arm {
                    prob: prior,
                    emission,
                    corrupts,
                },
                Arm::honest(1.0 - prior),
            ],
            Some(s) if s.designated => vec![Arm {
                prob: 1.0,
                emission,
                corrupts,
            }],
            Some(_) => vec![Arm::honest(1.0)],
        };
        Ok(Plan {
            arms,
            note,
            halt: false,
            step: Some(LabelStep {
                label,
                lottery,
                prior,
                messages: view.messages().collect(),
                honest: view.probs.clone(),
                designated: designated_probs,
            }),
            shadow: None,
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
        if self.labeling == Labeling::Normalized {
            if let Some(class) = plan.note.class {
                state.normalizer.assign(
                    ctx.view.party,
                    class,
                    &plan.note.variance,
                    &self.params.large_var_threshold(),
                );
            }
        }
        let Some(step) = &plan.step else {
            return Ok(());
        };
        let entry = state.labels.entry(step.label).or_insert(LabelState {
            designated: step.lottery && arm == 0,
            posterior: step.prior,
        });
        if let Some(i) = step.messages.iter().position(|m| *m == message) {
            let q = step.prior;
            let a = q * step.designated[i];
            let b = (1.0 - q) * step.honest[i];
            if a + b > 0.0 {
                entry.posterior = a / (a + b);
            }
        }
        Ok(())
    }
}

/// `Pr[label designated | prefix]` under the attacker, from the public
/// transcript alone.
///
/// If the label has not spoken within `prefix` but is about to speak its
/// first message, the value is its lottery probability. A label that
/// neither spoke nor is about to is an error.
pub fn corruption_posterior(attacker: &NormalAttacker, label: Label, prefix: &Transcript) -> Result<f64> {
    let target = attacker.target().clone();
    attacker.eval.check_reachable(prefix)?;
    let mut state = attacker.begin();
    let mut walk = Transcript::new();
    for k in 0..=prefix.len() {
        if walk.len() == target.num_rounds() {
            break;
        }
        let view = attacker.eval.view(&walk)?;
        let ctx = PlanContext {
            prefix: &walk,
            view: &view,
            protocol: &target,
        };
        let plan = attacker.plan(&ctx, &state)?;
        if k == prefix.len() {
            if let Some(step) = &plan.step {
                if step.label == label && step.lottery {
                    return Ok(step.prior);
                }
            }
            break;
        }
        let m = prefix.messages()[k];
        let arm = plan.arms.len() - 1;
        attacker.observe(&ctx, &mut state, &plan, arm, m)?;
        walk.push(m);
    }
    state
        .labels
        .get(&label)
        .map(|s| s.posterior)
        .ok_or_else(|| Error::UndefinedPosterior(format!("{label:?}")))
}
