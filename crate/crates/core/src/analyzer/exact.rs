use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BoundComparison, VarianceAccounting};
use crate::adversary::{advance, resolve, Adversary, AdversaryState, HiddenKey, PlanContext};
use crate::protocol::{classify_round, Evaluator, Message, Protocol, Transcript};
use crate::{AttackParameters, Error, FiniteDistribution, Result, Scalar};

/// One node of the joint (transcript × adversary state) tree.
#[derive(Debug, Clone)]
pub struct JointNode {
    pub transcript: Transcript,
    pub state: AdversaryState,
    pub prob: f64,
}

#[derive(Debug, Clone)]
pub struct ExactAttack {
    pub prob_one: f64,
    pub expected_corruptions: f64,
    pub corruption_distribution: BTreeMap<usize, f64>,
    /// Probability that a new corruption happens at round `k` (index `k-1`).
    pub corruption_by_round: Vec<f64>,
    /// The attacked transcript distribution.
    pub transcripts: FiniteDistribution<Transcript, f64>,
    /// `Σ_t M̂(t)·KL(M̂(·|t) ‖ Q(·|t))` over attacked prefixes.
    pub kl_chain: f64,
    /// `KL(M̂ ‖ Q)` over complete transcripts.
    pub kl_joint: f64,
    pub variance: VarianceAccounting,
    pub joint_nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    pub chain_rule: f64,
    pub joint: f64,
    pub agree: bool,
    pub bound: BoundComparison,
}

/// Tolerance for the chain-rule / joint KL agreement.
pub const KL_AGREEMENT_TOLERANCE: f64 = 1e-9;

struct Walker<'a> {
    eval: &'a Evaluator<f64>,
    protocol: Arc<dyn Protocol>,
    adv: &'a dyn Adversary,
    params: &'a AttackParameters,
    level: BTreeMap<Transcript, (f64, Vec<(AdversaryState, f64)>)>,
    nodes: usize,
    variance: VarianceAccounting,
    kl_chain: f64,
    corruption_by_round: Vec<f64>,
}

impl<'a> Walker<'a> {
    fn new(eval: &'a Evaluator<f64>, adv: &'a dyn Adversary, params: &'a AttackParameters) -> Self {
        let mut level = BTreeMap::new();
        level.insert(Transcript::new(), (1.0, vec![(adv.begin(), 1.0)]));
        Self {
            eval,
            protocol: eval.protocol().clone(),
            adv,
            params,
            level,
            nodes: 1,
            variance: VarianceAccounting::default(),
            kl_chain: 0.0,
            corruption_by_round: Vec::new(),
        }
    }

    fn step(&mut self) -> Result<()> {
        type MergedStates = BTreeMap<HiddenKey, (AdversaryState, f64)>;
        let mut next: BTreeMap<Transcript, (f64, MergedStates)> = BTreeMap::new();
        let mut new_corruptions = 0.0;
        for (prefix, (honest_prob, states)) in std::mem::take(&mut self.level) {
            let view = self.eval.view(&prefix)?;
            let class = classify_round(&view, self.params);
            let ctx = PlanContext {
                prefix: &prefix,
                view: &view,
                protocol: &self.protocol,
            };
            let mut attacked: BTreeMap<Message, f64> = BTreeMap::new();
            let mut weight = 0.0;
            for (state, w) in states {
                weight += w;
                self.variance.add(class, w * view.variance);
                let plan = if state.halted {
                    crate::adversary::Plan::honest()
                } else {
                    self.adv.plan(&ctx, &state)?
                };
                for r in resolve(&plan, &state, view.party) {
                    if r.new_corruption {
                        new_corruptions += w * r.prob;
                    }
                    for (m, q) in r.emission.distribution(&view)? {
                        let p = w * r.prob * q;
                        if p <= 0.0 {
                            continue;
                        }
                        *attacked.entry(m).or_default() += p;
                        let mut s = state.clone();
                        advance(self.adv, &ctx, &mut s, &plan, &r, m)?;
                        let child = prefix.extended(m);
                        let honest_child = honest_prob * f64::from_ratio(&view.honest.prob(&m));
                        let slot = next.entry(child).or_insert_with(|| (honest_child, BTreeMap::new()));
                        let e = slot.1.entry(s.hidden_key()).or_insert_with(|| (s, 0.0));
                        e.1 += p;
                        self.nodes += 1;
                        if self.nodes > self.eval.budget() {
                            return Err(Error::BudgetExceeded {
                                budget: self.eval.budget(),
                            });
                        }
                    }
                }
            }
            let mut kl = 0.0;
            for (m, p) in &attacked {
                let cond = p / weight;
                let q = f64::from_ratio(&view.honest.prob(m));
                kl += cond * (cond / q).log2();
            }
            self.kl_chain += weight * kl.max(0.0);
        }
        self.corruption_by_round.push(new_corruptions);
        self.level = next
            .into_iter()
            .map(|(t, (h, states))| (t, (h, states.into_values().collect())))
            .collect();
        Ok(())
    }
}

/// Nodes of the joint tree after `k` rounds.
pub fn joint_level(
    eval: &Evaluator<f64>,
    adv: &dyn Adversary,
    params: &AttackParameters,
    k: usize,
) -> Result<Vec<JointNode>> {
    let mut w = Walker::new(eval, adv, params);
    for _ in 0..k.min(eval.protocol().num_rounds()) {
        w.step()?;
    }
    Ok(w.level
        .into_iter()
        .flat_map(|(t, (_, states))| {
            states.into_iter().map(move |(state, prob)| JointNode {
                transcript: t.clone(),
                state,
                prob,
            })
        })
        .collect())
}

/// Forward enumeration of the attacked execution, lottery branches
/// included. The evaluator's protocol is the one under attack; `params`
/// only classifies rounds for the variance accounting.
pub fn exact_attacked_distribution(
    eval: &Evaluator<f64>,
    adv: &dyn Adversary,
    params: &AttackParameters,
) -> Result<ExactAttack> {
    let rounds = eval.protocol().num_rounds();
    let mut w = Walker::new(eval, adv, params);
    for _ in 0..rounds {
        w.step()?;
    }
    let mut prob_one = 0.0;
    let mut expected_corruptions = 0.0;
    let mut corruption_distribution: BTreeMap<usize, f64> = BTreeMap::new();
    let mut leaves = Vec::with_capacity(w.level.len());
    let mut kl_joint = 0.0;
    for (t, (honest, states)) in &w.level {
        let mut total = 0.0;
        for (s, p) in states {
            total += p;
            expected_corruptions += p * s.corruptions() as f64;
            *corruption_distribution.entry(s.corruptions()).or_default() += p;
        }
        if eval.protocol().output(t)? {
            prob_one += total;
        }
        kl_joint += total * (total / honest).log2();
        leaves.push((t.clone(), total));
    }
    Ok(ExactAttack {
        prob_one,
        expected_corruptions,
        corruption_distribution,
        corruption_by_round: w.corruption_by_round,
        transcripts: FiniteDistribution::new(leaves)?,
        kl_chain: w.kl_chain,
        kl_joint: kl_joint.max(0.0),
        variance: w.variance,
        joint_nodes: w.nodes,
    })
}

/// `E[Σ Var[Y_i | prefix]]` by round class, with the robust part compared
/// against `2/λ`.
pub fn variance_accounting(
    eval: &Evaluator<f64>,
    adv: &dyn Adversary,
    params: &AttackParameters,
) -> Result<(VarianceAccounting, BoundComparison)> {
    let e = exact_attacked_distribution(eval, adv, params)?;
    Ok((
        e.variance,
        BoundComparison::new(e.variance.robust, params.variance_bound()),
    ))
}

/// KL between attacked and honest transcripts, computed on the joint and by
/// the chain rule, compared against `16³λ³`.
pub fn kl_attacked_vs_honest(
    eval: &Evaluator<f64>,
    adv: &dyn Adversary,
    params: &AttackParameters,
) -> Result<KlReport> {
    let e = exact_attacked_distribution(eval, adv, params)?;
    Ok(e.kl_report(params))
}

impl ExactAttack {
    pub fn kl_report(&self, params: &AttackParameters) -> KlReport {
        KlReport {
            chain_rule: self.kl_chain,
            joint: self.kl_joint,
            agree: (self.kl_chain - self.kl_joint).abs() <= KL_AGREEMENT_TOLERANCE,
            bound: BoundComparison::new(self.kl_joint, params.kl_bound()),
        }
    }
}
