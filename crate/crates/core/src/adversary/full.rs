use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Adversary, AsAdversary, AttackedProtocol, Chain, Composed, DeterministicAdversary, Labeling, NormalAttacker,
    OneShot, WithBudget,
};
use crate::prob::sample_index;
use crate::protocol::{classify_round, is_robust, Evaluator, Protocol, RoundClass, Transcript};
use crate::{AttackParameters, Error, Result, Scalar, DEFAULT_NODE_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BiasedToZero,
    Robust,
    IterationLimit,
}

/// Result of repeatedly applying the one-shot attacker.
#[derive(Debug, Clone)]
pub struct OneShotIteration {
    /// `Π^0, …, Π^i`.
    pub protocols: Vec<Arc<dyn Protocol>>,
    pub chain: Chain,
    /// `E[Π^k]` for every protocol in `protocols`.
    pub expectations: Vec<f64>,
    /// Probability of reaching a non-robust round in `Π^k`, where computed.
    pub nonrobust_probability: Vec<f64>,
    pub stop: StopReason,
}

impl OneShotIteration {
    pub fn final_protocol(&self) -> &Arc<dyn Protocol> {
        self.protocols.last().expect("at least the input protocol")
    }

    pub fn iterations(&self) -> usize {
        self.chain.len()
    }
}

/// `Π^{k+1} = (Π^k)_B` until `E[Π^k] < ε`, the non-robust probability is at
/// most `δ`, or `k` reaches the iteration limit.
pub fn iterate_one_shot<S: Scalar>(
    protocol: Arc<dyn Protocol>,
    params: &AttackParameters,
    node_budget: usize,
) -> Result<OneShotIteration> {
    let mut out = OneShotIteration {
        protocols: vec![protocol],
        chain: Chain::default(),
        expectations: Vec::new(),
        nonrobust_probability: Vec::new(),
        stop: StopReason::IterationLimit,
    };
    let limit = params.max_iterations();
    loop {
        let current = out.final_protocol().clone();
        let eval = Arc::new(Evaluator::<S>::with_budget(current.clone(), node_budget));
        let e = eval.value(&Transcript::new())?.to_f64();
        out.expectations.push(e);
        if e < params.epsilon {
            out.stop = StopReason::BiasedToZero;
            return Ok(out);
        }
        let r = is_robust(&eval, params)?;
        out.nonrobust_probability.push(r.probability.to_f64());
        if r.robust {
            out.stop = StopReason::Robust;
            return Ok(out);
        }
        if out.chain.len() >= limit {
            out.stop = StopReason::IterationLimit;
            return Ok(out);
        }
        let b: Arc<dyn DeterministicAdversary> = Arc::new(OneShot::new(eval, params));
        out.protocols.push(Arc::new(AttackedProtocol::new(current, b.clone())));
        out.chain.steps.push(b);
    }
}

/// How `full_attack` may examine the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AttackMode {
    /// Everything by exhaustive enumeration.
    Exact { node_budget: usize },
    /// Enumeration when it fits the budget; otherwise the honest
    /// expectation comes from the evaluator (closed forms) and robustness
    /// is estimated from `trials` sampled honest executions.
    MonteCarlo {
        node_budget: usize,
        trials: usize,
        seed: u64,
    },
}

impl Default for AttackMode {
    fn default() -> Self {
        AttackMode::Exact {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FullAttack {
    pub adversary: Arc<dyn Adversary>,
    /// 0 when the one-shot chain already drives the expectation below `ε`,
    /// 1 when the variance attack pushes towards one.
    pub direction: u8,
    pub stop: StopReason,
    pub iterations: usize,
    pub honest_expectation: f64,
    /// Expectation of the protocol handed to the second phase (or of the
    /// final one-shot protocol for direction 0).
    pub phase_one_expectation: f64,
    pub nonrobust_probability: f64,
    /// Whether robustness was estimated by sampling.
    pub estimated: bool,
}

/// The two-phase attack: one-shot iterations towards 0, then, if the result
/// is robust, the normal attacker on it composed with the chain. With a
/// budget the returned adversary aborts instead of exceeding it.
pub fn full_attack(
    protocol: Arc<dyn Protocol>,
    params: &AttackParameters,
    budget: Option<usize>,
    mode: AttackMode,
) -> Result<FullAttack> {
    let node_budget = match mode {
        AttackMode::Exact { node_budget } | AttackMode::MonteCarlo { node_budget, .. } => node_budget,
    };
    let wrap = |a: Arc<dyn Adversary>| -> Arc<dyn Adversary> {
        match budget {
            Some(b) => Arc::new(WithBudget { inner: a, budget: b }),
            None => a,
        }
    };
    let iteration = match (mode, iterate_one_shot::<f64>(protocol.clone(), params, node_budget)) {
        (_, Ok(it)) => it,
        (AttackMode::MonteCarlo { trials, seed, .. }, Err(Error::BudgetExceeded { .. })) => {
            return sampled_attack(protocol, params, node_budget, trials, seed, wrap);
        }
        (_, Err(e)) => return Err(e),
    };
    let honest = iteration.expectations[0];
    let last = *iteration.expectations.last().expect("one expectation per protocol");
    let nonrobust = iteration.nonrobust_probability.last().copied().unwrap_or(0.0);
    let chain = Arc::new(iteration.chain.clone());
    let mut attack = FullAttack {
        adversary: wrap(Arc::new(AsAdversary(chain.clone()))),
        direction: 0,
        stop: iteration.stop,
        iterations: iteration.iterations(),
        honest_expectation: honest,
        phase_one_expectation: last,
        nonrobust_probability: nonrobust,
        estimated: false,
    };
    if iteration.stop == StopReason::BiasedToZero {
        return Ok(attack);
    }
    let target = iteration.final_protocol().clone();
    let normal: Arc<dyn Adversary> = Arc::new(NormalAttacker::new(
        Arc::new(Evaluator::with_budget(target, node_budget)),
        params.clone(),
        Labeling::Normalized,
    ));
    let adversary: Arc<dyn Adversary> = if chain.is_empty() {
        normal
    } else {
        Arc::new(Composed::new(normal, chain))
    };
    attack.adversary = wrap(adversary);
    attack.direction = 1;
    Ok(attack)
}

fn sampled_attack(
    protocol: Arc<dyn Protocol>,
    params: &AttackParameters,
    node_budget: usize,
    trials: usize,
    seed: u64,
    wrap: impl Fn(Arc<dyn Adversary>) -> Arc<dyn Adversary>,
) -> Result<FullAttack> {
    let eval = Arc::new(Evaluator::<f64>::with_budget(protocol.clone(), node_budget));
    let honest = eval.value(&Transcript::new())?;
    if honest < params.epsilon {
        return Ok(FullAttack {
            adversary: wrap(super::identity()),
            direction: 0,
            stop: StopReason::BiasedToZero,
            iterations: 0,
            honest_expectation: honest,
            phase_one_expectation: honest,
            nonrobust_probability: 0.0,
            estimated: true,
        });
    }
    let p = estimate_nonrobust_probability(&eval, params, trials, seed)?;
    if p > params.delta {
        return Err(Error::BudgetExceeded { budget: node_budget });
    }
    Ok(FullAttack {
        adversary: wrap(Arc::new(NormalAttacker::new(
            eval,
            params.clone(),
            Labeling::Normalized,
        ))),
        direction: 1,
        stop: StopReason::Robust,
        iterations: 0,
        honest_expectation: honest,
        phase_one_expectation: honest,
        nonrobust_probability: p,
        estimated: true,
    })
}

/// Fraction of sampled honest executions that pass a non-robust round.
/// Trial `i` uses the generator seeded with `seed ^ i`.
pub fn estimate_nonrobust_probability(
    eval: &Evaluator<f64>,
    params: &AttackParameters,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter("robustness estimate needs trials >= 1".into()));
    }
    let rounds = eval.protocol().num_rounds();
    let mut hits = 0usize;
    for i in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
        let mut t = Transcript::new();
        while t.len() < rounds {
            let view = eval.view(&t)?;
            if classify_round(&view, params) == RoundClass::NonRobustJump {
                hits += 1;
                break;
            }
            let k = sample_index(view.probs.iter().copied(), &mut rng);
            t.push(view.honest.atoms()[k].0);
        }
    }
    Ok(hits as f64 / trials as f64)
}
