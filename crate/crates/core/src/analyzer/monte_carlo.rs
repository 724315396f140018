use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BoundComparison, KlReport, VarianceAccounting};
use crate::adversary::{advance, resolve, Adversary, Emission, Plan, PlanContext};
use crate::prob::{sample_coupled_indices, sample_index};
use crate::protocol::{classify_round, Evaluator, PartyId, Protocol, RoundClass, Transcript};
use crate::{AttackParameters, Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Trials are simulated in blocks of this size and reduced in index order.
const BLOCK: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub base_seed: u64,
    pub workers: usize,
    /// Keep per-trial records (for CSV output).
    pub keep_records: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub seed: u64,
    pub outcome: bool,
    pub corruptions: usize,
    pub clamped: bool,
    pub nonrobust_hit: bool,
    pub altered_rounds: usize,
    pub variance: VarianceAccounting,
    pub coupling_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub party: PartyId,
    pub class: RoundClass,
    pub variance: f64,
    pub corrupted: bool,
    pub altered: bool,
    /// Coupled honest increment, when the message came from a biased
    /// emission (in the attacker's utility) or from honest sampling.
    pub y: Option<f64>,
    /// Realized increment `S_k − S_{k−1}`.
    pub x: f64,
    pub s_before: f64,
    pub s_after: f64,
}

/// One attacked run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub transcript: Vec<u32>,
    pub rounds: Vec<RoundRecord>,
    pub outcome: bool,
    pub corruption_events: Vec<(usize, PartyId)>,
}

/// Seed of trial `i`: `base_seed ^ i`.
pub fn trial_seed(base_seed: u64, trial_index: u64) -> u64 {
    base_seed ^ trial_index
}

/// Simulates one attacked execution. The evaluator's protocol is the one
/// under attack and supplies the honest views.
pub fn run_trial(
    eval: &Evaluator<f64>,
    adv: &dyn Adversary,
    params: &AttackParameters,
    trial_index: u64,
    base_seed: u64,
    trace: bool,
) -> Result<(TrialRecord, Option<ExecutionTrace>)> {
    let seed = trial_seed(base_seed, trial_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protocol: Arc<dyn Protocol> = eval.protocol().clone();
    let mut rec = TrialRecord {
        trial_index,
        seed,
        outcome: false,
        corruptions: 0,
        clamped: false,
        nonrobust_hit: false,
        altered_rounds: 0,
        variance: VarianceAccounting::default(),
        coupling_violations: 0,
    };
    let mut rounds = Vec::new();
    let mut events = Vec::new();
    let mut state = adv.begin();
    let mut t = Transcript::new();
    let honest_plan = Plan::honest();
    while t.len() < protocol.num_rounds() {
        let view = eval.view(&t)?;
        let class = classify_round(&view, params);
        rec.variance.add(class, view.variance);
        rec.nonrobust_hit |= class == RoundClass::NonRobustJump;
        let ctx = PlanContext {
            prefix: &t,
            view: &view,
            protocol: &protocol,
        };
        let owned;
        let plan = if state.halted {
            &honest_plan
        } else {
            owned = adv.plan(&ctx, &state)?;
            &owned
        };
        rec.clamped |= plan.note.clamped;
        let resolved = resolve(plan, &state, view.party);
        let r = if resolved.len() == 1 {
            &resolved[0]
        } else {
            &resolved[sample_index(resolved.iter().map(|r| r.prob), &mut rng)]
        };
        let (m, y) = match &r.emission {
            Emission::Honest => {
                let k = sample_index(view.probs.iter().copied(), &mut rng);
                (view.honest.atoms()[k].0, Some(view.jumps[k]))
            }
            Emission::Fixed(m) => {
                if !view.honest.contains(m) {
                    return Err(Error::AttackInfeasible {
                        round: view.round,
                        reason: format!("message {m} is outside the honest support"),
                    });
                }
                (*m, None)
            }
            Emission::Biased {
                messages,
                probs,
                utility,
                alpha,
            } => {
                let (a, b) = sample_coupled_indices(probs, utility, *alpha, &mut rng);
                if utility[b] < utility[a] {
                    rec.coupling_violations += 1;
                }
                if !view.honest.contains(&messages[b]) {
                    return Err(Error::AttackInfeasible {
                        round: view.round,
                        reason: format!("message {} is outside the honest support", messages[b]),
                    });
                }
                (messages[b], Some(utility[a]))
            }
        };
        let altered = r.emission != Emission::Honest;
        rec.altered_rounds += usize::from(altered);
        let before = state.corrupted.len();
        advance(adv, &ctx, &mut state, plan, r, m)?;
        if state.corrupted.len() > before {
            events.push((view.round, view.party));
        }
        if trace {
            let x = *view.jump(m).expect("message in support");
            rounds.push(RoundRecord {
                round: view.round,
                party: view.party,
                class,
                variance: view.variance,
                corrupted: state.corrupted.contains(&view.party),
                altered,
                y,
                x,
                s_before: view.value,
                s_after: view.value + x,
            });
        }
        t.push(m);
    }
    rec.outcome = protocol.output(&t)?;
    rec.corruptions = state.corrupted.len();
    let trace = trace.then(|| ExecutionTrace {
        transcript: t.messages().iter().map(|m| m.0).collect(),
        rounds,
        outcome: rec.outcome,
        corruption_events: events,
    });
    Ok((rec, trace))
}

/// Aggregated Monte Carlo statistics. Deterministic in
/// `(protocol, adversary, parameters, trials, base_seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub protocol: String,
    pub adversary: String,
    pub trials: u64,
    pub base_seed: u64,
    pub outcome_frequency: f64,
    pub outcome_standard_error: f64,
    pub mean_corruptions: f64,
    pub corruptions_standard_error: f64,
    pub max_corruptions: usize,
    pub corruption_histogram: BTreeMap<usize, u64>,
    pub mean_altered_rounds: f64,
    pub mean_variance: VarianceAccounting,
    pub variance_bound: BoundComparison,
    pub clamped_trials: u64,
    pub nonrobust_trials: u64,
    pub coupling_violations: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl: Option<KlReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct McResult {
    pub report: ExperimentReport,
    pub records: Vec<TrialRecord>,
}

#[derive(Default)]
struct Totals {
    ones: u64,
    corruptions: f64,
    corruptions_sq: f64,
    max: usize,
    histogram: BTreeMap<usize, u64>,
    altered: f64,
    variance: VarianceAccounting,
    clamped: u64,
    nonrobust: u64,
    violations: u64,
}

impl Totals {
    fn absorb(&mut self, r: &TrialRecord) {
        self.ones += u64::from(r.outcome);
        let c = r.corruptions as f64;
        self.corruptions += c;
        self.corruptions_sq += c * c;
        self.max = self.max.max(r.corruptions);
        *self.histogram.entry(r.corruptions).or_default() += 1;
        self.altered += r.altered_rounds as f64;
        self.variance = self.variance.plus(r.variance);
        self.clamped += u64::from(r.clamped);
        self.nonrobust += u64::from(r.nonrobust_hit);
        self.violations += r.coupling_violations as u64;
    }
}

/// Runs `config.trials` independent attacked executions on `workers`
/// threads. Trial `i` is seeded with `base_seed ^ i`, and results are
/// reduced in trial order, so the report does not depend on `workers`.
pub fn monte_carlo(
    eval: &Evaluator<f64>,
    adv: &dyn Adversary,
    params: &AttackParameters,
    config: McConfig,
) -> Result<McResult> {
    if config.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let mut totals = Totals::default();
    let mut records = Vec::new();
    let mut start = 0;
    while start < config.trials {
        let end = (start + BLOCK).min(config.trials);
        let block: Vec<Result<TrialRecord>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| run_trial(eval, adv, params, i, config.base_seed, false).map(|r| r.0))
                .collect()
        });
        for r in block {
            let r = r?;
            totals.absorb(&r);
            if config.keep_records {
                records.push(r);
            }
        }
        start = end;
    }
    let n = config.trials as f64;
    let freq = totals.ones as f64 / n;
    let mean_c = totals.corruptions / n;
    let var_c = if config.trials > 1 {
        ((totals.corruptions_sq - n * mean_c * mean_c) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let mean_variance = totals.variance.scaled(1.0 / n);
    let mut warnings = Vec::new();
    if totals.clamped > 0 {
        warnings.push(format!(
            "corruption probability clamped to 1 in {} of {} trials",
            totals.clamped, config.trials
        ));
    }
    if totals.nonrobust > 0 {
        warnings.push(format!(
            "{} of {} trials passed a non-robust round",
            totals.nonrobust, config.trials
        ));
    }
    if totals.violations > 0 {
        warnings.push(format!("{} coupling violations", totals.violations));
    }
    let report = ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        protocol: eval.protocol().name(),
        adversary: adv.name(),
        trials: config.trials,
        base_seed: config.base_seed,
        outcome_frequency: freq,
        outcome_standard_error: (freq * (1.0 - freq) / n).sqrt(),
        mean_corruptions: mean_c,
        corruptions_standard_error: (var_c / n).sqrt(),
        max_corruptions: totals.max,
        corruption_histogram: totals.histogram,
        mean_altered_rounds: totals.altered / n,
        mean_variance,
        variance_bound: BoundComparison::new(mean_variance.robust, params.variance_bound()),
        clamped_trials: totals.clamped,
        nonrobust_trials: totals.nonrobust,
        coupling_violations: totals.violations,
        kl: None,
        warnings,
    };
    Ok(McResult { report, records })
}
