//! Pseudo-party refinement into normal protocols and the normality check.
//!
//! Every round of the refined protocol is spoken by a pseudo-party derived
//! from the original speaker and the round's classification: a single
//! `NonRobust` party owns every round with a large negative jump, each
//! large-jump round gets a fresh pseudo-party, and small-jumps rounds of a
//! party are grouped until their accumulated variance exceeds `1/(λn)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use crate::protocol::{
    classify_round, Evaluator, MessageDist, PartyId, PrefixSummary, Protocol, RoundClass, Transcript,
};
use crate::{AttackParameters, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoParty {
    NonRobust,
    Small { party: PartyId, index: u32 },
    Large { party: PartyId, index: u32 },
}

impl PseudoParty {
    pub fn original(&self) -> Option<PartyId> {
        match *self {
            PseudoParty::NonRobust => None,
            PseudoParty::Small { party, .. } | PseudoParty::Large { party, .. } => Some(party),
        }
    }

    /// Dense identifier among the `2ℓt + 1` pseudo-parties: `NonRobust` is
    /// 0, `Small(P, k)` is `1 + 2(ℓ(P−1) + k − 1)` and `Large(P, k)` the
    /// next integer. Original parties are numbered from 1.
    pub fn encode(&self, rounds: usize) -> PartyId {
        let slot = |party: PartyId, index: u32| 1 + 2 * (rounds as u32 * (party.0 - 1) + (index - 1));
        match *self {
            PseudoParty::NonRobust => PartyId(0),
            PseudoParty::Small { party, index } => PartyId(slot(party, index)),
            PseudoParty::Large { party, index } => PartyId(slot(party, index) + 1),
        }
    }

    pub fn decode(id: PartyId, rounds: usize) -> Option<Self> {
        if id.0 == 0 {
            return Some(PseudoParty::NonRobust);
        }
        if rounds == 0 {
            return None;
        }
        let z = id.0 - 1;
        let (slot, large) = (z / 2, z % 2 == 1);
        let party = PartyId(slot / rounds as u32 + 1);
        let index = slot % rounds as u32 + 1;
        Some(if large {
            PseudoParty::Large { party, index }
        } else {
            PseudoParty::Small { party, index }
        })
    }
}

impl fmt::Display for PseudoParty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PseudoParty::NonRobust => write!(f, "NonRobust"),
            PseudoParty::Small { party, index } => write!(f, "{party}.small{index}"),
            PseudoParty::Large { party, index } => write!(f, "{party}.large{index}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Counters<S> {
    large: u32,
    small: u32,
    acc: S,
}

impl<S: Scalar> Default for Counters<S> {
    fn default() -> Self {
        Self {
            large: 1,
            small: 1,
            acc: S::zero(),
        }
    }
}

/// Per-party counters `L_P`, `S_P` (both from 1) and accumulator `A_P`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerState<S = f64> {
    counters: BTreeMap<PartyId, Counters<S>>,
}

impl<S: Scalar> Default for NormalizerState<S> {
    fn default() -> Self {
        Self {
            counters: BTreeMap::new(),
        }
    }
}

impl<S: Scalar> NormalizerState<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Label the next round would get, without advancing the counters.
    pub fn peek(&self, party: PartyId, class: RoundClass) -> PseudoParty {
        let c = self.counters.get(&party).cloned().unwrap_or_default();
        match class {
            RoundClass::NonRobustJump => PseudoParty::NonRobust,
            RoundClass::LargeJump => PseudoParty::Large { party, index: c.large },
            RoundClass::SmallJump => PseudoParty::Small { party, index: c.small },
        }
    }

    /// Labels a round and advances the counters. The small-jumps group
    /// closes only when `A_P` strictly exceeds `large_var_threshold`.
    pub fn assign(&mut self, party: PartyId, class: RoundClass, variance: &S, large_var_threshold: &S) -> PseudoParty {
        let label = self.peek(party, class);
        let c = self.counters.entry(party).or_default();
        match class {
            RoundClass::NonRobustJump => {}
            RoundClass::LargeJump => c.large += 1,
            RoundClass::SmallJump => {
                c.acc = c.acc.clone() + variance.clone();
                if c.acc > *large_var_threshold {
                    c.small += 1;
                    c.acc = S::zero();
                }
            }
        }
        label
    }

    pub fn large_counter(&self, party: PartyId) -> u32 {
        self.counters.get(&party).map_or(1, |c| c.large)
    }

    pub fn small_counter(&self, party: PartyId) -> u32 {
        self.counters.get(&party).map_or(1, |c| c.small)
    }

    pub fn accumulated(&self, party: PartyId) -> S {
        self.counters.get(&party).map_or_else(S::zero, |c| c.acc.clone())
    }
}

/// The refined protocol: identical messages and output, pseudo-party
/// speakers. Labels are computed lazily per prefix and memoised.
#[derive(Debug)]
pub struct Normalized<S: Scalar = f64> {
    base: Arc<dyn Protocol>,
    eval: Arc<Evaluator<S>>,
    params: AttackParameters,
    labels: DashMap<Transcript, (PseudoParty, NormalizerState<S>)>,
}

impl<S: Scalar> Normalized<S> {
    pub fn new(eval: Arc<Evaluator<S>>, params: AttackParameters) -> Self {
        Self {
            base: eval.protocol().clone(),
            eval,
            params,
            labels: DashMap::new(),
        }
    }

    pub fn base(&self) -> &Arc<dyn Protocol> {
        &self.base
    }

    /// Pseudo-party speaking right after `prefix`.
    pub fn label(&self, prefix: &Transcript) -> Result<PseudoParty> {
        Ok(self.state_after(prefix)?.0)
    }

    fn state_after(&self, prefix: &Transcript) -> Result<(PseudoParty, NormalizerState<S>)> {
        if let Some(hit) = self.labels.get(prefix) {
            return Ok(hit.clone());
        }
        let mut state = if prefix.is_empty() {
            NormalizerState::new()
        } else {
            self.state_after(&prefix.prefix(prefix.len() - 1))?.1
        };
        let view = self.eval.view(prefix)?;
        if view.party.0 == 0 {
            return Err(Error::InvalidProtocol(
                "normalization needs party identifiers starting at 1".into(),
            ));
        }
        let class = classify_round(&view, &self.params);
        let threshold = S::from_f64(self.params.large_var_threshold());
        let label = state.assign(view.party, class, &view.variance, &threshold);
        self.labels.insert(prefix.clone(), (label, state.clone()));
        Ok((label, state))
    }
}

impl<S: Scalar> Protocol for Normalized<S> {
    fn name(&self) -> String {
        format!("normalized({})", self.base.name())
    }

    fn num_parties(&self) -> usize {
        2 * self.base.num_rounds() * self.base.num_parties() + 1
    }

    fn num_rounds(&self) -> usize {
        self.base.num_rounds()
    }

    fn next_party(&self, prefix: &Transcript) -> Result<PartyId> {
        Ok(self.label(prefix)?.encode(self.base.num_rounds()))
    }

    fn next_message_dist(&self, prefix: &Transcript) -> Result<MessageDist> {
        self.base.next_message_dist(prefix)
    }

    fn output(&self, transcript: &Transcript) -> Result<bool> {
        self.base.output(transcript)
    }

    fn closed_form_outcome(&self, summary: PrefixSummary) -> Option<f64> {
        self.base.closed_form_outcome(summary)
    }
}

/// Speaker labels of every reachable prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct PartyMapping {
    pub rounds: usize,
    pub original_parties: usize,
    pub assignments: BTreeMap<Transcript, PseudoParty>,
}

impl PartyMapping {
    pub fn original(&self, pseudo: PseudoParty) -> Option<PartyId> {
        pseudo.original()
    }

    /// Pseudo-parties used by each original party.
    pub fn by_party(&self) -> BTreeMap<PartyId, BTreeSet<PseudoParty>> {
        let mut out: BTreeMap<PartyId, BTreeSet<PseudoParty>> = BTreeMap::new();
        for p in self.assignments.values() {
            if let Some(orig) = p.original() {
                out.entry(orig).or_default().insert(*p);
            }
        }
        out
    }

    pub fn reachable_pseudo_parties(&self) -> BTreeSet<PseudoParty> {
        self.assignments.values().copied().collect()
    }

    /// Nominal count `2ℓt + 1`.
    pub fn declared_pseudo_parties(&self) -> usize {
        2 * self.rounds * self.original_parties + 1
    }
}

/// Wraps the evaluator's protocol in its normalized form and enumerates the
/// mapping over all reachable prefixes.
pub fn normalize<S: Scalar>(
    eval: Arc<Evaluator<S>>,
    params: &AttackParameters,
) -> Result<(Arc<Normalized<S>>, PartyMapping)> {
    let normalized = Arc::new(Normalized::new(eval.clone(), params.clone()));
    let base = eval.protocol().clone();
    let mut assignments = BTreeMap::new();
    let mut stack = vec![Transcript::new()];
    while let Some(t) = stack.pop() {
        if t.len() == base.num_rounds() {
            continue;
        }
        if assignments.len() >= eval.budget() {
            return Err(Error::BudgetExceeded { budget: eval.budget() });
        }
        assignments.insert(t.clone(), normalized.label(&t)?);
        for m in base.next_message_dist(&t)?.support() {
            stack.push(t.extended(*m));
        }
    }
    let mapping = PartyMapping {
        rounds: base.num_rounds(),
        original_parties: base.num_parties(),
        assignments,
    };
    Ok((normalized, mapping))
}

/// Outcome of one normality condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub conditions: Vec<ConditionVerdict>,
    pub transcripts_checked: usize,
}

impl NormalityReport {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, i: usize) -> &ConditionVerdict {
        &self.conditions[i - 1]
    }
}

struct RoundInfo<S> {
    party: PartyId,
    class: RoundClass,
    variance: S,
}

/// Checks the four normality conditions over every reachable transcript:
/// negative-jump rounds are exactly the non-robust party's rounds; a party
/// with a large-jump round speaks once; a small-jumps party's variances sum
/// to at most `2/(λn)`; at most `n` small-jumps parties stay below `1/(λn)`.
///
/// With `nonrobust = None` the non-robust party is inferred from the
/// negative-jump rounds.
pub fn validate_normal<S: Scalar>(
    eval: &Evaluator<S>,
    params: &AttackParameters,
    nonrobust: Option<PartyId>,
) -> Result<NormalityReport> {
    let p = eval.protocol().clone();
    let threshold = S::from_f64(params.large_var_threshold());
    let double = threshold.clone() + threshold.clone();

    let mut leaves: Vec<(Transcript, Vec<RoundInfo<S>>)> = Vec::new();
    let mut visited = 0usize;
    let mut stack = vec![(Transcript::new(), Vec::<RoundInfo<S>>::new())];
    while let Some((t, path)) = stack.pop() {
        visited += 1;
        if visited > eval.budget() {
            return Err(Error::BudgetExceeded { budget: eval.budget() });
        }
        if t.len() == p.num_rounds() {
            leaves.push((t, path));
            continue;
        }
        let view = eval.view(&t)?;
        let class = classify_round(&view, params);
        for m in view.messages() {
            let mut next = Vec::with_capacity(path.len() + 1);
            next.extend(path.iter().map(|r| RoundInfo {
                party: r.party,
                class: r.class,
                variance: r.variance.clone(),
            }));
            next.push(RoundInfo {
                party: view.party,
                class,
                variance: view.variance.clone(),
            });
            stack.push((t.extended(m), next));
        }
    }
    leaves.sort_by(|a, b| a.0.cmp(&b.0));

    let mut negative_owners = BTreeSet::new();
    let mut robust_speakers = BTreeSet::new();
    for (_, path) in &leaves {
        for r in path {
            if r.class == RoundClass::NonRobustJump {
                negative_owners.insert(r.party);
            } else {
                robust_speakers.insert(r.party);
            }
        }
    }
    let designated = nonrobust.or_else(|| negative_owners.iter().next().copied());

    let mut c1 = None;
    let mut c2 = None;
    let mut c3 = None;
    let mut c4 = None;
    for (t, path) in &leaves {
        if c1.is_none() {
            for (i, r) in path.iter().enumerate() {
                let negative = r.class == RoundClass::NonRobustJump;
                if negative != (Some(r.party) == designated) {
                    c1 = Some(format!("{} round {} by {}", t.prefix(i), i + 1, r.party));
                    break;
                }
            }
        }
        let mut per_party: BTreeMap<PartyId, (usize, bool, S)> = BTreeMap::new();
        for r in path.iter().filter(|r| Some(r.party) != designated) {
            let e = per_party.entry(r.party).or_insert((0, false, S::zero()));
            e.0 += 1;
            e.1 |= r.class == RoundClass::LargeJump;
            e.2 = e.2.clone() + r.variance.clone();
        }
        let mut unfulfilled = 0usize;
        for (party, (count, large, sum)) in &per_party {
            if *large {
                if *count != 1 && c2.is_none() {
                    c2 = Some(format!("{t}: {party} has a large jump and speaks {count} times"));
                }
            } else {
                if *sum > double && c3.is_none() {
                    c3 = Some(format!("{t}: {party} accumulates variance {}", sum.to_f64()));
                }
                if *sum < threshold {
                    unfulfilled += 1;
                }
            }
        }
        if unfulfilled > params.n && c4.is_none() {
            c4 = Some(format!("{t}: {unfulfilled} unfulfilled parties, n = {}", params.n));
        }
    }
    if nonrobust.is_none() && negative_owners.len() > 1 && c1.is_none() {
        c1 = Some(format!("negative jumps owned by {negative_owners:?}"));
    }
    if let Some(d) = designated {
        if robust_speakers.contains(&d) && c1.is_none() {
            c1 = Some(format!("{d} also speaks in robust rounds"));
        }
    }

    let verdict = |name: &str, witness: Option<String>| ConditionVerdict {
        condition: name.to_string(),
        passed: witness.is_none(),
        witness,
    };
    Ok(NormalityReport {
        conditions: vec![
            verdict("single_non_robust_party", c1),
            verdict("large_jump_party_speaks_once", c2),
            verdict("small_jumps_variance_bounded", c3),
            verdict("few_unfulfilled_parties", c4),
        ],
        transcripts_checked: leaves.len(),
    })
}

/// Checks that two protocols have the same rounds, message distributions
/// and outputs on every reachable prefix. Returns the first difference.
pub fn semantics_difference(a: &dyn Protocol, b: &dyn Protocol, budget: usize) -> Result<Option<Transcript>> {
    if a.num_rounds() != b.num_rounds() {
        return Ok(Some(Transcript::new()));
    }
    let mut stack = vec![Transcript::new()];
    let mut visited = 0usize;
    while let Some(t) = stack.pop() {
        visited += 1;
        if visited > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        if t.len() == a.num_rounds() {
            if a.output(&t)? != b.output(&t)? {
                return Ok(Some(t));
            }
            continue;
        }
        let da = a.next_message_dist(&t)?;
        if da != b.next_message_dist(&t)? {
            return Ok(Some(t));
        }
        for m in da.support() {
            stack.push(t.extended(*m));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ThresholdOverrides;
    use crate::prob::Rational;
    use crate::zoo::{majority_many_turn, majority_single_turn, Constant};

    fn params(n: usize, neg: f64, large: f64) -> AttackParameters {
        AttackParameters::new(n, 0.3, 1.0, 0.1)
            .unwrap()
            .with_overrides(ThresholdOverrides {
                neg_jump_threshold: Some(neg),
                large_var_threshold: Some(large),
                ..Default::default()
            })
            .unwrap()
    }

    fn exact(p: impl Protocol + 'static) -> Arc<Evaluator<Rational>> {
        Arc::new(Evaluator::new(Arc::new(p)))
    }

    #[test]
    fn encoding_roundtrip() {
        for rounds in [1, 3, 7] {
            for party in 1..4 {
                for index in 1..=rounds as u32 {
                    for p in [
                        PseudoParty::Small {
                            party: PartyId(party),
                            index,
                        },
                        PseudoParty::Large {
                            party: PartyId(party),
                            index,
                        },
                    ] {
                        assert_eq!(PseudoParty::decode(p.encode(rounds), rounds), Some(p));
                    }
                }
            }
        }
        assert_eq!(PseudoParty::NonRobust.encode(3), PartyId(0));
    }

    #[test]
    fn strict_reset() {
        let mut s = NormalizerState::<Rational>::new();
        let half = Rational::new(1.into(), 2.into());
        let one = Rational::from_int(1);
        let p = PartyId(1);
        assert_eq!(
            s.assign(p, RoundClass::SmallJump, &half, &one),
            PseudoParty::Small { party: p, index: 1 }
        );
        assert_eq!(
            s.assign(p, RoundClass::SmallJump, &half, &one),
            PseudoParty::Small { party: p, index: 1 }
        );
        assert_eq!(s.small_counter(p), 1);
        s.assign(p, RoundClass::SmallJump, &half, &one);
        assert_eq!(s.small_counter(p), 2);
        assert_eq!(s.accumulated(p), Rational::from_int(0));
    }

    #[test]
    fn constant_protocol_maps_to_first_small_party() {
        let e = exact(Constant::new(true, 2, 4).unwrap());
        let (_, mapping) = normalize(e, &params(2, 0.1, 0.01)).unwrap();
        for (t, p) in &mapping.assignments {
            let party = PartyId((t.len() % 2) as u32 + 1);
            assert_eq!(*p, PseudoParty::Small { party, index: 1 });
        }
    }

    #[test]
    fn majority_three_labels() {
        let e = exact(majority_single_turn(3).unwrap());
        let (_, m) = normalize(e.clone(), &params(3, 0.01, 0.01)).unwrap();
        let undecided = [
            Transcript::new(),
            Transcript::from_values([1]),
            Transcript::from_values([1, 0]),
        ];
        for t in &undecided {
            assert_eq!(m.assignments[t], PseudoParty::NonRobust);
        }
        let (_, m) = normalize(e, &params(3, 0.6, 0.01)).unwrap();
        for t in &undecided {
            let party = PartyId(t.len() as u32 + 1);
            assert_eq!(m.assignments[t], PseudoParty::Large { party, index: 1 });
        }
        // round 3 after two equal bits is already decided
        assert!(matches!(
            m.assignments[&Transcript::from_values([1, 1])],
            PseudoParty::Small { .. }
        ));
    }

    #[test]
    fn repeated_large_speaker_fails_condition_two() {
        let e = exact(majority_many_turn(1, 3).unwrap());
        let p = params(1, 0.9, 0.01);
        let report = validate_normal(&e, &p, None).unwrap();
        assert!(!report.condition(2).passed);
        assert!(report.condition(2).witness.is_some());
        let (normalized, _) = normalize(e.clone(), &p).unwrap();
        let ne: Evaluator<Rational> = Evaluator::new(normalized.clone());
        assert!(validate_normal(&ne, &p, Some(PartyId(0))).unwrap().all_passed());
        assert_eq!(
            semantics_difference(e.protocol().as_ref(), normalized.as_ref(), 10_000).unwrap(),
            None
        );
    }
}
