//! Declarative protocol description files.
//!
//! A description is JSON in one of two forms. A generator reference:
//!
//! ```json
//! {"generator": "majority_single_turn", "n": 3}
//! ```
//!
//! or a rule table:
//!
//! ```json
//! {
//!   "parties": 1,
//!   "rounds": 2,
//!   "rules": [
//!     {"prefix": [], "party": 1, "dist": {"0": "1/2", "1": "1/2"}},
//!     {"prefix": ["*"], "party": 1, "dist": {"0": "0.25", "1": "0.75"}}
//!   ],
//!   "output": {"rule": "and"}
//! }
//! ```
//!
//! Rules are tried in order and the first whose pattern matches the prefix
//! wins. A pattern element is a message value, `"*"` (any one message) or a
//! trailing `"..."` (any remaining messages, possibly none). Probabilities
//! are `"p/q"` strings or decimals and are stored exactly. The output is
//! either `{"ones": [[...], ...]}`, listing the complete transcripts with
//! output 1, or `{"rule": r}` with `r` one of `majority`, `and`, `or`,
//! `parity`, `last`, `constant0`, `constant1`, where a message counts as a
//! one iff it is non-zero. Every reachable prefix must match a rule; this
//! is checked when the table is loaded.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};

use crate::protocol::{Message, MessageDist, PartyId, Prob, Protocol, Transcript};
use crate::zoo::ZooSpec;
use crate::{Error, FiniteDistribution, Result, DEFAULT_NODE_BUDGET};

/// Either a zoo generator or an explicit rule table.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ProtocolDescription {
    Generator(ZooSpec),
    Table(TableSpec),
}

impl<'de> Deserialize<'de> for ProtocolDescription {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(d)?;
        if v.get("generator").is_some() {
            serde_json::from_value(v).map(Self::Generator).map_err(D::Error::custom)
        } else {
            serde_json::from_value(v).map(Self::Table).map_err(D::Error::custom)
        }
    }
}

impl ProtocolDescription {
    pub fn build(&self) -> Result<Arc<dyn Protocol>> {
        match self {
            Self::Generator(z) => z.build(),
            Self::Table(t) => Ok(Arc::new(TableProtocol::new(t.clone())?)),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidProtocol(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::InvalidProtocol(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub parties: usize,
    pub rounds: usize,
    pub rules: Vec<Rule>,
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub prefix: Vec<PatternItem>,
    pub party: u32,
    pub dist: BTreeMap<String, ProbLiteral>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternItem {
    Message(u32),
    Wildcard(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbLiteral {
    Text(String),
    Number(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OutputSpec {
    Ones(Vec<Vec<u32>>),
    Rule(OutputRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputRule {
    Majority,
    And,
    Or,
    Parity,
    Last,
    Constant0,
    Constant1,
}

#[derive(Debug, Clone)]
enum Pattern {
    Exact(Vec<Option<u32>>),
    Open(Vec<Option<u32>>),
}

impl Pattern {
    fn matches(&self, prefix: &Transcript) -> bool {
        let msgs = prefix.messages();
        let (items, open) = match self {
            Pattern::Exact(i) => (i, false),
            Pattern::Open(i) => (i, true),
        };
        if open && msgs.len() < items.len() || !open && msgs.len() != items.len() {
            return false;
        }
        items.iter().zip(msgs).all(|(want, m)| want.is_none_or(|w| w == m.0))
    }
}

#[derive(Debug, Clone)]
struct CompiledRule {
    pattern: Pattern,
    party: PartyId,
    dist: MessageDist,
}

/// A protocol given by an ordered rule table.
#[derive(Debug)]
pub struct TableProtocol {
    spec: TableSpec,
    rules: Vec<CompiledRule>,
    ones: Option<BTreeSet<Vec<u32>>>,
}

impl TableProtocol {
    /// Compiles the table and checks it is total on every reachable prefix.
    pub fn new(spec: TableSpec) -> Result<Self> {
        if spec.parties == 0 {
            return Err(Error::InvalidProtocol("parties must be at least 1".into()));
        }
        let mut rules = Vec::with_capacity(spec.rules.len());
        for (i, r) in spec.rules.iter().enumerate() {
            rules.push(compile_rule(i, r, spec.parties)?);
        }
        let ones = match &spec.output {
            OutputSpec::Ones(list) => {
                if let Some(bad) = list.iter().find(|t| t.len() != spec.rounds) {
                    return Err(Error::InvalidProtocol(format!(
                        "output transcript {bad:?} does not have {} messages",
                        spec.rounds
                    )));
                }
                Some(list.iter().cloned().collect())
            }
            OutputSpec::Rule(_) => None,
        };
        let p = Self { spec, rules, ones };
        p.check_total()?;
        Ok(p)
    }

    fn check_total(&self) -> Result<()> {
        let mut stack = vec![Transcript::new()];
        let mut seen = 0usize;
        while let Some(t) = stack.pop() {
            seen += 1;
            if seen > DEFAULT_NODE_BUDGET {
                return Err(Error::BudgetExceeded {
                    budget: DEFAULT_NODE_BUDGET,
                });
            }
            if t.len() == self.spec.rounds {
                continue;
            }
            let rule = self.rule_for(&t)?;
            for m in rule.dist.support() {
                stack.push(t.extended(*m));
            }
        }
        Ok(())
    }

    fn rule_for(&self, prefix: &Transcript) -> Result<&CompiledRule> {
        if prefix.len() >= self.spec.rounds {
            return Err(Error::NoNextRound);
        }
        self.rules
            .iter()
            .find(|r| r.pattern.matches(prefix))
            .ok_or_else(|| Error::InvalidProtocol(format!("no rule matches prefix {prefix}")))
    }
}

fn compile_rule(index: usize, rule: &Rule, parties: usize) -> Result<CompiledRule> {
    let ctx = |what: String| Error::InvalidProtocol(format!("rule {index}: {what}"));
    if rule.party == 0 || rule.party as usize > parties {
        return Err(ctx(format!("party {} outside 1..={parties}", rule.party)));
    }
    let mut items = Vec::new();
    let mut open = false;
    for (j, it) in rule.prefix.iter().enumerate() {
        match it {
            PatternItem::Message(m) => items.push(Some(*m)),
            PatternItem::Wildcard(s) if s == "*" => items.push(None),
            PatternItem::Wildcard(s) if s == "..." && j + 1 == rule.prefix.len() => open = true,
            PatternItem::Wildcard(s) => return Err(ctx(format!("bad pattern element {s:?}"))),
        }
    }
    let mut atoms = Vec::new();
    for (k, v) in &rule.dist {
        let m: u32 = k.parse().map_err(|_| ctx(format!("message {k:?} is not an integer")))?;
        atoms.push((Message(m), parse_prob(v).map_err(|e| ctx(e.to_string()))?));
    }
    let dist = FiniteDistribution::new(atoms).map_err(|e| ctx(e.to_string()))?;
    Ok(CompiledRule {
        pattern: if open {
            Pattern::Open(items)
        } else {
            Pattern::Exact(items)
        },
        party: PartyId(rule.party),
        dist,
    })
}

/// Parses `"p/q"`, a decimal string or a JSON number into an exact ratio.
pub fn parse_prob(lit: &ProbLiteral) -> Result<Prob> {
    let text = match lit {
        ProbLiteral::Text(s) => s.trim().to_string(),
        ProbLiteral::Number(x) => format!("{x}"),
    };
    let bad = || Error::InvalidDistribution(format!("cannot parse probability {text:?}"));
    let value = if let Some((n, d)) = text.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d <= 0 {
            return Err(bad());
        }
        Prob::new(n, d)
    } else {
        let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
        if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: i64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let scale = 10i64.pow(frac.len() as u32);
        let frac: i64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        Prob::new(int * scale + frac, scale)
    };
    if value < Prob::from_integer(0) || value > Prob::from_integer(1) {
        return Err(bad());
    }
    Ok(value)
}

impl Protocol for TableProtocol {
    fn name(&self) -> String {
        self.spec.name.clone().unwrap_or_else(|| "table".into())
    }

    fn num_parties(&self) -> usize {
        self.spec.parties
    }

    fn num_rounds(&self) -> usize {
        self.spec.rounds
    }

    fn next_party(&self, prefix: &Transcript) -> Result<PartyId> {
        Ok(self.rule_for(prefix)?.party)
    }

    fn next_message_dist(&self, prefix: &Transcript) -> Result<MessageDist> {
        Ok(self.rule_for(prefix)?.dist.clone())
    }

    fn output(&self, t: &Transcript) -> Result<bool> {
        if t.len() != self.spec.rounds {
            return Err(Error::InvalidPrefix(format!("{t} is not complete")));
        }
        if let Some(ones) = &self.ones {
            let key: Vec<u32> = t.messages().iter().map(|m| m.0).collect();
            return Ok(ones.contains(&key));
        }
        let nz = t.messages().iter().filter(|m| m.0 != 0).count();
        let OutputSpec::Rule(rule) = &self.spec.output else {
            unreachable!()
        };
        Ok(match rule {
            OutputRule::Majority => 2 * nz > t.len(),
            OutputRule::And => nz == t.len(),
            OutputRule::Or => nz > 0,
            OutputRule::Parity => nz % 2 == 1,
            OutputRule::Last => t.last().is_some_and(|m| m.0 != 0),
            OutputRule::Constant0 => false,
            OutputRule::Constant1 => true,
        })
    }
}
