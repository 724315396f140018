//! Experiment configuration files.

use std::path::{Path, PathBuf};

use coinflip_core::adversary::Labeling;
use coinflip_core::description::ProtocolDescription;
use coinflip_core::params::ThresholdOverrides;
use coinflip_core::verify::VerifyConfig;
use coinflip_core::{AttackParameters, Protocol, DEFAULT_NODE_BUDGET};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::sync::Arc;

use crate::CliError;

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_ROBUSTNESS_TRIALS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Exact,
    MonteCarlo,
}

/// Where the protocol comes from: inline, or a description file.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolSource {
    Inline(ProtocolDescription),
    File(PathBuf),
}

impl Serialize for ProtocolSource {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ProtocolSource::Inline(d) => d.serialize(s),
            ProtocolSource::File(p) => {
                #[derive(Serialize)]
                struct F<'a> {
                    file: &'a Path,
                }
                F { file: p }.serialize(s)
            }
        }
    }
}

impl<'de> Deserialize<'de> for ProtocolSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(d)?;
        if let Some(file) = v.get("file") {
            if v.as_object().is_some_and(|o| o.len() > 1) {
                return Err(D::Error::custom("a `file` protocol takes no other keys"));
            }
            let file = file
                .as_str()
                .ok_or_else(|| D::Error::custom("`file` must be a path string"))?;
            return Ok(ProtocolSource::File(file.into()));
        }
        serde_json::from_value(v)
            .map(ProtocolSource::Inline)
            .map_err(D::Error::custom)
    }
}

impl ProtocolSource {
    /// Relative file paths resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<Arc<dyn Protocol>, CliError> {
        let description = match self {
            ProtocolSource::Inline(d) => d.clone(),
            ProtocolSource::File(p) => {
                let path = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                ProtocolDescription::load(&path).map_err(|e| CliError::Usage(format!("protocol: {e}")))?
            }
        };
        description
            .build()
            .map_err(|e| CliError::Usage(format!("protocol: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    #[default]
    Identity,
    Normal,
    OneShot,
    OneShotChain,
    Derandomized,
    FullAttack,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryConfig {
    pub kind: AdversaryKind,
    pub labeling: Labeling,
    /// Maximum number of corruptions; `None` is unbounded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    /// Abort the attack at a non-robust round instead of passing through.
    pub strict_halt: bool,
    /// `n` for the thresholds; defaults to the protocol's party count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub overrides: ThresholdOverrides,
    /// Honest samples used to estimate robustness when the full attack
    /// cannot enumerate the protocol.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robustness_trials: Option<usize>,
}

impl AdversaryConfig {
    pub fn parameters(&self, parties: usize) -> Result<AttackParameters, CliError> {
        let usage = |field: &str, e: coinflip_core::Error| CliError::Usage(format!("adversary.{field}: {e}"));
        let mut p = AttackParameters::for_n(self.n.unwrap_or(parties)).map_err(|e| usage("n", e))?;
        if let Some(l) = self.lambda {
            p = p.with_lambda(l).map_err(|e| usage("lambda", e))?;
        }
        if let Some(e) = self.epsilon {
            p = p.with_epsilon(e).map_err(|e| usage("epsilon", e))?;
        }
        if let Some(d) = self.delta {
            p = p.with_delta(d).map_err(|e| usage("delta", e))?;
        }
        p.with_overrides(self.overrides.clone())
            .map_err(|e| usage("overrides", e))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: ProtocolSource,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub mode: Mode,
    /// Required in monte-carlo mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_node_budget")]
    pub node_budget: usize,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn default_workers() -> usize {
    1
}

fn default_node_budget() -> usize {
    DEFAULT_NODE_BUDGET
}

impl ExperimentConfig {
    pub fn new(protocol: ProtocolSource) -> Self {
        Self {
            protocol,
            adversary: AdversaryConfig::default(),
            mode: Mode::Exact,
            trials: None,
            seed: 0,
            workers: default_workers(),
            node_budget: default_node_budget(),
            output: OutputPaths::default(),
            verify: VerifyConfig::default(),
        }
    }

    /// Parses JSON, reporting the path of the offending field on failure.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CliError::Usage(format!("config: {inner}"))
            } else {
                CliError::Usage(format!("config field `{path}`: {inner}"))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable") + "\n"
    }

    /// Checks constraints that span several fields.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.mode == Mode::MonteCarlo {
            match self.trials {
                None => return Err(CliError::Usage(format!(
                    "config field `trials` is required in monte-carlo mode (for example \"trials\": {DEFAULT_TRIALS})"
                ))),
                Some(0) => return Err(CliError::Usage("config field `trials` must be at least 1".into())),
                Some(_) => {}
            }
        }
        if self.workers == 0 {
            return Err(CliError::Usage("config field `workers` must be at least 1".into()));
        }
        if self.node_budget == 0 {
            return Err(CliError::Usage("config field `node_budget` must be at least 1".into()));
        }
        if self.adversary.robustness_trials == Some(0) {
            return Err(CliError::Usage(
                "config field `adversary.robustness_trials` must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
