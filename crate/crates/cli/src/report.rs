//! Report files: a reproducible `body` next to a `metadata` block holding
//! everything that legitimately varies between runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use coinflip_core::adversary::StopReason;
use coinflip_core::analyzer::{BoundComparison, ExperimentReport, KlReport, VarianceAccounting};
use coinflip_core::normalizer::NormalityReport;
use coinflip_core::params::ThresholdOverrides;
use coinflip_core::verify::VerifyReport;
use coinflip_core::{AttackParameters, DEFAULT_NODE_BUDGET};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode, DEFAULT_TRIALS};
use crate::CliError;

pub const BODY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<B> {
    pub body: B,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub command: String,
    pub started_unix_ms: u128,
    pub runtime_ms: u128,
    pub workers: usize,
}

impl Metadata {
    pub fn new(command: &str, started: SystemTime, runtime: Duration, workers: usize) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            started_unix_ms: started.duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0),
            runtime_ms: runtime.as_millis(),
            workers,
        }
    }
}

/// The config as echoed into report bodies: worker count and output paths
/// are dropped since they cannot change results.
pub fn experiment_echo(config: &ExperimentConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(config).expect("config is always serializable");
    if let Some(o) = v.as_object_mut() {
        o.remove("workers");
        o.remove("output");
    }
    v
}

/// Built-in defaults, printed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub node_budget: usize,
    pub trials: u64,
    pub epsilon: String,
    pub lambda: String,
    pub delta: String,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            node_budget: DEFAULT_NODE_BUDGET,
            trials: DEFAULT_TRIALS,
            epsilon: "(log2 log2 n)^(-1/50), at most 0.99".into(),
            lambda: "100 / epsilon^5".into(),
            delta: "1 / (log2 n)^2, at most 0.99".into(),
        }
    }
}

/// The constants in force plus every derived threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParameters {
    pub n: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub delta: f64,
    pub overrides: ThresholdOverrides,
    pub neg_jump_threshold: f64,
    pub large_var_threshold: f64,
    pub posterior_cap: f64,
    pub small_corrupt_prob: f64,
    pub max_iterations: usize,
    pub variance_bound: f64,
    pub kl_bound: f64,
}

impl From<&AttackParameters> for ResolvedParameters {
    fn from(p: &AttackParameters) -> Self {
        Self {
            n: p.n,
            epsilon: p.epsilon,
            lambda: p.lambda,
            delta: p.delta,
            overrides: p.overrides.clone(),
            neg_jump_threshold: p.neg_jump_threshold(),
            large_var_threshold: p.large_var_threshold(),
            posterior_cap: p.posterior_cap(),
            small_corrupt_prob: p.small_corrupt_prob(),
            max_iterations: p.max_iterations(),
            variance_bound: p.variance_bound(),
            kl_bound: p.kl_bound(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullAttackSummary {
    pub direction: u8,
    pub stop: StopReason,
    pub iterations: usize,
    pub phase_one_expectation: f64,
    pub nonrobust_probability: f64,
    pub robustness_estimated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSummary {
    pub corruption_distribution: BTreeMap<usize, f64>,
    pub corruption_by_round: Vec<f64>,
    pub kl: KlReport,
    pub variance: VarianceAccounting,
    pub variance_bound: BoundComparison,
    pub joint_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunBody {
    pub schema_version: u32,
    pub experiment: serde_json::Value,
    pub protocol: String,
    pub adversary: String,
    pub mode: Mode,
    pub parameters: ResolvedParameters,
    pub defaults: Defaults,
    /// `None` when the honest tree is too large and has no closed form.
    pub honest_expectation: Option<f64>,
    /// Exact probability of output 1, or its Monte Carlo frequency.
    pub attacked_expectation: f64,
    pub expected_corruptions: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_attack: Option<FullAttackSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<ExperimentReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizeBody {
    pub schema_version: u32,
    pub experiment: serde_json::Value,
    pub protocol: String,
    pub parameters: ResolvedParameters,
    pub defaults: Defaults,
    pub before: NormalityReport,
    pub after: NormalityReport,
    pub semantics_preserved: bool,
    pub declared_pseudo_parties: usize,
    pub reachable_pseudo_parties: Vec<String>,
    /// Original party to the pseudo-parties it was split into.
    pub by_party: BTreeMap<String, Vec<String>>,
    /// Prefix to the pseudo-party speaking next.
    pub mapping: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyBody {
    pub schema_version: u32,
    pub passed: bool,
    pub report: VerifyReport,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports are always serializable") + "\n";
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
