//! Command implementations behind the `coinflip` binary.
//!
//! Each command takes a parsed [`ExperimentConfig`] plus command-line
//! overrides, writes its report and returns an exit code. Human-readable
//! summaries go to the writer passed in.

pub mod config;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime};

use coinflip_core::adversary::{
    derandomize, full_attack, identity, iterate_one_shot, Adversary, AsAdversary, AttackMode, Direction,
    NormalAttacker, OneShot, WithBudget,
};
use coinflip_core::analyzer::{exact_attacked_distribution, monte_carlo, McConfig, TrialRecord};
use coinflip_core::normalizer::{normalize, semantics_difference, validate_normal};
use coinflip_core::prob::Rational;
use coinflip_core::verify::run_verification;
use coinflip_core::{AttackParameters, Error, Evaluator, PartyId, Protocol, Transcript};
use serde::Serialize;

pub use config::{AdversaryConfig, AdversaryKind, ExperimentConfig, Mode, ProtocolSource};
use report::*;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("node budget of {budget} exceeded; rerun with --mode monte-carlo or raise `node_budget`")]
    Budget { budget: usize },
    #[error("{0}")]
    Core(Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BudgetExceeded { budget } => CliError::Budget { budget },
            e => CliError::Core(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Budget { .. } => 3,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub mode: Option<Mode>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            config.seed = s;
            config.verify.seed = s;
        }
        if let Some(t) = self.trials {
            config.trials = Some(t);
        }
        if let Some(w) = self.workers {
            config.workers = w;
        }
        if let Some(o) = &self.out {
            config.output.report = Some(o.clone());
        }
        if let Some(m) = self.mode {
            config.mode = m;
        }
    }
}

/// A loaded config and the directory relative protocol paths resolve against.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub base_dir: Option<PathBuf>,
}

impl Loaded {
    pub fn from_path(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let mut config = ExperimentConfig::load(path)?;
        overrides.apply(&mut config);
        config.validate()?;
        Ok(Self {
            config,
            base_dir: path.parent().map(Path::to_path_buf),
        })
    }

    pub fn from_config(mut config: ExperimentConfig, overrides: &Overrides) -> Result<Self, CliError> {
        overrides.apply(&mut config);
        config.validate()?;
        Ok(Self { config, base_dir: None })
    }
}

fn write_report<B: Serialize>(
    config: &ExperimentConfig,
    command: &str,
    body: B,
    started: SystemTime,
    clock: Instant,
) -> Result<(), CliError> {
    if let Some(path) = &config.output.report {
        let report = Report {
            body,
            metadata: Metadata::new(command, started, clock.elapsed(), config.workers),
        };
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CsvRow {
    trial_index: u64,
    seed: u64,
    outcome: u8,
    corruptions: usize,
    clamped: u8,
    nonrobust_hit: u8,
}

fn write_csv(path: &Path, records: &[TrialRecord]) -> Result<(), CliError> {
    let io = |e: &dyn std::fmt::Display| CliError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io(&e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io(&e))?;
    for r in records {
        w.serialize(CsvRow {
            trial_index: r.trial_index,
            seed: r.seed,
            outcome: r.outcome.into(),
            corruptions: r.corruptions,
            clamped: r.clamped.into(),
            nonrobust_hit: r.nonrobust_hit.into(),
        })
        .map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}

struct Built {
    adversary: Arc<dyn Adversary>,
    full: Option<FullAttackSummary>,
}

fn build_adversary(
    config: &ExperimentConfig,
    protocol: &Arc<dyn Protocol>,
    eval: &Arc<Evaluator<f64>>,
    params: &AttackParameters,
) -> Result<Built, CliError> {
    let a = &config.adversary;
    let normal = || NormalAttacker::new(eval.clone(), params.clone(), a.labeling).strict(a.strict_halt);
    let adversary: Arc<dyn Adversary> = match a.kind {
        AdversaryKind::Identity => identity(),
        AdversaryKind::Normal => Arc::new(normal()),
        AdversaryKind::OneShot => Arc::new(AsAdversary(Arc::new(OneShot::new(eval.clone(), params)))),
        AdversaryKind::OneShotChain => {
            let it = iterate_one_shot::<f64>(protocol.clone(), params, config.node_budget)?;
            Arc::new(AsAdversary(Arc::new(it.chain)))
        }
        AdversaryKind::Derandomized => Arc::new(AsAdversary(Arc::new(derandomize(
            eval,
            &normal(),
            Direction::Maximize,
        )?))),
        AdversaryKind::FullAttack => {
            let mode = match config.mode {
                Mode::Exact => AttackMode::Exact {
                    node_budget: config.node_budget,
                },
                Mode::MonteCarlo => AttackMode::MonteCarlo {
                    node_budget: config.node_budget,
                    trials: a.robustness_trials.unwrap_or(config::DEFAULT_ROBUSTNESS_TRIALS),
                    seed: config.seed,
                },
            };
            let fa = full_attack(protocol.clone(), params, a.budget, mode)?;
            return Ok(Built {
                full: Some(FullAttackSummary {
                    direction: fa.direction,
                    stop: fa.stop,
                    iterations: fa.iterations,
                    phase_one_expectation: fa.phase_one_expectation,
                    nonrobust_probability: fa.nonrobust_probability,
                    robustness_estimated: fa.estimated,
                }),
                adversary: fa.adversary,
            });
        }
    };
    let adversary = match a.budget {
        Some(budget) => Arc::new(WithBudget {
            inner: adversary,
            budget,
        }),
        None => adversary,
    };
    Ok(Built { adversary, full: None })
}

/// Runs one experiment and returns the report body.
pub fn execute_run(loaded: &Loaded) -> Result<(RunBody, Vec<TrialRecord>), CliError> {
    let config = &loaded.config;
    let protocol = config.protocol.build(loaded.base_dir.as_deref())?;
    let params = config.adversary.parameters(protocol.num_parties())?;
    let eval = Arc::new(Evaluator::<f64>::with_budget(protocol.clone(), config.node_budget));
    let built = build_adversary(config, &protocol, &eval, &params)?;
    let mut body = RunBody {
        schema_version: BODY_SCHEMA_VERSION,
        experiment: experiment_echo(config),
        protocol: protocol.name(),
        adversary: built.adversary.name(),
        mode: config.mode,
        parameters: ResolvedParameters::from(&params),
        defaults: Defaults::default(),
        honest_expectation: None,
        attacked_expectation: 0.0,
        expected_corruptions: 0.0,
        full_attack: built.full,
        exact: None,
        monte_carlo: None,
    };
    let mut records = Vec::new();
    match config.mode {
        Mode::Exact => {
            body.honest_expectation = Some(eval.value(&Transcript::new())?);
            let e = exact_attacked_distribution(&eval, built.adversary.as_ref(), &params)?;
            body.attacked_expectation = e.prob_one;
            body.expected_corruptions = e.expected_corruptions;
            body.exact = Some(ExactSummary {
                kl: e.kl_report(&params),
                variance_bound: coinflip_core::analyzer::BoundComparison::new(
                    e.variance.robust,
                    params.variance_bound(),
                ),
                corruption_distribution: e.corruption_distribution,
                corruption_by_round: e.corruption_by_round,
                variance: e.variance,
                joint_nodes: e.joint_nodes,
            });
        }
        Mode::MonteCarlo => {
            body.honest_expectation = match eval.value(&Transcript::new()) {
                Ok(v) => Some(v),
                Err(Error::BudgetExceeded { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            let mc = monte_carlo(
                &eval,
                built.adversary.as_ref(),
                &params,
                McConfig {
                    trials: config.trials.expect("validated"),
                    base_seed: config.seed,
                    workers: config.workers,
                    keep_records: config.output.trials_csv.is_some(),
                },
            )?;
            body.attacked_expectation = mc.report.outcome_frequency;
            body.expected_corruptions = mc.report.mean_corruptions;
            body.monte_carlo = Some(mc.report);
            records = mc.records;
        }
    }
    Ok((body, records))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "unknown".into(), |v| v.to_string())
}

pub fn cmd_run(loaded: &Loaded, out: &mut dyn Write) -> Result<i32, CliError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let (body, records) = execute_run(loaded)?;
    let config = &loaded.config;
    if let Some(path) = &config.output.trials_csv {
        write_csv(path, &records)?;
    }
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    writeln!(out, "protocol: {}", body.protocol).map_err(io)?;
    writeln!(out, "adversary: {}", body.adversary).map_err(io)?;
    writeln!(
        out,
        "mode: {}",
        if body.mode == Mode::Exact {
            "exact"
        } else {
            "monte-carlo"
        }
    )
    .map_err(io)?;
    writeln!(out, "E honest: {}", fmt_opt(body.honest_expectation)).map_err(io)?;
    match &body.monte_carlo {
        Some(mc) => writeln!(
            out,
            "E attacked: {} (± {})",
            body.attacked_expectation, mc.outcome_standard_error
        ),
        None => writeln!(out, "E attacked: {}", body.attacked_expectation),
    }
    .map_err(io)?;
    writeln!(out, "corruptions: {}", body.expected_corruptions).map_err(io)?;
    if let Some(fa) = &body.full_attack {
        writeln!(out, "direction: {}", fa.direction).map_err(io)?;
    }
    if let Some(mc) = &body.monte_carlo {
        for w in &mc.warnings {
            writeln!(out, "warning: {w}").map_err(io)?;
        }
    }
    write_report(config, "run", body, started, clock)?;
    Ok(0)
}

/// Normalization report for the configured protocol.
pub fn execute_normalize(loaded: &Loaded) -> Result<NormalizeBody, CliError> {
    let config = &loaded.config;
    let protocol = config.protocol.build(loaded.base_dir.as_deref())?;
    let params = config.adversary.parameters(protocol.num_parties())?;
    let eval = Arc::new(Evaluator::<Rational>::with_budget(protocol.clone(), config.node_budget));
    let before = validate_normal(&eval, &params, None)?;
    let (normalized, mapping) = normalize(eval, &params)?;
    let ne = Evaluator::<Rational>::with_budget(normalized.clone(), config.node_budget);
    let after = validate_normal(&ne, &params, Some(PartyId(0)))?;
    let same = semantics_difference(protocol.as_ref(), normalized.as_ref(), config.node_budget)?.is_none();
    Ok(NormalizeBody {
        schema_version: BODY_SCHEMA_VERSION,
        experiment: experiment_echo(config),
        protocol: protocol.name(),
        parameters: ResolvedParameters::from(&params),
        defaults: Defaults::default(),
        before,
        after,
        semantics_preserved: same,
        declared_pseudo_parties: mapping.declared_pseudo_parties(),
        reachable_pseudo_parties: mapping
            .reachable_pseudo_parties()
            .iter()
            .map(ToString::to_string)
            .collect(),
        by_party: mapping
            .by_party()
            .into_iter()
            .map(|(p, s)| (p.to_string(), s.iter().map(ToString::to_string).collect()))
            .collect(),
        mapping: mapping
            .assignments
            .iter()
            .map(|(t, p)| (t.to_string(), p.to_string()))
            .collect(),
    })
}

pub fn cmd_normalize(loaded: &Loaded, out: &mut dyn Write) -> Result<i32, CliError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let body = execute_normalize(loaded)?;
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    writeln!(out, "protocol: {}", body.protocol).map_err(io)?;
    for (stage, r) in [("before", &body.before), ("after", &body.after)] {
        for c in &r.conditions {
            let mark = if c.passed { "pass" } else { "FAIL" };
            match &c.witness {
                Some(w) if !c.passed => writeln!(out, "{stage} {}: {mark} (witness {w})", c.condition),
                _ => writeln!(out, "{stage} {}: {mark}", c.condition),
            }
            .map_err(io)?;
        }
    }
    writeln!(out, "semantics preserved: {}", body.semantics_preserved).map_err(io)?;
    writeln!(out, "pseudo-parties reachable: {}", body.reachable_pseudo_parties.len()).map_err(io)?;
    let ok = body.after.all_passed() && body.semantics_preserved;
    write_report(&loaded.config, "normalize", body, started, clock)?;
    Ok(if ok { 0 } else { 1 })
}

pub fn cmd_verify(loaded: &Loaded, out: &mut dyn Write) -> Result<i32, CliError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let report = run_verification(&loaded.config.verify);
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    writeln!(out, "seed: {}", report.seed).map_err(io)?;
    for s in &report.suites {
        let mark = if s.passed() { "pass" } else { "FAIL" };
        writeln!(
            out,
            "{mark} {} ({} instances, {} failures)",
            s.name, s.instances, s.failures
        )
        .map_err(io)?;
        if let Some(f) = &s.first_failure {
            writeln!(out, "  first failure: {f}").map_err(io)?;
        }
    }
    let passed = report.passed();
    let body = VerifyBody {
        schema_version: BODY_SCHEMA_VERSION,
        passed,
        report,
    };
    write_report(&loaded.config, "verify", body, started, clock)?;
    Ok(if passed { 0 } else { 1 })
}
