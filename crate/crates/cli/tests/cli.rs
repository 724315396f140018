use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use coinflip_cli::config::{ExperimentConfig, ProtocolSource};
use coinflip_cli::{execute_normalize, execute_run, Loaded, Overrides};
use coinflip_core::adversary::{full_attack, AttackMode};
use coinflip_core::analyzer::exact_attacked_distribution;
use coinflip_core::{Evaluator, Protocol};
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn coinflip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coinflip"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn body(path: &Path) -> Value {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["body"].clone()
}

#[test]
fn identity_run_prints_the_honest_summary() {
    let cfg = configs().join("majority3_identity.json");
    let o = coinflip(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("E honest: 0.5"), "{out}");
    assert!(out.contains("E attacked: 0.5"), "{out}");
    assert!(out.contains("corruptions: 0\n"), "{out}");
}

#[test]
fn full_attack_run_matches_the_oracle() {
    let cfg = configs().join("majority3_full_attack.json");
    let loaded = Loaded::from_path(&cfg, &Overrides::default()).unwrap();
    let (body, _) = execute_run(&loaded).unwrap();

    let protocol: Arc<dyn Protocol> = Arc::new(coinflip_core::zoo::majority_single_turn(3).unwrap());
    let params = loaded.config.adversary.parameters(3).unwrap();
    let fa = full_attack(protocol.clone(), &params, None, AttackMode::default()).unwrap();
    let oracle = exact_attacked_distribution(&Evaluator::new(protocol), fa.adversary.as_ref(), &params).unwrap();
    assert_eq!(body.full_attack.as_ref().unwrap().direction, fa.direction);
    assert!((body.attacked_expectation - oracle.prob_one).abs() < 1e-12);
    assert!((body.expected_corruptions - oracle.expected_corruptions).abs() < 1e-12);

    let o = coinflip(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(stdout(&o).contains(&format!("direction: {}", fa.direction)));
}

#[test]
fn missing_trials_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"protocol": {"generator": "majority_single_turn", "n": 3}, "mode": "monte-carlo"}"#,
    );
    let o = coinflip(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`trials`"), "{}", stderr(&o));
    let ok = coinflip(&["run", "--config", cfg.to_str().unwrap(), "--trials", "100"]);
    assert!(ok.status.success(), "{}", stderr(&ok));
}

#[test]
fn bad_fields_are_reported_with_their_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"protocol": {"generator": "majority_single_turn", "n": 3}, "adversary": {"kind": "normal", "lamda": 2}}"#,
    );
    let o = coinflip(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("adversary"), "{}", stderr(&o));
    assert!(stderr(&o).contains("lamda"), "{}", stderr(&o));
}

#[test]
fn exact_budget_error_suggests_monte_carlo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"protocol": {"generator": "majority_many_turn", "n": 3, "k": 5}, "adversary": {"kind": "normal"}, "node_budget": 500}"#,
    );
    let o = coinflip(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("--mode monte-carlo"), "{}", stderr(&o));
}

#[test]
fn normalize_majority_and_constant() {
    for json in [
        r#"{"protocol": {"generator": "majority_single_turn", "n": 3}}"#,
        r#"{"protocol": {"generator": "constant", "value": true, "parties": 2, "rounds": 3}}"#,
    ] {
        let config: ExperimentConfig = ExperimentConfig::from_json(json).unwrap();
        let body = execute_normalize(&Loaded::from_config(config, &Overrides::default()).unwrap()).unwrap();
        assert!(body.after.all_passed(), "{body:?}");
        assert!(body.semantics_preserved);
    }
    let constant = ExperimentConfig::from_json(
        r#"{"protocol": {"generator": "constant", "value": false, "parties": 2, "rounds": 3}}"#,
    )
    .unwrap();
    let body = execute_normalize(&Loaded::from_config(constant, &Overrides::default()).unwrap()).unwrap();
    assert!(body.before.all_passed());
    assert_eq!(body.reachable_pseudo_parties.len(), 2);
}

#[test]
fn normalize_reports_the_two_large_jump_witness() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("n.json");
    let cfg = configs().join("normalize_two_large_jumps.json");
    let o = coinflip(&[
        "normalize",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("before large_jump_party_speaks_once: FAIL"));
    let b = body(&report);
    let c2 = &b["before"]["conditions"][1];
    assert_eq!(c2["passed"], false);
    assert!(c2["witness"].as_str().unwrap().contains("speaks 2 times"));
    assert!(b["after"]["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["passed"] == true));
}

#[test]
fn verify_passes_and_catches_an_injected_fault() {
    assert!(coinflip(&["verify"]).status.success());
    let o = coinflip(&["verify", "--seed", "987654321"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("seed: 987654321"));
    let o = coinflip(&["verify", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL biased_mean_shift"));
}

#[test]
fn config_round_trip_is_canonical() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.contains("schema") || name.contains(".protocol.") {
            continue;
        }
        let parsed = ExperimentConfig::load(&path).unwrap();
        let text = parsed.to_json();
        let again = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(parsed, again, "{name}");
        assert_eq!(text, again.to_json(), "{name}");
    }
    let inline = ExperimentConfig::new(ProtocolSource::File("p.json".into()));
    assert!(inline.to_json().contains("\"file\": \"p.json\""));
}

#[test]
fn monte_carlo_reports_and_csv_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("trials.csv");
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"protocol": {{"generator": "two_round_toy"}}, "adversary": {{"kind": "normal", "lambda": 1.0}},
               "mode": "monte-carlo", "trials": 30000, "seed": 17, "output": {{"trials_csv": {:?}}}}}"#,
            csv_path.to_str().unwrap()
        ),
    );
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = cfg.to_str().unwrap();
    assert!(
        coinflip(&["run", "--config", c, "--workers", "1", "--out", a.to_str().unwrap()])
            .status
            .success()
    );
    let first_csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(
        coinflip(&["run", "--config", c, "--workers", "3", "--out", b.to_str().unwrap()])
            .status
            .success()
    );
    assert_eq!(
        serde_json::to_string(&body(&a)).unwrap(),
        serde_json::to_string(&body(&b)).unwrap()
    );
    assert_eq!(first_csv, std::fs::read_to_string(&csv_path).unwrap());
    let mut lines = first_csv.lines();
    assert_eq!(
        lines.next(),
        Some("trial_index,seed,outcome,corruptions,clamped,nonrobust_hit")
    );
    assert_eq!(lines.next().unwrap().split(',').nth(1), Some("17"));
    assert_eq!(first_csv.lines().count(), 30_001);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(report["metadata"]["workers"], 1);
    assert_eq!(report["body"]["defaults"]["trials"], 100000);
    assert!(report["body"]["experiment"].get("workers").is_none());
}
