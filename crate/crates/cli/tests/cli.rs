//! End-to-end runs of the `counterfact` binary with small sampler budgets.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY_FIT: [&str; 10] = ["--chains", "2", "--init-steps", "4", "--tune", "6", "--draws", "6", "--seed", "5"];

fn counterfact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_counterfact"))
        .args(args)
        .env_remove("COUNTERFACT_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn synth(dir: &Path) {
    let out = counterfact(&["synth", "--preset", "desk", "--seed", "2", "--out", s(dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

/// synth -> fit -> evaluate -> report into `run` from the dataset in `data`.
fn pipeline(data: &Path, run: &Path) {
    let mut fit = vec!["fit", "--data", s(data), "--out", s(run)];
    fit.extend(TINY_FIT);
    let out = counterfact(&fit);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("recovery:"));
    let out = counterfact(&[
        "evaluate", "--out", s(run), "--scenario", "strategies", "--scenario", "uptake", "--doses", "20000",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = counterfact(&["report", "--out", s(run)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn full_pipeline_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&data, &a);
    pipeline(&data, &b);
    for file in [
        "posterior.jsonl",
        "summary.json",
        "predictive.csv",
        "r_base.csv",
        "scenario_strategies.csv",
        "scenario_strategies_weekly.csv",
        "scenario_uptake_impact.csv",
        "scenario_strategies_severe.svg",
        "report.md",
    ] {
        let (x, y) = (fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
        assert!(!x.is_empty(), "{file} is empty");
        assert!(x == y, "{file} differs between identical runs");
    }
    let report = fs::read_to_string(a.join("report.md")).unwrap();
    for section in ["## Configuration", "## Posterior", "## Scenarios: strategies", "## Scenarios: uptake", "ElderlyFirst"] {
        assert!(report.contains(section), "report lacks {section}");
    }
    // Every figure has a table next to it.
    for svg in fs::read_dir(&a).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "svg")) {
        let stem = svg.file_stem().unwrap().to_str().unwrap();
        let table = stem
            .trim_end_matches("_severe")
            .trim_end_matches("_infections");
        assert!(a.join(format!("{table}.csv")).exists(), "no table for {}", svg.display());
    }
    let impact = fs::read_to_string(a.join("scenario_uptake_impact.csv")).unwrap();
    assert_eq!(impact.lines().count(), 1 + 2 * 2, "header plus two metrics per age group");
}

#[test]
fn mixing_outside_unit_interval_is_a_config_error() {
    let out = counterfact(&["fit", "--mixing", "1.5", "--data", "nowhere", "--out", "nowhere"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("outside [0, 1]"));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let out = counterfact(&["ingest", "--data", s(&tmp.path().join("absent")), "--out", s(tmp.path())]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn ingest_writes_factual_strategy_and_factors() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let out_dir = tmp.path().join("ingest");
    let out = counterfact(&["ingest", "--data", s(&data), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for file in ["factual_strategy.csv", "factual_strategy.json", "severity.json", "ingest.json"] {
        assert!(out_dir.join(file).exists(), "{file} missing");
    }
}

#[test]
fn report_and_evaluate_need_earlier_steps() {
    let tmp = TempDir::new().unwrap();
    let out = counterfact(&["evaluate", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("counterfact fit"));

    let data = tmp.path().join("data");
    synth(&data);
    let run = tmp.path().join("run");
    let mut fit = vec!["fit", "--data", s(&data), "--out", s(&run)];
    fit.extend(TINY_FIT);
    assert_eq!(code(&counterfact(&fit)), 0);
    let out = counterfact(&["report", "--out", s(&run)]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("counterfact evaluate"), "{}", stderr(&out));

    let out = counterfact(&["evaluate", "--out", s(&run), "--mixing", "0.7"]);
    assert_eq!(code(&out), 2, "mixing differs from the fit");
    let out = counterfact(&["evaluate", "--out", s(&run), "--scenario", "bogus"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_drives_fit_and_unknown_keys_fail() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let run = tmp.path().join("run");
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "data = {:?}\nout = {:?}\nseed = 4\nmixing = 0.9\n[sampler]\nchains = 2\ninit_steps = 3\ntune = 4\ndraws = 5\n",
            s(&data),
            s(&run)
        ),
    )
    .unwrap();
    let out = counterfact(&["--config", s(&config), "fit"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("fit.json")).unwrap()).unwrap();
    assert_eq!(manifest["mixing"], 0.9);
    assert_eq!(manifest["sampler"]["draws"], 5);
    assert_eq!(fs::read_to_string(run.join("posterior.jsonl")).unwrap().lines().count(), 2 * 5);

    fs::write(&config, "chainz = 2\n").unwrap();
    assert_eq!(code(&counterfact(&["--config", s(&config), "fit"])), 2);
}

#[test]
fn thread_cap_must_be_positive() {
    let out = Command::new(env!("CARGO_BIN_EXE_counterfact"))
        .args(["report", "--out", "nowhere"])
        .env("COUNTERFACT_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn help_documents_every_subcommand() {
    let out = counterfact(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["ingest", "synth", "fit", "evaluate", "report"] {
        assert!(text.contains(cmd), "help lacks {cmd}");
    }
    let fit = String::from_utf8_lossy(&counterfact(&["fit", "--help"]).stdout).into_owned();
    for flag in ["--chains", "--init-steps", "--tune", "--draws", "--seed", "--mixing", "--anchor-day"] {
        assert!(fit.contains(flag), "fit help lacks {flag}");
    }
}
