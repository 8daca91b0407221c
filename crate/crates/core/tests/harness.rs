use std::path::{Path, PathBuf};

use mcts_lab::eval::{EvalError, ScoreKind};
use mcts_lab::harness::{
    abstraction_rate_study, measure_runtime, partial_path, read_results, run_experiment, score_results, ExperimentConfig,
    HarnessError,
};
use mcts_lab::abstraction::AbstractionPolicy;
use mcts_lab::domains::Navigation;
use mcts_lab::search::SearchConfig;

const TWO_AGENTS: &str = r#"
episodes = 2
base_seed = 40
[domain]
name = "navigation_fig2"
[[agents]]
label = "oga"
[agents.search]
iterations = 60
abstraction = { variant = "oga" }
[[agents]]
label = "ipa"
[agents.search]
iterations = 60
abstraction = { variant = "ipa", lambda_p = 1.0 }
[telemetry]
abstraction_rate = true
per_move_log = true
"#;

fn run_to(cfg: &ExperimentConfig, dir: &Path, name: &str, threads: usize) -> PathBuf {
    let out = dir.join(name);
    run_experiment(cfg, &out, threads).unwrap();
    out
}

/// Result file with the timing column blanked out.
fn without_timing(path: &Path) -> String {
    let mut r = csv::Reader::from_path(path).unwrap();
    let col = r.headers().unwrap().iter().position(|h| h == "decision_time_ms_mean").unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            rec.iter().enumerate().filter(|(i, _)| *i != col).map(|(_, f)| f).collect::<Vec<_>>().join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn writes_one_row_per_agent_and_episode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(TWO_AGENTS).unwrap();
    let out = run_to(&cfg, dir.path(), "r.csv", 2);
    let rows = read_results(&out).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.seed, 40 + r.episode_index);
        assert!(r.episode_return.is_finite());
        assert!(r.abstraction_rate_mean.is_some_and(|a| (0.0..=1.0).contains(&a)));
        assert_eq!(r.domain, "navigation_fig2");
    }
    let header = std::fs::read_to_string(&out).unwrap();
    assert!(header.starts_with(
        "schema_version,agent_label,domain,iterations,episode_index,seed,return,decision_time_ms_mean,abstraction_rate_mean\n"
    ));
    assert!(!partial_path(&out).exists());
    assert!(out.with_extension("moves.csv").exists());
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(TWO_AGENTS).unwrap();
    let a = run_to(&cfg, dir.path(), "a.csv", 1);
    let b = run_to(&cfg, dir.path(), "b.csv", 3);
    let c = run_to(&cfg, dir.path(), "c.csv", 3);
    assert_eq!(without_timing(&a), without_timing(&b));
    assert_eq!(without_timing(&b), without_timing(&c));
}

#[test]
fn budgets_multiply_the_task_grid() {
    let dir = tempfile::tempdir().unwrap();
    let text = TWO_AGENTS.replace("base_seed = 40", "base_seed = 40\niteration_budgets = [20, 40]");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let out = run_to(&cfg, dir.path(), "grid.csv", 2);
    let rows = read_results(&out).unwrap();
    assert_eq!(rows.len(), 8);
    let report = score_results(&[out], ScoreKind::Pairings).unwrap();
    assert_eq!(report.agents, vec!["oga", "ipa"]);
    assert!((report.scores[0] + report.scores[1]).abs() < 1e-12);
}

#[test]
fn mismatched_grids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let first = ExperimentConfig::from_toml(&TWO_AGENTS.replace("base_seed = 40", "base_seed = 40\niteration_budgets = [20, 40]")).unwrap();
    let a = run_to(&first, dir.path(), "a.csv", 1);
    let third = TWO_AGENTS
        .replace("base_seed = 40", "base_seed = 40\niteration_budgets = [20]")
        .replace("label = \"oga\"", "label = \"uct\"")
        .replace("label = \"ipa\"", "label = \"other\"");
    let b = run_to(&ExperimentConfig::from_toml(&third).unwrap(), dir.path(), "b.csv", 1);
    let err = score_results(&[a, b], ScoreKind::Pairings).unwrap_err();
    assert!(matches!(err, HarnessError::GridMismatch(_)), "{err}");
}

#[test]
fn a_single_agent_cannot_be_scored() {
    let dir = tempfile::tempdir().unwrap();
    let text = TWO_AGENTS.replace("base_seed = 40", "base_seed = 40\niteration_budgets = [20, 40]");
    let one = text.split("[[agents]]").take(2).collect::<Vec<_>>().join("[[agents]]")
        + "[telemetry]\nabstraction_rate = true\n";
    let cfg = ExperimentConfig::from_toml(&one).unwrap();
    assert_eq!(cfg.agents.len(), 1);
    let out = run_to(&cfg, dir.path(), "one.csv", 1);
    let err = score_results(&[out], ScoreKind::Relative).unwrap_err();
    assert!(matches!(err, HarnessError::Eval(EvalError::TooFewAgents(1))), "{err}");
}

#[test]
fn permuting_agents_permutes_scores() {
    let dir = tempfile::tempdir().unwrap();
    let base = TWO_AGENTS.replace("base_seed = 40", "base_seed = 40\niteration_budgets = [20, 40]");
    let (head, rest) = base.split_once("[[agents]]").unwrap();
    let agents: Vec<&str> = rest.split("[telemetry]").next().unwrap().split("[[agents]]").collect();
    let swapped = format!("{head}[[agents]]{}[[agents]]{}[telemetry]\n", agents[1], agents[0]);
    let a = run_to(&ExperimentConfig::from_toml(&base).unwrap(), dir.path(), "a.csv", 1);
    let b = run_to(&ExperimentConfig::from_toml(&swapped).unwrap(), dir.path(), "b.csv", 1);
    for kind in [ScoreKind::Pairings, ScoreKind::Relative] {
        let ra = score_results(&[a.clone()], kind).unwrap();
        let rb = score_results(&[b.clone()], kind).unwrap();
        assert_eq!(rb.agents, vec!["ipa", "oga"]);
        assert_eq!(ra.scores[0], rb.scores[1]);
        assert_eq!(ra.scores[1], rb.scores[0]);
    }
}

#[test]
fn partial_files_are_never_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(TWO_AGENTS).unwrap();
    let out = run_to(&cfg, dir.path(), "r.csv", 1);
    let partial = partial_path(&out);
    std::fs::copy(&out, &partial).unwrap();
    assert!(read_results(&partial).is_err());
    assert!(score_results(&[partial], ScoreKind::Pairings).is_err());
    let err = HarnessError::Partial {
        path: out,
        reason: "interrupted".into(),
    };
    assert_eq!(err.exit_code(), 3);
    assert_eq!(HarnessError::Config("x".into()).exit_code(), 2);
}

#[test]
fn config_errors_name_the_field() {
    let zero = TWO_AGENTS.replacen("iterations = 60", "iterations = 0", 1);
    let err = ExperimentConfig::from_toml(&zero).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("agents[0].search"), "{err}");
    let typo = TWO_AGENTS.replace("lambda_p", "lamda_p");
    let err = ExperimentConfig::from_toml(&typo).unwrap_err().to_string();
    assert!(err.contains("line 15") && err.contains("lamda_p"), "{err}");
    let episodes = TWO_AGENTS.replace("episodes = 2", "episodes = 0");
    assert!(ExperimentConfig::from_toml(&episodes).unwrap_err().to_string().contains("episodes"));
}

#[test]
fn more_iterations_take_longer() {
    let text = TWO_AGENTS
        .replace("episodes = 2", "episodes = 3")
        .replace("base_seed = 40", "base_seed = 40\niteration_budgets = [100, 2000]");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let reports = measure_runtime(&cfg).unwrap();
    assert_eq!(reports.len(), 4);
    for agent in ["oga", "ipa"] {
        let t: Vec<f64> = reports.iter().filter(|r| r.agent_label == agent).map(|r| r.mean_decision_ms).collect();
        assert!(t[1] > t[0], "{agent}: {t:?}");
    }
}

#[test]
fn abstraction_rate_study_reports_each_probe() {
    let nav = Navigation::fig2();
    let driver = SearchConfig::new(100, AbstractionPolicy::oga());
    let probes = [driver.clone(), SearchConfig::new(100, AbstractionPolicy::ipa(0.0))];
    let rates = abstraction_rate_study(&nav, &driver, &probes, 3, 0).unwrap();
    assert_eq!(rates.len(), 2);
    assert!(rates.iter().all(|r| (0.0..=1.0).contains(r)));
}
