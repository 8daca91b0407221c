//! Batch experiments: config parsing, seeded parallel episode runs, result
//! files, score reports, runtime measurement and the abstraction-rate study.

pub mod config;
pub mod runner;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::{abstraction_rate, scores, EvalError, PerfMatrix, ScoreKind, ScoreReport};
use crate::mdp::{Mdp, MdpError};
use crate::search::episode::{play_episode, play_episode_observed, EpisodeOptions};
use crate::search::{search, SearchConfig, SearchError};

pub use config::{AgentConfig, DomainConfig, ExperimentConfig, Telemetry};
pub use runner::{episode_seed, label_stream, partial_path, read_results, run_experiment, ResultRow, RunSummary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("partial results left in {path}: {reason}")]
    Partial { path: PathBuf, reason: String },
    #[error("result files do not share one task grid: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit code: 2 for config problems, 3 for partial results, 1
    /// otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Partial { .. } => 3,
            _ => 1,
        }
    }
}

/// Builds the agents x tasks matrix of mean returns, a task being one
/// (domain, iterations) pair, and scores it.
pub fn score_results(paths: &[PathBuf], kind: ScoreKind) -> Result<ScoreReport, HarnessError> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_results(p)?);
    }
    score_rows(&rows, kind)
}

pub fn perf_matrix(rows: &[ResultRow]) -> Result<PerfMatrix, HarnessError> {
    let mut agents: Vec<String> = Vec::new();
    for r in rows {
        if !agents.contains(&r.agent_label) {
            agents.push(r.agent_label.clone());
        }
    }
    let tasks: BTreeSet<(String, u64)> = rows.iter().map(|r| (r.domain.clone(), r.iterations)).collect();
    let tasks: Vec<(String, u64)> = tasks.into_iter().collect();
    let mut sums = vec![vec![(0.0, 0u64); tasks.len()]; agents.len()];
    for r in rows {
        let i = agents.iter().position(|a| *a == r.agent_label).expect("collected above");
        let k = tasks.binary_search(&(r.domain.clone(), r.iterations)).expect("collected above");
        sums[i][k].0 += r.episode_return;
        sums[i][k].1 += 1;
    }
    let mut perf = Vec::with_capacity(agents.len());
    for (i, row) in sums.iter().enumerate() {
        let mut out = Vec::with_capacity(tasks.len());
        for (k, &(sum, n)) in row.iter().enumerate() {
            if n == 0 {
                return Err(HarnessError::GridMismatch(format!(
                    "agent `{}` has no results for {} at {} iterations",
                    agents[i], tasks[k].0, tasks[k].1
                )));
            }
            out.push(sum / n as f64);
        }
        perf.push(out);
    }
    let labels = tasks.iter().map(|(d, n)| format!("{d}@{n}")).collect();
    Ok(PerfMatrix::new(agents, labels, perf)?)
}

pub fn score_rows(rows: &[ResultRow], kind: ScoreKind) -> Result<ScoreReport, HarnessError> {
    Ok(scores(&perf_matrix(rows)?, kind)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuntimeReport {
    pub agent_label: String,
    pub iterations: u64,
    pub decisions: usize,
    pub mean_decision_ms: f64,
}

/// Mean wall-clock time per decision of every (agent, budget), measured on
/// the current thread over the agent's own trajectories.
pub fn measure_runtime(cfg: &ExperimentConfig) -> Result<Vec<RuntimeReport>, HarnessError> {
    cfg.validate()?;
    let mdp = cfg.build_domain()?;
    let mut out = Vec::new();
    for (agent, iterations) in cfg.runs() {
        let label = &cfg.agents[agent].label;
        let search = cfg.agent_search(agent, iterations);
        let (mut total, mut n) = (0.0, 0usize);
        for e in 0..cfg.episodes {
            let options = EpisodeOptions {
                agent_seat: 0,
                agent_stream: label_stream(label),
            };
            let ep = play_episode(mdp.as_ref(), &search, cfg.opponent.as_ref(), episode_seed(cfg.base_seed, e), options)?;
            total += ep.decision_times.iter().map(|d| d.as_secs_f64() * 1e3).sum::<f64>();
            n += ep.decision_times.len();
        }
        out.push(RuntimeReport {
            agent_label: label.clone(),
            iterations,
            decisions: n,
            mean_decision_ms: if n == 0 { 0.0 } else { total / n as f64 },
        });
    }
    Ok(out)
}

/// Abstraction rates of `probes` on the states visited by `driver`.
///
/// Every episode is played by `driver`. At each of its decisions, every
/// probe runs its own search from the same state and the abstraction rate
/// of the probe's graph is recorded. Rates are averaged per episode, then
/// over episodes. A probe whose graph has no eligible group at some state
/// contributes nothing there.
pub fn abstraction_rate_study(
    mdp: &dyn Mdp,
    driver: &SearchConfig,
    probes: &[SearchConfig],
    episodes: u64,
    base_seed: u64,
) -> Result<Vec<f64>, HarnessError> {
    let mut totals = vec![(0.0, 0usize); probes.len()];
    for e in 0..episodes {
        let seed = episode_seed(base_seed, e);
        let mut per_episode = vec![(0.0, 0usize); probes.len()];
        let mut failure = None;
        let horizon = mdp.descriptor().horizon;
        play_episode_observed(mdp, driver, None, seed, EpisodeOptions::default(), &mut |step, graph| {
            let state = graph.state(graph.root()).state().clone();
            for (p, probe) in probes.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1000 + step as u64);
                match search(mdp, &state, horizon - step, probe, &mut rng) {
                    Ok(g) => {
                        if let Ok(r) = abstraction_rate(&g) {
                            per_episode[p].0 += r;
                            per_episode[p].1 += 1;
                        }
                    }
                    Err(err) => {
                        failure.get_or_insert(err);
                    }
                }
            }
        })?;
        if let Some(err) = failure {
            return Err(err.into());
        }
        for (t, (sum, n)) in totals.iter_mut().zip(per_episode) {
            if n > 0 {
                t.0 += sum / n as f64;
                t.1 += 1;
            }
        }
    }
    Ok(totals.into_iter().map(|(s, n)| if n == 0 { f64::NAN } else { s / n as f64 }).collect())
}
