//! Parallel episode execution with an in-order CSV writer.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eval::abstraction_rate;
use crate::harness::config::ExperimentConfig;
use crate::harness::HarnessError;
use crate::mdp::Mdp;
use crate::search::episode::{play_episode_observed, EpisodeOptions};

pub const SCHEMA_VERSION: u32 = 1;

/// One episode of one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub agent_label: String,
    pub domain: String,
    pub iterations: u64,
    pub episode_index: u64,
    pub seed: u64,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub decision_time_ms_mean: f64,
    pub abstraction_rate_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveRow {
    pub agent_label: String,
    pub iterations: u64,
    pub episode_index: u64,
    pub step: u32,
    pub action: usize,
}

/// Environment randomness depends on the episode only.
pub fn episode_seed(base_seed: u64, episode_index: u64) -> u64 {
    base_seed.wrapping_add(episode_index)
}

/// Search-stream id of an agent label.
pub fn label_stream(label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")) >> 2
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub path: PathBuf,
    pub rows: Vec<ResultRow>,
}

/// Path of the in-progress file for `path`.
pub fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

fn moves_path(path: &Path) -> PathBuf {
    path.with_extension("moves.csv")
}

struct Job {
    agent: usize,
    iterations: u64,
    episode: u64,
}

fn play(cfg: &ExperimentConfig, mdp: &dyn Mdp, job: &Job) -> Result<(ResultRow, Vec<MoveRow>), HarnessError> {
    let agent = &cfg.agents[job.agent];
    let search = cfg.agent_search(job.agent, job.iterations);
    let seed = episode_seed(cfg.base_seed, job.episode);
    let options = EpisodeOptions {
        agent_seat: 0,
        agent_stream: label_stream(&agent.label),
    };
    let (mut rate_sum, mut rate_n) = (0.0, 0usize);
    let mut moves = Vec::new();
    let out = play_episode_observed(mdp, &search, cfg.opponent.as_ref(), seed, options, &mut |step, graph| {
        if cfg.telemetry.abstraction_rate {
            if let Ok(r) = abstraction_rate(graph) {
                rate_sum += r;
                rate_n += 1;
            }
        }
        if cfg.telemetry.per_move_log {
            moves.push(MoveRow {
                agent_label: agent.label.clone(),
                iterations: job.iterations,
                episode_index: job.episode,
                step,
                action: graph.decide().map_or(usize::MAX, |a| a.0),
            });
        }
    })?;
    let row = ResultRow {
        schema_version: SCHEMA_VERSION,
        agent_label: agent.label.clone(),
        domain: cfg.domain.name.clone(),
        iterations: job.iterations,
        episode_index: job.episode,
        seed,
        episode_return: out.total_return,
        decision_time_ms_mean: out.mean_decision_ms(),
        abstraction_rate_mean: (rate_n > 0).then(|| rate_sum / rate_n as f64),
    };
    Ok((row, moves))
}

/// Runs every (agent, budget, episode) once on `threads` workers and writes
/// the rows, in job order, to `out`. Rows stream into `<out>.partial`, which
/// is renamed to `out` only after every episode succeeded.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let mdp = cfg.build_domain()?;
    let jobs: Vec<Job> = cfg
        .runs()
        .into_iter()
        .flat_map(|(agent, iterations)| {
            (0..cfg.episodes).map(move |episode| Job {
                agent,
                iterations,
                episode,
            })
        })
        .collect();
    let partial = partial_path(out);
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(&partial)?));
    let mut move_writer = if cfg.telemetry.per_move_log {
        Some(csv::Writer::from_path(moves_path(out))?)
    } else {
        None
    };

    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let threads = threads.clamp(1, jobs.len().max(1));
    let mut rows = Vec::with_capacity(jobs.len());
    let mut failure: Option<HarnessError> = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, Result<(ResultRow, Vec<MoveRow>), HarnessError>)>();
        for _ in 0..threads {
            let tx = tx.clone();
            let (jobs, next, abort, mdp) = (&jobs, &next, &abort, &mdp);
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                if tx.send((i, play(cfg, mdp.as_ref(), job))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // Collector: buffer out-of-order results, write in job order.
        let mut pending: Vec<Option<(ResultRow, Vec<MoveRow>)>> = (0..jobs.len()).map(|_| None).collect();
        let mut written = 0;
        for (i, result) in rx {
            match result {
                Ok(r) => pending[i] = Some(r),
                Err(e) => {
                    abort.store(true, Ordering::Relaxed);
                    failure.get_or_insert(e);
                    continue;
                }
            }
            while written < jobs.len() {
                let Some((row, moves)) = pending[written].take() else { break };
                let res = writer.serialize(&row).and_then(|_| writer.flush().map_err(csv::Error::from));
                if let Err(e) = res {
                    abort.store(true, Ordering::Relaxed);
                    failure.get_or_insert(e.into());
                }
                if let Some(w) = move_writer.as_mut() {
                    for m in &moves {
                        if let Err(e) = w.serialize(m) {
                            failure.get_or_insert(e.into());
                        }
                    }
                }
                rows.push(row);
                written += 1;
            }
        }
    });
    if let Some(w) = move_writer.as_mut() {
        w.flush()?;
    }
    if let Some(e) = failure {
        return Err(HarnessError::Partial {
            path: partial,
            reason: e.to_string(),
        });
    }
    writer.flush()?;
    drop(writer);
    std::fs::rename(&partial, out)?;
    Ok(RunSummary {
        path: out.to_path_buf(),
        rows,
    })
}

/// Reads a result CSV. `.partial` files are refused.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    if path.extension().is_some_and(|e| e == "partial") {
        return Err(HarnessError::Config(format!("{} is an incomplete result file", path.display())));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for r in reader.deserialize() {
        let row: ResultRow = r?;
        if row.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "{}: schema version {} is not supported",
                path.display(),
                row.schema_version
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}
