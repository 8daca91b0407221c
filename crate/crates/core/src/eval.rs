//! Cross-task agent rankings, abstraction rates and confidence intervals.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search::graph::SearchGraph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("need at least 2 tasks, got {0}")]
    TooFewTasks(usize),
    #[error("need at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("graph has no eligible state groups")]
    NoEligibleGroups,
    #[error("performance matrix is {rows}x? with a row of length {len}, expected {cols}")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("non-finite performance for agent {agent}, task {task}")]
    NonFinite { agent: usize, task: usize },
}

/// Mean return of every agent on every task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfMatrix {
    pub agents: Vec<String>,
    pub tasks: Vec<String>,
    /// `perf[i][k]`: agent `i` on task `k`.
    pub perf: Vec<Vec<f64>>,
}

impl PerfMatrix {
    pub fn new(agents: Vec<String>, tasks: Vec<String>, perf: Vec<Vec<f64>>) -> Result<Self, EvalError> {
        let m = Self { agents, tasks, perf };
        m.validate()?;
        Ok(m)
    }

    /// Unlabelled matrix, handy for tests.
    pub fn from_rows(perf: Vec<Vec<f64>>) -> Result<Self, EvalError> {
        let tasks = perf.first().map_or(0, Vec::len);
        Self::new(
            (0..perf.len()).map(|i| format!("agent{i}")).collect(),
            (0..tasks).map(|k| format!("task{k}")).collect(),
            perf,
        )
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let cols = self.tasks.len();
        if self.perf.len() != self.agents.len() {
            return Err(EvalError::Shape {
                rows: self.agents.len(),
                cols,
                len: self.perf.len(),
            });
        }
        for (i, row) in self.perf.iter().enumerate() {
            if row.len() != cols {
                return Err(EvalError::Shape {
                    rows: self.agents.len(),
                    cols,
                    len: row.len(),
                });
            }
            if let Some(k) = row.iter().position(|p| !p.is_finite()) {
                return Err(EvalError::NonFinite { agent: i, task: k });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Pairings,
    Relative,
}

impl std::str::FromStr for ScoreKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pairings" => Ok(Self::Pairings),
            "relative" => Ok(Self::Relative),
            other => Err(format!("unknown score kind `{other}` (pairings | relative)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub kind: ScoreKind,
    pub agents: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

impl ScoreReport {
    /// Matrix as CSV: header `agent,<agents...>`, one row per agent.
    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["agent".to_string()];
        header.extend(self.agents.iter().cloned());
        w.write_record(&header)?;
        for (agent, row) in self.agents.iter().zip(&self.matrix) {
            let mut rec = vec![agent.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Scores as a JSON object in agent order.
    pub fn to_json(&self) -> serde_json::Value {
        let scores: serde_json::Map<String, serde_json::Value> = self
            .agents
            .iter()
            .zip(&self.scores)
            .map(|(a, s)| (a.clone(), serde_json::json!(s)))
            .collect();
        serde_json::json!({ "kind": self.kind, "agents": self.agents, "scores": scores })
    }
}

fn report(perf: &PerfMatrix, kind: ScoreKind, term: impl Fn(f64, f64) -> f64) -> Result<ScoreReport, EvalError> {
    perf.validate()?;
    let n = perf.agents.len();
    let m = perf.tasks.len();
    if m < 2 {
        return Err(EvalError::TooFewTasks(m));
    }
    if n < 2 {
        return Err(EvalError::TooFewAgents(n));
    }
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..i {
            let sum: f64 = (0..m).map(|k| term(perf.perf[i][k], perf.perf[j][k])).sum();
            let v = sum / (m - 1) as f64;
            matrix[i][j] = v;
            matrix[j][i] = -v;
        }
    }
    let scores = matrix.iter().map(|row| row.iter().sum::<f64>() / (n - 1) as f64).collect();
    Ok(ScoreReport {
        kind,
        agents: perf.agents.clone(),
        matrix,
        scores,
    })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `M[i][j] = sum_k sgn(p[i][k] - p[j][k]) / (m - 1)`, scores are row sums
/// over `n - 1`.
pub fn pairings_scores(perf: &PerfMatrix) -> Result<ScoreReport, EvalError> {
    report(perf, ScoreKind::Pairings, |a, b| sign(a - b))
}

/// Like [`pairings_scores`] with terms `(a - b) / max(|a|, |b|)`, zero when
/// both are zero.
pub fn relative_improvement_scores(perf: &PerfMatrix) -> Result<ScoreReport, EvalError> {
    report(perf, ScoreKind::Relative, |a, b| {
        let den = a.abs().max(b.abs());
        if den == 0.0 {
            0.0
        } else {
            (a - b) / den
        }
    })
}

pub fn scores(perf: &PerfMatrix, kind: ScoreKind) -> Result<ScoreReport, EvalError> {
    match kind {
        ScoreKind::Pairings => pairings_scores(perf),
        ScoreKind::Relative => relative_improvement_scores(perf),
    }
}

/// Share of singleton state groups among the non-trivial ones. The leaf
/// groups and singletons whose member never went through a state
/// abstraction update are trivial.
pub fn abstraction_rate(graph: &SearchGraph) -> Result<f64, EvalError> {
    let (mut singletons, mut eligible) = (0usize, 0usize);
    for (_, g) in graph.state_groups().iter() {
        if g.is_leaf_group {
            continue;
        }
        if g.size() == 1 {
            let member = graph.state(crate::search::StateId(g.members[0]));
            if !member.was_updated() {
                continue;
            }
            singletons += 1;
        }
        eligible += 1;
    }
    if eligible == 0 {
        return Err(EvalError::NoEligibleGroups);
    }
    Ok(singletons as f64 / eligible as f64)
}

/// Number of standard errors of the 99% one-sided convention.
pub const CI_Z: f64 = 2.33;

/// Mean and `2.33 * sample std / sqrt(n)`.
pub fn confidence_interval(samples: &[f64]) -> Result<(f64, f64), EvalError> {
    let n = samples.len();
    if n < 2 {
        return Err(EvalError::TooFewSamples(n));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, CI_Z * var.sqrt() / (n as f64).sqrt()))
}
