//! Experiment configuration (TOML). Unknown keys are errors.
//!
//! ```toml
//! episodes = 100
//! base_seed = 7
//! iteration_budgets = [100, 500]   # optional, overrides agent iterations
//!
//! [domain]
//! name = "navigation_fig2"
//! params = {}
//!
//! [[agents]]
//! label = "oga"
//! [agents.search]
//! iterations = 500
//! abstraction = { variant = "oga" }
//!
//! [opponent]                        # two-player domains only
//! iterations = 500
//!
//! [telemetry]
//! abstraction_rate = true
//! ```

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domains::build_domain;
use crate::harness::HarnessError;
use crate::mdp::Mdp;
use crate::search::SearchConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub name: String,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub label: String,
    pub search: SearchConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Telemetry {
    pub abstraction_rate: bool,
    pub runtime: bool,
    pub per_move_log: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub agents: Vec<AgentConfig>,
    pub episodes: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub iteration_budgets: Option<Vec<u64>>,
    #[serde(default)]
    pub opponent: Option<SearchConfig>,
    #[serde(default)]
    pub telemetry: Telemetry,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn build_domain(&self) -> Result<Arc<dyn Mdp>, HarnessError> {
        build_domain(&self.domain.name, &self.domain.params)
            .map_err(|e| HarnessError::Config(format!("domain: {e}")))
    }

    /// `(agent index, iterations)` of every task column, budgets outermost.
    pub fn runs(&self) -> Vec<(usize, u64)> {
        match &self.iteration_budgets {
            Some(budgets) => budgets
                .iter()
                .flat_map(|&b| (0..self.agents.len()).map(move |a| (a, b)))
                .collect(),
            None => self.agents.iter().enumerate().map(|(a, c)| (a, c.search.iterations)).collect(),
        }
    }

    /// Agent config with the run's iteration budget applied.
    pub fn agent_search(&self, agent: usize, iterations: u64) -> SearchConfig {
        SearchConfig {
            iterations,
            ..self.agents[agent].search.clone()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |field: String, msg: String| Err(HarnessError::Config(format!("{field}: {msg}")));
        if self.episodes == 0 {
            return bad("episodes".into(), "must be at least 1".into());
        }
        if self.agents.is_empty() {
            return bad("agents".into(), "at least one agent is required".into());
        }
        let mut labels = HashSet::new();
        for (i, a) in self.agents.iter().enumerate() {
            if a.label.is_empty() || a.label.contains(',') {
                return bad(format!("agents[{i}].label"), "must be non-empty and comma-free".into());
            }
            if !labels.insert(a.label.as_str()) {
                return bad(format!("agents[{i}].label"), format!("duplicate label `{}`", a.label));
            }
            if let Err(e) = a.search.validate() {
                return bad(format!("agents[{i}].search"), e.to_string());
            }
        }
        if let Some(budgets) = &self.iteration_budgets {
            if budgets.is_empty() || budgets.contains(&0) {
                return bad("iteration_budgets".into(), "must be non-empty and positive".into());
            }
        }
        if let Some(o) = &self.opponent {
            if let Err(e) = o.validate() {
                return bad("opponent".into(), e.to_string());
            }
        }
        let mdp = self.build_domain()?;
        let players = mdp.descriptor().num_players;
        if (players == 2) != self.opponent.is_some() {
            return bad(
                "opponent".into(),
                format!("required exactly for two-player domains; `{}` has {players} player(s)", self.domain.name),
            );
        }
        Ok(())
    }
}
