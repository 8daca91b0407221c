//! Episode play: a fresh search per decision, no tree reuse.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mdp::{ActionIndex, Mdp};
use crate::search::graph::SearchGraph;
use crate::search::{search, SearchConfig, SearchError};

/// Stream id of the environment RNG; search streams start above it.
const ENV_STREAM: u64 = 0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EpisodeOptions {
    /// Seat (player index) of the evaluated agent in two-player games.
    pub agent_seat: u8,
    /// Stream id of the agent's search RNG, so differently labelled agents
    /// draw independent search randomness while sharing the environment
    /// stream.
    pub agent_stream: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeOutcome {
    /// Return from the evaluated agent's perspective.
    pub total_return: f64,
    pub steps: u32,
    /// Actions taken by the evaluated agent.
    pub agent_actions: Vec<ActionIndex>,
    /// Wall-clock time of each agent decision (search plus final choice).
    pub decision_times: Vec<Duration>,
}

impl EpisodeOutcome {
    pub fn mean_decision_ms(&self) -> f64 {
        if self.decision_times.is_empty() {
            return 0.0;
        }
        let total: f64 = self.decision_times.iter().map(|d| d.as_secs_f64() * 1e3).sum();
        total / self.decision_times.len() as f64
    }
}

/// Plays one episode. `opponent` must be present exactly for two-player
/// domains.
pub fn play_episode(
    mdp: &dyn Mdp,
    agent: &SearchConfig,
    opponent: Option<&SearchConfig>,
    seed: u64,
    options: EpisodeOptions,
) -> Result<EpisodeOutcome, SearchError> {
    play_episode_observed(mdp, agent, opponent, seed, options, &mut |_, _| {})
}

/// Like [`play_episode`], calling `observe` with the step index and the
/// agent's search graph after every agent decision. Observation time is not
/// counted in the decision times.
pub fn play_episode_observed(
    mdp: &dyn Mdp,
    agent: &SearchConfig,
    opponent: Option<&SearchConfig>,
    seed: u64,
    options: EpisodeOptions,
    observe: &mut dyn FnMut(u32, &SearchGraph),
) -> Result<EpisodeOutcome, SearchError> {
    let desc = mdp.descriptor();
    if (desc.num_players == 2) != opponent.is_some() {
        return Err(SearchError::InvalidConfig(format!(
            "{} has {} player(s); an opponent is required exactly for two players",
            desc.domain_name, desc.num_players
        )));
    }
    if options.agent_seat as usize >= desc.num_players as usize {
        return Err(SearchError::InvalidConfig(format!("agent seat {} out of range", options.agent_seat)));
    }
    agent.validate()?;
    if let Some(o) = opponent {
        o.validate()?;
    }

    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    env_rng.set_stream(ENV_STREAM);
    let mut agent_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(agent.rng_seed));
    agent_rng.set_stream(1 + options.agent_stream);
    let mut opponent_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(opponent.map_or(0, |o| o.rng_seed)));
    opponent_rng.set_stream(u64::MAX - options.agent_stream);

    let mut out = EpisodeOutcome::default();
    let mut state = mdp.initial_state();
    let mut total = 0.0;
    for step in 0..desc.horizon {
        if state.is_terminal() {
            break;
        }
        let remaining = desc.horizon - step;
        let action = if state.player_to_move() == options.agent_seat {
            let start = Instant::now();
            let graph = search(mdp, &state, remaining, agent, &mut agent_rng)?;
            let a = graph.decide()?;
            out.decision_times.push(start.elapsed());
            out.agent_actions.push(a);
            observe(step, &graph);
            a
        } else {
            let o = opponent.expect("opponent checked above");
            search(mdp, &state, remaining, o, &mut opponent_rng)?.decide()?
        };
        let (next, r) = mdp.sample_transition(&state, action, &mut env_rng)?;
        total += r;
        state = next;
        out.steps += 1;
    }
    out.total_return = if options.agent_seat == 0 { total } else { -total };
    Ok(out)
}
