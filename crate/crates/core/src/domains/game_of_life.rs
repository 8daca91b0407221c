//! Controlled Game of Life on a bounded grid.
//!
//! Each step the agent sets one cell alive (action `i` = cell `i`, row-major),
//! then the grid advances by one B3/S23 generation and every cell flips
//! independently with probability `noise`. The reward is the number of live
//! cells right after the agent's placement.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::mdp::{check_action, ActionIndex, EnvState, Mdp, MdpDescriptor, MdpError, TransitionEntry};

const MAX_CELLS: u32 = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameOfLifeSpec {
    pub width: u32,
    pub height: u32,
    pub noise: f64,
    /// Row-major initial pattern; empty means a horizontal blinker through
    /// the middle row.
    pub initial: Vec<bool>,
    pub horizon: u32,
}

impl Default for GameOfLifeSpec {
    fn default() -> Self {
        Self {
            width: 3,
            height: 3,
            noise: 0.05,
            initial: Vec::new(),
            horizon: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GameOfLife {
    spec: GameOfLifeSpec,
    initial: Vec<u8>,
    descriptor: MdpDescriptor,
}

impl GameOfLife {
    pub fn new(spec: GameOfLifeSpec) -> Result<Self, MdpError> {
        let cells = spec.width * spec.height;
        if cells == 0 || cells > MAX_CELLS {
            return Err(MdpError::InvalidSpec(format!(
                "game of life supports 1..={MAX_CELLS} cells, got {cells}"
            )));
        }
        if !(0.0..=0.5).contains(&spec.noise) {
            return Err(MdpError::InvalidSpec(format!("noise {} outside [0,0.5]", spec.noise)));
        }
        if spec.horizon == 0 {
            return Err(MdpError::InvalidSpec("horizon must be positive".into()));
        }
        let initial = if spec.initial.is_empty() {
            let mid = spec.height / 2;
            (0..cells).map(|i| (i / spec.width == mid) as u8).collect()
        } else if spec.initial.len() == cells as usize {
            spec.initial.iter().map(|&b| b as u8).collect()
        } else {
            return Err(MdpError::InvalidSpec(format!(
                "initial pattern has {} cells, expected {cells}",
                spec.initial.len()
            )));
        };
        let descriptor = MdpDescriptor::single_player("game_of_life", spec.horizon);
        Ok(Self {
            spec,
            initial,
            descriptor,
        })
    }

    fn cells(&self) -> usize {
        (self.spec.width * self.spec.height) as usize
    }

    fn placed(&self, state: &EnvState, action: ActionIndex) -> Vec<u8> {
        let mut grid = state.payload().to_vec();
        grid[action.0] = 1;
        grid
    }

    /// One B3/S23 generation without wrap-around.
    fn step(&self, grid: &[u8]) -> Vec<u8> {
        let (w, h) = (self.spec.width as i32, self.spec.height as i32);
        (0..grid.len())
            .map(|i| {
                let (x, y) = (i as i32 % w, i as i32 / w);
                let mut live = 0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if (dx, dy) != (0, 0) && (0..w).contains(&nx) && (0..h).contains(&ny) {
                            live += grid[(nx + ny * w) as usize] as u32;
                        }
                    }
                }
                (live == 3 || (grid[i] == 1 && live == 2)) as u8
            })
            .collect()
    }
}

impl Mdp for GameOfLife {
    fn descriptor(&self) -> &MdpDescriptor {
        &self.descriptor
    }

    fn initial_state(&self) -> EnvState {
        EnvState::new(&self.initial, 0, false)
    }

    fn num_actions(&self, _state: &EnvState) -> usize {
        self.cells()
    }

    fn reward(&self, state: &EnvState, action: ActionIndex) -> Result<f64, MdpError> {
        check_action(self, state, action)?;
        Ok(self.placed(state, action).iter().map(|&b| b as f64).sum())
    }

    fn enumerate_transitions(
        &self,
        state: &EnvState,
        action: ActionIndex,
    ) -> Result<Vec<TransitionEntry>, MdpError> {
        check_action(self, state, action)?;
        let next = self.step(&self.placed(state, action));
        let noise = self.spec.noise;
        if noise == 0.0 {
            return Ok(vec![TransitionEntry::new(EnvState::new(&next, 0, false), 1.0)]);
        }
        let n = next.len();
        let entries = (0u32..1 << n)
            .map(|mask| {
                let flips = mask.count_ones() as i32;
                let p = noise.powi(flips) * (1.0 - noise).powi(n as i32 - flips);
                let grid: Vec<u8> = next
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| b ^ ((mask >> i) & 1) as u8)
                    .collect();
                TransitionEntry::new(EnvState::new(&grid, 0, false), p)
            })
            .collect();
        Ok(entries)
    }

    fn sample_transition(
        &self,
        state: &EnvState,
        action: ActionIndex,
        rng: &mut dyn RngCore,
    ) -> Result<(EnvState, f64), MdpError> {
        let reward = self.reward(state, action)?;
        let mut next = self.step(&self.placed(state, action));
        if self.spec.noise > 0.0 {
            for b in next.iter_mut() {
                if rng.gen::<f64>() < self.spec.noise {
                    *b ^= 1;
                }
            }
        }
        Ok((EnvState::new(&next, 0, false), reward))
    }
}
