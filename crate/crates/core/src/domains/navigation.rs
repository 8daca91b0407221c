//! Grid navigation with reset cells.
//!
//! Cells are numbered `x + 1 + width * y` (1-based, row 0 at the bottom).
//! Actions, in canonical order: up (+y), down (-y), left (-x), right (+x).
//! A move off the grid keeps the agent in place without a reset check. After
//! a move onto cell `c` the agent is teleported to the start cell with
//! probability `reset_prob(c)`. Every step costs -1, including the step that
//! enters the goal; the goal is terminal.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::mdp::{check_action, ActionIndex, EnvState, Mdp, MdpDescriptor, MdpError, TransitionEntry};

pub const UP: ActionIndex = ActionIndex(0);
pub const DOWN: ActionIndex = ActionIndex(1);
pub const LEFT: ActionIndex = ActionIndex(2);
pub const RIGHT: ActionIndex = ActionIndex(3);

const MOVES: [(i32, i32); 4] = [(0, 1), (0, -1), (-1, 0), (1, 0)];
const ACTION_NAMES: [&str; 4] = ["up", "down", "left", "right"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavigationSpec {
    pub width: u32,
    pub height: u32,
    /// Row-major by cell number: entry `i` belongs to cell `i + 1`.
    pub reset_prob: Vec<f64>,
    pub start_cell: u32,
    pub goal_cell: u32,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
}

fn default_horizon() -> u32 {
    50
}

impl NavigationSpec {
    /// The 5x4 instance with reset probability 0.5 on the black cells,
    /// start in cell 3 and the goal in cell 18.
    pub fn fig2() -> Self {
        const BLACK: [u32; 10] = [1, 5, 6, 8, 10, 15, 16, 17, 19, 20];
        let reset_prob = (1..=20)
            .map(|c| if BLACK.contains(&c) { 0.5 } else { 0.0 })
            .collect();
        Self {
            width: 5,
            height: 4,
            reset_prob,
            start_cell: 3,
            goal_cell: 18,
            horizon: default_horizon(),
        }
    }

    pub fn num_cells(&self) -> u32 {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<(), MdpError> {
        let bad = |m: String| Err(MdpError::InvalidSpec(m));
        if self.width == 0 || self.height == 0 {
            return bad("grid dimensions must be positive".into());
        }
        if self.num_cells() > 255 {
            return bad("at most 255 cells are supported".into());
        }
        if self.reset_prob.len() != self.num_cells() as usize {
            return bad(format!(
                "reset_prob has {} entries, expected {}",
                self.reset_prob.len(),
                self.num_cells()
            ));
        }
        if let Some(p) = self.reset_prob.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("reset probability {p} outside [0,1]"));
        }
        for (name, c) in [("start_cell", self.start_cell), ("goal_cell", self.goal_cell)] {
            if c == 0 || c > self.num_cells() {
                return bad(format!("{name} {c} outside 1..={}", self.num_cells()));
            }
        }
        if self.start_cell == self.goal_cell {
            return bad("start and goal coincide".into());
        }
        if self.reset_prob[self.goal_cell as usize - 1] != 0.0 {
            return bad("goal cell must have reset probability 0".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Navigation {
    spec: NavigationSpec,
    descriptor: MdpDescriptor,
}

impl Navigation {
    pub fn new(spec: NavigationSpec) -> Result<Self, MdpError> {
        Self::with_name(spec, "navigation")
    }

    pub fn fig2() -> Self {
        Self::with_name(NavigationSpec::fig2(), "navigation_fig2").expect("preset is valid")
    }

    fn with_name(spec: NavigationSpec, name: &str) -> Result<Self, MdpError> {
        spec.validate()?;
        let descriptor = MdpDescriptor::single_player(name, spec.horizon);
        Ok(Self { spec, descriptor })
    }

    pub fn spec(&self) -> &NavigationSpec {
        &self.spec
    }

    /// State for the agent standing on `cell` (1-based).
    pub fn state_at(&self, cell: u32) -> EnvState {
        EnvState::new(&[cell as u8], 0, cell == self.spec.goal_cell)
    }

    pub fn cell_of(&self, state: &EnvState) -> u32 {
        state.payload()[0] as u32
    }

    /// Destination of a move, and whether it stayed on the grid.
    fn destination(&self, cell: u32, action: ActionIndex) -> (u32, bool) {
        let w = self.spec.width as i32;
        let h = self.spec.height as i32;
        let x = (cell as i32 - 1) % w;
        let y = (cell as i32 - 1) / w;
        let (dx, dy) = MOVES[action.0];
        let (nx, ny) = (x + dx, y + dy);
        if (0..w).contains(&nx) && (0..h).contains(&ny) {
            ((nx + 1 + w * ny) as u32, true)
        } else {
            (cell, false)
        }
    }
}

impl Mdp for Navigation {
    fn descriptor(&self) -> &MdpDescriptor {
        &self.descriptor
    }

    fn initial_state(&self) -> EnvState {
        self.state_at(self.spec.start_cell)
    }

    fn num_actions(&self, state: &EnvState) -> usize {
        if state.is_terminal() {
            0
        } else {
            4
        }
    }

    fn reward(&self, state: &EnvState, action: ActionIndex) -> Result<f64, MdpError> {
        check_action(self, state, action)?;
        Ok(-1.0)
    }

    fn enumerate_transitions(
        &self,
        state: &EnvState,
        action: ActionIndex,
    ) -> Result<Vec<TransitionEntry>, MdpError> {
        check_action(self, state, action)?;
        let (dest, moved) = self.destination(self.cell_of(state), action);
        let p = if moved {
            self.spec.reset_prob[dest as usize - 1]
        } else {
            0.0
        };
        let start = self.spec.start_cell;
        Ok(if p == 0.0 || dest == start {
            vec![TransitionEntry::new(self.state_at(dest), 1.0)]
        } else if p == 1.0 {
            vec![TransitionEntry::new(self.state_at(start), 1.0)]
        } else {
            vec![
                TransitionEntry::new(self.state_at(dest), 1.0 - p),
                TransitionEntry::new(self.state_at(start), p),
            ]
        })
    }

    fn sample_transition(
        &self,
        state: &EnvState,
        action: ActionIndex,
        rng: &mut dyn RngCore,
    ) -> Result<(EnvState, f64), MdpError> {
        check_action(self, state, action)?;
        let (dest, moved) = self.destination(self.cell_of(state), action);
        let p = if moved {
            self.spec.reset_prob[dest as usize - 1]
        } else {
            0.0
        };
        // One uniform draw per step, matching the entry order above.
        let reset = p > 0.0 && rng.gen::<f64>() >= 1.0 - p;
        let next = if reset { self.spec.start_cell } else { dest };
        Ok((self.state_at(next), -1.0))
    }

    fn action_label(&self, _state: &EnvState, action: ActionIndex) -> String {
        ACTION_NAMES.get(action.0).map_or_else(|| action.to_string(), |s| s.to_string())
    }
}
