//! Connect Four on a 7x6 board. Player 0 moves first.
//!
//! Payload: 42 cells, column-major from the bottom (`col * 6 + row`), 0 empty,
//! 1 player 0, 2 player 1. Actions are the non-full columns in ascending
//! order. Four in a row earns +1 for player 0 or -1 for player 1; a full
//! board is a draw.

use crate::domains::board::mark_of;
use crate::mdp::{check_action, ActionIndex, EnvState, Mdp, MdpDescriptor, MdpError, TransitionEntry};

pub const COLUMNS: usize = 7;
pub const ROWS: usize = 6;

#[derive(Clone, Debug)]
pub struct Connect4 {
    descriptor: MdpDescriptor,
}

impl Default for Connect4 {
    fn default() -> Self {
        Self::new()
    }
}

impl Connect4 {
    pub fn new() -> Self {
        Self {
            descriptor: MdpDescriptor::two_player("connect4", (COLUMNS * ROWS) as u32),
        }
    }

    fn open_columns(state: &EnvState) -> impl Iterator<Item = usize> + '_ {
        (0..COLUMNS).filter(move |&c| state.payload()[c * ROWS + ROWS - 1] == 0)
    }

    /// Drops a piece; returns the new cells and whether it connected four.
    fn play(&self, state: &EnvState, action: ActionIndex) -> (Vec<u8>, bool) {
        let col = Self::open_columns(state).nth(action.0).expect("checked action");
        let mut cells = state.payload().to_vec();
        let row = (0..ROWS).find(|&r| cells[col * ROWS + r] == 0).expect("open column");
        let mark = mark_of(state.player_to_move());
        cells[col * ROWS + row] = mark;
        let at = |c: i32, r: i32| {
            (0..COLUMNS as i32).contains(&c)
                && (0..ROWS as i32).contains(&r)
                && cells[c as usize * ROWS + r as usize] == mark
        };
        let won = [(1, 0), (0, 1), (1, 1), (1, -1)].iter().any(|&(dc, dr)| {
            let count = |sign: i32| {
                (1..4)
                    .take_while(|&k| at(col as i32 + sign * k * dc, row as i32 + sign * k * dr))
                    .count()
            };
            1 + count(1) + count(-1) >= 4
        });
        (cells, won)
    }
}

impl Mdp for Connect4 {
    fn descriptor(&self) -> &MdpDescriptor {
        &self.descriptor
    }

    fn initial_state(&self) -> EnvState {
        EnvState::new(&[0; COLUMNS * ROWS], 0, false)
    }

    fn num_actions(&self, state: &EnvState) -> usize {
        if state.is_terminal() {
            0
        } else {
            Self::open_columns(state).count()
        }
    }

    fn reward(&self, state: &EnvState, action: ActionIndex) -> Result<f64, MdpError> {
        check_action(self, state, action)?;
        let (_, won) = self.play(state, action);
        Ok(match (won, state.player_to_move()) {
            (false, _) => 0.0,
            (true, 0) => 1.0,
            (true, _) => -1.0,
        })
    }

    fn enumerate_transitions(
        &self,
        state: &EnvState,
        action: ActionIndex,
    ) -> Result<Vec<TransitionEntry>, MdpError> {
        check_action(self, state, action)?;
        let (cells, won) = self.play(state, action);
        let terminal = won || cells.iter().all(|&c| c != 0);
        let next = EnvState::new(&cells, 1 - state.player_to_move(), terminal);
        Ok(vec![TransitionEntry::new(next, 1.0)])
    }

    fn action_label(&self, state: &EnvState, action: ActionIndex) -> String {
        match Self::open_columns(state).nth(action.0) {
            Some(c) => format!("col{c}"),
            None => action.to_string(),
        }
    }
}
