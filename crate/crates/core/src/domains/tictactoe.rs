//! TicTacToe. Player 0 plays X and moves first.
//!
//! Payload: nine cells row-major (0 empty, 1 X, 2 O). Actions are the empty
//! cells in ascending order. The move that completes a line earns +1 for X or
//! -1 for O (player 0's perspective); a full board without a line is a draw.

use crate::domains::board::{line_through, mark_of};
use crate::mdp::{check_action, ActionIndex, EnvState, Mdp, MdpDescriptor, MdpError, TransitionEntry};

const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

#[derive(Clone, Debug)]
pub struct TicTacToe {
    descriptor: MdpDescriptor,
}

impl Default for TicTacToe {
    fn default() -> Self {
        Self::new()
    }
}

impl TicTacToe {
    pub fn new() -> Self {
        Self {
            descriptor: MdpDescriptor::two_player("tictactoe", 9),
        }
    }

    /// Builds a position from a 9-character string of `.`, `X`, `O`.
    pub fn position(&self, board: &str, player_to_move: u8) -> Result<EnvState, MdpError> {
        let cells: Vec<u8> = board
            .chars()
            .map(|c| match c {
                '.' => Ok(0),
                'X' | 'x' => Ok(1),
                'O' | 'o' => Ok(2),
                other => Err(MdpError::InvalidSpec(format!("bad board symbol `{other}`"))),
            })
            .collect::<Result<_, _>>()?;
        if cells.len() != 9 {
            return Err(MdpError::InvalidSpec("board needs 9 cells".into()));
        }
        let won = LINES.iter().any(|l| line_through(&cells, l).is_some());
        let full = cells.iter().all(|&c| c != 0);
        Ok(EnvState::new(&cells, player_to_move, won || full))
    }

    fn empty_cells(state: &EnvState) -> impl Iterator<Item = usize> + '_ {
        state.payload().iter().enumerate().filter(|(_, &c)| c == 0).map(|(i, _)| i)
    }

    fn play(&self, state: &EnvState, action: ActionIndex) -> (Vec<u8>, bool) {
        let cell = Self::empty_cells(state).nth(action.0).expect("checked action");
        let mut cells = state.payload().to_vec();
        cells[cell] = mark_of(state.player_to_move());
        let won = LINES
            .iter()
            .filter(|l| l.contains(&cell))
            .any(|l| line_through(&cells, l).is_some());
        (cells, won)
    }
}

impl Mdp for TicTacToe {
    fn descriptor(&self) -> &MdpDescriptor {
        &self.descriptor
    }

    fn initial_state(&self) -> EnvState {
        EnvState::new(&[0; 9], 0, false)
    }

    fn num_actions(&self, state: &EnvState) -> usize {
        if state.is_terminal() {
            0
        } else {
            Self::empty_cells(state).count()
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
        match Self::empty_cells(state).nth(action.0) {
            Some(c) => format!("cell{c}"),
            None => action.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_board_has_nine_moves() {
        let t = TicTacToe::new();
        assert_eq!(t.legal_actions(&t.initial_state()).len(), 9);
    }

    #[test]
    fn x_completing_a_row_wins() {
        let t = TicTacToe::new();
        let s = t.position("XX.OO....", 0).unwrap();
        assert!(!s.is_terminal());
        // Empty cells: 2,5,6,7,8 -> action 0 plays cell 2.
        assert_eq!(t.reward(&s, ActionIndex(0)).unwrap(), 1.0);
        let next = &t.enumerate_transitions(&s, ActionIndex(0)).unwrap()[0].successor;
        assert!(next.is_terminal());
        assert!(t.legal_actions(next).is_empty());
        assert_eq!(next.player_to_move(), 1);
    }

    #[test]
    fn o_win_is_negative() {
        let t = TicTacToe::new();
        let s = t.position("XX.OO.X..", 1).unwrap();
        // Empty cells: 2,5,7,8 -> action 1 plays cell 5.
        assert_eq!(t.reward(&s, ActionIndex(1)).unwrap(), -1.0);
    }

    #[test]
    fn full_board_is_draw_terminal() {
        let t = TicTacToe::new();
        let s = t.position("XOXXOOOX.", 0).unwrap();
        assert_eq!(t.reward(&s, ActionIndex(0)).unwrap(), 0.0);
        let next = &t.enumerate_transitions(&s, ActionIndex(0)).unwrap()[0].successor;
        assert!(next.is_terminal());
    }
}
