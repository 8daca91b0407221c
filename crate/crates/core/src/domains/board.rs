//! Helpers shared by the board games.

/// Cell mark of a player: 1 for player 0, 2 for player 1.
pub fn mark_of(player: u8) -> u8 {
    player + 1
}

/// The mark filling every listed cell, if any.
pub fn line_through(cells: &[u8], line: &[usize]) -> Option<u8> {
    let first = cells[line[0]];
    (first != 0 && line.iter().all(|&i| cells[i] == first)).then_some(first)
}
