//! Sailing Wind: steer a boat across an `n x n` grid under shifting wind.
//!
//! Headings in canonical order are N, NE, E, SE, S, SW, W, NW (N is +y). The
//! wind blows from one of the same eight directions; sailing straight into it
//! is impossible, so seven headings are legal and `ActionIndex` enumerates
//! them in canonical order with the wind-facing one skipped. The step cost
//! depends on the angle between heading and wind source: 4, 3, 2, 1 for
//! 45, 90, 135, 180 degrees. Moving off the grid keeps the boat in place.
//! After every step the wind keeps its direction with probability
//! `1 - 2 * shift_prob` and turns 45 degrees either way with `shift_prob`
//! each. The goal corner `(n-1, n-1)` is terminal.

use serde::{Deserialize, Serialize};

use crate::mdp::{
    check_action, normalize_entries, ActionIndex, EnvState, Mdp, MdpDescriptor, MdpError,
    TransitionEntry,
};

const HEADINGS: [(i32, i32); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];
const HEADING_NAMES: [&str; 8] = ["N", "NE", "E", "SE", "S", "SW", "W", "NW"];
/// Cost indexed by the angular distance (in 45 degree steps) to the wind source.
const COST: [f64; 5] = [f64::NAN, 4.0, 3.0, 2.0, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SailingSpec {
    pub size: u32,
    pub shift_prob: f64,
    /// Direction the wind blows from at the start (0 = N, clockwise).
    pub initial_wind: u8,
    pub horizon: u32,
}

impl Default for SailingSpec {
    fn default() -> Self {
        Self {
            size: 5,
            shift_prob: 0.3,
            initial_wind: 0,
            horizon: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Sailing {
    spec: SailingSpec,
    descriptor: MdpDescriptor,
}

impl Sailing {
    pub fn new(spec: SailingSpec) -> Result<Self, MdpError> {
        if spec.size < 2 || spec.size > 64 {
            return Err(MdpError::InvalidSpec("sailing grid size must be in 2..=64".into()));
        }
        if !(0.0..=0.5).contains(&spec.shift_prob) {
            return Err(MdpError::InvalidSpec("shift_prob must be in [0,0.5]".into()));
        }
        if spec.initial_wind >= 8 {
            return Err(MdpError::InvalidSpec("initial_wind must be in 0..8".into()));
        }
        if spec.horizon == 0 {
            return Err(MdpError::InvalidSpec("horizon must be positive".into()));
        }
        let descriptor = MdpDescriptor::single_player("sailing_wind", spec.horizon);
        Ok(Self { spec, descriptor })
    }

    fn state(&self, x: u32, y: u32, wind: u8) -> EnvState {
        let goal = self.spec.size - 1;
        EnvState::new(&[x as u8, y as u8, wind], 0, x == goal && y == goal)
    }

    /// Canonical heading named by a positional action index.
    fn heading(wind: u8, action: ActionIndex) -> usize {
        let h = action.0;
        if h >= wind as usize {
            h + 1
        } else {
            h
        }
    }

    fn angle(heading: usize, wind: u8) -> usize {
        let d = (heading + 8 - wind as usize) % 8;
        d.min(8 - d)
    }
}

impl Mdp for Sailing {
    fn descriptor(&self) -> &MdpDescriptor {
        &self.descriptor
    }

    fn initial_state(&self) -> EnvState {
        self.state(0, 0, self.spec.initial_wind)
    }

    fn num_actions(&self, state: &EnvState) -> usize {
        if state.is_terminal() {
            0
        } else {
            7
        }
    }

    fn reward(&self, state: &EnvState, action: ActionIndex) -> Result<f64, MdpError> {
        check_action(self, state, action)?;
        let wind = state.payload()[2];
        Ok(-COST[Self::angle(Self::heading(wind, action), wind)])
    }

    fn enumerate_transitions(
        &self,
        state: &EnvState,
        action: ActionIndex,
    ) -> Result<Vec<TransitionEntry>, MdpError> {
        check_action(self, state, action)?;
        let p = state.payload();
        let (x, y, wind) = (p[0] as i32, p[1] as i32, p[2]);
        let (dx, dy) = HEADINGS[Self::heading(wind, action)];
        let n = self.spec.size as i32;
        let (nx, ny) = if (0..n).contains(&(x + dx)) && (0..n).contains(&(y + dy)) {
            (x + dx, y + dy)
        } else {
            (x, y)
        };
        let (nx, ny) = (nx as u32, ny as u32);
        let shift = self.spec.shift_prob;
        Ok(normalize_entries(vec![
            TransitionEntry::new(self.state(nx, ny, wind), 1.0 - 2.0 * shift),
            TransitionEntry::new(self.state(nx, ny, (wind + 7) % 8), shift),
            TransitionEntry::new(self.state(nx, ny, (wind + 1) % 8), shift),
        ]))
    }

    fn action_label(&self, state: &EnvState, action: ActionIndex) -> String {
        HEADING_NAMES[Self::heading(state.payload()[2], action)].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate_distribution;

    #[test]
    fn wind_facing_heading_is_skipped() {
        let s = Sailing::new(SailingSpec::default()).unwrap();
        let init = s.initial_state();
        assert_eq!(s.legal_actions(&init).len(), 7);
        // Wind from N: action 0 is NE, action 3 is S (running downwind).
        assert_eq!(s.action_label(&init, ActionIndex(0)), "NE");
        assert_eq!(s.reward(&init, ActionIndex(0)).unwrap(), -4.0);
        assert_eq!(s.reward(&init, ActionIndex(3)).unwrap(), -1.0);
        assert_eq!(s.reward(&init, ActionIndex(1)).unwrap(), -3.0);
    }

    #[test]
    fn wind_shifts() {
        let s = Sailing::new(SailingSpec::default()).unwrap();
        let t = s.enumerate_transitions(&s.initial_state(), ActionIndex(0)).unwrap();
        validate_distribution(&t).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].successor.payload(), &[1, 1, 0]);
        assert_eq!(t[1].successor.payload(), &[1, 1, 7]);
        assert!((t[0].probability - 0.4).abs() < 1e-12);
    }

    #[test]
    fn off_grid_stays_and_goal_is_terminal() {
        let s = Sailing::new(SailingSpec::default()).unwrap();
        // S from the bottom row leaves the grid.
        let t = s.enumerate_transitions(&s.initial_state(), ActionIndex(3)).unwrap();
        assert_eq!(&t[0].successor.payload()[..2], &[0, 0]);
        let near = s.state(3, 4, 0);
        let t = s.enumerate_transitions(&near, ActionIndex(1)).unwrap();
        assert!(t.iter().all(|e| e.successor.is_terminal()));
    }
}
