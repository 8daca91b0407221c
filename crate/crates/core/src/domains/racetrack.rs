//! Racetrack with velocity dynamics.
//!
//! Map legend: `#` wall, `.` track, `S` start line, `F` finish line. Row 0 of
//! the map is the top row. Actions are the nine accelerations
//! `(ax, ay)` in row-major order `ay = -1..=1`, `ax = -1..=1`. With
//! probability `slip` the acceleration is ignored. The car then moves along
//! its velocity vector; leaving the track resets it to the first start cell
//! with zero velocity, reaching a finish cell ends the episode. Every step
//! costs -1.

use serde::{Deserialize, Serialize};

use crate::mdp::{
    check_action, normalize_entries, ActionIndex, EnvState, Mdp, MdpDescriptor, MdpError,
    TransitionEntry,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RacetrackSpec {
    pub map: Vec<String>,
    pub slip: f64,
    pub max_speed: i32,
    pub horizon: u32,
}

impl Default for RacetrackSpec {
    fn default() -> Self {
        Self {
            map: [
                "##########",
                "#.......F#",
                "#.......F#",
                "#..#######",
                "#..#",
                "#SS#",
                "####",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            slip: 0.1,
            max_speed: 2,
            horizon: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cell {
    Wall,
    Track,
    Start,
    Finish,
}

#[derive(Clone, Debug)]
pub struct Racetrack {
    spec: RacetrackSpec,
    grid: Vec<Vec<Cell>>,
    start: (i32, i32),
    descriptor: MdpDescriptor,
}

enum Outcome {
    Moved(i32, i32, i32, i32),
    Crashed,
    Finished(i32, i32),
}

impl Racetrack {
    pub fn new(spec: RacetrackSpec) -> Result<Self, MdpError> {
        let width = spec.map.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut grid = Vec::with_capacity(spec.map.len());
        for row in &spec.map {
            let mut cells = Vec::with_capacity(width);
            for ch in row.chars() {
                cells.push(match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Track,
                    'S' => Cell::Start,
                    'F' => Cell::Finish,
                    other => {
                        return Err(MdpError::InvalidSpec(format!("unknown map symbol `{other}`")))
                    }
                });
            }
            cells.resize(width, Cell::Wall);
            grid.push(cells);
        }
        let find = |kind| {
            grid.iter().enumerate().find_map(|(y, row)| {
                row.iter()
                    .position(|&c| c == kind)
                    .map(|x| (x as i32, y as i32))
            })
        };
        let start = find(Cell::Start)
            .ok_or_else(|| MdpError::InvalidSpec("racetrack has no start cell".into()))?;
        if find(Cell::Finish).is_none() {
            return Err(MdpError::InvalidSpec("racetrack has no finish cell".into()));
        }
        if width > 120 || grid.len() > 120 {
            return Err(MdpError::InvalidSpec("racetrack map too large".into()));
        }
        if !(0.0..=1.0).contains(&spec.slip) || spec.max_speed < 1 || spec.max_speed > 5 {
            return Err(MdpError::InvalidSpec("slip must be in [0,1], max_speed in 1..=5".into()));
        }
        if spec.horizon == 0 {
            return Err(MdpError::InvalidSpec("horizon must be positive".into()));
        }
        let descriptor = MdpDescriptor::single_player("racetrack", spec.horizon);
        Ok(Self {
            spec,
            grid,
            start,
            descriptor,
        })
    }

    fn encode(x: i32, y: i32, vx: i32, vy: i32, terminal: bool) -> EnvState {
        EnvState::new(&[x as u8, y as u8, (vx + 8) as u8, (vy + 8) as u8], 0, terminal)
    }

    fn decode(state: &EnvState) -> (i32, i32, i32, i32) {
        let p = state.payload();
        (p[0] as i32, p[1] as i32, p[2] as i32 - 8, p[3] as i32 - 8)
    }

    fn cell(&self, x: i32, y: i32) -> Cell {
        if y < 0 || x < 0 || y as usize >= self.grid.len() || x as usize >= self.grid[0].len() {
            Cell::Wall
        } else {
            self.grid[y as usize][x as usize]
        }
    }

    fn drive(&self, state: &EnvState, ax: i32, ay: i32) -> Outcome {
        let (x, y, vx, vy) = Self::decode(state);
        let m = self.spec.max_speed;
        let (vx, vy) = ((vx + ax).clamp(-m, m), (vy + ay).clamp(-m, m));
        let steps = vx.abs().max(vy.abs());
        for k in 1..=steps {
            // Round half away from zero along the segment.
            let px = x + (2 * vx * k + steps * vx.signum()) / (2 * steps);
            let py = y + (2 * vy * k + steps * vy.signum()) / (2 * steps);
            match self.cell(px, py) {
                Cell::Wall => return Outcome::Crashed,
                Cell::Finish => return Outcome::Finished(px, py),
                Cell::Track | Cell::Start => {}
            }
        }
        Outcome::Moved(x + vx, y + vy, vx, vy)
    }

    fn outcome_state(&self, o: Outcome) -> EnvState {
        match o {
            Outcome::Moved(x, y, vx, vy) => Self::encode(x, y, vx, vy, false),
            Outcome::Crashed => Self::encode(self.start.0, self.start.1, 0, 0, false),
            Outcome::Finished(x, y) => Self::encode(x, y, 0, 0, true),
        }
    }

    fn acceleration(action: ActionIndex) -> (i32, i32) {
        (action.0 as i32 % 3 - 1, action.0 as i32 / 3 - 1)
    }
}

impl Mdp for Racetrack {
    fn descriptor(&self) -> &MdpDescriptor {
        &self.descriptor
    }

    fn initial_state(&self) -> EnvState {
        Self::encode(self.start.0, self.start.1, 0, 0, false)
    }

    fn num_actions(&self, state: &EnvState) -> usize {
        if state.is_terminal() {
            0
        } else {
            9
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
        let (ax, ay) = Self::acceleration(action);
        let slip = self.spec.slip;
        let intended = self.outcome_state(self.drive(state, ax, ay));
        let slipped = self.outcome_state(self.drive(state, 0, 0));
        Ok(normalize_entries(vec![
            TransitionEntry::new(intended, 1.0 - slip),
            TransitionEntry::new(slipped, slip),
        ]))
    }

    fn action_label(&self, _state: &EnvState, action: ActionIndex) -> String {
        let (ax, ay) = Self::acceleration(action);
        format!("accel({ax},{ay})")
    }
}
