//! SysAdmin: keep a network of machines running.
//!
//! Actions `0..n` reboot machine `i`, action `n` does nothing. A rebooted
//! machine is up in the next step. A running machine stays up with
//! probability `base_up + neighbor_weight * (running neighbors / neighbors)`,
//! a crashed machine that is not rebooted stays down. The reward is the
//! number of running machines minus `reboot_cost` when rebooting.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::mdp::{check_action, ActionIndex, EnvState, Mdp, MdpDescriptor, MdpError, TransitionEntry};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Topology {
    Ring,
    Grid { width: u32, height: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SysAdminSpec {
    pub machines: u32,
    pub topology: Topology,
    pub base_up: f64,
    pub neighbor_weight: f64,
    pub reboot_cost: f64,
    pub horizon: u32,
}

impl Default for SysAdminSpec {
    fn default() -> Self {
        Self {
            machines: 6,
            topology: Topology::Ring,
            base_up: 0.45,
            neighbor_weight: 0.5,
            reboot_cost: 0.75,
            horizon: 50,
        }
    }
}

impl SysAdminSpec {
    pub fn ring(machines: u32) -> Self {
        Self {
            machines,
            ..Self::default()
        }
    }

    pub fn grid(width: u32, height: u32) -> Self {
        Self {
            machines: width * height,
            topology: Topology::Grid { width, height },
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SysAdmin {
    spec: SysAdminSpec,
    neighbors: Vec<Vec<usize>>,
    descriptor: MdpDescriptor,
}

impl SysAdmin {
    pub fn new(spec: SysAdminSpec) -> Result<Self, MdpError> {
        let n = spec.machines as usize;
        if n == 0 || n > 16 {
            return Err(MdpError::InvalidSpec("sysadmin supports 1..=16 machines".into()));
        }
        let max_up = spec.base_up + spec.neighbor_weight;
        if spec.base_up < 0.0 || spec.neighbor_weight < 0.0 || max_up > 1.0 {
            return Err(MdpError::InvalidSpec(format!(
                "survival probabilities must lie in [0,1], got up to {max_up}"
            )));
        }
        if spec.horizon == 0 {
            return Err(MdpError::InvalidSpec("horizon must be positive".into()));
        }
        let neighbors = match spec.topology {
            Topology::Ring => (0..n)
                .map(|i| {
                    let mut v: Vec<usize> = [(i + n - 1) % n, (i + 1) % n]
                        .into_iter()
                        .filter(|&j| j != i)
                        .collect();
                    v.dedup();
                    v
                })
                .collect(),
            Topology::Grid { width, height } => {
                let (w, h) = (width as usize, height as usize);
                if w * h != n {
                    return Err(MdpError::InvalidSpec(format!(
                        "grid {w}x{h} does not hold {n} machines"
                    )));
                }
                (0..n)
                    .map(|i| {
                        let (x, y) = (i % w, i / w);
                        let mut v = Vec::new();
                        if y > 0 {
                            v.push(i - w);
                        }
                        if x > 0 {
                            v.push(i - 1);
                        }
                        if x + 1 < w {
                            v.push(i + 1);
                        }
                        if y + 1 < h {
                            v.push(i + w);
                        }
                        v
                    })
                    .collect()
            }
        };
        let descriptor = MdpDescriptor::single_player("sysadmin", spec.horizon);
        Ok(Self {
            spec,
            neighbors,
            descriptor,
        })
    }

    pub fn machines(&self) -> usize {
        self.spec.machines as usize
    }

    pub fn state_from(&self, running: &[bool]) -> EnvState {
        let bytes: Vec<u8> = running.iter().map(|&r| r as u8).collect();
        EnvState::new(&bytes, 0, false)
    }

    /// Probability that machine `i` is up after `action`.
    fn up_probability(&self, running: &[u8], i: usize, action: ActionIndex) -> f64 {
        if action.0 == i {
            return 1.0;
        }
        if running[i] == 0 {
            return 0.0;
        }
        let nb = &self.neighbors[i];
        let frac = if nb.is_empty() {
            0.0
        } else {
            nb.iter().filter(|&&j| running[j] == 1).count() as f64 / nb.len() as f64
        };
        self.spec.base_up + self.spec.neighbor_weight * frac
    }
}

impl Mdp for SysAdmin {
    fn descriptor(&self) -> &MdpDescriptor {
        &self.descriptor
    }

    fn initial_state(&self) -> EnvState {
        self.state_from(&vec![true; self.machines()])
    }

    fn num_actions(&self, _state: &EnvState) -> usize {
        self.machines() + 1
    }

    fn reward(&self, state: &EnvState, action: ActionIndex) -> Result<f64, MdpError> {
        check_action(self, state, action)?;
        let running = state.payload().iter().filter(|&&b| b == 1).count() as f64;
        let cost = if action.0 < self.machines() {
            self.spec.reboot_cost
        } else {
            0.0
        };
        Ok(running - cost)
    }

    fn enumerate_transitions(
        &self,
        state: &EnvState,
        action: ActionIndex,
    ) -> Result<Vec<TransitionEntry>, MdpError> {
        check_action(self, state, action)?;
        let running = state.payload();
        // Partial outcomes over the first k machines, expanded one machine at a time.
        let mut partial: Vec<(Vec<u8>, f64)> = vec![(Vec::with_capacity(running.len()), 1.0)];
        for i in 0..self.machines() {
            let p = self.up_probability(running, i, action);
            let mut next = Vec::with_capacity(partial.len() * 2);
            for (bits, q) in partial {
                if p > 0.0 {
                    let mut b = bits.clone();
                    b.push(1);
                    next.push((b, q * p));
                }
                if p < 1.0 {
                    let mut b = bits;
                    b.push(0);
                    next.push((b, q * (1.0 - p)));
                }
            }
            partial = next;
        }
        Ok(partial
            .into_iter()
            .map(|(bits, q)| TransitionEntry::new(EnvState::new(&bits, 0, false), q))
            .collect())
    }

    fn sample_transition(
        &self,
        state: &EnvState,
        action: ActionIndex,
        rng: &mut dyn RngCore,
    ) -> Result<(EnvState, f64), MdpError> {
        let reward = self.reward(state, action)?;
        let running = state.payload();
        let next: Vec<u8> = (0..self.machines())
            .map(|i| {
                let p = self.up_probability(running, i, action);
                (p >= 1.0 || (p > 0.0 && rng.gen::<f64>() < p)) as u8
            })
            .collect();
        Ok((EnvState::new(&next, 0, false), reward))
    }

    fn action_label(&self, _state: &EnvState, action: ActionIndex) -> String {
        if action.0 < self.machines() {
            format!("reboot({})", action.0)
        } else {
            "noop".into()
        }
    }
}
