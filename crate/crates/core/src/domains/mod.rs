//! Benchmark domains and the name-based factory used by experiment configs.

mod board;
pub mod connect4;
pub mod game_of_life;
pub mod navigation;
pub mod racetrack;
pub mod sailing;
pub mod sysadmin;
pub mod tictactoe;

use std::sync::Arc;

use serde::de::DeserializeOwned;

use crate::mdp::{Mdp, MdpError};

pub use connect4::Connect4;
pub use game_of_life::{GameOfLife, GameOfLifeSpec};
pub use navigation::{Navigation, NavigationSpec};
pub use racetrack::{Racetrack, RacetrackSpec};
pub use sailing::{Sailing, SailingSpec};
pub use sysadmin::{SysAdmin, SysAdminSpec, Topology};
pub use tictactoe::TicTacToe;

pub const DOMAIN_NAMES: [&str; 8] = [
    "navigation",
    "navigation_fig2",
    "sysadmin",
    "game_of_life",
    "racetrack",
    "sailing_wind",
    "tictactoe",
    "connect4",
];

fn parse<T: DeserializeOwned>(name: &str, params: &toml::Table) -> Result<T, MdpError> {
    toml::Value::Table(params.clone())
        .try_into()
        .map_err(|e| MdpError::InvalidSpec(format!("{name}: {e}")))
}

fn no_params(name: &str, params: &toml::Table) -> Result<(), MdpError> {
    match params.keys().next() {
        None => Ok(()),
        Some(k) => Err(MdpError::InvalidSpec(format!("{name} takes no parameter `{k}`"))),
    }
}

/// Builds a domain from its name and a parameter table. Missing parameters
/// take the documented defaults, unknown ones are rejected.
pub fn build_domain(name: &str, params: &toml::Table) -> Result<Arc<dyn Mdp>, MdpError> {
    Ok(match name {
        "navigation" => Arc::new(Navigation::new(parse(name, params)?)?),
        "navigation_fig2" => {
            no_params(name, params)?;
            Arc::new(Navigation::fig2())
        }
        "sysadmin" => Arc::new(SysAdmin::new(parse(name, params)?)?),
        "game_of_life" => Arc::new(GameOfLife::new(parse(name, params)?)?),
        "racetrack" => Arc::new(Racetrack::new(parse(name, params)?)?),
        "sailing_wind" => Arc::new(Sailing::new(parse(name, params)?)?),
        "tictactoe" => {
            no_params(name, params)?;
            Arc::new(TicTacToe::new())
        }
        "connect4" => {
            no_params(name, params)?;
            Arc::new(Connect4::new())
        }
        other => return Err(MdpError::UnknownDomain(other.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_builds_with_defaults() {
        for name in DOMAIN_NAMES {
            if name == "navigation" {
                continue;
            }
            let mdp = build_domain(name, &toml::Table::new()).unwrap();
            assert!(mdp.num_actions(&mdp.initial_state()) > 0, "{name}");
        }
    }

    #[test]
    fn params_are_parsed_and_checked() {
        let t: toml::Table = toml::from_str("machines = 4\nreboot_cost = 1.0").unwrap();
        let mdp = build_domain("sysadmin", &t).unwrap();
        assert_eq!(mdp.num_actions(&mdp.initial_state()), 5);
        let bad: toml::Table = toml::from_str("machnes = 4").unwrap();
        assert!(matches!(build_domain("sysadmin", &bad), Err(MdpError::InvalidSpec(_))));
        assert!(matches!(
            build_domain("chess", &toml::Table::new()),
            Err(MdpError::UnknownDomain(_))
        ));
        let grid: toml::Table =
            toml::from_str("machines = 4\ntopology = { grid = { width = 2, height = 2 } }").unwrap();
        assert!(build_domain("sysadmin", &grid).is_ok());
    }
}
