//! Scenario loading and experiment orchestration around the `macwt`
//! library: one JSON scenario in, one directory of CSV/JSON artifacts and a
//! manifest out.

pub mod runner;
pub mod scenario;

pub use runner::{run, scenario_hash, RunOutcome};
pub use scenario::{load_scenario, Mode, Scenario};

// The guide's runner chapter runs with this crate's tests; the library
// chapters run with macwt's.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
