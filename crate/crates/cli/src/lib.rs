//! Library surface of the experiment CLI: config parsing and the runner,
//! exposed so integration tests (and other tooling) can drive experiments
//! without shelling out.

pub mod config;
pub mod runner;
