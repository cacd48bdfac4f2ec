//! Locally differentially private tracking of evolving statistics.
//!
//! A population of `n` users is partitioned into hidden subgroups, each
//! drawing fresh samples every round from a subgroup-specific distribution
//! that changes only occasionally. The protocols here maintain a running
//! public estimate of the population statistic while spending privacy budget
//! proportional to the number of *distribution changes*, not the number of
//! reporting periods. Users privately vote on whether the published estimate
//! has gone stale; only when enough votes accumulate does a randomized-response
//! refresh happen.
//!
//! The crate is organized around the protocol pipeline:
//!
//! - [`params`]: input validation and every derived closed-form constant
//!   (noise levels, threshold ladders, change budgets).
//! - [`bernoulli`]: the bit-mean protocol — per-user vote/estimate automata
//!   and the center's per-epoch aggregation loop.
//! - [`heavy`]: the heavy-hitters extension — seeded sign projection, hashed
//!   histograms, the one-coordinate report randomizer, and the frequency
//!   oracle.
//! - [`sim`]: synthetic data under the subgroup model, exact ground truth,
//!   and scoring of protocol output against the theoretical bounds.
//! - [`audit`]: exact verification of the local-privacy guarantee by
//!   transcript replay and brute-force enumeration at tiny scale.

pub mod audit;
pub mod bernoulli;
pub mod error;
pub mod heavy;
pub mod params;
pub mod rng;
pub mod sim;

pub use error::Error;
pub use params::{ChangeBudget, NoiseLevels, ProtocolParams, SlackMode};
