//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by parameter derivation, data generation, and auditing.
///
/// Contract violations inside the protocol hot path (wrong-length epoch data,
/// out-of-range histogram values) panic instead: they indicate caller bugs,
/// not recoverable conditions.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A raw input failed its domain check.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam {
        name: &'static str,
        reason: String,
    },

    /// The smallest-subgroup assumption needed for the vote noise level.
    #[error(
        "smallest subgroup size L = {min_group} is too small for the vote \
         noise level; need L > {required}"
    )]
    AssumptionViolated { min_group: usize, required: f64 },

    /// A noise-level denominator came out non-positive.
    #[error("infeasible parameters: {detail}")]
    Infeasible { detail: String },

    /// A change schedule failed validation.
    #[error("invalid change schedule: {detail}")]
    Schedule { detail: String },

    /// Brute-force enumeration refused an instance that is too large.
    #[error(
        "enumeration would cover ~{estimate} states, above the limit of \
         {limit}; shrink n, T, or the epoch length"
    )]
    EnumerationTooLarge { estimate: u64, limit: u64 },

    /// An audit was asked to replay a transcript against mismatched inputs.
    #[error("transcript/input mismatch: {detail}")]
    Mismatch { detail: String },
}
