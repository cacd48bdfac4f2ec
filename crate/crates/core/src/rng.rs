//! Deterministic random streams.
//!
//! One master seed expands into independent ChaCha8 streams, one per
//! (domain, index) pair. Data generation, each user's protocol randomness,
//! the center, audit inputs, and the projection matrix all live in disjoint
//! domains, so results do not depend on scheduling order and any stream can
//! be regenerated in isolation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose of a derived stream. The discriminant is baked into the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// Synthetic data for one (user, epoch) cell.
    UserData = 1,
    /// One user's protocol messages (votes, estimates, reports).
    UserProtocol = 2,
    /// Center-side randomness (reserved; the center decision is deterministic).
    Center = 3,
    /// Hypothetical input records drawn by the auditor.
    AuditInput = 4,
    /// Seed material for the sign projection.
    Projection = 5,
}

const INDEX_BITS: u32 = 56;

/// Derive the ChaCha8 stream for `(domain, index)` under `master`.
pub fn stream(master: u64, domain: StreamDomain, index: u64) -> ChaCha8Rng {
    assert!(index < 1 << INDEX_BITS, "stream index out of range: {index}");
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((domain as u64) << INDEX_BITS) | index);
    rng
}

/// Pack a (user, epoch) pair into a stream index. Epochs occupy the low 16
/// bits so every cell of the data matrix is independently addressable.
pub fn user_epoch_index(user: usize, epoch: usize) -> u64 {
    assert!(epoch < 1 << 16, "epoch index out of range: {epoch}");
    ((user as u64) << 16) | epoch as u64
}

/// Derive a bare 64-bit sub-seed (for generators that want a u64, like the
/// projection PRF) without constructing a stream.
pub fn derive_seed(master: u64, domain: StreamDomain, index: u64) -> u64 {
    let mut z = mix64(master ^ mix64((domain as u64).wrapping_mul(0x9e3779b97f4a7c15)));
    z = mix64(z ^ mix64(index.wrapping_add(0x6a09e667f3bcc909)));
    z
}

/// SplitMix64 finalizer; full-avalanche 64-bit mixer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Fill `out` with independent Bernoulli(`p`) bits. The comparison threshold
/// is a rounded 32-bit integer, so p = 0 and p = 1 (and any multiple of
/// 2^-32) are exact.
pub fn fill_bernoulli_bits(rng: &mut impl RngCore, p: f64, out: &mut [u8]) {
    debug_assert!((0.0..=1.0).contains(&p));
    let threshold = ((p * 4_294_967_296.0).round() as u64).min(1 << 32);
    for bit in out.iter_mut() {
        *bit = ((rng.next_u32() as u64) < threshold) as u8;
    }
}
