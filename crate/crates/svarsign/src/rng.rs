//! Seedable random streams.
//!
//! Two modes are supported:
//!
//! * **Single stream** — one ChaCha stream consumed sequentially. Bit-exact
//!   reproducibility for a fixed seed, regardless of platform.
//! * **Counter-based split** — admissible draw `k` is produced from the
//!   dedicated stream `draw_stream(seed, k)`. Because each draw owns its
//!   stream, the multiset of accepted draws is independent of how the draw
//!   indices are partitioned across worker threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream used by single-stream (sequential) mode.
pub fn master_stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for the `index`-th admissible draw under the
/// counter-based split. ChaCha streams with distinct stream ids never
/// overlap; index 0 is reserved for the master stream.
pub fn draw_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng
}
