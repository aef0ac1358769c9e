//! Seed handling.
//!
//! Every sampler takes a caller-supplied rng. Samplers that split their work
//! into independent blocks draw a single root seed from that rng and give
//! block `b` its own ChaCha8 stream `(root, b)`. The stream a block sees does
//! not depend on which thread runs it, so serial and parallel execution
//! produce identical output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator used for derived block streams.
pub type BlockRng = ChaCha8Rng;

/// Convenience constructor for a seeded top-level generator.
pub fn seeded(seed: u64) -> BlockRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream number `index` under `root`.
pub fn block_rng(root: u64, index: u64) -> BlockRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(index);
    rng
}

pub(crate) fn draw_root<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.random()
}
