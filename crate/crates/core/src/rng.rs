use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream of replication `rep` under master seed `seed`.
///
/// Each replication gets its own ChaCha stream, so a path depends only on
/// `(seed, rep)`: not on the number of replications or on scheduling.
pub(crate) fn stream(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}
