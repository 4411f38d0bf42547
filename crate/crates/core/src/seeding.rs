use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream for trajectory `index` of a batch with seed `base`.
///
/// Each trajectory gets its own ChaCha stream, so the draws of trajectory
/// `i` do not depend on how many trajectories run or in which order.
pub fn trajectory_rng(base: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng
}
