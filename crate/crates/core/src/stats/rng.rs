use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream for one trial, a pure function of `(seed, trial)`.
pub(crate) fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}
