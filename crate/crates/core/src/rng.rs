use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent RNG streams derived from one user seed.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub(crate) enum Stream {
    Init = 1,
    Sampling = 2,
    Fixture = 3,
}

pub(crate) fn stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
