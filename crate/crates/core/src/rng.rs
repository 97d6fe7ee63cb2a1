//! Seeded substreams. Every random quantity is drawn from a ChaCha stream
//! addressed by `(seed, domain, index)`, so results never depend on thread
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Separates the uses of one user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Channel = 1,
    Codebook = 2,
    Trial = 3,
    WardenH0 = 4,
    WardenH1 = 5,
    Covertness = 6,
    RhoSample = 7,
    Experiment = 8,
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    // splitmix-style mix keeps distinct (seed, domain) pairs apart
    let mut z = seed ^ (domain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let mut rng = ChaCha8Rng::seed_from_u64(z);
    rng.set_stream(index);
    rng
}

/// A child seed for the `index`-th stage of an experiment.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    use rand::Rng;
    substream(seed, Domain::Experiment, index).random()
}
