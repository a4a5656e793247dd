//! Seeded generators. Every stochastic routine takes a 64-bit seed and an
//! explicit stream so that independent consumers never share draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

pub(crate) const STREAM_DIRECTIONS: u64 = 1;
pub(crate) const STREAM_TIE_BREAK: u64 = 2;
pub(crate) const STREAM_SAMPLE_JITTER: u64 = 3;
pub(crate) const STREAM_SAMPLER: u64 = 4;
pub(crate) const STREAM_CYCLES: u64 = 5;
pub(crate) const STREAM_MESH: u64 = 6;

/// Generator for `seed` on the given stream.
pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of cell `index` derived from a master seed (splitmix64 finalizer).
pub fn cell_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform point on the unit sphere S^{d-1}.
pub fn unit_vector(rng: &mut Rng, dim: usize, out: &mut [f64]) {
    loop {
        let mut sq = 0.0;
        for v in out.iter_mut().take(dim) {
            let g: f64 = StandardNormal.sample(rng);
            *v = g;
            sq += g * g;
        }
        if sq > 1e-20 {
            let r = sq.sqrt();
            out.iter_mut().for_each(|v| *v /= r);
            return;
        }
    }
}
