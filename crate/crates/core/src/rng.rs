//! Seeded sampling helpers shared by the solver, the game checks and the
//! synthetic data generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with stream indices so that independent workers
/// (trials, restarts, sweep points) never share a stream.
pub fn derive_seed(seed: u64, streams: &[u64]) -> u64 {
    // splitmix64 finaliser applied per stream index
    let mut h = seed;
    for &s in streams {
        h ^= s
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform sample from the closed ball of the given radius: a normalised
/// Gaussian direction scaled by `radius * U^(1/dim)`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let g = gaussian_vector(rng, dim);
        let n = crate::linalg::norm(&g);
        if n > 0.0 {
            let u: f64 = rng.random();
            let r = radius * u.powf(1.0 / dim as f64);
            return g.into_iter().map(|x| x * r / n).collect();
        }
    }
}

/// Uniform sample on the sphere of the given radius.
pub fn uniform_on_sphere<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let g = gaussian_vector(rng, dim);
        let n = crate::linalg::norm(&g);
        if n > 0.0 {
            return g.into_iter().map(|x| x * radius / n).collect();
        }
    }
}
