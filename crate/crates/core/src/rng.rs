//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 seeded through
//! `SeedableRng::seed_from_u64`. Independent consumers derive their own
//! stream id so that, for example, weight init and minibatch shuffling never
//! share a sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Matrix;

pub type Rng = ChaCha8Rng;

/// Identifier recorded in run manifests.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64 (rand_chacha 0.9)";

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Matrix with i.i.d. `N(0, stddev²)` entries.
pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize, stddev: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        stddev * z
    })
}
