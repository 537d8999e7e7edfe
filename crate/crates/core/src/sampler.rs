//! Seeded uniform sampling of joint tables from the 8-dimensional
//! probability simplex.
//!
//! Each table is an independent Dirichlet(1, ..., 1) draw, realized as eight
//! unit-exponential variates normalized by their sum. The generator for table
//! `i` is a dedicated ChaCha stream derived from `(seed, i)`, so tables can be
//! produced in any order or concurrently and the sequence is still a pure
//! function of the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::joint::{JointTable, CELL_COUNT};

/// Default number of networks in a study run.
pub const DEFAULT_NETWORK_COUNT: usize = 109;

/// Seed and size of a sampling run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub count: usize,
}

impl SamplerConfig {
    pub fn new(seed: u64, count: usize) -> Self {
        assert!(count >= 1, "sampler count must be at least 1");
        SamplerConfig { seed, count }
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            count: DEFAULT_NETWORK_COUNT,
        }
    }
}

/// Draws `config.count` tables, ordered by index.
pub fn sample_tables(config: &SamplerConfig) -> Vec<JointTable> {
    (0..config.count)
        .map(|i| sample_table(config.seed, i as u64))
        .collect()
}

/// Draws the table at `index` of the stream identified by `seed`.
pub fn sample_table(seed: u64, index: u64) -> JointTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut cells = [0.0; CELL_COUNT];
    let mut sum = 0.0;
    for cell in &mut cells {
        let e = unit_exponential(&mut rng);
        *cell = e;
        sum += e;
    }
    for cell in &mut cells {
        *cell /= sum;
    }
    let table = JointTable::from_unnormalized(cells).expect("normalized exponential draws");
    debug_assert!(table.cells().iter().all(|&c| c > 0.0));
    table
}

/// Standard exponential variate, strictly positive.
fn unit_exponential<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return -u.ln();
        }
    }
}
