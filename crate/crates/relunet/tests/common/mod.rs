//! Shared helpers: seeded random networks and probe points.
//!
//! Each integration test target compiles its own copy, and no single target
//! uses every helper.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relunet::{Architecture, Network, SparseMat, SparseVec, WeightMode};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random strict network with the given input dimension and depth; hidden
/// and output widths, entry pattern, and values all come from the rng.
pub fn random_net(rng: &mut ChaCha8Rng, input_dim: usize, depth: usize) -> Network {
    let output_dim = rng.gen_range(1..=4);
    random_net_shaped(rng, input_dim, depth, output_dim, false)
}

/// Same, with every shift forced to zero.
pub fn random_zero_shift_net(rng: &mut ChaCha8Rng, input_dim: usize, depth: usize) -> Network {
    let output_dim = rng.gen_range(1..=4);
    random_net_shaped(rng, input_dim, depth, output_dim, true)
}

pub fn random_net_shaped(
    rng: &mut ChaCha8Rng,
    input_dim: usize,
    depth: usize,
    output_dim: usize,
    zero_shifts: bool,
) -> Network {
    let mut widths = vec![input_dim];
    for _ in 0..depth {
        widths.push(rng.gen_range(1..=5));
    }
    widths.push(output_dim);
    let arch = Architecture::new(depth, widths.clone()).unwrap();

    let mut weights = Vec::with_capacity(depth + 1);
    for l in 0..=depth {
        let (rows, cols) = (widths[l + 1], widths[l]);
        let mut entries = Vec::new();
        for r in 0..rows as u32 {
            for c in 0..cols as u32 {
                if rng.gen::<f64>() < 0.7 {
                    entries.push((r, c, rng.gen_range(-1.0..=1.0)));
                }
            }
        }
        weights.push(SparseMat::new(rows, cols, entries).unwrap());
    }

    let mut shifts = Vec::with_capacity(depth);
    for l in 1..=depth {
        let mut entries = Vec::new();
        if !zero_shifts {
            for i in 0..widths[l] as u32 {
                if rng.gen::<f64>() < 0.5 {
                    entries.push((i, rng.gen_range(-1.0..=1.0)));
                }
            }
        }
        shifts.push(SparseVec::new(widths[l], entries).unwrap());
    }
    Network::new(arch, weights, shifts, WeightMode::Strict).unwrap()
}

/// One probe point in `[-1, 1]^dim`.
pub fn probe(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}
