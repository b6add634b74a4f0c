//! Block-seeded Monte Carlo mean estimation.
//!
//! Samples are split into fixed-size blocks; block `b` draws from a ChaCha8
//! stream selected by `(seed, b)`. Per-block sums are combined with a tree
//! reduction in block order, so estimates do not depend on thread count.

use crate::par::{map_indexed, tree_sum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const BLOCK: u64 = 8192;

pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Three sample standard deviations of the mean.
    pub err: f64,
    pub samples: u64,
}

/// Estimates `E[g]` from `samples` draws; `draw(rng, buf)` fills one block
/// of per-sample values.
pub fn estimate<F>(samples: u64, seed: u64, draw: F) -> MeanEstimate
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync + Send,
{
    estimate_many(samples, seed, 1, |rng, out| draw(rng, out))
        .into_iter()
        .next()
        .unwrap_or(MeanEstimate { mean: 0.0, err: 0.0, samples: 0 })
}

/// Estimates `k` expectations sharing the same random draws; `draw` writes
/// `k` interleaved values per sample (`out[s * k + j]`).
pub fn estimate_many<F>(samples: u64, seed: u64, k: usize, draw: F) -> Vec<MeanEstimate>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync + Send,
{
    if samples == 0 || k == 0 {
        return vec![MeanEstimate { mean: 0.0, err: 0.0, samples: 0 }; k];
    }
    let blocks = samples.div_ceil(BLOCK);
    let partial: Vec<Vec<(f64, f64)>> = map_indexed(blocks as usize, |b| {
        let b = b as u64;
        let len = BLOCK.min(samples - b * BLOCK) as usize;
        let mut rng = block_rng(seed, b);
        let mut buf = vec![0.0; len * k];
        draw(&mut rng, &mut buf);
        (0..k)
            .map(|j| {
                let vals: Vec<f64> = (0..len).map(|s| buf[s * k + j]).collect();
                let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
                (tree_sum(&vals), tree_sum(&sq))
            })
            .collect()
    });
    let n = samples as f64;
    (0..k)
        .map(|j| {
            let sums: Vec<f64> = partial.iter().map(|p| p[j].0).collect();
            let sqs: Vec<f64> = partial.iter().map(|p| p[j].1).collect();
            let mean = tree_sum(&sums) / n;
            let var = if samples > 1 { ((tree_sum(&sqs) - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
            MeanEstimate { mean, err: 3.0 * (var / n).sqrt(), samples }
        })
        .collect()
}
