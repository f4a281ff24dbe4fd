//! Seeded smooth random test functions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::C64;

/// Independent stream for task `task` of a run seeded with `seed`.
pub fn task_rng(seed: u64, task: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(task);
    r
}

/// Sum of a few complex Gaussian bumps centered in `[lo, hi]`.
pub fn random_bumps(points: &[f64], lo: f64, hi: f64, rng: &mut impl Rng) -> Vec<C64> {
    let count = rng.random_range(1..=4);
    let bumps: Vec<(f64, f64, C64)> = (0..count)
        .map(|_| {
            let c = rng.random_range(lo..=hi);
            let w = rng.random_range(0.3..1.5);
            let a = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (c, w, a)
        })
        .collect();
    points
        .iter()
        .map(|&t| bumps.iter().map(|(c, w, a)| a * (-((t - c) / w).powi(2)).exp()).sum())
        .collect()
}
