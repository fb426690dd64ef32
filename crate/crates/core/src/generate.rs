//! Instance generators.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::instance::{Instance, PageId, WeightDistribution};

/// `k + 1` pages with the same weight distribution, each request uniform
/// over them. Any online policy pays about one miss per `k + 1` requests on
/// this family while the offline optimum rides out long phases.
pub fn gen_adversarial(k: u32, t_horizon: u32, dist: WeightDistribution, seed: u64) -> Instance {
    let n = k as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let requests = (0..t_horizon)
        .map(|_| PageId(rng.random_range(0..n as u32)))
        .collect();
    Instance::new(k, vec![dist; n], requests).expect("construction is valid")
}

/// Requests drawn i.i.d. with P(rank r) proportional to `r^-exponent`
/// (ranks 1..=n map to pages 0..n); `exponent = 0` is uniform.
pub fn gen_zipf(
    n: usize,
    k: u32,
    t_horizon: u32,
    exponent: f64,
    dist: WeightDistribution,
    seed: u64,
) -> Instance {
    assert!(n > k as usize, "n must exceed k");
    assert!(exponent >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cumulative.push(acc);
    }
    let requests = (0..t_horizon)
        .map(|_| {
            let u: f64 = rng.random();
            let idx = cumulative.partition_point(|&c| c < u).min(n - 1);
            PageId(idx as u32)
        })
        .collect();
    Instance::new(k, vec![dist; n], requests).expect("construction is valid")
}

/// Random instance for fuzzing: random size, mixed distribution kinds,
/// uniform requests.
pub fn random_instance(max_n: usize, max_k: u32, max_t: u32, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n.max(2));
    let k = rng.random_range(1..=(n as u32 - 1).min(max_k));
    let t = rng.random_range(1..=max_t);
    let pages = (0..n)
        .map(|_| match rng.random_range(0..3u8) {
            0 => WeightDistribution::Deterministic { value: rng.random_range(0.05..=1.0) },
            1 => {
                let low = rng.random_range(0.05..0.5);
                let high = rng.random_range(low..=1.0);
                WeightDistribution::TwoPoint { low, high, p_high: rng.random_range(0.0..=1.0) }
            }
            _ => WeightDistribution::ScaledBeta {
                alpha: rng.random_range(0.5..4.0),
                beta: rng.random_range(0.5..4.0),
                floor: rng.random_range(0.05..0.9),
            },
        })
        .collect();
    let requests = (0..t).map(|_| PageId(rng.random_range(0..n as u32))).collect();
    Instance::new(k, pages, requests).expect("construction is valid")
}
