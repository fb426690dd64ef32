//! Reference eviction policies. Costs accrue on eviction at true weights,
//! matching the main pipeline's accounting.

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::RunError;
use crate::instance::Instance;
use crate::pipeline::{run_pipeline, ArithmeticMode, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    Lru,
    RandomEvict,
    Marking,
    /// The full fractional-plus-rounding pipeline with confidence bounds
    /// pinned to the true weights; isolates the cost of exploration.
    KnownWeights,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Lru => "lru",
            Policy::RandomEvict => "random",
            Policy::Marking => "marking",
            Policy::KnownWeights => "known_weights",
        }
    }
}

/// Simulates the policy over the request sequence; returns the total
/// eviction cost at true weights.
pub fn run_policy(policy: Policy, inst: &Instance, seed: u64) -> Result<f64, RunError> {
    inst.validate()?;
    match policy {
        Policy::Lru => Ok(lru(inst)),
        Policy::RandomEvict => Ok(random_evict(inst, seed)),
        Policy::Marking => Ok(marking(inst, seed)),
        Policy::KnownWeights => {
            let out = run_pipeline(inst, seed, &RunConfig::pinned(ArithmeticMode::Float))?;
            Ok(out.ledger.on_cost)
        }
    }
}

fn lru(inst: &Instance) -> f64 {
    let k = inst.k as usize;
    let mut cache: Vec<usize> = Vec::with_capacity(k); // most recent last
    let mut cost = 0.0;
    for &r in &inst.requests {
        let p = r.index();
        if let Some(pos) = cache.iter().position(|&q| q == p) {
            cache.remove(pos);
        } else if cache.len() == k {
            let victim = cache.remove(0);
            cost += inst.weights()[victim];
        }
        cache.push(p);
        debug_assert!(cache.len() <= k);
    }
    cost
}

fn random_evict(inst: &Instance, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = inst.k as usize;
    let w = inst.weights();
    let mut cached = vec![false; inst.n()];
    let mut size = 0usize;
    let mut cost = 0.0;
    for &r in &inst.requests {
        let p = r.index();
        if cached[p] {
            continue;
        }
        if size == k {
            let victim = (0..inst.n()).filter(|&q| cached[q]).choose(&mut rng).unwrap();
            cached[victim] = false;
            size -= 1;
            cost += w[victim];
        }
        cached[p] = true;
        size += 1;
    }
    cost
}

/// Classic randomized marking: a miss with every cached page marked starts a
/// new phase; victims are drawn uniformly among unmarked pages.
fn marking(inst: &Instance, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = inst.k as usize;
    let w = inst.weights();
    let mut cached = vec![false; inst.n()];
    let mut marked = vec![false; inst.n()];
    let mut size = 0usize;
    let mut cost = 0.0;
    for &r in &inst.requests {
        let p = r.index();
        if cached[p] {
            marked[p] = true;
            continue;
        }
        if size == k {
            if (0..inst.n()).all(|q| !cached[q] || marked[q]) {
                for q in 0..inst.n() {
                    marked[q] = false;
                }
            }
            let victim = (0..inst.n())
                .filter(|&q| cached[q] && !marked[q])
                .choose(&mut rng)
                .expect("an unmarked cached page exists after the phase reset");
            cached[victim] = false;
            size -= 1;
            cost += w[victim];
        }
        cached[p] = true;
        marked[p] = true;
        size += 1;
    }
    cost
}
