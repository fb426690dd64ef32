//! Shared test infrastructure: an independent fixed-step integrator for the
//! eviction dynamics, and a keyed sampler that hands both implementations
//! the same sample values by (page, ordinal).

use owp_core::confbounds::ConfState;
use owp_core::error::RunError;
use owp_core::fractional::SampleSource;
use owp_core::instance::{Instance, PageId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The i-th sample of a page is a pure function of (seed, page, i), so the
/// closed-form solver and the step integrator see identical values no matter
/// when they demand them.
pub fn keyed_sample(inst: &Instance, seed: u64, page: PageId, ordinal: u64) -> f64 {
    let mix = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((page.0 as u64) << 32)
        .wrapping_add(ordinal);
    let mut rng = ChaCha8Rng::seed_from_u64(mix);
    inst.dist(page).sample(&mut rng)
}

pub struct KeyedSampler<'a> {
    pub inst: &'a Instance,
    pub seed: u64,
    pub counters: Vec<u64>,
}

impl<'a> KeyedSampler<'a> {
    pub fn new(inst: &'a Instance, seed: u64) -> Self {
        KeyedSampler { inst, seed, counters: vec![0; inst.n()] }
    }
}

impl SampleSource for KeyedSampler<'_> {
    fn demand(&mut self, page: PageId) -> Result<f64, RunError> {
        self.counters[page.index()] += 1;
        Ok(keyed_sample(self.inst, self.seed, page, self.counters[page.index()]))
    }
}

/// Fixed-step integrator for the continuous eviction, parameterized by total
/// evicted mass: each step distributes `h` page units across the candidates
/// in proportion to `(y + eta) / LCB`. Entirely independent of the
/// closed-form exponential segments.
pub struct EulerOracle<'a> {
    inst: &'a Instance,
    seed: u64,
    h: f64,
    pub eta: f64,
    pub y: Vec<f64>,
    pub m: Vec<f64>,
    next_demand: Vec<u64>,
    counters: Vec<u64>,
    conf: Vec<Option<ConfState>>,
}

impl<'a> EulerOracle<'a> {
    pub fn new(inst: &'a Instance, seed: u64, h: f64) -> Self {
        let n = inst.n();
        EulerOracle {
            inst,
            seed,
            h,
            eta: 1.0 / inst.k as f64,
            y: vec![1.0; n],
            m: vec![0.0; n],
            next_demand: vec![1; n],
            counters: vec![0; n],
            conf: vec![None; n],
        }
    }

    fn draw(&mut self, p: usize) -> f64 {
        self.counters[p] += 1;
        keyed_sample(self.inst, self.seed, PageId(p as u32), self.counters[p])
    }

    pub fn serve(&mut self, p_t: PageId) {
        let n = self.inst.n();
        let pi = p_t.index();
        self.y[pi] = 0.0;
        if self.conf[pi].is_none() {
            self.m[pi] = 0.0;
            let v = self.draw(pi);
            self.conf[pi] = Some(ConfState::first(v, n, self.inst.t_horizon));
        }
        let target = (n - self.inst.k as usize) as f64;
        loop {
            let sum: f64 = self.y.iter().sum();
            if sum >= target - 1e-13 * n as f64 {
                break;
            }
            // one mass step of size h (or the remaining deficit)
            let step = self.h.min(target - sum);
            let rates: Vec<f64> = (0..n)
                .map(|q| {
                    if q == pi || self.y[q] >= 1.0 {
                        0.0
                    } else {
                        (self.y[q] + self.eta) / self.conf[q].as_ref().unwrap().lcb
                    }
                })
                .collect();
            let total_rate: f64 = rates.iter().sum();
            assert!(total_rate > 0.0, "no candidate under deficit");
            let mut sampled = Vec::new();
            for q in 0..n {
                if rates[q] == 0.0 {
                    continue;
                }
                let dy = (step * rates[q] / total_rate).min(1.0 - self.y[q]);
                self.y[q] += dy;
                self.m[q] += dy;
                if self.m[q] >= self.next_demand[q] as f64 {
                    self.next_demand[q] += 1;
                    sampled.push(q);
                }
            }
            for q in sampled {
                let v = self.draw(q);
                self.conf[q]
                    .as_mut()
                    .unwrap()
                    .update(v, n, self.inst.t_horizon);
            }
        }
    }
}

/// Uniform requests over a fresh random instance with mixed weight kinds.
pub fn fuzz_instance(max_n: usize, max_k: u32, max_t: u32, seed: u64) -> Instance {
    owp_core::generate::random_instance(max_n, max_k, max_t, seed)
}

/// Convenience draw for tests that need plain rng values.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
