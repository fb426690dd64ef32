//! Exact offline optimum for weighted paging.
//!
//! Forward dynamic program over cached sets (bitmasks with at most `k`
//! pages). Transitions are lazy: on a hit the cache stays put; on a miss the
//! requested page is fetched, evicting at most one page (any non-lazy
//! schedule converts to a lazy one of no greater cost). Evicting page `p`
//! costs `w_p`; the first fetches into empty slots are free.

use crate::error::RunError;
use crate::instance::Instance;

/// Witnessed optimal schedule: total cost plus the cached set after each
/// round.
#[derive(Debug, Clone)]
pub struct OptSchedule {
    pub cost: f64,
    /// `caches[t]` is the cached-set bitmask after serving request `t`
    /// (0-based); before round 0 the cache is empty.
    pub caches: Vec<u64>,
}

fn guard(inst: &Instance) -> Result<(), RunError> {
    let n = inst.n();
    let k = inst.k;
    let t = inst.t_horizon;
    let small_cache = k <= 5;
    let small_complement = n as u32 - k <= 4;
    if n > 12 || t > 10_000 || !(small_cache || small_complement) {
        return Err(RunError::OracleTooLarge { n, k, t });
    }
    Ok(())
}

/// All cached-set masks with at most `k` of `n` pages, in numeric order.
fn reachable_states(n: usize, k: u32) -> Vec<u32> {
    (0u32..(1 << n)).filter(|s| s.count_ones() <= k).collect()
}

/// Set order used for witness tie-breaking: the set containing the smallest
/// differing page comes first.
fn set_before(a: u32, b: u32) -> bool {
    let diff = a ^ b;
    diff != 0 && a & (1 << diff.trailing_zeros()) != 0
}

/// Exact optimum with a lazy witness schedule.
pub fn exact_opt(inst: &Instance) -> Result<OptSchedule, RunError> {
    guard(inst)?;
    let n = inst.n();
    let states = reachable_states(n, inst.k);
    let index_of = {
        let mut map = vec![u16::MAX; 1 << n];
        for (i, &s) in states.iter().enumerate() {
            map[s as usize] = i as u16;
        }
        map
    };
    let w = inst.weights();
    let ns = states.len();

    let mut dp = vec![f64::INFINITY; ns];
    dp[index_of[0] as usize] = 0.0;
    let mut prev: Vec<Vec<u16>> = Vec::with_capacity(inst.requests.len());

    for &p in &inst.requests {
        let pb = 1u32 << p.0;
        let mut next = vec![f64::INFINITY; ns];
        let mut back = vec![u16::MAX; ns];
        let relax = |next: &mut Vec<f64>, back: &mut Vec<u16>, to: u32, cost: f64, from: u16| {
            let ti = index_of[to as usize] as usize;
            let replace = cost < next[ti]
                || (cost == next[ti]
                    && back[ti] != u16::MAX
                    && set_before(states[from as usize], states[back[ti] as usize]));
            if replace {
                next[ti] = cost;
                back[ti] = from;
            }
        };
        for (si, &s) in states.iter().enumerate() {
            let cost = dp[si];
            if !cost.is_finite() {
                continue;
            }
            let from = si as u16;
            if s & pb != 0 {
                relax(&mut next, &mut back, s, cost, from);
            } else {
                if s.count_ones() < inst.k {
                    relax(&mut next, &mut back, s | pb, cost, from);
                }
                let mut rest = s;
                while rest != 0 {
                    let q = rest.trailing_zeros();
                    rest &= rest - 1;
                    relax(&mut next, &mut back, (s | pb) & !(1 << q), cost + w[q as usize], from);
                }
            }
        }
        dp = next;
        prev.push(back);
    }

    let mut best: Option<usize> = None;
    for (si, &c) in dp.iter().enumerate() {
        if !c.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => c < dp[b] || (c == dp[b] && set_before(states[si], states[b])),
        };
        if better {
            best = Some(si);
        }
    }
    let best = best.expect("some schedule is always feasible");

    let mut caches = vec![0u64; inst.requests.len()];
    let mut cur = best as u16;
    for t in (0..inst.requests.len()).rev() {
        caches[t] = states[cur as usize] as u64;
        cur = prev[t][cur as usize];
    }
    Ok(OptSchedule { cost: dp[best], caches })
}

/// Optimum cost only, with rolling state (no witness memory).
pub fn exact_opt_cost(inst: &Instance) -> Result<f64, RunError> {
    guard(inst)?;
    let n = inst.n();
    let states = reachable_states(n, inst.k);
    let index_of = {
        let mut map = vec![u16::MAX; 1 << n];
        for (i, &s) in states.iter().enumerate() {
            map[s as usize] = i as u16;
        }
        map
    };
    let w = inst.weights();
    let mut dp = vec![f64::INFINITY; states.len()];
    dp[index_of[0] as usize] = 0.0;
    let mut next = vec![f64::INFINITY; states.len()];
    for &p in &inst.requests {
        let pb = 1u32 << p.0;
        next.iter_mut().for_each(|c| *c = f64::INFINITY);
        for (si, &s) in states.iter().enumerate() {
            let cost = dp[si];
            if !cost.is_finite() {
                continue;
            }
            if s & pb != 0 {
                let ti = index_of[s as usize] as usize;
                next[ti] = next[ti].min(cost);
            } else {
                if s.count_ones() < inst.k {
                    let ti = index_of[(s | pb) as usize] as usize;
                    next[ti] = next[ti].min(cost);
                }
                let mut rest = s;
                while rest != 0 {
                    let q = rest.trailing_zeros();
                    rest &= rest - 1;
                    let ti = index_of[((s | pb) & !(1 << q)) as usize] as usize;
                    next[ti] = next[ti].min(cost + w[q as usize]);
                }
            }
        }
        std::mem::swap(&mut dp, &mut next);
    }
    Ok(dp.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Farthest-in-future eviction; exact offline optimum for equal weights.
/// Returns the total eviction cost (`evictions * weight`).
pub fn belady(inst: &Instance) -> Result<f64, RunError> {
    let w = inst.weights();
    let w0 = w[0];
    if w.iter().any(|&x| x != w0) {
        return Err(RunError::Diagnostics("belady requires equal weights".into()));
    }
    let t_len = inst.requests.len();
    // next_use[t] = next position of requests[t] strictly after t
    let mut next_use = vec![usize::MAX; t_len];
    let mut last_seen = vec![usize::MAX; inst.n()];
    for t in (0..t_len).rev() {
        let p = inst.requests[t].index();
        next_use[t] = last_seen[p];
        last_seen[p] = t;
    }
    let mut cached: Vec<Option<usize>> = vec![None; inst.n()]; // next use per cached page
    let mut in_cache = vec![false; inst.n()];
    let mut size = 0usize;
    let mut evictions = 0u64;
    for t in 0..t_len {
        let p = inst.requests[t].index();
        if in_cache[p] {
            cached[p] = (next_use[t] != usize::MAX).then_some(next_use[t]);
            continue;
        }
        if size == inst.k as usize {
            // evict the page requested farthest in the future (never again
            // counts as infinitely far); ties toward the smaller id
            let victim = (0..inst.n())
                .filter(|&q| in_cache[q])
                .max_by_key(|&q| (cached[q].unwrap_or(usize::MAX), std::cmp::Reverse(q)))
                .expect("cache is non-empty");
            in_cache[victim] = false;
            cached[victim] = None;
            size -= 1;
            evictions += 1;
        }
        in_cache[p] = true;
        cached[p] = (next_use[t] != usize::MAX).then_some(next_use[t]);
        size += 1;
    }
    Ok(evictions as f64 * w0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{PageId, WeightDistribution};

    fn det(w: f64) -> WeightDistribution {
        WeightDistribution::Deterministic { value: w }
    }

    fn inst(k: u32, weights: &[f64], reqs: &[u32]) -> Instance {
        Instance::new(k, weights.iter().map(|&w| det(w)).collect(), reqs.iter().map(|&r| PageId(r)).collect())
            .unwrap()
    }

    /// Unrestricted DP over all subset transitions; exponential, test-only.
    fn brute_force_opt(inst: &Instance) -> f64 {
        let n = inst.n();
        let w = inst.weights();
        let mut dp = vec![f64::INFINITY; 1 << n];
        dp[0] = 0.0;
        for &p in &inst.requests {
            let pb = 1u32 << p.0;
            let mut next = vec![f64::INFINITY; 1 << n];
            for s in 0u32..(1 << n) {
                if !dp[s as usize].is_finite() || s.count_ones() > inst.k {
                    continue;
                }
                let union = s | pb;
                // every subset of `union` containing p with <= k pages
                let mut sub = union;
                loop {
                    if sub & pb != 0 && sub.count_ones() <= inst.k {
                        let evicted = s & !sub;
                        let mut cost = dp[s as usize];
                        let mut rest = evicted;
                        while rest != 0 {
                            let q = rest.trailing_zeros();
                            rest &= rest - 1;
                            cost += w[q as usize];
                        }
                        if cost < next[sub as usize] {
                            next[sub as usize] = cost;
                        }
                    }
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & union;
                }
            }
            dp = next;
        }
        dp.iter().copied().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn two_pages_alternating() {
        let i = inst(1, &[1.0, 0.5], &[0, 1, 0]);
        let opt = exact_opt(&i).unwrap();
        assert_eq!(opt.cost, 1.5);
        assert_eq!(opt.cost, brute_force_opt(&i));
        assert_eq!(opt.cost, exact_opt_cost(&i).unwrap());
    }

    #[test]
    fn cheap_page_absorbs_evictions() {
        let i = inst(2, &[1.0, 1.0, 0.1], &[0, 1, 2, 0, 1]);
        let opt = exact_opt(&i).unwrap();
        assert!((opt.cost - 1.1).abs() < 1e-12);
        assert_eq!(opt.cost, brute_force_opt(&i));
    }

    #[test]
    fn single_page_repeats_cost_zero() {
        let i = inst(1, &[0.7, 0.3], &[0, 0, 0, 0]);
        assert_eq!(exact_opt(&i).unwrap().cost, 0.0);
    }

    #[test]
    fn witness_is_lazy_and_feasible() {
        let i = inst(2, &[0.9, 0.4, 0.6, 0.2], &[0, 1, 2, 3, 0, 2, 1, 3]);
        let opt = exact_opt(&i).unwrap();
        let mut prev = 0u64;
        for (t, &cache) in opt.caches.iter().enumerate() {
            let p = i.requests[t].0;
            assert!(cache & (1 << p) != 0, "requested page cached");
            assert!(cache.count_ones() <= i.k);
            if prev & (1 << p) != 0 {
                assert_eq!(cache, prev, "lazy: no move on a hit");
            } else {
                let evicted = prev & !cache;
                assert!(evicted.count_ones() <= 1, "lazy: at most one eviction");
                assert_eq!(cache & !(prev | (1 << p)), 0, "only the request enters");
            }
            prev = cache;
        }
    }

    #[test]
    fn matches_brute_force_on_randoms() {
        // small deterministic pseudo-random sweep
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..40 {
            let n = 2 + (next() % 3) as usize; // 2..4
            let k = 1 + (next() % (n as u64 - 1)) as u32;
            let t = 1 + (next() % 6) as usize;
            let weights: Vec<f64> = (0..n).map(|_| 0.1 + (next() % 10) as f64 * 0.1).collect();
            let reqs: Vec<u32> = (0..t).map(|_| (next() % n as u64) as u32).collect();
            let i = inst(k, &weights, &reqs);
            let lazy = exact_opt(&i).unwrap().cost;
            let brute = brute_force_opt(&i);
            assert!((lazy - brute).abs() < 1e-12, "lazy {lazy} vs brute {brute}");
        }
    }

    #[test]
    fn belady_alternating_pair() {
        let i = inst(1, &[1.0, 1.0], &[0, 1, 0, 1]);
        assert_eq!(belady(&i).unwrap(), 3.0);
        assert_eq!(exact_opt(&i).unwrap().cost, 3.0);
    }

    #[test]
    fn belady_all_distinct() {
        let i = inst(2, &[1.0; 5], &[0, 1, 2, 3, 4]);
        assert_eq!(belady(&i).unwrap(), 3.0); // T - k
    }

    #[test]
    fn oracle_guard_rejects_large() {
        let i = inst(6, &[1.0; 13], &[0]);
        assert!(matches!(exact_opt(&i), Err(RunError::OracleTooLarge { .. })));
    }
}
