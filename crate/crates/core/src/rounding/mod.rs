//! Randomized rounding layer: an explicit distribution over anti-cache sets.
//!
//! The distribution stays *consistent* (per-page marginals equal the
//! fractional anti-servers) and *balanced*: grouping pages into classes by
//! UCB magnitude (class `j` holds pages with `UCB in (6^j, 6^(j+1)]`), every
//! support state contains either `floor(Y_j)` or `ceil(Y_j)` pages of class
//! `>= j`, where `Y_j` is the fractional mass on those pages. Balance plus
//! consistency keep every support state a legal cache. After any event that
//! disturbs balance, `rebalance` moves single pages between equal measures
//! of states, working classes from the highest imbalanced one downward.

mod measure;
mod realize;

pub use measure::{window_deviation, Measure, THETA};

/// Measures at or below this are treated as float-mode noise: ignored by
/// the rebalancer and removed by the normalization sweep.
const FLOAT_SLIVER: f64 = 1e-12;
pub use realize::{realize_trajectory, RealizedRun, TransferStep};

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::Rng;

use crate::error::RunError;
use crate::instance::{Instance, PageId};

/// A set of pages missing from the cache, as a bitmask. Ordered by the
/// smallest differing page id (the set containing it sorts first), which
/// makes map iteration deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PageSet(pub u64);

impl PageSet {
    pub const EMPTY: PageSet = PageSet(0);

    pub fn full(n: usize) -> PageSet {
        assert!(n <= 64, "rounding layer supports at most 64 pages");
        if n == 64 {
            PageSet(u64::MAX)
        } else {
            PageSet((1u64 << n) - 1)
        }
    }

    pub fn contains(self, p: PageId) -> bool {
        self.0 & (1u64 << p.0) != 0
    }

    #[must_use]
    pub fn with(self, p: PageId) -> PageSet {
        PageSet(self.0 | (1u64 << p.0))
    }

    #[must_use]
    pub fn without(self, p: PageId) -> PageSet {
        PageSet(self.0 & !(1u64 << p.0))
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Number of pages shared with `mask`.
    pub fn count_in(self, mask: u64) -> u32 {
        (self.0 & mask).count_ones()
    }

    pub fn iter(self) -> impl Iterator<Item = PageId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let p = bits.trailing_zeros();
                bits &= bits - 1;
                Some(PageId(p))
            }
        })
    }
}

impl Ord for PageSet {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = self.0 ^ other.0;
        if diff == 0 {
            return Ordering::Equal;
        }
        let low = diff.trailing_zeros();
        if self.0 & (1u64 << low) != 0 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
}

impl PartialOrd for PageSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Class of a page with upper confidence bound `u`: the unique `j` with
/// `6^j < u <= 6^(j+1)`. Pages never sampled sit at `UCB = 1`, class `-1`.
pub fn class_of_ucb(u: f64) -> i32 {
    assert!(u > 0.0 && u <= 1.0, "ucb out of range: {u}");
    let mut j = (u.ln() / 6f64.ln()).ceil() as i32 - 1;
    while 6f64.powi(j + 1) < u {
        j += 1;
    }
    while 6f64.powi(j) >= u {
        j -= 1;
    }
    j
}

/// Per-page stored weight samples awaiting a solver demand.
///
/// The very first demand for a page is served by a direct evict-and-refetch
/// draw (the page was just fetched, so it is cached with probability one);
/// every later demand must find the slot filled by the refill at the end of
/// the page's preceding request.
#[derive(Debug, Clone)]
pub struct SampleQueue {
    slots: Vec<Option<f64>>,
    ever_demanded: Vec<bool>,
}

impl SampleQueue {
    pub fn new(n: usize) -> Self {
        SampleQueue { slots: vec![None; n], ever_demanded: vec![false; n] }
    }

    /// Serves a solver demand; returns the sample and the eviction cost paid
    /// (the page's true weight for a direct draw, zero for a stored sample).
    pub fn demand<R: Rng>(
        &mut self,
        page: PageId,
        inst: &Instance,
        rng: &mut R,
    ) -> Result<(f64, f64), RunError> {
        let i = page.index();
        if !self.ever_demanded[i] {
            self.ever_demanded[i] = true;
            assert!(self.slots[i].is_none(), "slot filled before first demand");
            let v = inst.dist(page).sample(rng);
            return Ok((v, inst.weight(page)));
        }
        match self.slots[i].take() {
            Some(v) => Ok((v, 0.0)),
            None => Err(RunError::SampleUnavailable(page)),
        }
    }

    /// Refills the slot at the end of a request for `page` if it is empty;
    /// returns the eviction cost paid (zero on a no-op).
    pub fn ensure<R: Rng>(&mut self, page: PageId, inst: &Instance, rng: &mut R) -> f64 {
        let i = page.index();
        if self.slots[i].is_none() {
            self.slots[i] = Some(inst.dist(page).sample(rng));
            inst.weight(page)
        } else {
            0.0
        }
    }

    pub fn slot(&self, page: PageId) -> Option<f64> {
        self.slots[page.index()]
    }
}

/// What one rebalance call did.
#[derive(Debug, Clone, Copy, Default)]
pub struct RebalanceOutcome {
    /// Expected eviction cost of the moves at true weights.
    pub true_cost: f64,
    /// The same moves priced at current UCBs.
    pub ucb_cost: f64,
    /// Largest pre-call imbalance over classes `<= j_max`.
    pub pre_eps: f64,
    /// Highest imbalanced class before the call, if any.
    pub j_max: Option<i32>,
    /// Whether `ucb_cost <= 12 * pre_eps * 6^j_max` held (vacuously true
    /// when nothing was imbalanced).
    pub bound_ok: bool,
    pub moves: u32,
}

impl RebalanceOutcome {
    fn balanced() -> Self {
        RebalanceOutcome { bound_ok: true, ..Default::default() }
    }
}

#[derive(Debug, Clone)]
pub struct RoundingState<M: Measure> {
    n: usize,
    k: u32,
    support: BTreeMap<PageSet, M>,
    /// Tracked anti-server marginals; kept equal to the support's marginals
    /// by construction.
    y: Vec<M>,
    ucb: Vec<f64>,
    class: Vec<i32>,
    weights: Vec<f64>,
    transfers: Option<Vec<TransferStep>>,
}

impl<M: Measure> RoundingState<M> {
    /// Starts from the empty cache: all pages in the anti-cache.
    pub fn new(inst: &Instance) -> Self {
        let n = inst.n();
        let mut support = BTreeMap::new();
        support.insert(PageSet::full(n), M::one());
        RoundingState {
            n,
            k: inst.k,
            support,
            y: vec![M::one(); n],
            ucb: vec![1.0; n],
            class: vec![-1; n],
            weights: inst.weights(),
            transfers: None,
        }
    }

    pub fn record_transfers(&mut self, on: bool) {
        self.transfers = on.then(Vec::new);
    }

    pub fn take_transfers(&mut self) -> Vec<TransferStep> {
        self.transfers.take().unwrap_or_default()
    }

    pub fn support(&self) -> &BTreeMap<PageSet, M> {
        &self.support
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    pub fn tracked_y(&self, p: PageId) -> &M {
        &self.y[p.index()]
    }

    pub fn page_class(&self, p: PageId) -> i32 {
        self.class[p.index()]
    }

    pub fn page_ucb(&self, p: PageId) -> f64 {
        self.ucb[p.index()]
    }

    /// Marginal of `p` recomputed from the support.
    pub fn marginal(&self, p: PageId) -> M {
        self.support
            .iter()
            .filter(|(s, _)| s.contains(p))
            .fold(M::zero(), |acc, (_, m)| acc.add(m))
    }

    pub fn total_mass(&self) -> M {
        self.support.values().fold(M::zero(), |acc, m| acc.add(m))
    }

    /// Bitmask of pages with class `>= j`.
    fn mask_ge(&self, j: i32) -> u64 {
        let mut mask = 0u64;
        for (p, &c) in self.class.iter().enumerate() {
            if c >= j {
                mask |= 1u64 << p;
            }
        }
        mask
    }

    /// Total anti-server mass on pages of class `>= j`.
    pub fn class_mass(&self, j: i32) -> M {
        let mut acc = M::zero();
        for (p, &c) in self.class.iter().enumerate() {
            if c >= j {
                acc = acc.add(&self.y[p]);
            }
        }
        acc
    }

    /// Measure-weighted deviation of class `j` from its balanced window.
    pub fn imbalance(&self, j: i32) -> M {
        let mask = self.mask_ge(j);
        let (floor, ceil) = self.class_mass(j).floor_ceil();
        let mut acc = M::zero();
        for (s, m) in &self.support {
            let dev = window_deviation(s.count_in(mask) as i64, floor, ceil);
            if dev > 0 {
                acc = acc.add(&m.mul(&M::from_int(dev)));
            }
        }
        acc
    }

    /// Distinct classes among pages, descending.
    pub fn classes_desc(&self) -> Vec<i32> {
        let mut cs: Vec<i32> = self.class.clone();
        cs.sort_unstable_by(|a, b| b.cmp(a));
        cs.dedup();
        cs
    }

    pub fn is_balanced(&self) -> bool {
        self.classes_desc().iter().all(|&j| {
            let im = self.imbalance(j);
            if M::EXACT {
                im.is_zero()
            } else {
                im.to_f64() <= THETA
            }
        })
    }

    fn log_transfer(&mut self, from: PageSet, to: PageSet, moved: &M, pre: &M) {
        if let Some(log) = &mut self.transfers {
            let prob = (moved.to_f64() / pre.to_f64()).clamp(0.0, 1.0);
            log.push(TransferStep { from, to, prob });
        }
    }

    /// Moves `amount` of measure from state `from` to state `to`.
    fn move_measure(&mut self, from: PageSet, to: PageSet, amount: &M) {
        if from == to || amount.is_zero() {
            return;
        }
        let pre = self.support.get(&from).expect("source state exists").clone();
        self.log_transfer(from, to, amount, &pre);
        let rest = pre.sub(amount);
        if rest.is_zero() {
            self.support.remove(&from);
        } else {
            self.support.insert(from, rest);
        }
        let slot = self.support.entry(to).or_insert_with(M::zero);
        *slot = slot.add(amount);
    }

    /// Support states sorted by descending measure, ties by set order.
    fn sorted_states<F: Fn(&PageSet) -> bool>(&self, pred: F) -> Vec<(PageSet, M)> {
        let mut v: Vec<(PageSet, M)> = self
            .support
            .iter()
            .filter(|(s, _)| pred(s))
            .map(|(s, m)| (*s, m.clone()))
            .collect();
        v.sort_by(|a, b| b.1.cmp_m(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// Mirrors a fractional eviction of `dy` onto the distribution: adds `p`
    /// to a `dy`-measure of states not containing it, then rebalances.
    /// Returns the expected consistency-eviction cost and the rebalance
    /// outcome.
    pub fn apply_evict(&mut self, p: PageId, dy: f64) -> Result<(f64, RebalanceOutcome), RunError> {
        let cost = self.spread_eviction(p, &M::from_f64(dy))?;
        self.normalize_if_float();
        let reb = self.rebalance();
        Ok((cost, reb))
    }

    fn spread_eviction(&mut self, p: PageId, want: &M) -> Result<f64, RunError> {
        let avail = M::one().sub(&self.y[p.index()]);
        // the solver hands us f64 amounts; clamping absorbs the seam noise
        if want.to_f64() - avail.to_f64() > 1e-9 {
            return Err(RunError::RoundingInvariant(format!(
                "evict {} of page {p} exceeds available measure {}",
                want.to_f64(),
                avail.to_f64()
            )));
        }
        let mut assigned = want.min_m(&avail);
        let mut remaining = assigned.clone();
        for (s, m) in self.sorted_states(|s| !s.contains(p)) {
            if remaining.is_zero() {
                break;
            }
            let take = remaining.min_m(&m);
            self.move_measure(s, s.with(p), &take);
            remaining = remaining.sub(&take);
        }
        if !remaining.is_zero() {
            assert!(
                !M::EXACT && remaining.to_f64() <= FLOAT_SLIVER,
                "consistency guarantees enough measure without {p} (short by {})",
                remaining.to_f64()
            );
            assigned = assigned.sub(&remaining);
        }
        self.y[p.index()] = self.y[p.index()].add(&assigned);
        Ok(assigned.to_f64() * self.weights[p.index()])
    }

    /// Evicts the residual mass `n - k - sum(y)` left by the solver's
    /// root-finding tolerance, so the total anti-server mass sits exactly on
    /// its integer target and balance forces every state to a legal cache.
    /// No-op when the mass is already at or above the target.
    pub fn top_up_to_target(
        &mut self,
        p_t: PageId,
        target: i64,
    ) -> Result<Option<(f64, RebalanceOutcome)>, RunError> {
        let total = self.y.iter().fold(M::zero(), |acc, y| acc.add(y));
        let target_m = M::from_int(target);
        if target_m.cmp_m(&total) != Ordering::Greater {
            // prune float slivers before the caller's validity check
            self.normalize_if_float();
            return Ok(None);
        }
        let mut missing = target_m.sub(&total);
        if missing.to_f64() > 1e-9 {
            return Err(RunError::RoundingInvariant(format!(
                "anti-server mass {} too far below target {target}",
                total.to_f64()
            )));
        }
        let mut cost = 0.0;
        for p in 0..self.n {
            if missing.is_zero() {
                break;
            }
            if p == p_t.index() {
                continue;
            }
            let slack = M::one().sub(&self.y[p]);
            if !slack.is_positive_m() {
                continue;
            }
            let dy = missing.min_m(&slack);
            cost += self.spread_eviction(PageId(p as u32), &dy)?;
            missing = missing.sub(&dy);
        }
        assert!(missing.is_zero(), "cache slack covers the residual");
        self.normalize_if_float();
        let reb = self.rebalance();
        Ok(Some((cost, reb)))
    }

    /// Mirrors the fetch of `p`: removes it from every state (no cost), then
    /// rebalances.
    pub fn apply_fetch(&mut self, p: PageId) -> RebalanceOutcome {
        let holders: Vec<(PageSet, M)> = self
            .support
            .iter()
            .filter(|(s, _)| s.contains(p))
            .map(|(s, m)| (*s, m.clone()))
            .collect();
        for (s, m) in holders {
            self.move_measure(s, s.without(p), &m);
        }
        self.y[p.index()] = M::zero();
        self.normalize_if_float();
        self.rebalance()
    }

    /// Applies a confidence-bound update. A UCB drop within the same class
    /// keeps the distribution balanced; a class drop may not, so rebalance.
    pub fn apply_conf_update(&mut self, p: PageId, ucb: f64) -> RebalanceOutcome {
        let i = p.index();
        debug_assert!(ucb <= self.ucb[i] + 1e-12, "ucb must not increase");
        self.ucb[i] = ucb;
        let c = class_of_ucb(ucb);
        if c < self.class[i] {
            self.class[i] = c;
            self.rebalance()
        } else {
            RebalanceOutcome::balanced()
        }
    }

    /// Checks post-request validity: every state is a legal cache complement
    /// and the just-requested page is cached with probability one. Returns a
    /// description of the first offending state.
    pub fn validity_violation(&self, p_t: PageId) -> Option<String> {
        for (s, m) in &self.support {
            if self.n as u32 - s.len() > self.k {
                return Some(format!(
                    "state {:?} (measure {}) caches {} > k pages; mass {}",
                    s.iter().map(|p| p.0).collect::<Vec<_>>(),
                    m.to_f64(),
                    self.n as u32 - s.len(),
                    self.total_mass().to_f64(),
                ));
            }
            if s.contains(p_t) {
                return Some(format!(
                    "requested page {p_t} missing on measure {}",
                    m.to_f64()
                ));
            }
        }
        None
    }

    pub fn validity_holds(&self, p_t: PageId) -> bool {
        self.validity_violation(p_t).is_none()
    }

    fn normalize_if_float(&mut self) {
        if M::EXACT {
            return;
        }
        self.support.retain(|_, m| m.to_f64().abs() > FLOAT_SLIVER);
        let total = self.total_mass().to_f64();
        if (total - 1.0).abs() > 1e-13 && total > 0.0 {
            let scale = M::from_f64(1.0 / total);
            let keys: Vec<PageSet> = self.support.keys().copied().collect();
            for k in keys {
                let m = self.support.get_mut(&k).unwrap();
                *m = m.mul(&scale);
            }
            // Marginals moved with the rescale; re-derive them.
            for p in 0..self.n {
                self.y[p] = self.marginal(PageId(p as u32));
            }
        }
    }

    /// Restores balance in every class, moving pages of the processed class
    /// between equal measures of states. Classes are processed from the
    /// highest imbalanced one downward; each step moves one page of class
    /// `i` out of the worst violator (largest deviation) into states on the
    /// opposite side of `Y_i`, splitting measures as needed.
    pub fn rebalance(&mut self) -> RebalanceOutcome {
        let classes = self.classes_desc();
        let mut j_max = None;
        for &j in &classes {
            if !self.imbalance(j).is_zero() {
                j_max = Some(j);
                break;
            }
        }
        let Some(j_max) = j_max else {
            return RebalanceOutcome::balanced();
        };
        let mut pre_eps = M::zero();
        for &j in &classes {
            if j <= j_max {
                let im = self.imbalance(j);
                if im.cmp_m(&pre_eps) == Ordering::Greater {
                    pre_eps = im;
                }
            }
        }

        let mut true_cost = 0.0f64;
        let mut ucb_cost = M::zero();
        let mut moves = 0u32;
        for &i in classes.iter().filter(|&&c| c <= j_max) {
            loop {
                let mask = self.mask_ge(i);
                let class_mask = self
                    .class
                    .iter()
                    .enumerate()
                    .filter(|&(_, &c)| c == i)
                    .fold(0u64, |acc, (p, _)| acc | (1u64 << p));
                let y_mass = self.class_mass(i);
                let (floor, ceil) = y_mass.floor_ceil();

                // worst violator: farthest count from Y_i (this drives the
                // matching-measure existence argument), then largest
                // measure, then set order
                let mut worst: Option<(M, PageSet, M)> = None;
                for (s, m) in &self.support {
                    // float slivers are below the mode tolerance and get
                    // pruned at the next normalization sweep
                    if !M::EXACT && m.to_f64() <= FLOAT_SLIVER {
                        continue;
                    }
                    let count = s.count_in(mask) as i64;
                    if window_deviation(count, floor, ceil) == 0 {
                        continue;
                    }
                    let count_m = M::from_int(count);
                    let dist = if count_m.cmp_m(&y_mass) == Ordering::Greater {
                        count_m.sub(&y_mass)
                    } else {
                        y_mass.sub(&count_m)
                    };
                    let better = match &worst {
                        None => true,
                        Some((bd, bs, bm)) => match dist.cmp_m(bd) {
                            Ordering::Greater => true,
                            Ordering::Equal => match m.cmp_m(bm) {
                                Ordering::Greater => true,
                                Ordering::Equal => s.cmp(bs) == Ordering::Less,
                                Ordering::Less => false,
                            },
                            Ordering::Less => false,
                        },
                    };
                    if better {
                        worst = Some((dist, *s, m.clone()));
                    }
                }
                let Some((_, violator, x)) = worst else { break };

                let count = violator.count_in(mask) as i64;
                let upward = count > ceil;
                // the strict opposite side of Y_i receives (or donates)
                let partners = if upward {
                    self.sorted_states(|s| {
                        M::from_int(s.count_in(mask) as i64).cmp_m(&y_mass) == Ordering::Less
                    })
                } else {
                    self.sorted_states(|s| {
                        M::from_int(s.count_in(mask) as i64).cmp_m(&y_mass) == Ordering::Greater
                    })
                };
                let mut remaining = x.clone();
                for (partner, pm) in partners {
                    if remaining.is_zero() {
                        break;
                    }
                    let z = remaining.min_m(&pm);
                    let (src, dst) = if upward { (violator, partner) } else { (partner, violator) };
                    // movable page of class exactly i, present in src only
                    let movable = (src.0 & !dst.0) & class_mask;
                    assert!(movable != 0, "rebalance: no movable page of class {i}");
                    let p = PageId(movable.trailing_zeros());
                    // p leaves src (fetched there), enters dst (evicted there)
                    self.move_measure(src, src.without(p), &z);
                    self.move_measure(dst, dst.with(p), &z);
                    true_cost += z.to_f64() * self.weights[p.index()];
                    ucb_cost = ucb_cost.add(&z.mul(&M::from_f64(self.ucb[p.index()])));
                    moves += 1;
                    remaining = remaining.sub(&z);
                }
                if !remaining.is_zero() {
                    assert!(
                        !M::EXACT && remaining.to_f64() <= FLOAT_SLIVER,
                        "rebalance: opposite-side measure exhausted in class {i} \
                         (remaining {} of {})",
                        remaining.to_f64(),
                        x.to_f64(),
                    );
                    // leftover float noise stays on the violator; its
                    // measure is now below the sliver cutoff
                }
            }
        }

        // moves leave float dust on split sources; sweep it before anyone
        // looks at the support
        self.normalize_if_float();
        debug_assert!(self.is_balanced());
        // Lemma-style cost bound for this call.
        let bound = pre_eps.mul(&M::from_int(12)).mul(&M::six_pow(j_max));
        let bound_ok = ucb_cost.le_tol(&bound);
        RebalanceOutcome {
            true_cost,
            ucb_cost: ucb_cost.to_f64(),
            pre_eps: pre_eps.to_f64(),
            j_max: Some(j_max),
            bound_ok,
            moves,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::WeightDistribution;
    use num::rational::BigRational;

    fn inst(n: usize, k: u32, weights: &[f64]) -> Instance {
        Instance::new(
            k,
            weights
                .iter()
                .map(|&w| WeightDistribution::Deterministic { value: w })
                .collect(),
            vec![PageId(0); n], // requests irrelevant for these tests
        )
        .unwrap()
    }

    #[test]
    fn set_order_prefers_smaller_elements() {
        let a = PageSet::EMPTY.with(PageId(0)).with(PageId(2));
        let b = PageSet::EMPTY.with(PageId(1));
        assert!(a < b); // {0,2} before {1}
        assert_eq!(a.cmp(&a), Ordering::Equal);
    }

    #[test]
    fn class_boundaries() {
        assert_eq!(class_of_ucb(1.0), -1);
        assert_eq!(class_of_ucb(1.0 / 6.0), -2);
        assert_eq!(class_of_ucb(1.0 / 6.0 + 1e-9), -1);
        assert_eq!(class_of_ucb(0.2), -1);
        assert_eq!(class_of_ucb(0.01), -3);
    }

    #[test]
    fn initial_distribution_consistent_and_balanced() {
        let inst = inst(3, 1, &[1.0, 0.5, 0.2]);
        let r: RoundingState<BigRational> = RoundingState::new(&inst);
        assert_eq!(r.support_size(), 1);
        assert!(r.is_balanced());
        assert_eq!(r.total_mass(), Measure::one());
        for p in 0..3 {
            assert_eq!(r.marginal(PageId(p)), Measure::one());
        }
    }

    #[test]
    fn imbalance_of_half_half_two_state() {
        // mu = 0.5 {a,b} + 0.5 {}, y_a = y_b = 0.5, same class, Y = 1:
        // each state deviates by one, so the imbalance is 1.
        let inst = inst(3, 2, &[0.9, 0.9, 0.9]);
        let mut r: RoundingState<BigRational> = RoundingState::new(&inst);
        let ab = PageSet::EMPTY.with(PageId(0)).with(PageId(1));
        r.support.clear();
        r.support.insert(ab, Measure::from_f64(0.5));
        r.support.insert(PageSet::EMPTY, Measure::from_f64(0.5));
        r.y = vec![Measure::from_f64(0.5), Measure::from_f64(0.5), Measure::zero()];
        let im = r.imbalance(-1);
        assert_eq!(im, Measure::one());

        let out = r.rebalance();
        assert!(r.is_balanced());
        assert_eq!(r.imbalance(-1), Measure::zero());
        // one move of measure 0.5, cost 0.5 * w
        assert_eq!(out.moves, 1);
        assert!((out.true_cost - 0.45).abs() < 1e-15);
        assert!(out.bound_ok);
        // marginals preserved
        assert_eq!(r.marginal(PageId(0)), Measure::from_f64(0.5));
        assert_eq!(r.marginal(PageId(1)), Measure::from_f64(0.5));
    }

    #[test]
    fn rebalance_identity_on_balanced_input() {
        let inst = inst(3, 1, &[1.0, 0.5, 0.2]);
        let mut r: RoundingState<BigRational> = RoundingState::new(&inst);
        let out = r.rebalance();
        assert_eq!(out.moves, 0);
        assert_eq!(out.true_cost, 0.0);
        assert!(out.bound_ok);
    }

    #[test]
    fn evict_splits_single_state() {
        let inst = inst(2, 1, &[1.0, 0.5]);
        let mut r: RoundingState<BigRational> = RoundingState::new(&inst);
        // fetch both pages out of the anti-cache first
        r.apply_fetch(PageId(0));
        r.apply_fetch(PageId(1));
        assert_eq!(r.support_size(), 1);
        let (cost, _) = r.apply_evict(PageId(0), 0.3).unwrap();
        assert!((cost - 0.3).abs() < 1e-15);
        assert_eq!(r.marginal(PageId(0)), Measure::from_f64(0.3));
        assert_eq!(r.total_mass(), Measure::one());
        // zero-dy eviction is the identity
        let before = r.support.clone();
        r.apply_evict(PageId(0), 0.0).unwrap();
        assert_eq!(before, r.support);
    }

    #[test]
    fn fetch_removes_page_everywhere() {
        let inst = inst(3, 2, &[1.0, 0.5, 0.3]);
        let mut r: RoundingState<BigRational> = RoundingState::new(&inst);
        r.apply_fetch(PageId(0));
        r.apply_fetch(PageId(1));
        r.apply_evict(PageId(0), 0.3).unwrap();
        r.apply_fetch(PageId(0));
        assert!(r.marginal(PageId(0)).is_zero());
        assert_eq!(r.support_size(), 1);
        assert!(r.validity_holds(PageId(0)));
    }

    #[test]
    fn marginals_match_tracked_after_mixed_ops() {
        let inst = inst(3, 1, &[1.0, 0.5, 0.2]);
        let mut r: RoundingState<BigRational> = RoundingState::new(&inst);
        r.apply_fetch(PageId(0));
        r.apply_evict(PageId(1), 0.0).unwrap();
        r.apply_fetch(PageId(1));
        r.apply_evict(PageId(0), 0.55).unwrap();
        r.apply_evict(PageId(1), 0.45).unwrap();
        for p in 0..3 {
            let p = PageId(p);
            assert_eq!(r.marginal(p), *r.tracked_y(p), "marginal of {p}");
        }
        assert_eq!(r.total_mass(), Measure::one());
        assert!(r.is_balanced());
    }

    #[test]
    fn conf_update_within_class_is_free() {
        let inst = inst(2, 1, &[1.0, 0.5]);
        let mut r: RoundingState<BigRational> = RoundingState::new(&inst);
        let out = r.apply_conf_update(PageId(0), 0.9);
        assert_eq!(out.moves, 0);
        assert_eq!(r.page_class(PageId(0)), -1);
        let out = r.apply_conf_update(PageId(0), 0.05);
        assert_eq!(r.page_class(PageId(0)), -2);
        assert!(out.bound_ok);
    }
}
