//! Sampled coupling: realizes one concrete anti-cache trajectory from the
//! logged measure moves, preserving the distribution's marginals.

use rand::Rng;

use super::PageSet;

/// One measure move, logged at the instant it was applied. `prob` is the
/// moved fraction of the source state's measure at that instant, so a
/// realized state sitting on `from` branches to `to` with exactly the
/// probability that keeps its marginal law equal to the distribution.
#[derive(Debug, Clone, Copy)]
pub struct TransferStep {
    pub from: PageSet,
    pub to: PageSet,
    pub prob: f64,
}

#[derive(Debug, Clone)]
pub struct RealizedRun {
    pub final_state: PageSet,
    /// Eviction cost accrued on the realized branch, true weights.
    pub cost: f64,
    pub branches_taken: u64,
}

/// Replays the transfer log against one concrete state. Evictions (pages
/// entering the anti-cache on the taken branch) cost their true weight;
/// `fixed_cost` covers the branch-independent sampling evictions.
pub fn realize_trajectory<R: Rng>(
    steps: &[TransferStep],
    initial: PageSet,
    weights: &[f64],
    fixed_cost: f64,
    rng: &mut R,
) -> RealizedRun {
    let mut state = initial;
    let mut cost = fixed_cost;
    let mut branches = 0u64;
    for step in steps {
        if state != step.from {
            continue;
        }
        let take = step.prob >= 1.0 || rng.random::<f64>() < step.prob;
        if take {
            let added = PageSet(step.to.0 & !step.from.0);
            for p in added.iter() {
                cost += weights[p.index()];
            }
            state = step.to;
            branches += 1;
        }
    }
    RealizedRun { final_state: state, cost, branches_taken: branches }
}
