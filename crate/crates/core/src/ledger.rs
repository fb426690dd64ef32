//! Cumulative cost accounting for a run.

use serde::{Deserialize, Serialize};

/// The audit trail of one run. All costs are cumulative and non-decreasing;
/// `onf_cost <= onf_ucb_cost` whenever the good event holds.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CostLedger {
    /// Expected integral cost of the rounded algorithm, true weights.
    pub on_cost: f64,
    /// Fractional eviction cost at true weights.
    pub onf_cost: f64,
    /// Fractional eviction cost priced at the UCB active during each step.
    pub onf_ucb_cost: f64,
    /// Offline optimum (filled when the oracle ran).
    pub opt_cost: Option<f64>,
    /// Regret budget, accumulated at sample-processing instants.
    pub u_term: f64,
    /// Final potential (filled by diagnostics).
    pub phi: Option<f64>,
    /// True iff every recorded confidence interval bracketed the true mean.
    pub good_event: bool,
}

/// Expected integral cost split into the five categories the accounting
/// bounds are stated over.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Evictions that mirror fractional eviction mass onto the distribution.
    pub consistency_evictions: f64,
    /// Evict-and-refetch draws that fill the sample queue.
    pub sampling_evictions: f64,
    /// Rebalance moves triggered by confidence-bound (class) changes.
    pub sampling_rebalances: f64,
    /// Rebalance moves triggered by eviction events.
    pub eviction_rebalances: f64,
    /// Rebalance moves triggered by fetch events.
    pub fetch_rebalances: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.consistency_evictions
            + self.sampling_evictions
            + self.sampling_rebalances
            + self.eviction_rebalances
            + self.fetch_rebalances
    }
}
