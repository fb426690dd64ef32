//! Per-page weight estimation: running mean plus monotone confidence bounds.
//!
//! The first sample of a page sets `lcb = sample / (2 n^2 T)` and `ucb = 1`.
//! From the second sample on, the bounds tighten toward
//! `mean +- radius(i)` but never loosen: the lcb sequence is non-decreasing
//! and the ucb sequence non-increasing, and `ucb - lcb <= 2 * radius(i)`
//! holds exactly in f64 (the ucb is nudged down by at most a couple of ulps
//! when rounding would otherwise break the width bound).

use serde::{Deserialize, Serialize};

use crate::instance::PageId;

/// Confidence radius for the `i`-th sample: `sqrt(ln(4 n^3 T^3) / (2 i))`.
/// Undefined for the first sample.
pub fn confidence_radius(i: u64, n: usize, t_horizon: u32) -> f64 {
    assert!(i >= 2, "confidence radius is undefined before the second sample");
    let log_term = 4.0 * (n as f64).powi(3) * (t_horizon as f64).powi(3);
    (log_term.ln() / (2.0 * i as f64)).sqrt()
}

/// The learner's knowledge about one page.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfState {
    /// Number of samples observed.
    pub n_samples: u64,
    /// Running average of the samples.
    pub mean: f64,
    pub lcb: f64,
    pub ucb: f64,
    /// Compensation term of the sample-sum accumulator.
    sum: f64,
    comp: f64,
}

impl ConfState {
    /// Degenerate state with both bounds pinned to a known weight.
    pub fn pinned(weight: f64) -> ConfState {
        ConfState { n_samples: 1, mean: weight, lcb: weight, ucb: weight, sum: weight, comp: 0.0 }
    }

    /// State after the first sample of a page.
    pub fn first(sample: f64, n: usize, t_horizon: u32) -> ConfState {
        assert!(sample > 0.0 && sample <= 1.0, "sample outside (0,1]");
        let lcb = sample / (2.0 * (n as f64) * (n as f64) * t_horizon as f64);
        ConfState { n_samples: 1, mean: sample, lcb, ucb: 1.0, sum: sample, comp: 0.0 }
    }

    /// Folds in the next sample and tightens the bounds.
    pub fn update(&mut self, sample: f64, n: usize, t_horizon: u32) {
        assert!(sample > 0.0 && sample <= 1.0, "sample outside (0,1]");
        self.n_samples += 1;
        self.add_to_sum(sample);
        self.mean = (self.sum + self.comp) / self.n_samples as f64;
        let eps = confidence_radius(self.n_samples, n, t_horizon);
        self.lcb = self.lcb.max(self.mean - eps);
        self.ucb = self.ucb.min(self.mean + eps);
        // Keep the width bound exact in f64; shaves at most ~2 ulps off ucb.
        let width_cap = 2.0 * eps;
        while self.ucb - self.lcb > width_cap {
            self.ucb = self.ucb.next_down();
        }
        assert!(
            self.lcb <= self.ucb,
            "lcb {} above ucb {} after {} samples",
            self.lcb,
            self.ucb,
            self.n_samples
        );
    }

    pub fn radius(&self, n: usize, t_horizon: u32) -> Option<f64> {
        (self.n_samples >= 2).then(|| confidence_radius(self.n_samples, n, t_horizon))
    }

    // Neumaier-compensated accumulation; keeps the running mean bit-stable.
    fn add_to_sum(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }
}

/// One confidence-bound update, as dumped to the diagnostic JSONL stream.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConfRecord {
    /// Round index (1-based) during which the sample was processed.
    pub t: u32,
    pub page: PageId,
    /// Sample ordinal for this page.
    pub i: u64,
    pub mean: f64,
    pub lcb: f64,
    pub ucb: f64,
    /// Radius used for this update; 0 for the first sample.
    pub eps: f64,
}

/// True iff every recorded interval brackets the page's true mean.
pub fn good_event_holds(history: &[ConfRecord], true_weights: &[f64]) -> bool {
    history.iter().all(|rec| {
        let w = true_weights[rec.page.index()];
        rec.lcb <= w && w <= rec.ucb
    })
}
