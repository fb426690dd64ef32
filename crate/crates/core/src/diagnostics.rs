//! Machine checks of the run's guarantees against the offline witness.
//!
//! The potential
//!
//! ```text
//! Phi = -2 * sum_{p not in C*} LCB_p * ln((y_p + eta) / (1 + eta))
//!       + sum_p (UCB_p - LCB_p) * (n_p - m_p)
//! ```
//!
//! couples the fractional state, the confidence bounds and the lazy optimal
//! schedule `C*`. Along any run where the bounds bracket the true weights,
//! the cumulative inequality
//!
//! ```text
//! ONF_ucb(t) + Phi(t) - Phi(0) <= 2 ln(1 + 1/eta) * OPT(t) + U(t)
//! ```
//!
//! holds after every event; `U` is the regret budget recharged at sample
//! instants. These checks recompute everything from the run log's snapshots.

use serde::{Deserialize, Serialize};

use crate::error::RunError;
use crate::ledger::CostBreakdown;
use crate::opt::{exact_opt, OptSchedule};
use crate::pipeline::{RunLog, RunOutput};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialCheck {
    pub holds: bool,
    pub events: u64,
    /// Smallest slack `rhs - lhs` seen (negative would be a violation
    /// beyond tolerance).
    pub worst_slack: f64,
    pub worst_round: u32,
    pub phi_final: f64,
    pub phi_nonnegative: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegretCheck {
    pub holds: bool,
    pub u_final: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundItem {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundingCheck {
    pub holds: bool,
    pub items: Vec<BoundItem>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub good_event: bool,
    pub potential: PotentialCheck,
    pub regret: RegretCheck,
    pub rounding: RoundingCheck,
    pub rebalance_bounds_ok: bool,
    pub opt_cost: f64,
}

impl VerifyReport {
    pub fn all_hold(&self) -> bool {
        self.good_event
            && self.potential.holds
            && self.regret.holds
            && self.rounding.holds
            && self.rebalance_bounds_ok
    }
}

/// Regret budget bound `8 sqrt(nT) ln(nT)`.
pub fn regret_bound(n: usize, t_horizon: u32) -> f64 {
    let nt = n as f64 * t_horizon as f64;
    8.0 * nt.sqrt() * nt.ln()
}

pub fn check_regret_bound(u_final: f64, n: usize, t_horizon: u32) -> RegretCheck {
    let bound = regret_bound(n, t_horizon);
    RegretCheck { holds: u_final <= bound, u_final, bound }
}

/// Per-round cumulative OPT cost from the witness schedule.
fn opt_cumulative(schedule: &OptSchedule, weights: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(schedule.caches.len());
    let mut cum = 0.0;
    let mut prev = 0u64;
    for &cache in &schedule.caches {
        let mut evicted = prev & !cache;
        while evicted != 0 {
            let q = evicted.trailing_zeros();
            evicted &= evicted - 1;
            cum += weights[q as usize];
        }
        out.push(cum);
        prev = cache;
    }
    out
}

fn phi(entry_y: &[f64], lcb: &[f64], ucb: &[f64], n_samples: &[u64], m: &[f64], cstar: u64, eta: f64) -> f64 {
    let mut phi1 = 0.0;
    let mut phi2 = 0.0;
    for p in 0..entry_y.len() {
        if n_samples[p] > 0 {
            phi2 += (ucb[p] - lcb[p]) * (n_samples[p] as f64 - m[p]);
        }
        if cstar & (1u64 << p) == 0 {
            phi1 += lcb[p] * ((entry_y[p] + eta) / (1.0 + eta)).ln();
        }
    }
    -2.0 * phi1 + phi2
}

/// Evaluates the cumulative potential inequality after every logged event.
pub fn check_potential_inequality(
    log: &RunLog,
    schedule: &OptSchedule,
) -> Result<PotentialCheck, RunError> {
    if log.entries.is_empty() {
        return Ok(PotentialCheck {
            holds: true,
            events: 0,
            worst_slack: 0.0,
            worst_round: 0,
            phi_final: 0.0,
            phi_nonnegative: true,
        });
    }
    let inst = &log.instance;
    let weights = inst.weights();
    if schedule.caches.len() != inst.requests.len() {
        return Err(RunError::Diagnostics("witness length mismatch".into()));
    }
    let opt_cum = opt_cumulative(schedule, &weights);
    let u_scale = 2.0 * (1.0 + 1.0 / log.eta).ln();

    let mut holds = true;
    let mut worst_slack = f64::INFINITY;
    let mut worst_round = 0u32;
    let mut phi_nonneg = true;
    let mut phi_final = 0.0;
    let mut events = 0u64;
    for entry in &log.entries {
        let round_idx = entry.t as usize - 1;
        let cstar = schedule.caches[round_idx];
        let phi_t = phi(&entry.y, &entry.lcb, &entry.ucb, &entry.n_samples, &entry.m, cstar, log.eta);
        for p in 0..inst.n() {
            if entry.n_samples[p] > 0 {
                let gap = entry.n_samples[p] as f64 - entry.m[p];
                if !(-1e-9..=1.0 + 1e-9).contains(&gap) {
                    return Err(RunError::Diagnostics(format!(
                        "n_p - m_p = {gap} outside [0,1] at round {}",
                        entry.t
                    )));
                }
            }
        }
        let lhs = entry.onf_ucb + phi_t;
        let rhs = u_scale * opt_cum[round_idx] + entry.u_term;
        let tol = 1e-7 * (1.0 + entry.onf_ucb.abs() + phi_t.abs() + rhs.abs());
        let slack = rhs - lhs;
        if slack < worst_slack {
            worst_slack = slack;
            worst_round = entry.t;
        }
        if slack < -tol {
            holds = false;
        }
        if phi_t < -tol {
            phi_nonneg = false;
        }
        phi_final = phi_t;
        events += 1;
    }
    Ok(PotentialCheck {
        holds,
        events,
        worst_slack,
        worst_round,
        phi_final,
        phi_nonnegative: phi_nonneg,
    })
}

/// The aggregate and itemized accounting bounds relating the expected
/// integral cost to the UCB-priced fractional cost.
pub fn check_rounding_cost_bound(
    breakdown: &CostBreakdown,
    onf_ucb: f64,
    n: usize,
) -> RoundingCheck {
    let nf = n as f64;
    let tol = 1e-9 * (1.0 + onf_ucb + nf);
    let item = |name: &str, value: f64, bound: f64| BoundItem {
        name: name.into(),
        value,
        bound,
        holds: value <= bound + tol,
    };
    let items = vec![
        item("consistency_evictions", breakdown.consistency_evictions, onf_ucb),
        item("sampling_evictions", breakdown.sampling_evictions, onf_ucb + 2.0 * nf),
        item("sampling_rebalances", breakdown.sampling_rebalances, 12.0 * onf_ucb + 24.0 * nf),
        item("eviction_rebalances", breakdown.eviction_rebalances, 24.0 * onf_ucb),
        item("fetch_rebalances", breakdown.fetch_rebalances, 24.0 * onf_ucb + 24.0 * nf),
        item("total_expected_cost", breakdown.total(), 62.0 * onf_ucb + 50.0 * nf),
    ];
    RoundingCheck { holds: items.iter().all(|i| i.holds), items }
}

/// Runs every check against a dumped (or freshly collected) run log.
pub fn verify_log(log: &crate::pipeline::RunLog) -> Result<VerifyReport, RunError> {
    let inst = &log.instance;
    let schedule = exact_opt(inst)?;
    let weights = inst.weights();
    let witness_total = opt_cumulative(&schedule, &weights).last().copied().unwrap_or(0.0);
    if (witness_total - schedule.cost).abs() > 1e-9 * (1.0 + schedule.cost) {
        return Err(RunError::Diagnostics(format!(
            "witness cost {witness_total} disagrees with oracle cost {}",
            schedule.cost
        )));
    }
    let summary = &log.summary;
    let potential = check_potential_inequality(log, &schedule)?;
    let regret = check_regret_bound(summary.ledger.u_term, inst.n(), inst.t_horizon);
    let rounding =
        check_rounding_cost_bound(&summary.breakdown, summary.ledger.onf_ucb_cost, inst.n());
    Ok(VerifyReport {
        good_event: summary.ledger.good_event,
        potential,
        regret,
        rounding,
        rebalance_bounds_ok: summary.rebalance_audit.all_bounds_ok,
        opt_cost: schedule.cost,
    })
}

/// Runs every check against a finished run (its log must be present).
pub fn verify_run(out: &RunOutput) -> Result<VerifyReport, RunError> {
    let log = out
        .run_log
        .as_ref()
        .ok_or_else(|| RunError::Diagnostics("run log missing; rerun with logging".into()))?;
    verify_log(log)
}
