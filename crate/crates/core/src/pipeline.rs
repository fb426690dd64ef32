//! End-to-end run: fractional solver feeding the rounding layer through the
//! sampling interface, with full cost accounting.
//!
//! Per round, the solver serves the request against a bridge that pops
//! stored samples (drawing directly on a page's very first demand); the
//! emitted events are then applied to the anti-cache distribution in order.
//! The round ends by refilling the requested page's sample slot and checking
//! the distribution invariants.

use num::rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confbounds::{good_event_holds, ConfRecord};
use crate::error::RunError;
use crate::event::FractionalEvent;
use crate::fractional::{BoundsMode, FractionalSolver, SampleSource, SegmentRecord};
use crate::instance::{Instance, PageId};
use crate::ledger::{CostBreakdown, CostLedger};
use crate::rounding::{Measure, RoundingState, SampleQueue, TransferStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArithmeticMode {
    /// Exact dyadic rationals; invariants asserted with equality.
    Rational,
    /// f64 with tolerance; periodic renormalization.
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKnowledge {
    /// Bounds learned online from samples.
    Learned,
    /// Bounds pinned to the true means; no sampling at all.
    PinnedTruth,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: ArithmeticMode,
    pub knowledge: WeightKnowledge,
    /// Re-derive marginals, mass, balance and validity after every event /
    /// request and fail the run if any is off.
    pub check_invariants: bool,
    pub collect_run_log: bool,
    pub collect_transfers: bool,
    pub collect_dist_stats: bool,
    pub record_segments: bool,
}

impl RunConfig {
    pub fn learned(mode: ArithmeticMode) -> Self {
        RunConfig {
            mode,
            knowledge: WeightKnowledge::Learned,
            check_invariants: matches!(mode, ArithmeticMode::Rational),
            collect_run_log: false,
            collect_transfers: false,
            collect_dist_stats: false,
            record_segments: false,
        }
    }

    pub fn pinned(mode: ArithmeticMode) -> Self {
        RunConfig { knowledge: WeightKnowledge::PinnedTruth, ..RunConfig::learned(mode) }
    }
}

/// Per-event record with post-event state snapshots; enough to re-evaluate
/// the potential inequality without re-running anything.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunLogEntry {
    pub t: u32,
    pub event: FractionalEvent,
    pub onf: f64,
    pub onf_ucb: f64,
    pub on_expected: f64,
    pub u_term: f64,
    pub y: Vec<f64>,
    pub m: Vec<f64>,
    pub lcb: Vec<f64>,
    pub ucb: Vec<f64>,
    pub n_samples: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunLog {
    pub instance: Instance,
    pub eta: f64,
    pub seed: u64,
    pub entries: Vec<RunLogEntry>,
    pub summary: RunSummary,
}

/// Final totals carried inside a dumped log so `verify` can re-check the
/// accounting without re-running the pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub ledger: CostLedger,
    pub breakdown: CostBreakdown,
    pub rebalance_audit: RebalanceAudit,
}

/// Distribution statistics after one event, for the debug dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistRecord {
    pub t: u32,
    pub support_size: usize,
    pub classes: Vec<ClassStat>,
    pub on_expected: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassStat {
    pub class: i32,
    pub mass: f64,
    pub imbalance: f64,
}

/// Worst rebalance call relative to its per-call cost bound.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RebalanceAudit {
    pub calls: u64,
    pub all_bounds_ok: bool,
    /// max over calls of ucb_cost - 12 * eps * 6^j_max (<= 0 when fine)
    pub worst_excess: f64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub ledger: CostLedger,
    pub breakdown: CostBreakdown,
    pub conf_log: Vec<ConfRecord>,
    pub run_log: Option<RunLog>,
    pub transfers: Option<Vec<TransferStep>>,
    pub dist_stats: Option<Vec<DistRecord>>,
    pub segments: Option<Vec<SegmentRecord>>,
    pub rebalance_audit: RebalanceAudit,
    pub max_support: usize,
    pub final_y: Vec<f64>,
    pub final_m: Vec<f64>,
}

struct DemandRecord {
    page: PageId,
    cost: f64,
}

/// Serves solver demands from the queue; draws directly on first demand.
struct QueueBridge<'a> {
    queue: &'a mut SampleQueue,
    inst: &'a Instance,
    rng: &'a mut ChaCha8Rng,
    records: &'a mut Vec<DemandRecord>,
}

impl SampleSource for QueueBridge<'_> {
    fn demand(&mut self, page: PageId) -> Result<f64, RunError> {
        let (value, cost) = self.queue.demand(page, self.inst, self.rng)?;
        self.records.push(DemandRecord { page, cost });
        Ok(value)
    }
}

pub fn run_pipeline(inst: &Instance, seed: u64, cfg: &RunConfig) -> Result<RunOutput, RunError> {
    inst.validate()?;
    match cfg.mode {
        ArithmeticMode::Rational => run_generic::<BigRational>(inst, seed, cfg),
        ArithmeticMode::Float => run_generic::<f64>(inst, seed, cfg),
    }
}

fn run_generic<M: Measure>(
    inst: &Instance,
    seed: u64,
    cfg: &RunConfig,
) -> Result<RunOutput, RunError> {
    let n = inst.n();
    let weights = inst.weights();
    let bounds = match cfg.knowledge {
        WeightKnowledge::Learned => BoundsMode::Learned,
        WeightKnowledge::PinnedTruth => BoundsMode::Pinned(weights.clone()),
    };
    let learned = matches!(cfg.knowledge, WeightKnowledge::Learned);

    let mut solver = FractionalSolver::new(n, inst.k, inst.t_horizon, bounds);
    solver.record_segments(cfg.record_segments);
    let mut rounding: RoundingState<M> = RoundingState::new(inst);
    rounding.record_transfers(cfg.collect_transfers);
    let mut queue = SampleQueue::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut breakdown = CostBreakdown::default();
    let mut audit = RebalanceAudit { all_bounds_ok: true, ..Default::default() };
    let mut max_support = rounding.support_size();

    // mirrors rebuilt per event for snapshots; resynced from the solver at
    // the end of every round (the solver snaps saturations exactly)
    let mut y = vec![1.0f64; n];
    let mut m = vec![0.0f64; n];
    let mut lcb = vec![0.0f64; n];
    let mut ucb = vec![1.0f64; n];
    let mut n_samples = vec![0u64; n];
    let mut onf = 0.0f64;
    let mut onf_ucb = 0.0f64;
    let mut u_term = 0.0f64;
    let u_scale = 2.0 * (1.0 + inst.k as f64).ln(); // 2 ln(1 + 1/eta)

    let mut run_log = cfg.collect_run_log.then(Vec::new);
    let mut dist_stats = cfg.collect_dist_stats.then(Vec::new);
    let mut demand_records: Vec<DemandRecord> = Vec::new();

    for (t0, &p_t) in inst.requests.iter().enumerate() {
        let t = t0 as u32 + 1;
        demand_records.clear();
        let events = {
            let mut bridge = QueueBridge {
                queue: &mut queue,
                inst,
                rng: &mut rng,
                records: &mut demand_records,
            };
            solver.serve_request(t, p_t, &mut bridge)?
        };

        let mut demands = demand_records.drain(..);
        for ev in &events {
            let mut reb = None;
            match *ev {
                FractionalEvent::Fetch { page, amount } => {
                    let tracked = rounding.tracked_y(page).to_f64();
                    if (tracked - amount).abs() > 1e-9 {
                        return Err(RunError::RoundingInvariant(format!(
                            "fetch amount {amount} disagrees with marginal {tracked} for {page}"
                        )));
                    }
                    let out = rounding.apply_fetch(page);
                    breakdown.fetch_rebalances += out.true_cost;
                    reb = Some(out);
                    y[page.index()] = 0.0;
                }
                FractionalEvent::Evict { page, dy, ucb_cost } => {
                    let (cost, out) = rounding.apply_evict(page, dy)?;
                    breakdown.consistency_evictions += cost;
                    breakdown.eviction_rebalances += out.true_cost;
                    reb = Some(out);
                    y[page.index()] += dy;
                    m[page.index()] += dy;
                    onf += dy * weights[page.index()];
                    onf_ucb += ucb_cost;
                }
                FractionalEvent::SampleDemand { page } => {
                    let rec = demands.next().expect("one record per demand");
                    debug_assert_eq!(rec.page, page);
                    if rec.cost > 0.0 && cfg.check_invariants {
                        // direct draw: the page must be cached everywhere
                        if !rounding.tracked_y(page).is_zero() {
                            return Err(RunError::RoundingInvariant(format!(
                                "direct sample draw for {page} while partially evicted"
                            )));
                        }
                    }
                    breakdown.sampling_evictions += rec.cost;
                    // demands fire exactly at integral eviction counts
                    m[page.index()] = m[page.index()].round();
                }
                FractionalEvent::ConfUpdate { page, lcb: new_lcb, ucb: new_ucb } => {
                    let out = rounding.apply_conf_update(page, new_ucb);
                    breakdown.sampling_rebalances += out.true_cost;
                    reb = Some(out);
                    let i = page.index();
                    u_term += (new_ucb - new_lcb) + u_scale * (new_lcb - lcb[i]);
                    lcb[i] = new_lcb;
                    ucb[i] = new_ucb;
                    n_samples[i] += 1;
                }
                FractionalEvent::RequestEnd { page } => {
                    let target = (n - inst.k as usize) as i64;
                    if let Some((cost, out)) = rounding.top_up_to_target(page, target)? {
                        breakdown.consistency_evictions += cost;
                        breakdown.eviction_rebalances += out.true_cost;
                        reb = Some(out);
                    }
                    if learned {
                        if cfg.check_invariants && !rounding.tracked_y(page).is_zero() {
                            return Err(RunError::RoundingInvariant(format!(
                                "{page} not fully cached at its request end"
                            )));
                        }
                        breakdown.sampling_evictions += queue.ensure(page, inst, &mut rng);
                    }
                    if let Some(violation) = rounding.validity_violation(page) {
                        return Err(RunError::RoundingInvariant(format!(
                            "invalid support state after request for {page}: {violation}"
                        )));
                    }
                    if cfg.check_invariants {
                        check_consistency(&rounding, &solver, n)?;
                    }
                }
            }
            if let Some(out) = reb {
                audit.calls += 1;
                audit.all_bounds_ok &= out.bound_ok;
                if let Some(j) = out.j_max {
                    let excess = out.ucb_cost - 12.0 * out.pre_eps * 6f64.powi(j);
                    audit.worst_excess = audit.worst_excess.max(excess);
                }
            }
            max_support = max_support.max(rounding.support_size());
            if let Some(log) = &mut run_log {
                log.push(RunLogEntry {
                    t,
                    event: ev.clone(),
                    onf,
                    onf_ucb,
                    on_expected: breakdown.total(),
                    u_term,
                    y: y.clone(),
                    m: m.clone(),
                    lcb: lcb.clone(),
                    ucb: ucb.clone(),
                    n_samples: n_samples.clone(),
                });
            }
            if let Some(stats) = &mut dist_stats {
                let classes = rounding
                    .classes_desc()
                    .into_iter()
                    .map(|j| ClassStat {
                        class: j,
                        mass: rounding.class_mass(j).to_f64(),
                        imbalance: rounding.imbalance(j).to_f64(),
                    })
                    .collect();
                stats.push(DistRecord {
                    t,
                    support_size: rounding.support_size(),
                    classes,
                    on_expected: breakdown.total(),
                });
            }
        }
        debug_assert!(demands.next().is_none(), "every demand consumed");
        drop(demands);

        y.copy_from_slice(solver.y());
        m.copy_from_slice(solver.m());
    }

    debug_assert_eq!(onf_ucb, solver.onf_ucb());
    let conf_log = solver.conf_log().to_vec();
    let good_event = good_event_holds(&conf_log, &weights);
    let ledger = CostLedger {
        on_cost: breakdown.total(),
        onf_cost: onf,
        onf_ucb_cost: onf_ucb,
        opt_cost: None,
        u_term,
        phi: None,
        good_event,
    };
    Ok(RunOutput {
        ledger: ledger.clone(),
        breakdown,
        conf_log,
        run_log: run_log.map(|entries| RunLog {
            instance: inst.clone(),
            eta: 1.0 / inst.k as f64,
            seed,
            entries,
            summary: RunSummary { ledger, breakdown, rebalance_audit: audit },
        }),
        transfers: cfg.collect_transfers.then(|| rounding.take_transfers()),
        dist_stats,
        segments: solver.segment_log().map(|s| s.to_vec()),
        rebalance_audit: audit,
        max_support,
        final_y: solver.y().to_vec(),
        final_m: solver.m().to_vec(),
    })
}

/// Exact (or tolerance) agreement between the distribution's marginals, its
/// tracked anti-servers, the total mass, balance, and the solver state.
fn check_consistency<M: Measure>(
    rounding: &RoundingState<M>,
    solver: &FractionalSolver,
    n: usize,
) -> Result<(), RunError> {
    let total = rounding.total_mass();
    if !total.approx_eq(&M::one()) {
        return Err(RunError::RoundingInvariant(format!(
            "total mass {} drifted from 1",
            total.to_f64()
        )));
    }
    for p in 0..n {
        let page = PageId(p as u32);
        let marginal = rounding.marginal(page);
        if !marginal.approx_eq(rounding.tracked_y(page)) {
            return Err(RunError::RoundingInvariant(format!(
                "support marginal of {page} disagrees with tracked value"
            )));
        }
        if (marginal.to_f64() - solver.y()[p]).abs() > 1e-9 {
            return Err(RunError::RoundingInvariant(format!(
                "marginal of {page} drifted from the fractional solution"
            )));
        }
    }
    if !rounding.is_balanced() {
        return Err(RunError::RoundingInvariant("class imbalance after request".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::WeightDistribution;

    fn two_point_instance() -> Instance {
        Instance::new(
            2,
            vec![
                WeightDistribution::TwoPoint { low: 0.2, high: 1.0, p_high: 0.5 },
                WeightDistribution::Deterministic { value: 0.4 },
                WeightDistribution::TwoPoint { low: 0.1, high: 0.8, p_high: 0.3 },
                WeightDistribution::ScaledBeta { alpha: 2.0, beta: 2.0, floor: 0.1 },
            ],
            [0u32, 1, 2, 3, 0, 2, 1, 3, 2, 0, 3, 1, 0, 2, 3, 1]
                .iter()
                .map(|&r| PageId(r))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rational_run_holds_invariants() {
        let inst = two_point_instance();
        let cfg = RunConfig::learned(ArithmeticMode::Rational);
        let out = run_pipeline(&inst, 7, &cfg).unwrap();
        assert!(out.rebalance_audit.all_bounds_ok);
        assert!(out.ledger.on_cost >= 0.0);
        assert!(out.ledger.onf_cost <= out.ledger.onf_ucb_cost + 1e-12);
    }

    #[test]
    fn float_and_rational_modes_agree_on_costs() {
        let inst = two_point_instance();
        let a = run_pipeline(&inst, 3, &RunConfig::learned(ArithmeticMode::Rational)).unwrap();
        let b = run_pipeline(&inst, 3, &RunConfig::learned(ArithmeticMode::Float)).unwrap();
        assert!((a.ledger.on_cost - b.ledger.on_cost).abs() < 1e-6);
        assert_eq!(a.ledger.onf_ucb_cost, b.ledger.onf_ucb_cost);
        assert_eq!(a.conf_log.len(), b.conf_log.len());
    }

    #[test]
    fn runs_are_reproducible() {
        let inst = two_point_instance();
        let cfg = RunConfig::learned(ArithmeticMode::Float);
        let a = run_pipeline(&inst, 11, &cfg).unwrap();
        let b = run_pipeline(&inst, 11, &cfg).unwrap();
        assert_eq!(a.ledger.on_cost, b.ledger.on_cost);
        assert_eq!(a.ledger.u_term, b.ledger.u_term);
        let c = run_pipeline(&inst, 12, &cfg).unwrap();
        assert!(a.ledger.on_cost != c.ledger.on_cost || a.ledger.u_term != c.ledger.u_term);
    }

    #[test]
    fn pinned_truth_skips_sampling() {
        let inst = two_point_instance();
        let out = run_pipeline(&inst, 5, &RunConfig::pinned(ArithmeticMode::Rational)).unwrap();
        assert_eq!(out.breakdown.sampling_evictions, 0.0);
        assert!(out.conf_log.is_empty());
        assert!(out.ledger.good_event);
        // only the pinned-lcb summand contributes to the regret budget
        let expect: f64 =
            2.0 * (1.0 + inst.k as f64).ln() * inst.weights().iter().sum::<f64>();
        assert!((out.ledger.u_term - expect).abs() < 1e-12);
    }
}
