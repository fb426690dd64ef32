//! Seeded replication sweeps and CSV emission.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_policy, Policy};
use crate::error::RunError;
use crate::generate::gen_adversarial;
use crate::instance::{Instance, WeightDistribution};
use crate::opt::exact_opt_cost;
use crate::pipeline::{run_pipeline, ArithmeticMode, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyChoice {
    /// The learned-weights pipeline.
    Main,
    Lru,
    RandomEvict,
    Marking,
    KnownWeights,
}

impl PolicyChoice {
    pub fn name(self) -> &'static str {
        match self {
            PolicyChoice::Main => "main",
            PolicyChoice::Lru => "lru",
            PolicyChoice::RandomEvict => "random",
            PolicyChoice::Marking => "marking",
            PolicyChoice::KnownWeights => "known_weights",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub instance: Instance,
    pub label: String,
    pub policy: PolicyChoice,
    pub base_seed: u64,
    pub replications: u32,
    /// Worker threads; 0 picks the rayon default.
    pub jobs: usize,
    pub mode: ArithmeticMode,
    pub compute_opt: bool,
}

/// One CSV row. Columns that do not apply to the policy stay empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub policy: String,
    pub seed: u64,
    pub k: u32,
    pub n: usize,
    pub t: u32,
    pub on_cost: f64,
    pub onf_cost: Option<f64>,
    pub onf_ucb_cost: Option<f64>,
    pub opt_cost: Option<f64>,
    pub u_term: Option<f64>,
    pub good_event: Option<bool>,
    pub ratio_on_opt: Option<f64>,
}

pub const CSV_HEADER: &str =
    "instance,policy,seed,k,n,T,on_cost,onf_cost,onf_ucb_cost,opt_cost,u_term,good_event,ratio_on_opt";

fn run_one(cfg: &ExperimentConfig, seed: u64, opt_cost: Option<f64>) -> Result<ResultRow, RunError> {
    let inst = &cfg.instance;
    let (on_cost, onf, onf_ucb, u, good) = match cfg.policy {
        PolicyChoice::Main => {
            let out = run_pipeline(inst, seed, &RunConfig::learned(cfg.mode))?;
            (
                out.ledger.on_cost,
                Some(out.ledger.onf_cost),
                Some(out.ledger.onf_ucb_cost),
                Some(out.ledger.u_term),
                Some(out.ledger.good_event),
            )
        }
        PolicyChoice::KnownWeights => {
            let out = run_pipeline(inst, seed, &RunConfig::pinned(cfg.mode))?;
            (
                out.ledger.on_cost,
                Some(out.ledger.onf_cost),
                Some(out.ledger.onf_ucb_cost),
                Some(out.ledger.u_term),
                Some(out.ledger.good_event),
            )
        }
        PolicyChoice::Lru => (run_policy(Policy::Lru, inst, seed)?, None, None, None, None),
        PolicyChoice::RandomEvict => {
            (run_policy(Policy::RandomEvict, inst, seed)?, None, None, None, None)
        }
        PolicyChoice::Marking => (run_policy(Policy::Marking, inst, seed)?, None, None, None, None),
    };
    let ratio = match opt_cost {
        Some(o) if o > 0.0 => Some(on_cost / o),
        _ => None,
    };
    Ok(ResultRow {
        instance: cfg.label.clone(),
        policy: cfg.policy.name().to_string(),
        seed,
        k: inst.k,
        n: inst.n(),
        t: inst.t_horizon,
        on_cost,
        onf_cost: onf,
        onf_ucb_cost: onf_ucb,
        opt_cost,
        u_term: u,
        good_event: good,
        ratio_on_opt: ratio,
    })
}

/// Runs every replication (seed = base + r) and returns rows in replication
/// order. Fully deterministic for a fixed config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    cfg.instance.validate()?;
    let opt_cost = if cfg.compute_opt {
        Some(exact_opt_cost(&cfg.instance)?)
    } else {
        None
    };
    let seeds: Vec<u64> = (0..cfg.replications as u64).map(|r| cfg.base_seed + r).collect();
    let worker = |seed: &u64| run_one(cfg, *seed, opt_cost);
    if cfg.jobs == 1 {
        seeds.iter().map(worker).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| RunError::Diagnostics(format!("thread pool: {e}")))?;
        pool.install(|| seeds.par_iter().map(worker).collect())
    }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[ResultRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.instance,
            r.policy,
            r.seed,
            r.k,
            r.n,
            r.t,
            r.on_cost,
            opt_f64(r.onf_cost),
            opt_f64(r.onf_ucb_cost),
            opt_f64(r.opt_cost),
            opt_f64(r.u_term),
            r.good_event.map(|g| g.to_string()).unwrap_or_default(),
            opt_f64(r.ratio_on_opt),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Aggregate {
    pub replications: u32,
    pub mean_on: f64,
    pub stderr_on: f64,
    pub good_event_frequency: Option<f64>,
}

pub fn aggregate(rows: &[ResultRow]) -> Aggregate {
    let n = rows.len().max(1) as f64;
    let mean = rows.iter().map(|r| r.on_cost).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r.on_cost - mean).powi(2)).sum::<f64>() / n.max(2.0);
    let goods: Vec<bool> = rows.iter().filter_map(|r| r.good_event).collect();
    Aggregate {
        replications: rows.len() as u32,
        mean_on: mean,
        stderr_on: (var / n).sqrt(),
        good_event_frequency: (!goods.is_empty())
            .then(|| goods.iter().filter(|&&g| g).count() as f64 / goods.len() as f64),
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub ks: Vec<u32>,
    /// Horizon per cache slot; each point runs `T = t_per_k * k` requests.
    pub t_per_k: u32,
    pub replications: u32,
    pub base_seed: u64,
    pub jobs: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: u32,
    pub n: usize,
    pub t: u32,
    pub mean_on: f64,
    pub opt_cost: f64,
    pub ratio: f64,
}

/// Least-squares fits of the ratio trend across the sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepFit {
    /// Exponent `b` in `ratio ~ a * k^b` (log-log regression).
    pub k_exponent: f64,
    /// Constant `c` in `ratio ~ c * ln k`.
    pub ln_k_coefficient: f64,
}

pub fn fit_sweep(points: &[SweepPoint]) -> SweepFit {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.ratio > 0.0)
        .map(|p| (p.k as f64, p.ratio))
        .collect();
    let m = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(k, r) in &pts {
        let (x, y) = (k.ln(), r.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = m * sxx - sx * sx;
    let k_exponent = if denom.abs() > 1e-12 { (m * sxy - sx * sy) / denom } else { 0.0 };
    let (mut num, mut den) = (0.0, 0.0);
    for &(k, r) in &pts {
        let l = k.ln();
        num += r * l;
        den += l * l;
    }
    let ln_k_coefficient = if den > 0.0 { num / den } else { 0.0 };
    SweepFit { k_exponent, ln_k_coefficient }
}

/// Adversarial-family sweep over cache sizes; each point reports the mean
/// online cost over replications against the exact optimum.
pub fn run_sweep(cfg: &SweepConfig) -> Result<(Vec<SweepPoint>, SweepFit), RunError> {
    let mut points = Vec::new();
    for &k in &cfg.ks {
        let t = cfg.t_per_k * k;
        let inst = gen_adversarial(
            k,
            t,
            WeightDistribution::Deterministic { value: cfg.weight },
            cfg.base_seed ^ (k as u64) << 32,
        );
        let exp = ExperimentConfig {
            label: format!("adversarial_k{k}"),
            policy: PolicyChoice::Main,
            base_seed: cfg.base_seed,
            replications: cfg.replications,
            jobs: cfg.jobs,
            mode: ArithmeticMode::Float,
            compute_opt: true,
            instance: inst,
        };
        let rows = run_experiment(&exp)?;
        let agg = aggregate(&rows);
        let opt = rows[0].opt_cost.expect("sweep computes opt");
        points.push(SweepPoint {
            k,
            n: k as usize + 1,
            t,
            mean_on: agg.mean_on,
            opt_cost: opt,
            ratio: if opt > 0.0 { agg.mean_on / opt } else { f64::NAN },
        });
    }
    let fit = fit_sweep(&points);
    Ok((points, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::gen_zipf;

    #[test]
    fn identical_seeds_identical_rows() {
        let inst = gen_zipf(4, 2, 30, 1.0, WeightDistribution::Deterministic { value: 0.5 }, 3);
        let cfg = ExperimentConfig {
            instance: inst,
            label: "zipf".into(),
            policy: PolicyChoice::Main,
            base_seed: 5,
            replications: 2,
            jobs: 1,
            mode: ArithmeticMode::Float,
            compute_opt: true,
        };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let mut bytes_a = Vec::new();
        let mut bytes_b = Vec::new();
        write_csv(&a, &mut bytes_a).unwrap();
        write_csv(&b, &mut bytes_b).unwrap();
        assert_eq!(bytes_a, bytes_b);
        // opt column is replication-independent
        assert_eq!(a[0].opt_cost, a[1].opt_cost);
        // every row beats nothing: on >= opt
        for row in &a {
            assert!(row.on_cost >= row.opt_cost.unwrap() - 1e-9);
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let inst = gen_zipf(4, 2, 25, 0.8, WeightDistribution::Deterministic { value: 0.7 }, 8);
        let mut cfg = ExperimentConfig {
            instance: inst,
            label: "par".into(),
            policy: PolicyChoice::Main,
            base_seed: 11,
            replications: 4,
            jobs: 1,
            mode: ArithmeticMode::Float,
            compute_opt: false,
        };
        let serial = run_experiment(&cfg).unwrap();
        cfg.jobs = 4;
        let parallel = run_experiment(&cfg).unwrap();
        for (s, p) in serial.iter().zip(&parallel) {
            assert_eq!(s.on_cost, p.on_cost);
            assert_eq!(s.seed, p.seed);
        }
    }

    #[test]
    fn fit_recovers_log_trend() {
        let points: Vec<SweepPoint> = [2u32, 4, 8, 16]
            .iter()
            .map(|&k| SweepPoint {
                k,
                n: k as usize + 1,
                t: 100,
                mean_on: 0.0,
                opt_cost: 1.0,
                ratio: 3.0 * (k as f64).ln(),
            })
            .collect();
        let fit = fit_sweep(&points);
        assert!((fit.ln_k_coefficient - 3.0).abs() < 1e-9);
        assert!(fit.k_exponent < 1.0);
    }
}
