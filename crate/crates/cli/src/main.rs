//! `owp` — drive the weighted-paging simulation lab from the shell.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use owp_core::diagnostics::{verify_log, verify_run, VerifyReport};
use owp_core::experiment::{aggregate, run_experiment, run_sweep, write_csv, ExperimentConfig, PolicyChoice, SweepConfig};
use owp_core::generate::{gen_adversarial, gen_zipf};
use owp_core::instance::{Instance, WeightDistribution};
use owp_core::opt::exact_opt;
use owp_core::pipeline::{run_pipeline, ArithmeticMode, RunConfig, RunLog};

#[derive(Parser)]
#[command(name = "owp", version, about = "Online weighted paging with sampled weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Run an experiment and emit per-replication CSV rows.
    Run(RunArgs),
    /// Print the exact offline optimum (and optionally its schedule).
    Opt(OptArgs),
    /// Re-check the potential, regret and cost bounds of a dumped run log.
    Verify(VerifyArgs),
    /// Sweep the adversarial family over cache sizes.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DistKind {
    Deterministic,
    TwoPoint,
    ScaledBeta,
}

#[derive(Args)]
struct WeightSpec {
    /// Weight distribution family applied to every page.
    #[arg(long, value_enum, default_value = "deterministic")]
    dist: DistKind,
    /// Deterministic value, two-point low, or scaled-beta floor.
    #[arg(long, default_value_t = 1.0)]
    w1: f64,
    /// Two-point high or scaled-beta alpha.
    #[arg(long, default_value_t = 1.0)]
    w2: f64,
    /// Two-point high probability or scaled-beta beta.
    #[arg(long, default_value_t = 0.5)]
    w3: f64,
}

impl WeightSpec {
    fn build(&self) -> WeightDistribution {
        match self.dist {
            DistKind::Deterministic => WeightDistribution::Deterministic { value: self.w1 },
            DistKind::TwoPoint => {
                WeightDistribution::TwoPoint { low: self.w1, high: self.w2, p_high: self.w3 }
            }
            DistKind::ScaledBeta => {
                WeightDistribution::ScaledBeta { floor: self.w1, alpha: self.w2, beta: self.w3 }
            }
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    family: GenFamily,
}

#[derive(Subcommand)]
enum GenFamily {
    /// k+1 pages, uniformly random requests.
    Adversarial {
        #[arg(long)]
        k: u32,
        #[arg(long, name = "T")]
        t: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        weights: WeightSpec,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Zipf-distributed requests over n pages.
    Zipf {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: u32,
        #[arg(long, name = "T")]
        t: u32,
        #[arg(long, default_value_t = 1.0)]
        exponent: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        weights: WeightSpec,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Import a plain-text trace, one page id per line.
    Trace {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: u32,
        #[command(flatten)]
        weights: WeightSpec,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Main,
    Lru,
    Random,
    Marking,
    KnownWeights,
}

impl From<PolicyArg> for PolicyChoice {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Main => PolicyChoice::Main,
            PolicyArg::Lru => PolicyChoice::Lru,
            PolicyArg::Random => PolicyChoice::RandomEvict,
            PolicyArg::Marking => PolicyChoice::Marking,
            PolicyArg::KnownWeights => PolicyChoice::KnownWeights,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Rational,
    Float,
}

impl From<ModeArg> for ArithmeticMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rational => ArithmeticMode::Rational,
            ModeArg::Float => ArithmeticMode::Float,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "main")]
    policy: PolicyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: u32,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, default_value = "float")]
    mode: ModeArg,
    /// Skip the exact-optimum column (required for oversized instances).
    #[arg(long)]
    no_opt: bool,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Dump the first replication's event stream as JSONL.
    #[arg(long)]
    dump_events: Option<PathBuf>,
    /// Dump the first replication's confidence-bound updates as JSONL.
    #[arg(long)]
    dump_conf: Option<PathBuf>,
    /// Dump the first replication's distribution statistics as JSONL.
    #[arg(long)]
    dump_dist: Option<PathBuf>,
    /// Dump the first replication's full run log (JSON) for `owp verify`.
    #[arg(long)]
    dump_log: Option<PathBuf>,
}

#[derive(Args)]
struct OptArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Also print the witness schedule, one JSONL record per round.
    #[arg(long)]
    schedule: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run log produced by `owp run --dump-log`.
    #[arg(long, conflicts_with_all = ["instance", "seed"])]
    log: Option<PathBuf>,
    /// Alternatively: run this instance now and verify in memory.
    #[arg(long, requires = "seed")]
    instance: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "rational")]
    mode: ModeArg,
}

#[derive(Args)]
struct SweepArgs {
    /// Cache sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    ks: Vec<u32>,
    /// Horizon per cache slot (T = t_per_k * k).
    #[arg(long, default_value_t = 500)]
    t_per_k: u32,
    #[arg(long, default_value_t = 8)]
    reps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value_t = 1.0)]
    weight: f64,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Gen(args) => {
            gen(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            run(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Opt(args) => {
            opt(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => verify(args),
        Command::Sweep(args) => {
            sweep(args)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn gen(args: GenArgs) -> Result<()> {
    let (inst, path) = match args.family {
        GenFamily::Adversarial { k, t, seed, weights, output } => {
            (gen_adversarial(k, t, weights.build(), seed), output)
        }
        GenFamily::Zipf { n, k, t, exponent, seed, weights, output } => {
            (gen_zipf(n, k, t, exponent, weights.build(), seed), output)
        }
        GenFamily::Trace { input, k, weights, output } => {
            let text = fs::read_to_string(&input)
                .with_context(|| format!("reading trace {}", input.display()))?;
            (Instance::from_trace(&text, k, weights.build())?, output)
        }
    };
    inst.save(&path)?;
    println!("wrote instance: n={} k={} T={} -> {}", inst.n(), inst.k, inst.t_horizon, path.display());
    Ok(())
}

fn jsonl<T: serde::Serialize>(path: &PathBuf, records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(&r)?)?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let inst = Instance::load(&args.instance)?;
    let policy: PolicyChoice = args.policy.into();
    let mode: ArithmeticMode = args.mode.into();

    let wants_dump = args.dump_events.is_some()
        || args.dump_conf.is_some()
        || args.dump_dist.is_some()
        || args.dump_log.is_some();
    if wants_dump {
        if !matches!(policy, PolicyChoice::Main) {
            bail!("dumps are only available for the main policy");
        }
        let mut cfg = RunConfig::learned(mode);
        cfg.collect_run_log = args.dump_events.is_some() || args.dump_log.is_some();
        cfg.collect_dist_stats = args.dump_dist.is_some();
        let out = run_pipeline(&inst, args.seed, &cfg)?;
        if let Some(path) = &args.dump_conf {
            jsonl(path, out.conf_log.iter())?;
        }
        if let Some(path) = &args.dump_dist {
            jsonl(path, out.dist_stats.as_ref().unwrap().iter())?;
        }
        if let Some(path) = &args.dump_events {
            #[derive(serde::Serialize)]
            struct EventRow<'a> {
                t: u32,
                #[serde(flatten)]
                event: &'a owp_core::FractionalEvent,
                onf: f64,
                onf_ucb: f64,
            }
            let log = out.run_log.as_ref().unwrap();
            jsonl(
                path,
                log.entries.iter().map(|e| EventRow {
                    t: e.t,
                    event: &e.event,
                    onf: e.onf,
                    onf_ucb: e.onf_ucb,
                }),
            )?;
        }
        if let Some(path) = &args.dump_log {
            let log = out.run_log.as_ref().unwrap();
            fs::write(path, serde_json::to_string(log)?)
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }

    let label = args
        .instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    let cfg = ExperimentConfig {
        instance: inst,
        label,
        policy,
        base_seed: args.seed,
        replications: args.reps,
        jobs: args.jobs,
        mode,
        compute_opt: !args.no_opt,
    };
    let rows = run_experiment(&cfg)?;
    match &args.csv {
        Some(path) => {
            let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(&rows, f)?;
        }
        None => write_csv(&rows, std::io::stdout().lock())?,
    }
    let agg = aggregate(&rows);
    eprintln!(
        "{} replications: mean on_cost {:.4} (stderr {:.4}){}",
        agg.replications,
        agg.mean_on,
        agg.stderr_on,
        agg.good_event_frequency
            .map(|f| format!(", good-event frequency {f:.4}"))
            .unwrap_or_default()
    );
    Ok(())
}

fn opt(args: OptArgs) -> Result<()> {
    let inst = Instance::load(&args.instance)?;
    let schedule = exact_opt(&inst)?;
    println!("opt_cost {}", schedule.cost);
    if args.schedule {
        #[derive(serde::Serialize)]
        struct Round {
            t: u32,
            cached: Vec<u32>,
        }
        for (t, cache) in schedule.caches.iter().enumerate() {
            let cached: Vec<u32> = (0..inst.n() as u32).filter(|p| cache & (1 << p) != 0).collect();
            println!("{}", serde_json::to_string(&Round { t: t as u32 + 1, cached })?);
        }
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let report: VerifyReport = if let Some(path) = &args.log {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let log: RunLog = serde_json::from_str(&text).context("parsing run log")?;
        verify_log(&log)?
    } else if let Some(inst_path) = &args.instance {
        let inst = Instance::load(inst_path)?;
        let mut cfg = RunConfig::learned(args.mode.into());
        cfg.collect_run_log = true;
        let out = run_pipeline(&inst, args.seed.unwrap(), &cfg)?;
        verify_run(&out)?
    } else {
        bail!("verify needs --log FILE or --instance FILE --seed N");
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.all_hold() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("verification FAILED");
        Ok(ExitCode::FAILURE)
    }
}

fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = SweepConfig {
        ks: args.ks,
        t_per_k: args.t_per_k,
        replications: args.reps,
        base_seed: args.seed,
        jobs: args.jobs,
        weight: args.weight,
    };
    let (points, fit) = run_sweep(&cfg)?;
    let mut out: Box<dyn Write> = match &args.csv {
        Some(path) => Box::new(fs::File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "k,n,T,mean_on,opt_cost,ratio")?;
    for p in &points {
        writeln!(out, "{},{},{},{},{},{}", p.k, p.n, p.t, p.mean_on, p.opt_cost, p.ratio)?;
    }
    eprintln!(
        "fit: ratio ~ {:.4} * ln k; k-exponent {:.4}",
        fit.ln_k_coefficient, fit.k_exponent
    );
    Ok(())
}
