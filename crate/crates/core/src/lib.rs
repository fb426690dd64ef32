//! Simulation laboratory for online weighted paging with sampled weights.
//!
//! The cache algorithm never sees a page's eviction cost; it only observes
//! i.i.d. samples drawn when pages are evicted. A deterministic fractional
//! solver allocates anti-servers optimistically against lower confidence
//! bounds, a randomized rounding layer maintains a distribution over
//! integral cache states priced pessimistically against upper confidence
//! bounds, and the two communicate only through a sample queue and an event
//! stream. The crate also ships an exact offline optimum, reference
//! policies, instance generators, and a diagnostics engine that re-checks
//! the potential-function and regret inequalities on finished runs.

pub mod baselines;
pub mod confbounds;
pub mod diagnostics;
pub mod error;
pub mod event;
pub mod experiment;
pub mod fractional;
pub mod generate;
pub mod instance;
pub mod ledger;
pub mod opt;
pub mod pipeline;
pub mod rounding;

pub use error::{InstanceError, RunError};
pub use event::FractionalEvent;
pub use instance::{Instance, PageId, WeightDistribution};
pub use ledger::{CostBreakdown, CostLedger};
pub use pipeline::{run_pipeline, ArithmeticMode, RunConfig, RunOutput, WeightKnowledge};
