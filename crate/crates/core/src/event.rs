//! The event vocabulary of the fractional/rounding interface.
//!
//! The fractional solver emits these in order; the rounding layer consumes
//! them in the same order. `Evict` carries the UCB-priced cost of the step
//! so downstream accounting never has to re-derive which bound was active.

use serde::{Deserialize, Serialize};

use crate::instance::PageId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "snake_case")]
pub enum FractionalEvent {
    /// The requested page's anti-server drops from `amount` to zero. Free.
    Fetch { page: PageId, amount: f64 },
    /// Anti-server of `page` grows by `dy > 0`; `ucb_cost` = `dy * UCB_page`.
    Evict { page: PageId, dy: f64, ucb_cost: f64 },
    /// The solver demands one stored weight sample of `page`.
    SampleDemand { page: PageId },
    /// Confidence bounds of `page` changed to `(lcb, ucb)`.
    ConfUpdate { page: PageId, lcb: f64, ucb: f64 },
    /// End of the round that requested `page`.
    RequestEnd { page: PageId },
}

impl FractionalEvent {
    pub fn page(&self) -> PageId {
        match *self {
            FractionalEvent::Fetch { page, .. }
            | FractionalEvent::Evict { page, .. }
            | FractionalEvent::SampleDemand { page }
            | FractionalEvent::ConfUpdate { page, .. }
            | FractionalEvent::RequestEnd { page } => page,
        }
    }
}
