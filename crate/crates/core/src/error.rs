use thiserror::Error;

use crate::instance::PageId;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("instance schema violation: {0}")]
    Schema(String),
    #[error("cache size k must be positive")]
    BadCacheSize,
    #[error("n must exceed k (n = {n}, k = {k})")]
    TooFewPages { n: usize, k: u32 },
    #[error("horizon T = {t} does not match {requests} requests")]
    HorizonMismatch { t: u32, requests: usize },
    #[error("unknown page id {0}")]
    UnknownPageId(PageId),
    #[error("page ids must be contiguous from 0; found {0}")]
    NonContiguousIds(PageId),
    #[error("distribution parameters out of range: {0}")]
    BadDistribution(String),
    #[error("io error on {0}: {1}")]
    Io(String, String),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("sample demanded for page {0} but none available")]
    SampleUnavailable(PageId),
    #[error("rounding invariant broken: {0}")]
    RoundingInvariant(String),
    #[error("instance too large for exact oracle (n = {n}, k = {k}, T = {t})")]
    OracleTooLarge { n: usize, k: u32, t: u32 },
    #[error("diagnostics: {0}")]
    Diagnostics(String),
    #[error("io error on {0}: {1}")]
    Io(String, String),
}
