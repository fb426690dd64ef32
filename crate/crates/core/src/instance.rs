//! Problem instances: pages, weight distributions, request sequences.
//!
//! Every page carries a distribution supported in `(0, 1]`; its mean is the
//! page's eviction weight. The algorithm never sees the distribution (only
//! samples drawn on eviction); the oracle and the cost accounting do.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::InstanceError;

/// Index into an instance's page table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PageId(pub u32);

impl PageId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A weight distribution supported in `(0, 1]` with a closed-form mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightDistribution {
    /// Point mass at `value`.
    Deterministic { value: f64 },
    /// `low` with probability `1 - p_high`, `high` with probability `p_high`.
    TwoPoint { low: f64, high: f64, p_high: f64 },
    /// `floor + (1 - floor) * Beta(alpha, beta)`; `floor > 0` keeps the
    /// support inside `(0, 1]`.
    ScaledBeta { alpha: f64, beta: f64, floor: f64 },
}

impl WeightDistribution {
    /// Validates the parameters; support must lie in `(0, 1]`.
    pub fn validate(&self) -> Result<(), InstanceError> {
        let ok = match *self {
            WeightDistribution::Deterministic { value } => value > 0.0 && value <= 1.0,
            WeightDistribution::TwoPoint { low, high, p_high } => {
                low > 0.0 && low <= high && high <= 1.0 && (0.0..=1.0).contains(&p_high)
            }
            WeightDistribution::ScaledBeta { alpha, beta, floor } => {
                alpha > 0.0 && beta > 0.0 && floor > 0.0 && floor <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(InstanceError::BadDistribution(format!("{self:?}")))
        }
    }

    /// Exact closed-form mean, always in `(0, 1]`.
    pub fn mean(&self) -> f64 {
        match *self {
            WeightDistribution::Deterministic { value } => value,
            WeightDistribution::TwoPoint { low, high, p_high } => {
                low * (1.0 - p_high) + high * p_high
            }
            WeightDistribution::ScaledBeta { alpha, beta, floor } => {
                floor + (1.0 - floor) * alpha / (alpha + beta)
            }
        }
    }

    /// Exact closed-form variance.
    pub fn variance(&self) -> f64 {
        match *self {
            WeightDistribution::Deterministic { .. } => 0.0,
            WeightDistribution::TwoPoint { low, high, p_high } => {
                p_high * (1.0 - p_high) * (high - low) * (high - low)
            }
            WeightDistribution::ScaledBeta { alpha, beta, floor } => {
                let s = alpha + beta;
                (1.0 - floor) * (1.0 - floor) * alpha * beta / (s * s * (s + 1.0))
            }
        }
    }

    /// Draws one value in `(0, 1]`. Reproducible given the rng state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WeightDistribution::Deterministic { value } => value,
            WeightDistribution::TwoPoint { low, high, p_high } => {
                if rng.random::<f64>() < p_high {
                    high
                } else {
                    low
                }
            }
            WeightDistribution::ScaledBeta { alpha, beta, floor } => {
                let b = Beta::new(alpha, beta).expect("validated parameters").sample(rng);
                (floor + (1.0 - floor) * b).clamp(floor, 1.0)
            }
        }
    }
}

/// A full experiment input: cache size, horizon, page table, request sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub k: u32,
    #[serde(rename = "T")]
    pub t_horizon: u32,
    pub pages: Vec<PageEntry>,
    pub requests: Vec<PageId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageEntry {
    pub id: PageId,
    pub dist: WeightDistribution,
}

impl Instance {
    pub fn new(
        k: u32,
        pages: Vec<WeightDistribution>,
        requests: Vec<PageId>,
    ) -> Result<Self, InstanceError> {
        let t_horizon = requests.len() as u32;
        let inst = Instance {
            k,
            t_horizon,
            pages: pages
                .into_iter()
                .enumerate()
                .map(|(i, dist)| PageEntry { id: PageId(i as u32), dist })
                .collect(),
            requests,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.pages.len()
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.k == 0 {
            return Err(InstanceError::BadCacheSize);
        }
        if self.n() <= self.k as usize {
            return Err(InstanceError::TooFewPages { n: self.n(), k: self.k });
        }
        if self.t_horizon as usize != self.requests.len() {
            return Err(InstanceError::HorizonMismatch {
                t: self.t_horizon,
                requests: self.requests.len(),
            });
        }
        for (i, entry) in self.pages.iter().enumerate() {
            if entry.id.index() != i {
                return Err(InstanceError::NonContiguousIds(entry.id));
            }
            entry.dist.validate()?;
        }
        for &r in &self.requests {
            if r.index() >= self.n() {
                return Err(InstanceError::UnknownPageId(r));
            }
        }
        Ok(())
    }

    /// True mean weight of page `p`.
    pub fn weight(&self, p: PageId) -> f64 {
        self.pages[p.index()].dist.mean()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.pages.iter().map(|e| e.dist.mean()).collect()
    }

    pub fn dist(&self, p: PageId) -> &WeightDistribution {
        &self.pages[p.index()].dist
    }

    pub fn load(path: &Path) -> Result<Self, InstanceError> {
        let text = fs::read_to_string(path)
            .map_err(|e| InstanceError::Io(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let inst: Instance =
            serde_json::from_str(text).map_err(|e| InstanceError::Schema(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn save(&self, path: &Path) -> Result<(), InstanceError> {
        let text = self.to_json();
        fs::write(path, text)
            .map_err(|e| InstanceError::Io(path.display().to_string(), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    /// Builds an instance from a plain-text trace, one page id per line.
    /// Pages are numbered `0..=max_id`; every page gets `dist`.
    pub fn from_trace(
        trace: &str,
        k: u32,
        dist: WeightDistribution,
    ) -> Result<Self, InstanceError> {
        let mut requests = Vec::new();
        for line in trace.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let id: u32 = line
                .parse()
                .map_err(|_| InstanceError::Schema(format!("bad trace line {line:?}")))?;
            requests.push(PageId(id));
        }
        let n = requests.iter().map(|p| p.0 + 1).max().unwrap_or(0) as usize;
        Instance::new(k, vec![dist; n], requests)
    }
}
