//! Reference semantics used to cross-check the generating-function engine.
//!
//! [`enumerate`] walks every reachable valuation exactly (up to a truncation of
//! infinite supports); [`simulate`] is a seeded likelihood-weighting sampler
//! that also handles continuous variables.

mod enumerate;
mod simulate;

use std::collections::BTreeMap;

use crate::kernel::KernelError;

pub use enumerate::{enumerate, EnumerateOptions, MassFunction};
pub use simulate::{simulate, Estimate, SampleSet, SimulateOptions, RNG_ALGORITHM};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("the observations have probability zero")]
    ZeroEvidence,
    #[error("not supported by this oracle: {0}")]
    Unavailable(String),
    #[error("invalid program state: {0}")]
    Invalid(String),
}

/// Total variation distance between two mass functions on ℕ.
pub fn tvd(p: &BTreeMap<u64, f64>, q: &BTreeMap<u64, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, a) in p {
        sum += (a - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in q {
        if !p.contains_key(k) {
            sum += b.abs();
        }
    }
    sum / 2.0
}
