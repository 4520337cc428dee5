use std::path::PathBuf;

use clap::Parser;
use gfinfer_core::kernel::KernelSpec;

use crate::run::{OracleMode, RunConfig};

/// Exact posterior inference for discrete probabilistic programs.
#[derive(Debug, Clone, Parser)]
#[command(name = "gf-infer", version)]
pub struct Args {
    /// Program file.
    pub file: PathBuf,
    /// Query variable; defaults to the last variable assigned or sampled.
    #[arg(long, value_name = "NAME")]
    pub var: Option<String>,
    /// Exact rational arithmetic; fails on programs that need exp or ln.
    #[arg(long, conflicts_with_all = ["precision", "bounds"])]
    pub rational: bool,
    /// Binary precision of the multiprecision float kernel.
    #[arg(long, value_name = "BITS", value_parser = clap::value_parser!(u32).range(16..))]
    pub precision: Option<u32>,
    /// Interval arithmetic with guaranteed enclosures (combine with --precision for wider bounds).
    #[arg(long)]
    pub bounds: bool,
    /// Report masses for k = 0..=N instead of the moment-based cutoff.
    #[arg(long, value_name = "N")]
    pub mass_limit: Option<u64>,
    /// Print one JSON document instead of the text report.
    #[arg(long)]
    pub json: bool,
    /// Expand observations into a fresh variable plus a branch (slower; for cross-checks).
    #[arg(long)]
    pub naive_observe: bool,
    /// Debug: keep continuous variables in the pgf coordinate.
    #[arg(long)]
    pub no_mgf: bool,
    /// Run a reference oracle instead of the generating-function engine.
    #[arg(long, value_enum, value_name = "MODE")]
    pub oracle: Option<OracleMode>,
    /// Samples drawn by the simulate oracle.
    #[arg(long, value_name = "N", default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    /// Seed of the simulate oracle.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub seed: u64,
    /// Largest value the enumerate oracle draws from infinite supports.
    #[arg(long, value_name = "N")]
    pub truncate_at: Option<u64>,
}

impl Args {
    pub fn kernel(&self) -> KernelSpec {
        match (self.rational, self.precision, self.bounds) {
            (true, _, _) => KernelSpec::Rational,
            (_, Some(bits), true) => KernelSpec::IntervalBigFloat { bits },
            (_, None, true) => KernelSpec::IntervalFloat64,
            (_, Some(bits), false) => KernelSpec::BigFloat { bits },
            (_, None, false) => KernelSpec::Float64,
        }
    }

    pub fn config(&self) -> RunConfig {
        RunConfig {
            path: self.file.clone(),
            var: self.var.clone(),
            kernel: self.kernel(),
            mass_limit: self.mass_limit,
            naive_observe: self.naive_observe,
            mgf: !self.no_mgf,
            oracle: self.oracle,
            samples: self.samples as usize,
            seed: self.seed,
            truncate_at: self.truncate_at,
        }
    }
}
