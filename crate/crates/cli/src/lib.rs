//! Library side of the `gf-infer` command: configuration, the inference
//! pipeline and the report it produces.

mod args;
mod report;
mod run;

pub use args::Args;
pub use report::{KernelInfo, Mass, Moments, Num, Report, Timings};
pub use run::{run, run_source, CliError, OracleMode, RunConfig};
