use std::path::PathBuf;
use std::time::Instant;

use gfinfer_core::ast::{desugar, validate, DesugarOptions, Program, VarId};
use gfinfer_core::gf::{translate, GfProgram, TranslateOptions};
use gfinfer_core::kernel::{with_working_precision, BigFloat, Interval, KernelSpec, Scalar};
use gfinfer_core::oracle::{enumerate, simulate, EnumerateOptions, SimulateOptions, RNG_ALGORITHM};
use gfinfer_core::parser::parse;
use gfinfer_core::posterior::{central_stats, summarize, MomentSet, PosteriorOptions};
use num_rational::BigRational;

use crate::report::{KernelInfo, Mass, Moments, Num, Report, Timings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OracleMode {
    Enumerate,
    Simulate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub path: PathBuf,
    pub var: Option<String>,
    pub kernel: KernelSpec,
    pub mass_limit: Option<u64>,
    pub naive_observe: bool,
    pub mgf: bool,
    pub oracle: Option<OracleMode>,
    pub samples: usize,
    pub seed: u64,
    pub truncate_at: Option<u64>,
}

impl RunConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        RunConfig {
            path: path.into(),
            var: None,
            kernel: KernelSpec::Float64,
            mass_limit: None,
            naive_observe: false,
            mgf: true,
            oracle: None,
            samples: 100_000,
            seed: 0,
            truncate_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Reading, parsing or checking the program failed.
    #[error("{0}")]
    FrontEnd(String),
    #[error("{0}")]
    Eval(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::FrontEnd(_) => 2,
            CliError::Eval(_) => 3,
            CliError::Usage(_) => 4,
        }
    }
}

fn eval_err(e: impl std::fmt::Display) -> CliError {
    CliError::Eval(e.to_string())
}

/// Reads the program file and runs [`run_source`].
pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    let src = std::fs::read_to_string(&config.path)
        .map_err(|e| CliError::FrontEnd(format!("cannot read {}: {e}", config.path.display())))?;
    run_source(&src, config)
}

pub fn run_source(src: &str, config: &RunConfig) -> Result<Report, CliError> {
    let file = config.path.display();
    let program = parse(src).map_err(|e| CliError::FrontEnd(format!("{file}:{e}")))?;
    let start = Instant::now();
    let var = match &config.var {
        Some(name) => program
            .lookup(name)
            .ok_or_else(|| CliError::Usage(format!("no variable `{name}` in {file}")))?,
        None => program
            .query
            .ok_or_else(|| CliError::Usage(format!("{file} has no variables to query")))?,
    };
    let checked = validate(&program).map_err(|e| CliError::FrontEnd(format!("{file}: {e}")))?;
    let mut report = match config.oracle {
        None => {
            let core = desugar(
                &program,
                DesugarOptions {
                    naive_observe: config.naive_observe,
                },
            );
            let gf = translate(&core, TranslateOptions { mgf: config.mgf })
                .map_err(|e| CliError::FrontEnd(format!("{file}: {e}")))?;
            exact_dispatch(&gf, var.0, config)?
        }
        Some(OracleMode::Enumerate) => enumerate_dispatch(&program, var, config)?,
        Some(OracleMode::Simulate) => simulated(&program, var, config)?,
    };
    let mut warnings = checked.warnings;
    warnings.append(&mut report.warnings);
    report.warnings = warnings;
    report.timings.total_ms = ms(start);
    Ok(report)
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn kernel_info(spec: KernelSpec) -> KernelInfo {
    let precision_bits = match spec {
        KernelSpec::Rational => None,
        _ => Some(spec.ctx().precision_bits),
    };
    KernelInfo {
        name: spec.to_string(),
        precision_bits,
        rng: None,
        seed: None,
        samples: None,
        ess: None,
    }
}

fn moments_of<T: Scalar>(m: &MomentSet<T>) -> Moments {
    Moments {
        mean: Num::of(&m.mean),
        variance: Num::of(&m.variance),
        skewness: m.skewness.as_ref().map(Num::of),
        kurtosis: m.kurtosis.as_ref().map(Num::of),
    }
}

fn exact_dispatch(gf: &GfProgram, var: usize, config: &RunConfig) -> Result<Report, CliError> {
    let spec = config.kernel;
    match spec {
        KernelSpec::Float64 => exact::<f64>(gf, var, config),
        KernelSpec::Rational => exact::<BigRational>(gf, var, config),
        KernelSpec::IntervalFloat64 => exact::<Interval<f64>>(gf, var, config),
        KernelSpec::BigFloat { .. } => with_working_precision(spec.ctx().precision_bits, || {
            exact::<BigFloat>(gf, var, config)
        }),
        KernelSpec::IntervalBigFloat { .. } => {
            with_working_precision(spec.ctx().precision_bits, || {
                exact::<Interval<BigFloat>>(gf, var, config)
            })
        }
    }
}

fn exact<T: Scalar>(gf: &GfProgram, var: usize, config: &RunConfig) -> Result<Report, CliError> {
    let opts = PosteriorOptions {
        ctx: config.kernel.ctx(),
        memoize: true,
        mass_limit: config.mass_limit,
    };
    let s = summarize::<T>(gf, var, &opts).map_err(eval_err)?;
    let mut warnings = s.warnings;
    let (masses, cutoff, tail_bound) = match &s.masses {
        Some(t) => (
            t.masses
                .iter()
                .enumerate()
                .map(|(k, p)| Mass {
                    k: k as u64,
                    p: Num::of(p),
                })
                .collect(),
            Some(t.cutoff),
            Some(Num::of(&t.tail_bound)),
        ),
        None => {
            warnings.push(format!(
                "`{}` is continuous; no probability masses are reported",
                s.var
            ));
            (vec![], None, None)
        }
    };
    Ok(Report {
        query: s.var,
        evidence: Num::of(&s.moments.evidence),
        moments: moments_of(&s.moments),
        masses,
        cutoff,
        tail_bound,
        kernel: kernel_info(config.kernel),
        timings: Timings {
            eval_ms: (s.moment_time + s.mass_time).as_secs_f64() * 1e3,
            total_ms: 0.0,
        },
        warnings,
    })
}

fn enumerate_dispatch(
    program: &Program,
    var: VarId,
    config: &RunConfig,
) -> Result<Report, CliError> {
    let spec = config.kernel;
    match spec {
        KernelSpec::Float64 => enumerated::<f64>(program, var, config),
        KernelSpec::Rational => enumerated::<BigRational>(program, var, config),
        KernelSpec::IntervalFloat64 => enumerated::<Interval<f64>>(program, var, config),
        KernelSpec::BigFloat { .. } => with_working_precision(spec.ctx().precision_bits, || {
            enumerated::<BigFloat>(program, var, config)
        }),
        KernelSpec::IntervalBigFloat { .. } => {
            with_working_precision(spec.ctx().precision_bits, || {
                enumerated::<Interval<BigFloat>>(program, var, config)
            })
        }
    }
}

fn enumerated<T: Scalar>(
    program: &Program,
    var: VarId,
    config: &RunConfig,
) -> Result<Report, CliError> {
    let start = Instant::now();
    let opts = EnumerateOptions {
        truncate_at: config.truncate_at,
        ctx: config.kernel.ctx(),
    };
    let mf = enumerate::<T>(program, &opts).map_err(eval_err)?;
    let raw = [1, 2, 3, 4].map(|k| mf.raw_moment(var.0, k));
    let m = central_stats(&raw).map_err(eval_err)?;
    let marginal = mf.marginal(var.0);
    let top = marginal.keys().next_back().copied().unwrap_or(0);
    let mut masses = Vec::new();
    let mut total = T::zero();
    for k in 0..=top {
        let p = marginal.get(&k).cloned().unwrap_or_else(T::zero);
        total.add_assign(&p);
        masses.push(Mass { k, p: Num::of(&p) });
    }
    let mut warnings = vec![];
    if config.truncate_at.is_some() {
        warnings.push("enumeration truncated infinite supports; results are approximate".into());
    }
    Ok(Report {
        query: program.name(var).to_string(),
        evidence: Num::of(&mf.evidence),
        moments: moments_of(&m),
        masses,
        cutoff: Some(top),
        tail_bound: Some(Num::of(&T::one().sub(&total))),
        kernel: KernelInfo {
            name: format!("enumerate/{}", config.kernel),
            ..kernel_info(config.kernel)
        },
        timings: Timings {
            eval_ms: ms(start),
            total_ms: 0.0,
        },
        warnings,
    })
}

fn simulated(program: &Program, var: VarId, config: &RunConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    let opts = SimulateOptions {
        samples: config.samples,
        seed: config.seed,
    };
    let s = simulate(program, &opts).map_err(eval_err)?;
    let v = var.0;
    let raw = [1, 2, 3, 4].map(|k| s.raw_moment(v, k).value);
    let m = central_stats(&raw).map_err(eval_err)?;
    let ess = s.ess();
    let mut warnings = vec![];
    if ess < 1.0 {
        warnings.push("effective sample size is below one".into());
    }
    let hist = s.masses(v);
    let discrete = s.values.iter().all(|row| row[v].fract() == 0.0);
    let masses = if discrete {
        hist.iter()
            .map(|(k, p)| Mass {
                k: *k,
                p: Num::Point(format!("{p:?}")),
            })
            .collect()
    } else {
        vec![]
    };
    let f = |x: f64| Num::Point(format!("{x:?}"));
    Ok(Report {
        query: program.name(var).to_string(),
        evidence: f(s.evidence()),
        moments: Moments {
            mean: Num::estimate(&s.mean(v)),
            variance: f(m.variance),
            skewness: m.skewness.map(f),
            kurtosis: m.kurtosis.map(f),
        },
        cutoff: hist.keys().next_back().copied().filter(|_| discrete),
        tail_bound: None,
        masses,
        kernel: KernelInfo {
            name: "simulate".into(),
            precision_bits: None,
            rng: Some(RNG_ALGORITHM.into()),
            seed: Some(config.seed),
            samples: Some(config.samples),
            ess: Some(format!("{ess:.1}")),
        },
        timings: Timings {
            eval_ms: ms(start),
            total_ms: 0.0,
        },
        warnings,
    })
}
