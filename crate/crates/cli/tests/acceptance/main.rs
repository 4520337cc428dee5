//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so that every line is printed under a
//! plain `cargo test`. Numbers given as arguments select a subset, e.g.
//! `cargo test -p gfinfer-cli --test acceptance -- 1 4`.

mod programs;

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use gfinfer_cli::{run_source, Num, OracleMode, Report, RunConfig};
use gfinfer_core::ast::{desugar, render, validate, DesugarOptions, Program};
use gfinfer_core::gf::{translate, GfProgram, TranslateOptions};
use gfinfer_core::kernel::{
    with_working_precision, BigFloat, Interval, KernelSpec, Rendered, Scalar,
};
use gfinfer_core::oracle::{enumerate, EnumerateOptions, OracleError};
use gfinfer_core::parser::parse;
use gfinfer_core::posterior::{summarize, PosteriorError, PosteriorOptions, Summary};
use gfinfer_core::taylor::{op_counters, reset_op_counters, TaylorPoly, Truncation};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use programs::{observe_case, random_program, ObserveFamily, Shape};

type Rational = BigRational;

const C1_REL_TOL: f64 = 1e-9;
const C1_MIN_DIGITS: f64 = 30.0;
const C1_BITS: u32 = 256;
const C1_TRUNCATE: u64 = 200;
const C1_MAX_TIME: Duration = Duration::from_millis(100);

const C2_PROGRAMS: usize = 200;
const C2_MAX_STATEMENTS: usize = 12;
const C2_MAX_TIME: Duration = Duration::from_secs(60);

const C3_PER_FAMILY: usize = 50;
const C3_REL_TOL: f64 = 1e-9;
const C3_MASS_LIMIT: u64 = 12;

const C4_REL_TOL: f64 = 1e-6;
const C4_TRUNCATE: u64 = 4000;
const C4_MAX_TIME: Duration = Duration::from_secs(5);

const C5_SAMPLES: usize = 1_000_000;
const C5_SEED: u64 = 7;
const C5_MAX_SE: f64 = 3.0;
const C5_BITS: u32 = 64;
const C5_MIN_DIGITS: u32 = 5;
const C5_MAX_TIME: Duration = Duration::from_secs(120);

const C7_DEGREES: [u64; 4] = [50, 100, 200, 400];
const C7_MAX_SLOPE: f64 = 3.5;
const C7_REPEATS: usize = 3;
/// Substitution updates allowed per substitution, in units of `D + 1`.
const C7_UPDATES_PER_D: f64 = 2.0;

const C8_PROGRAMS: usize = 50;
const C8_RANDOM_MIN: f64 = 255.0 / 256.0;
const C8_ROUNDING: f64 = 1e-9;
const C8_BENCHMARK_MIN: f64 = 1.0 - 1e-4;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = Result<Outcome, String>;

type Criterion = (u32, &'static str, fn() -> Check);

fn outcome(pass: bool, detail: String) -> Check {
    Ok(Outcome { pass, detail })
}

fn example(name: &str) -> String {
    let path = format!("{}/examples/{name}.sgcl", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn config(name: &str, var: &str, kernel: KernelSpec) -> RunConfig {
    let mut c = RunConfig::new(format!("{name}.sgcl"));
    c.var = Some(var.into());
    c.kernel = kernel;
    c
}

fn compile(src: &str, naive_observe: bool) -> Result<(Program, GfProgram), String> {
    let program = parse(src).map_err(|e| format!("{e}\n{src}"))?;
    validate(&program).map_err(|e| format!("{e}\n{src}"))?;
    let core = desugar(&program, DesugarOptions { naive_observe });
    let gf = translate(&core, TranslateOptions { mgf: true }).map_err(|e| format!("{e}\n{src}"))?;
    Ok((program, gf))
}

fn posterior<T: Scalar>(
    gf: &GfProgram,
    var: &str,
    kernel: KernelSpec,
    mass_limit: Option<u64>,
) -> Result<Summary<T>, PosteriorError> {
    let i = gf
        .vars()
        .iter()
        .position(|v| v == var)
        .unwrap_or_else(|| panic!("no variable {var}"));
    summarize::<T>(
        gf,
        i,
        &PosteriorOptions {
            ctx: kernel.ctx(),
            memoize: true,
            mass_limit,
        },
    )
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    let d = (a - b).abs();
    d <= rel * a.abs().max(b.abs()) || d <= 1e-15
}

fn point<T: Scalar>(v: &T) -> String {
    match v.render() {
        Rendered::Point(s) => s,
        Rendered::Interval { lo, hi, .. } => format!("[{lo}, {hi}]"),
    }
}

/// Exact value of a decimal string such as `-2.5e-3`.
fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let shift = exp - frac.len() as i32;
    let ten = Rational::from_integer(10.into());
    let scale = if shift >= 0 {
        num_traits::pow(ten, shift as usize)
    } else {
        num_traits::pow(ten, (-shift) as usize).recip()
    };
    let v = Rational::from_integer(digits) * scale;
    Some(if neg { -v } else { v })
}

/// Decimal digits to which `got` agrees with `want`.
fn agreeing_digits(got: &Rational, want: &Rational) -> f64 {
    let err = ((got - want) / want).abs();
    if Zero::is_zero(&err) {
        return f64::INFINITY;
    }
    -ToPrimitive::to_f64(&err).unwrap_or(1.0).log10()
}

/// `e^{-2}` from its alternating series; 80 terms leave an error below 1e-90.
fn exp_minus_two() -> Rational {
    let mut term = Rational::from_integer(1.into());
    let mut sum = term.clone();
    for k in 1..80 {
        term = term * Rational::from_integer((-2).into()) / Rational::from_integer(k.into());
        sum += &term;
    }
    sum
}

fn num(n: &Num) -> Result<f64, String> {
    n.approx().ok_or_else(|| format!("unreadable number {n:?}"))
}

fn c1_small_example() -> Check {
    let src = example("population_simple");
    let start = Instant::now();
    let report = run_source(&src, &config("population_simple", "X", KernelSpec::Float64))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let want_evidence = 2.0 * (-2f64).exp();
    let evidence = num(&report.evidence)?;
    let mean = num(&report.moments.mean)?;

    let (_, gf) = compile(&src, false)?;
    let bits = KernelSpec::BigFloat { bits: C1_BITS };
    let big = with_working_precision(C1_BITS as usize, || {
        posterior::<BigFloat>(&gf, "X", bits, None)
            .map(|s| (point(&s.moments.evidence), point(&s.moments.mean)))
    })
    .map_err(|e| e.to_string())?;
    let exact_evidence = exp_minus_two() * Rational::from_integer(2.into());
    let ev_digits = agreeing_digits(
        &parse_decimal(&big.0).ok_or("unreadable evidence")?,
        &exact_evidence,
    );
    let mean_digits = agreeing_digits(
        &parse_decimal(&big.1).ok_or("unreadable mean")?,
        &Rational::from_integer(20.into()),
    );

    let program = parse(&src).map_err(|e| e.to_string())?;
    let x = program.lookup("X").ok_or("no X")?.0;
    let oracle = enumerate::<f64>(
        &program,
        &EnumerateOptions {
            truncate_at: Some(C1_TRUNCATE),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?
    .marginal(x);
    let mut mass_ok = true;
    let mut mass_detail = Vec::new();
    for k in [2u64, 10] {
        let got = num(report.mass(k).ok_or(format!("no mass at {k}"))?)?;
        let want = oracle.get(&k).copied().unwrap_or(0.0);
        mass_ok &= close(got, want, C1_REL_TOL);
        mass_detail.push(format!("P[X={k}]={got:.6e} oracle {want:.6e}"));
    }

    let pass = close(evidence, want_evidence, C1_REL_TOL)
        && close(mean, 20.0, C1_REL_TOL)
        && ev_digits >= C1_MIN_DIGITS
        && mean_digits >= C1_MIN_DIGITS
        && mass_ok
        && elapsed < C1_MAX_TIME;
    outcome(
        pass,
        format!(
            "evidence {evidence:.15e}, mean {mean:.15}, bigfloat{C1_BITS} digits {ev_digits:.1}/{mean_digits:.1}, {}, {:.1} ms",
            mass_detail.join(", "),
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

enum Agreement {
    Equal,
    BothZeroEvidence,
}

fn finite_agreement(src: &str, query: &str) -> Result<Agreement, String> {
    let (program, gf) = compile(src, false)?;
    let q = program.lookup(query).ok_or("query missing")?.0;
    let oracle = enumerate::<Rational>(&program, &EnumerateOptions::default());
    let mf = match oracle {
        Err(OracleError::ZeroEvidence) => {
            return match posterior::<Rational>(&gf, query, KernelSpec::Rational, None) {
                Err(PosteriorError::ZeroEvidence) => Ok(Agreement::BothZeroEvidence),
                other => Err(format!(
                    "oracle has zero evidence, engine gave {other:?}\n{src}"
                )),
            };
        }
        Err(e) => return Err(format!("{e}\n{src}")),
        Ok(mf) => mf,
    };
    let marginal = mf.marginal(q);
    let limit = marginal.keys().max().copied().unwrap_or(0);
    let s = posterior::<Rational>(&gf, query, KernelSpec::Rational, Some(limit))
        .map_err(|e| format!("{e}\n{src}"))?;
    let table = s.masses.ok_or("no mass table")?;
    let zero = <Rational as Zero>::zero();
    for k in 0..=limit {
        let want = marginal.get(&k).unwrap_or(&zero);
        if &table.masses[k as usize] != want {
            return Err(format!(
                "P[{query}={k}]: engine {} oracle {want}\n{src}",
                table.masses[k as usize]
            ));
        }
    }
    let mean = mf.raw_moment(q, 1);
    let variance = mf.raw_moment(q, 2) - &mean * &mean;
    if s.moments.evidence != mf.evidence || s.moments.mean != mean || s.moments.variance != variance
    {
        return Err(format!(
            "moments differ: engine ({}, {}, {}) oracle ({}, {mean}, {variance})\n{src}",
            s.moments.evidence, s.moments.mean, s.moments.variance, mf.evidence
        ));
    }
    Ok(Agreement::Equal)
}

fn c2_oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let shape = Shape {
        infinite: false,
        max_statements: C2_MAX_STATEMENTS,
    };
    let start = Instant::now();
    let (mut equal, mut zero) = (0, 0);
    let mut failures = Vec::new();
    // zero-evidence programs are checked too but do not count towards the total
    while equal < C2_PROGRAMS && equal + zero + failures.len() < 5 * C2_PROGRAMS {
        let (src, q) = random_program(&mut rng, &shape);
        match finite_agreement(&src, q) {
            Ok(Agreement::Equal) => equal += 1,
            Ok(Agreement::BothZeroEvidence) => zero += 1,
            Err(e) => failures.push(e),
        }
    }
    let elapsed = start.elapsed();
    let mut detail = format!(
        "{equal} exact matches, {zero} agreeing zero-evidence, {} mismatches, {:.1} s",
        failures.len(),
        elapsed.as_secs_f64()
    );
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first mismatch: {f}"));
    }
    outcome(
        failures.is_empty() && equal == C2_PROGRAMS && elapsed < C2_MAX_TIME,
        detail,
    )
}

fn compare_observe<T: Scalar>(
    fast: &GfProgram,
    naive: &GfProgram,
    query: &str,
    kernel: KernelSpec,
    same: impl Fn(&T, &T) -> bool,
) -> Result<bool, String> {
    let limit = Some(C3_MASS_LIMIT);
    let a = posterior::<T>(fast, query, kernel, limit);
    let b = posterior::<T>(naive, query, kernel, limit);
    let (a, b) = match (a, b) {
        (Err(PosteriorError::ZeroEvidence), Err(PosteriorError::ZeroEvidence)) => return Ok(true),
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => return Err(format!("{:?} vs {:?}", a.err(), b.err())),
    };
    let mut ok = same(&a.moments.evidence, &b.moments.evidence);
    for (x, y) in a.moments.raw.iter().zip(&b.moments.raw) {
        ok &= same(x, y);
    }
    match (&a.masses, &b.masses) {
        (Some(x), Some(y)) => {
            ok &= x.masses.len() == y.masses.len();
            for (p, q) in x.masses.iter().zip(&y.masses) {
                ok &= same(p, q);
            }
        }
        (None, None) => {}
        _ => ok = false,
    }
    Ok(ok)
}

fn c3_observe_rewrites() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut parts = Vec::new();
    let mut pass = true;
    let mut first_failure = None;
    for family in ObserveFamily::ALL {
        let (mut exact, mut float, mut bad) = (0, 0, 0);
        for _ in 0..C3_PER_FAMILY {
            let case = observe_case(&mut rng, family);
            let (_, fast) = compile(&case.src, false)?;
            let (_, naive) = compile(&case.src, true)?;
            for q in &case.queries {
                let agree = if case.rational {
                    exact += 1;
                    compare_observe::<Rational>(&fast, &naive, q, KernelSpec::Rational, |a, b| {
                        a == b
                    })
                } else {
                    float += 1;
                    compare_observe::<f64>(&fast, &naive, q, KernelSpec::Float64, |a, b| {
                        close(*a, *b, C3_REL_TOL)
                    })
                };
                if !matches!(agree, Ok(true)) {
                    bad += 1;
                    pass = false;
                    first_failure
                        .get_or_insert(format!("{family:?} query {q}: {agree:?}\n{}", case.src));
                }
            }
        }
        parts.push(format!(
            "{family:?} {exact} exact/{float} float, {bad} differ"
        ));
    }
    let mut detail = parts.join("; ");
    if let Some(f) = first_failure {
        detail.push_str(&format!("; first: {f}"));
    }
    outcome(pass, detail)
}

fn c4_population() -> Check {
    let src = example("population");
    let start = Instant::now();
    let (program, gf) = compile(&src, false)?;
    let s = posterior::<f64>(&gf, "N", KernelSpec::Float64, None).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let n = program.lookup("N").ok_or("no N")?.0;
    let mf = enumerate::<f64>(
        &program,
        &EnumerateOptions {
            truncate_at: Some(C4_TRUNCATE),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mean = mf.raw_moment(n, 1);
    let variance = mf.raw_moment(n, 2) - mean * mean;
    let pass = close(s.moments.mean, mean, C4_REL_TOL)
        && close(s.moments.variance, variance, C4_REL_TOL)
        && elapsed < C4_MAX_TIME;
    outcome(
        pass,
        format!(
            "mean {:.9} (oracle {mean:.9}), variance {:.7} (oracle {variance:.7}), {:.1} ms",
            s.moments.mean,
            s.moments.variance,
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

/// The exact switchpoint run in bigfloat interval mode, shared by the
/// criteria that need it.
fn switchpoint_exact() -> &'static Result<(Report, Duration), String> {
    static CELL: OnceLock<Result<(Report, Duration), String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let src = example("switchpoint_efficient");
        let cfg = config(
            "switchpoint_efficient",
            "T",
            KernelSpec::IntervalBigFloat { bits: C5_BITS },
        );
        let start = Instant::now();
        let r = run_source(&src, &cfg).map_err(|e| e.to_string())?;
        Ok((r, start.elapsed()))
    })
}

fn digits(n: &Num) -> u32 {
    n.digits().unwrap_or(u32::MAX)
}

fn c5_switchpoint() -> Check {
    let (exact, elapsed) = switchpoint_exact().as_ref().map_err(Clone::clone)?;
    let mut cfg = config("switchpoint", "T", KernelSpec::Float64);
    cfg.oracle = Some(OracleMode::Simulate);
    cfg.samples = C5_SAMPLES;
    cfg.seed = C5_SEED;
    let sim = run_source(&example("switchpoint"), &cfg).map_err(|e| e.to_string())?;
    let (value, se) = match &sim.moments.mean {
        Num::Estimate { value, std_error } => (
            value.parse::<f64>().map_err(|e| e.to_string())?,
            std_error.parse::<f64>().map_err(|e| e.to_string())?,
        ),
        other => return Err(format!("simulation mean is not an estimate: {other:?}")),
    };
    let mean = num(&exact.moments.mean)?;
    let (dm, dv) = (digits(&exact.moments.mean), digits(&exact.moments.variance));
    let z = (mean - value).abs() / se;
    let pass =
        z <= C5_MAX_SE && dm >= C5_MIN_DIGITS && dv >= C5_MIN_DIGITS && *elapsed < C5_MAX_TIME;
    outcome(
        pass,
        format!(
            "exact mean {mean:.6} ({dm} digits), variance {:.5} ({dv} digits) in {:.1} s; simulated {value:.4} ± {se:.4} (ess {}), {z:.2} SE apart",
            num(&exact.moments.variance)?,
            elapsed.as_secs_f64(),
            sim.kernel.ess.as_deref().unwrap_or("?")
        ),
    )
}

fn c6_no_mgf() -> Check {
    let (exact, _) = switchpoint_exact().as_ref().map_err(Clone::clone)?;
    let with_mgf = digits(&exact.moments.mean).min(digits(&exact.moments.variance));
    let mut cfg = config(
        "switchpoint_efficient",
        "T",
        KernelSpec::IntervalBigFloat { bits: C5_BITS },
    );
    cfg.mgf = false;
    let (without, how) = match run_source(&example("switchpoint_efficient"), &cfg) {
        Ok(r) => {
            let d = digits(&r.moments.mean).min(digits(&r.moments.variance));
            (d, format!("{d} digits"))
        }
        // an enclosure of the evidence that contains zero makes every ratio unbounded
        Err(e) => (0, format!("0 digits ({e})")),
    };
    outcome(
        without < C5_MIN_DIGITS && with_mgf >= C5_MIN_DIGITS,
        format!("without mgf: {how}; with mgf: {with_mgf} digits"),
    )
}

fn scaling_program(d: u64) -> String {
    let q = d / 4;
    let mut src = format!("N ~ Poisson({d});\n");
    for _ in 0..4 {
        src.push_str(&format!(
            "observe {q} ~ Binomial(N, 1/2);\nN +~ Poisson({q});\n"
        ));
    }
    src
}

fn c7_complexity() -> Check {
    let mut points = Vec::new();
    for d in C7_DEGREES {
        let src = scaling_program(d);
        let mut best = f64::INFINITY;
        for _ in 0..C7_REPEATS {
            let start = Instant::now();
            let (_, gf) = compile(&src, false)?;
            posterior::<f64>(&gf, "N", KernelSpec::Float64, None).map_err(|e| e.to_string())?;
            best = best.min(start.elapsed().as_secs_f64());
        }
        points.push(((d as f64).ln(), best.ln()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();

    let src = example("population");
    let (program, gf) = compile(&src, false)?;
    reset_op_counters();
    let s = posterior::<f64>(&gf, "N", KernelSpec::Float64, None).map_err(|e| e.to_string())?;
    let c = op_counters();
    let mut observed = 0;
    program.body.walk(&mut |st| {
        if let gfinfer_core::ast::Statement::ObserveFrom { value, .. } = st {
            observed += value;
        }
    });
    let cutoff = s.masses.as_ref().map_or(0, |m| m.cutoff);
    let degree = (observed + cutoff) as f64 + 4.0;
    let substitutions = (c.subst_fast + c.subst_horner).max(1);
    let per = c.subst_updates as f64 / substitutions as f64;
    let pass =
        slope <= C7_MAX_SLOPE && c.subst_horner == 0 && per <= C7_UPDATES_PER_D * (degree + 1.0);
    let times: Vec<String> = points
        .iter()
        .zip(C7_DEGREES)
        .map(|(p, d)| format!("d={d} {:.1} ms", p.1.exp() * 1e3))
        .collect();
    outcome(
        pass,
        format!(
            "slope {slope:.2} ({}); population: {} fast and {} general substitutions, {per:.0} updates each for D = {degree}",
            times.join(", "),
            c.subst_fast,
            c.subst_horner
        ),
    )
}

fn mass_sum(report: &Report) -> Result<f64, String> {
    report.masses.iter().map(|m| num(&m.p)).sum()
}

fn c8_tail_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let shape = Shape {
        infinite: true,
        max_statements: C2_MAX_STATEMENTS,
    };
    let (mut checked, mut attempts) = (0, 0);
    let mut worst = f64::INFINITY;
    let mut problems = Vec::new();
    while checked < C8_PROGRAMS && attempts < 20 * C8_PROGRAMS {
        attempts += 1;
        let (src, q) = random_program(&mut rng, &shape);
        let (_, gf) = compile(&src, false)?;
        match posterior::<f64>(&gf, q, KernelSpec::Float64, None) {
            Ok(s) => {
                let table = s.masses.ok_or("discrete query without masses")?;
                let sum: f64 = table.masses.iter().sum();
                worst = worst.min(sum);
                if sum < C8_RANDOM_MIN - C8_ROUNDING {
                    problems.push(format!("mass {sum} below bound\n{src}"));
                }
                checked += 1;
            }
            Err(PosteriorError::ZeroEvidence) => {}
            Err(e) => {
                problems.push(format!("{e}\n{src}"));
                checked += 1;
            }
        }
    }
    let benchmarks: [(&str, &str); 6] = [
        ("population", "N"),
        ("population_modified", "N"),
        ("population_two_types", "N1"),
        ("population_two_types", "N2"),
        ("hmm", "L1"),
        ("mixture", "L1"),
    ];
    let mut bench = Vec::new();
    let mut bench_ok = true;
    for (name, var) in benchmarks {
        let r = run_source(&example(name), &config(name, var, KernelSpec::Float64))
            .map_err(|e| format!("{name}: {e}"))?;
        let sum = mass_sum(&r)?;
        bench_ok &= sum >= C8_BENCHMARK_MIN;
        bench.push(format!("{name}/{var} {sum:.8}"));
    }
    let (sp, _) = switchpoint_exact().as_ref().map_err(Clone::clone)?;
    let sp_sum = 1.0
        - sp.tail_bound
            .as_ref()
            .and_then(Num::bounds)
            .ok_or("no tail bound")?
            .1;
    bench_ok &= sp_sum >= C8_BENCHMARK_MIN;
    bench.push(format!("switchpoint/T >= {sp_sum:.8}"));
    let mut detail = format!(
        "{checked} random programs, smallest mass sum {worst:.6}; {}",
        bench.join(", ")
    );
    if let Some(p) = problems.first() {
        detail.push_str(&format!("; first problem: {p}"));
    }
    outcome(
        problems.is_empty() && checked == C8_PROGRAMS && bench_ok,
        detail,
    )
}

fn random_poly(rng: &mut ChaCha8Rng, trunc: &Truncation) -> TaylorPoly<Rational> {
    let dims = vec![4, 4];
    let coeffs = (0..16)
        .map(|_| {
            Rational::new(
                rng.random_range(-5..=5).into(),
                rng.random_range(1..=4).into(),
            )
        })
        .collect();
    TaylorPoly::from_dense(
        vec![<Rational as Zero>::zero(), <Rational as Zero>::zero()],
        trunc.clone(),
        dims,
        coeffs,
    )
    .expect("dims match")
}

/// Spot checks of the invariants; the full property suites are the
/// proptest targets of the core crate.
fn c9_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut notes = Vec::new();

    let shape = Shape {
        infinite: true,
        max_statements: C2_MAX_STATEMENTS,
    };
    let mut round_trip = 0;
    for _ in 0..100 {
        let (src, _) = random_program(&mut rng, &shape);
        let p = parse(&src).map_err(|e| e.to_string())?;
        let again = parse(&render(&p)).map_err(|e| format!("{e}\n{}", render(&p)))?;
        if again == p {
            round_trip += 1;
        } else {
            notes.push(format!("render/parse changed\n{src}"));
        }
    }

    let finite = Shape {
        infinite: false,
        max_statements: C2_MAX_STATEMENTS,
    };
    let (mut memo_ok, mut enclosed) = (0, 0);
    for _ in 0..50 {
        let (src, q) = random_program(&mut rng, &finite);
        let (_, gf) = compile(&src, false)?;
        let opts = |memoize| PosteriorOptions {
            ctx: KernelSpec::Rational.ctx(),
            memoize,
            mass_limit: Some(6),
        };
        let i = gf
            .vars()
            .iter()
            .position(|v| v == q)
            .ok_or("query missing")?;
        let with = summarize::<Rational>(&gf, i, &opts(true));
        let without = summarize::<Rational>(&gf, i, &opts(false));
        let same = match (&with, &without) {
            (Ok(a), Ok(b)) => a.moments == b.moments && a.masses == b.masses,
            (Err(a), Err(b)) => a == b,
            _ => false,
        };
        if same {
            memo_ok += 1;
        } else {
            notes.push(format!("memoization changed the result\n{src}"));
        }
        let Ok(exact) = with else {
            enclosed += 1;
            continue;
        };
        let iv = posterior::<Interval<f64>>(&gf, q, KernelSpec::IntervalFloat64, Some(6))
            .map_err(|e| format!("{e}\n{src}"))?;
        let contains = |iv: &Interval<f64>, x: &Rational| {
            let lo = Rational::from_float(*iv.lo());
            let hi = Rational::from_float(*iv.hi());
            matches!((lo, hi), (Some(lo), Some(hi)) if &lo <= x && x <= &hi)
        };
        let mut all = contains(&iv.moments.evidence, &exact.moments.evidence)
            && contains(&iv.moments.mean, &exact.moments.mean)
            && contains(&iv.moments.variance, &exact.moments.variance);
        if let (Some(a), Some(b)) = (&iv.masses, &exact.masses) {
            all &= a.masses.iter().zip(&b.masses).all(|(i, x)| contains(i, x));
        }
        if all {
            enclosed += 1;
        } else {
            notes.push(format!("interval misses the exact value\n{src}"));
        }
    }

    let trunc = Truncation::full(2, 5);
    let mut ring_ok = 0;
    for _ in 0..50 {
        let [a, b, c] = [0, 1, 2].map(|_| random_poly(&mut rng, &trunc));
        let lhs = a.mul(&b.add(&c).unwrap()).unwrap();
        let rhs = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
        let assoc = a.mul(&b).unwrap().mul(&c).unwrap() == a.mul(&b.mul(&c).unwrap()).unwrap();
        if lhs == rhs && assoc && a.mul(&b).unwrap() == b.mul(&a).unwrap() {
            ring_ok += 1;
        } else {
            notes.push("ring law violated".into());
        }
    }

    let mut detail = format!(
        "parse/render {round_trip}/100, memoization {memo_ok}/50, interval enclosure {enclosed}/50, ring laws {ring_ok}/50; property suites run in the core test targets"
    );
    if let Some(n) = notes.first() {
        detail.push_str(&format!("; first problem: {n}"));
    }
    outcome(notes.is_empty(), detail)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            1,
            "small example against closed form and enumeration",
            c1_small_example,
        ),
        (
            2,
            "engine equals exact enumeration on finite programs",
            c2_oracle_equivalence,
        ),
        (
            3,
            "observation rewrites match the naive expansion",
            c3_observe_rewrites,
        ),
        (
            4,
            "population model against truncated enumeration",
            c4_population,
        ),
        (
            5,
            "switchpoint exact mean against simulation",
            c5_switchpoint,
        ),
        (
            6,
            "pgf coordinates lose the continuous switchpoint posterior",
            c6_no_mgf,
        ),
        (7, "runtime scaling and substitution cost", c7_complexity),
        (8, "mass tables cover the posterior", c8_tail_bound),
        (9, "invariant spot checks", c9_invariants),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, title, check) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = check().unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failed += 1;
        }
        println!(
            "{tag} criterion {n}: {title} [{:.1} s] {}",
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
