//! Posterior statistics from the generating function: moments, the mass
//! cutoff and the probability mass table of one query variable.

use std::time::{Duration, Instant};

use crate::gf::{eval, Anchor, EvalOptions, EvalRequest, GfError, GfProgram, Rep};
use crate::kernel::{KernelCtx, KernelError, Scalar, SignClass};
use crate::taylor::TaylorPoly;

/// Highest moment order computed.
pub const MOMENT_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PosteriorError {
    #[error(transparent)]
    Gf(#[from] GfError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("the observations have probability zero")]
    ZeroEvidence,
    #[error("`{var}` is continuous; probability masses are not available")]
    MassesUnavailable { var: String },
    #[error("P[X = {k}] = {value:e} is negative beyond rounding error")]
    NegativeMass { k: u64, value: f64 },
    #[error("no variable with index {0}")]
    UnknownVariable(usize),
}

impl PosteriorError {
    /// The kernel error behind this failure, if any.
    pub fn kernel_error(&self) -> Option<&KernelError> {
        match self {
            PosteriorError::Kernel(e) => Some(e),
            PosteriorError::Gf(e) => e.kernel_error(),
            _ => None,
        }
    }
}

/// The first four moments of the normalized posterior of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet<T> {
    pub evidence: T,
    /// `E[X]`, `E[X(X−1)]`, …; absent for variables in the mgf coordinate,
    /// whose expansion yields raw moments directly.
    pub factorial: Option<[T; MOMENT_ORDER]>,
    /// `E[X]`, …, `E[X⁴]`.
    pub raw: [T; MOMENT_ORDER],
    pub mean: T,
    pub variance: T,
    /// `None` when the variance is zero, or when the kernel cannot take its square root.
    pub skewness: Option<T>,
    pub kurtosis: Option<T>,
    /// `E[(X − μ)⁴]`.
    pub central4: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassTable<T> {
    /// `masses[k] = P[X = k]` for `k = 0..=cutoff`.
    pub masses: Vec<T>,
    pub cutoff: u64,
    /// `1 − Σ masses`, the probability of all larger values.
    pub tail_bound: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PosteriorOptions {
    pub ctx: KernelCtx,
    pub memoize: bool,
    /// Replaces the moment-based cutoff.
    pub mass_limit: Option<u64>,
}

impl Default for PosteriorOptions {
    fn default() -> Self {
        PosteriorOptions {
            ctx: KernelCtx::default(),
            memoize: true,
            mass_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary<T> {
    pub var: String,
    pub moments: MomentSet<T>,
    /// `None` for continuous variables.
    pub masses: Option<MassTable<T>>,
    pub warnings: Vec<String>,
    pub moment_time: Duration,
    pub mass_time: Duration,
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

fn eval_opts(opts: &PosteriorOptions) -> EvalOptions {
    EvalOptions {
        ctx: opts.ctx,
        memoize: opts.memoize,
    }
}

/// Raw moments from factorial moments `F1..F4`.
pub fn raw_from_factorial<T: Scalar>(f: &[T; MOMENT_ORDER]) -> [T; MOMENT_ORDER] {
    let c = |n: u64, x: &T| T::from_u64(n).mul(x);
    let [f1, f2, f3, f4] = f;
    [
        f1.clone(),
        f2.add(f1),
        f3.add(&c(3, f2)).add(f1),
        f4.add(&c(6, f3)).add(&c(7, f2)).add(f1),
    ]
}

/// Mean, variance, skewness and kurtosis from raw moments. The variance
/// counts as zero when it is within `10·ε·E[X²]` of it.
pub fn central_stats<T: Scalar>(raw: &[T; MOMENT_ORDER]) -> Result<MomentSet<T>, KernelError> {
    let [m1, m2, m3, m4] = raw;
    let k = |n: u64| T::from_u64(n);
    let mu = m1.clone();
    let mu2 = mu.mul(&mu);
    let var = m2.sub(&mu2);
    // E[(X−μ)³] = M3 − 3μM2 + 2μ³, E[(X−μ)⁴] = M4 − 4μM3 + 6μ²M2 − 3μ⁴
    let c3 = m3.sub(&k(3).mul(&mu).mul(m2)).add(&k(2).mul(&mu2).mul(&mu));
    let c4 = m4
        .sub(&k(4).mul(&mu).mul(m3))
        .add(&k(6).mul(&mu2).mul(m2))
        .sub(&k(3).mul(&mu2).mul(&mu2));
    let tol = 10.0 * var.epsilon() * m2.upper_f64().abs().max(1.0);
    let degenerate = match var.sign() {
        SignClass::Positive => var.to_f64() <= tol && var.epsilon() > 0.0,
        _ => true,
    };
    let (skewness, kurtosis) = if degenerate {
        (None, None)
    } else {
        let kurt = c4.div(&var.mul(&var))?;
        let skew = match var.sqrt() {
            Ok(sd) => Some(c3.div(&sd.mul(&var))?),
            Err(KernelError::UnsupportedOp { .. }) => None,
            Err(e) => return Err(e),
        };
        (skew, Some(kurt))
    };
    Ok(MomentSet {
        evidence: T::one(),
        factorial: None,
        raw: raw.clone(),
        mean: mu,
        variance: var,
        skewness,
        kurtosis,
        central4: c4,
    })
}

/// `ceil(μ + 4·E[(X−μ)⁴]^{1/4})`: by Markov's inequality on `(X−μ)⁴`, at
/// most 1/256 of the mass lies above it.
pub fn mass_cutoff<T: Scalar>(m: &MomentSet<T>) -> u64 {
    let mu = m.mean.upper_f64().max(0.0);
    let c4 = m.central4.upper_f64().max(0.0);
    let x = mu + 4.0 * c4.powf(0.25);
    // absorb rounding noise so an exact integer bound does not round up
    let r = x.round();
    let x = if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        x
    };
    x.ceil() as u64
}

fn normalized<T: Scalar>(v: &T, z: &T) -> Result<T, PosteriorError> {
    Ok(v.div(z)?)
}

/// Pass one: expansion at the unit point to order four.
pub fn moments<T: Scalar>(
    gf: &GfProgram,
    var: usize,
    opts: &PosteriorOptions,
) -> Result<MomentSet<T>, PosteriorError> {
    if var >= gf.nvars() {
        return Err(PosteriorError::UnknownVariable(var));
    }
    let req = EvalRequest::marginal(gf.nvars(), var, Anchor::One, MOMENT_ORDER);
    let p: TaylorPoly<T> = eval(gf, &req, &eval_opts(opts))?;
    let z = p.constant_term().clone();
    if z.is_zero() || z.sign() == SignClass::Zero {
        return Err(PosteriorError::ZeroEvidence);
    }
    let mut alpha = vec![0; gf.nvars()];
    let mut scaled = Vec::with_capacity(MOMENT_ORDER);
    for k in 1..=MOMENT_ORDER {
        alpha[var] = k;
        let c = p.coefficient(&alpha).map_err(GfError::from)?;
        scaled.push(normalized(&c.mul(&T::from_u64(factorial(k))), &z)?);
    }
    let scaled: [T; MOMENT_ORDER] = scaled.try_into().expect("four moments");
    let (factorial, raw) = match gf.output_reps()[var] {
        Rep::Pgf => {
            let raw = raw_from_factorial(&scaled);
            (Some(scaled), raw)
        }
        Rep::Mgf => (None, scaled),
    };
    let mut m = central_stats(&raw)?;
    m.evidence = z;
    m.factorial = factorial;
    Ok(m)
}

/// Pass two: Taylor coefficients at `x_var = 0` up to `cutoff`, normalized
/// by `evidence`. Clamped rounding noise is reported in `warnings`.
pub fn masses<T: Scalar>(
    gf: &GfProgram,
    var: usize,
    cutoff: u64,
    evidence: &T,
    opts: &PosteriorOptions,
    warnings: &mut Vec<String>,
) -> Result<MassTable<T>, PosteriorError> {
    if var >= gf.nvars() {
        return Err(PosteriorError::UnknownVariable(var));
    }
    let req = EvalRequest::marginal(gf.nvars(), var, Anchor::Zero, cutoff as usize);
    let p: TaylorPoly<T> = match eval(gf, &req, &eval_opts(opts)) {
        Ok(p) => p,
        Err(GfError::ContinuousAnchor { var }) => {
            return Err(PosteriorError::MassesUnavailable { var })
        }
        Err(e) => return Err(e.into()),
    };
    let mut alpha = vec![0; gf.nvars()];
    let mut out = Vec::with_capacity(cutoff as usize + 1);
    let mut total = T::zero();
    let mut clamped = 0;
    for k in 0..=cutoff {
        alpha[var] = k as usize;
        let c = p.coefficient(&alpha).map_err(GfError::from)?;
        let mut m = normalized(&c, evidence)?;
        if m.sign() == SignClass::Negative {
            let v = m.to_f64();
            if v.abs() > 10.0 * m.epsilon() {
                return Err(PosteriorError::NegativeMass { k, value: v });
            }
            m = T::zero();
            clamped += 1;
        }
        total.add_assign(&m);
        out.push(m);
    }
    if clamped > 0 {
        warnings.push(format!(
            "{clamped} slightly negative mass(es) from rounding were set to 0"
        ));
    }
    Ok(MassTable {
        masses: out,
        cutoff,
        tail_bound: T::one().sub(&total),
    })
}

/// Both passes for one query variable.
pub fn summarize<T: Scalar>(
    gf: &GfProgram,
    var: usize,
    opts: &PosteriorOptions,
) -> Result<Summary<T>, PosteriorError> {
    let mut warnings = Vec::new();
    let start = Instant::now();
    let moments = moments::<T>(gf, var, opts)?;
    let moment_time = start.elapsed();
    let name = gf.vars()[var].clone();
    if moments.variance.sign() != SignClass::Positive {
        warnings.push(format!(
            "posterior variance of `{name}` is zero; skewness and kurtosis are undefined"
        ));
    } else if moments.skewness.is_none() && moments.kurtosis.is_some() {
        warnings.push(format!(
            "skewness of `{name}` needs a square root the {} kernel cannot represent",
            T::KERNEL
        ));
    } else if moments.skewness.is_none() {
        warnings.push(format!(
            "posterior variance of `{name}` is within rounding of zero; skewness and kurtosis are undefined"
        ));
    }
    let start = Instant::now();
    let masses = if gf.output_reps()[var] == Rep::Mgf {
        None
    } else {
        let cutoff = opts.mass_limit.unwrap_or_else(|| mass_cutoff(&moments));
        Some(masses(
            gf,
            var,
            cutoff,
            &moments.evidence,
            opts,
            &mut warnings,
        )?)
    };
    Ok(Summary {
        var: name,
        moments,
        masses,
        warnings,
        moment_time,
        mass_time: start.elapsed(),
    })
}
