use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _, Exp, Gamma, Geometric, Poisson, Uniform};
use statrs::function::factorial::{ln_binomial, ln_factorial};
use statrs::function::gamma::ln_gamma;

use crate::ast::{
    Affine, CmpOp, CompoundDistribution, Cond, Dist, Distribution, Event, Program, Rational,
    Statement,
};

use super::OracleError;

/// Generator behind [`simulate`]; a seed reproduces a run only with the same algorithm.
pub const RNG_ALGORITHM: &str = "ChaCha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulateOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            samples: 100_000,
            seed: 0,
        }
    }
}

/// A Monte Carlo estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Weighted samples of the final program state.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub vars: Vec<String>,
    /// One row of variable values per sample.
    pub values: Vec<Vec<f64>>,
    pub log_weights: Vec<f64>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn max_log_weight(&self) -> f64 {
        self.log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Self-normalized weights; all zero when every sample was rejected.
    pub fn weights(&self) -> Vec<f64> {
        let m = self.max_log_weight();
        if m == f64::NEG_INFINITY {
            return vec![0.0; self.len()];
        }
        let w: Vec<f64> = self.log_weights.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }

    /// Kish effective sample size.
    pub fn ess(&self) -> f64 {
        let sq: f64 = self.weights().iter().map(|w| w * w).sum();
        if sq == 0.0 {
            0.0
        } else {
            1.0 / sq
        }
    }

    /// Estimate of the probability of the observations.
    pub fn evidence(&self) -> f64 {
        let m = self.max_log_weight();
        if m == f64::NEG_INFINITY || self.is_empty() {
            return 0.0;
        }
        let s: f64 = self.log_weights.iter().map(|l| (l - m).exp()).sum();
        (m + s.ln() - (self.len() as f64).ln()).exp()
    }

    /// Weighted mean of `f` over the samples with the delta-method standard error.
    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> Estimate {
        let w = self.weights();
        let xs: Vec<f64> = self.values.iter().map(|v| f(v)).collect();
        let mean: f64 = w.iter().zip(&xs).map(|(w, x)| w * x).sum();
        let var: f64 = w
            .iter()
            .zip(&xs)
            .map(|(w, x)| w * w * (x - mean) * (x - mean))
            .sum();
        Estimate {
            value: mean,
            std_error: var.sqrt(),
        }
    }

    pub fn mean(&self, var: usize) -> Estimate {
        self.expectation(|v| v[var])
    }

    pub fn raw_moment(&self, var: usize, order: i32) -> Estimate {
        self.expectation(|v| v[var].powi(order))
    }

    /// Weighted histogram of the integer values taken by `var`.
    pub fn masses(&self, var: usize) -> BTreeMap<u64, f64> {
        let mut out = BTreeMap::new();
        for (row, w) in self.values.iter().zip(self.weights()) {
            let x = row[var];
            if w > 0.0 && x >= 0.0 && x.fract() == 0.0 {
                *out.entry(x as u64).or_insert(0.0) += w;
            }
        }
        out
    }
}

/// Likelihood weighting: draws are forward samples, observations multiply the weight.
pub fn simulate(program: &Program, opts: &SimulateOptions) -> Result<SampleSet, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut values = Vec::with_capacity(opts.samples);
    let mut log_weights = Vec::with_capacity(opts.samples);
    for _ in 0..opts.samples {
        let mut run = Run {
            rng: &mut rng,
            vals: vec![0.0; program.nvars()],
            log_weight: 0.0,
        };
        run.stmt(&program.body)?;
        values.push(run.vals);
        log_weights.push(run.log_weight);
    }
    let set = SampleSet {
        vars: program.vars.clone(),
        values,
        log_weights,
    };
    if set.max_log_weight() == f64::NEG_INFINITY {
        return Err(OracleError::ZeroEvidence);
    }
    Ok(set)
}

/// A distribution with its parameters evaluated in the current state.
#[derive(Debug, Clone)]
enum Law {
    Dirac(f64),
    Bernoulli(f64),
    Categorical(Vec<f64>),
    Binomial(u64, f64),
    UniformDisc(u64, u64),
    NegBinomial(f64, f64),
    Geometric(f64),
    Poisson(f64),
    Exponential(f64),
    Gamma(f64, f64),
    UniformCont(f64, f64),
}

fn f(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn count(x: f64, what: &str) -> Result<u64, OracleError> {
    if x >= 0.0 && x.fract() == 0.0 {
        Ok(x as u64)
    } else {
        Err(OracleError::Invalid(format!(
            "{what} needs a natural number, got {x}"
        )))
    }
}

fn law(d: &Dist, vals: &[f64]) -> Result<Law, OracleError> {
    Ok(match d {
        Dist::Const(d) => match d {
            Distribution::Dirac(a) => Law::Dirac(f(a)),
            Distribution::Bernoulli(p) => Law::Bernoulli(f(p)),
            Distribution::Categorical(ps) => Law::Categorical(ps.iter().map(f).collect()),
            Distribution::Binomial { n, p } => Law::Binomial(*n, f(p)),
            Distribution::UniformDisc { lo, hi } => Law::UniformDisc(*lo, *hi),
            Distribution::NegBinomial { r, p } => Law::NegBinomial(*r as f64, f(p)),
            Distribution::Geometric(p) => Law::Geometric(f(p)),
            Distribution::Poisson(l) => Law::Poisson(f(l)),
            Distribution::Exponential(l) => Law::Exponential(f(l)),
            Distribution::Gamma { shape, rate } => Law::Gamma(f(shape), f(rate)),
            Distribution::UniformCont { lo, hi } => Law::UniformCont(f(lo), f(hi)),
        },
        Dist::Compound(c) => {
            let x = vals[c.var().0];
            match c {
                CompoundDistribution::Binomial { p, .. } => {
                    Law::Binomial(count(x, "Binomial trials")?, f(p))
                }
                CompoundDistribution::NegBinomial { p, .. } => {
                    Law::NegBinomial(count(x, "NegBinomial successes")? as f64, f(p))
                }
                CompoundDistribution::Poisson { scale, .. } => Law::Poisson(f(scale) * x),
                CompoundDistribution::Bernoulli { .. } => {
                    if !(0.0..=1.0).contains(&x) {
                        return Err(OracleError::Invalid(format!(
                            "Bernoulli parameter {x} outside [0, 1]"
                        )));
                    }
                    Law::Bernoulli(x)
                }
            }
        }
    })
}

fn bad(what: &str) -> OracleError {
    OracleError::Invalid(format!("bad {what} parameters"))
}

fn sample(law: &Law, rng: &mut ChaCha8Rng) -> Result<f64, OracleError> {
    Ok(match *law {
        Law::Dirac(a) => a,
        Law::Bernoulli(p) => {
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        }
        Law::Categorical(ref ps) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = ps.len().saturating_sub(1);
            for (i, p) in ps.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick as f64
        }
        Law::Binomial(n, p) => Binomial::new(n, p)
            .map_err(|_| bad("Binomial"))?
            .sample(rng) as f64,
        Law::UniformDisc(lo, hi) => rng.random_range(lo..=hi) as f64,
        Law::NegBinomial(r, p) => {
            if r == 0.0 || p == 1.0 {
                0.0
            } else {
                let rate = Gamma::new(r, (1.0 - p) / p)
                    .map_err(|_| bad("NegBinomial"))?
                    .sample(rng);
                sample(&Law::Poisson(rate), rng)?
            }
        }
        Law::Geometric(p) => Geometric::new(p).map_err(|_| bad("Geometric"))?.sample(rng) as f64,
        Law::Poisson(l) => {
            if l == 0.0 {
                0.0
            } else {
                Poisson::new(l).map_err(|_| bad("Poisson"))?.sample(rng)
            }
        }
        Law::Exponential(l) => Exp::new(l).map_err(|_| bad("Exponential"))?.sample(rng),
        Law::Gamma(k, rate) => Gamma::new(k, 1.0 / rate)
            .map_err(|_| bad("Gamma"))?
            .sample(rng),
        Law::UniformCont(lo, hi) => {
            if lo == hi {
                lo
            } else {
                Uniform::new(lo, hi)
                    .map_err(|_| bad("UniformCont"))?
                    .sample(rng)
            }
        }
    })
}

/// `ln P[D = v]`.
fn ln_pmf(law: &Law, v: u64) -> Result<f64, OracleError> {
    let vf = v as f64;
    let ln = |p: f64| p.ln();
    Ok(match *law {
        Law::Dirac(a) => {
            if a == vf {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
        Law::Bernoulli(p) => match v {
            0 => ln(1.0 - p),
            1 => ln(p),
            _ => f64::NEG_INFINITY,
        },
        Law::Categorical(ref ps) => ps.get(v as usize).map_or(f64::NEG_INFINITY, |p| ln(*p)),
        Law::Binomial(n, p) => {
            if v > n {
                f64::NEG_INFINITY
            } else {
                ln_binomial(n, v) + xlny(vf, p) + xlny((n - v) as f64, 1.0 - p)
            }
        }
        Law::UniformDisc(lo, hi) => {
            if (lo..=hi).contains(&v) {
                -((hi - lo + 1) as f64).ln()
            } else {
                f64::NEG_INFINITY
            }
        }
        Law::NegBinomial(r, p) => {
            if r == 0.0 {
                if v == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                ln_gamma(vf + r) - ln_gamma(r) - ln_factorial(v) + r * p.ln() + xlny(vf, 1.0 - p)
            }
        }
        Law::Geometric(p) => xlny(vf, 1.0 - p) + p.ln(),
        Law::Poisson(l) => xlny(vf, l) - l - ln_factorial(v),
        Law::Exponential(_) | Law::Gamma(..) | Law::UniformCont(..) => {
            return Err(OracleError::Unavailable(
                "observation from a continuous distribution".into(),
            ))
        }
    })
}

/// `x ln y` with `0 ln 0 = 0`.
fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn event_holds(e: &Event, vals: &[f64]) -> bool {
    match e {
        Event::InSet { var, set } => {
            let x = vals[var.0];
            x >= 0.0 && x.fract() == 0.0 && set.contains(&(x as u64))
        }
        Event::Complement(inner) => !event_holds(inner, vals),
    }
}

struct Run<'a> {
    rng: &'a mut ChaCha8Rng,
    vals: Vec<f64>,
    log_weight: f64,
}

impl Run<'_> {
    fn cond_prob(&self, c: &Cond) -> Result<f64, OracleError> {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        Ok(match c {
            Cond::Event(e) => ind(event_holds(e, &self.vals)),
            Cond::Cmp { var, op, value } => {
                let (x, m) = (self.vals[var.0], *value as f64);
                ind(match op {
                    CmpOp::Eq => x == m,
                    CmpOp::Ne => x != m,
                    CmpOp::Lt => x < m,
                    CmpOp::Le => x <= m,
                    CmpOp::Gt => x > m,
                    CmpOp::Ge => x >= m,
                })
            }
            Cond::Sampled { value, dist } => ln_pmf(&law(dist, &self.vals)?, *value)?.exp(),
            Cond::Not(a) => 1.0 - self.cond_prob(a)?,
            Cond::And(a, b) => self.cond_prob(a)? * self.cond_prob(b)?,
            Cond::Or(a, b) => {
                let pa = self.cond_prob(a)?;
                pa + (1.0 - pa) * self.cond_prob(b)?
            }
        })
    }

    fn affine(&self, e: &Affine) -> f64 {
        e.coeffs
            .iter()
            .fold(f(&e.constant), |acc, (v, c)| acc + f(c) * self.vals[v.0])
    }

    fn reject(&mut self) {
        self.log_weight = f64::NEG_INFINITY;
    }

    /// Runs `s`; returns false once the sample has been rejected.
    fn stmt(&mut self, s: &Statement) -> Result<bool, OracleError> {
        match s {
            Statement::Skip => {}
            Statement::Fail => self.reject(),
            Statement::Seq(items) => {
                for s in items {
                    if !self.stmt(s)? {
                        return Ok(false);
                    }
                }
            }
            Statement::Assign {
                target,
                expr,
                accumulate,
            } => {
                let v = self.affine(expr);
                let t = &mut self.vals[target.0];
                *t = if *accumulate { *t + v } else { v };
            }
            Statement::Sample {
                target,
                dist,
                accumulate,
            } => {
                let v = sample(&law(dist, &self.vals)?, self.rng)?;
                let t = &mut self.vals[target.0];
                *t = if *accumulate { *t + v } else { v };
            }
            Statement::If { cond, then, els } => {
                let p = self.cond_prob(cond)?;
                let take = p >= 1.0 || (p > 0.0 && self.rng.random::<f64>() < p);
                return self.stmt(if take { then } else { els });
            }
            Statement::Observe(c) => {
                let p = self.cond_prob(c)?;
                if p <= 0.0 {
                    self.reject();
                } else {
                    self.log_weight += p.ln();
                }
            }
            Statement::ObserveFrom { value, dist } => {
                let lp = ln_pmf(&law(dist, &self.vals)?, *value)?;
                self.log_weight += lp;
            }
        }
        Ok(self.log_weight > f64::NEG_INFINITY)
    }
}
