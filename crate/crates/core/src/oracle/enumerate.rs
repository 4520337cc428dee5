use std::collections::{BTreeMap, HashMap};

use num_traits::ToPrimitive;

use crate::ast::{
    Affine, CmpOp, CompoundDistribution, Cond, Dist, Distribution, Event, Program, Rational,
    Statement,
};
use crate::gf::series::pmf_rational;
use crate::kernel::{KernelCtx, Scalar};

use super::OracleError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnumerateOptions {
    /// Largest value drawn from a distribution with infinite support. Without
    /// it, draws stop once the cumulative probability reaches `1 − 1e-12`.
    pub truncate_at: Option<u64>,
    pub ctx: KernelCtx,
}

/// A normalized posterior over joint valuations.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction<T> {
    pub vars: Vec<String>,
    pub masses: BTreeMap<Vec<u64>, T>,
    /// Probability of the observations before normalization.
    pub evidence: T,
}

impl<T: Scalar> MassFunction<T> {
    pub fn marginal(&self, var: usize) -> BTreeMap<u64, T> {
        let mut out: BTreeMap<u64, T> = BTreeMap::new();
        for (vals, p) in &self.masses {
            out.entry(vals[var])
                .and_modify(|m| m.add_assign(p))
                .or_insert_with(|| p.clone());
        }
        out
    }

    /// `E[X^order]`.
    pub fn raw_moment(&self, var: usize, order: u32) -> T {
        let mut acc = T::zero();
        for (vals, p) in &self.masses {
            acc.mul_add_assign(p, &T::from_u64(vals[var]).powi(order as u64));
        }
        acc
    }
}

type Frontier<T> = HashMap<Vec<u64>, T>;

fn merge<T: Scalar>(into: &mut Frontier<T>, vals: Vec<u64>, p: T) {
    if p.is_zero() {
        return;
    }
    into.entry(vals)
        .and_modify(|m| m.add_assign(&p))
        .or_insert(p);
}

/// Exhaustive forward enumeration of the program's measure semantics.
pub fn enumerate<T: Scalar>(
    program: &Program,
    opts: &EnumerateOptions,
) -> Result<MassFunction<T>, OracleError> {
    let mut run = Enumerator {
        opts,
        draws: HashMap::new(),
    };
    let mut frontier: Frontier<T> = HashMap::new();
    frontier.insert(vec![0; program.nvars()], T::one());
    let frontier = run.stmt(&program.body, frontier)?;
    let mut evidence = T::zero();
    for p in frontier.values() {
        evidence.add_assign(p);
    }
    if evidence.is_zero() {
        return Err(OracleError::ZeroEvidence);
    }
    let masses = frontier
        .into_iter()
        .map(|(k, p)| Ok((k, p.div(&evidence)?)))
        .collect::<Result<_, OracleError>>()?;
    Ok(MassFunction {
        vars: program.vars.clone(),
        masses,
        evidence,
    })
}

/// Product of the `grow` factors and `shrink^count`, taking a `shrink`
/// factor whenever the running product exceeds one so that neither part
/// overflows on its own.
fn balanced<T: Scalar>(
    grow: impl Iterator<Item = Result<T, crate::kernel::KernelError>>,
    shrink: &T,
    mut count: u64,
) -> Result<T, OracleError> {
    let mut m = T::one();
    for g in grow {
        m = m.mul(&g?);
        while count > 0 && m.to_f64() > 1.0 {
            m = m.mul(shrink);
            count -= 1;
        }
    }
    Ok(m.mul(&shrink.powi(count)))
}

/// Largest value in the support, or `None` when it is infinite.
fn finite_bound(d: &Distribution) -> Result<Option<u64>, OracleError> {
    Ok(Some(match d {
        Distribution::Dirac(a) => as_count(a)?,
        Distribution::Bernoulli(_) => 1,
        Distribution::Categorical(ps) => ps.len().saturating_sub(1) as u64,
        Distribution::Binomial { n, .. } => *n,
        Distribution::UniformDisc { hi, .. } => *hi,
        _ => return Ok(None),
    }))
}

struct Enumerator<'a, T> {
    opts: &'a EnumerateOptions,
    /// Support and probabilities of each distinct draw, keyed by the distribution.
    draws: HashMap<String, Vec<(u64, T)>>,
}

fn as_count(r: &Rational) -> Result<u64, OracleError> {
    if !r.is_integer() {
        return Err(OracleError::Unavailable(format!(
            "non-integer value {r} in enumeration"
        )));
    }
    r.to_integer()
        .to_u64()
        .ok_or_else(|| OracleError::Unavailable(format!("value {r} out of range")))
}

impl<T: Scalar> Enumerator<'_, T> {
    fn ctx(&self) -> &KernelCtx {
        &self.opts.ctx
    }

    fn q(&self, r: &Rational) -> T {
        T::from_rational(r, self.ctx())
    }

    /// Constant-parameter distribution equivalent to `d` in state `vals`.
    fn resolve(&self, d: &Dist, vals: &[u64]) -> Result<Distribution, OracleError> {
        Ok(match d {
            Dist::Const(d) => {
                if d.is_continuous() {
                    return Err(OracleError::Unavailable(format!(
                        "{} is continuous; use the sampler",
                        d.name()
                    )));
                }
                d.clone()
            }
            Dist::Compound(c) => {
                let x = vals[c.var().0];
                match c {
                    CompoundDistribution::Binomial { p, .. } => {
                        Distribution::Binomial { n: x, p: p.clone() }
                    }
                    CompoundDistribution::NegBinomial { p, .. } => {
                        Distribution::NegBinomial { r: x, p: p.clone() }
                    }
                    CompoundDistribution::Poisson { scale, .. } => {
                        Distribution::Poisson(scale * Rational::from_integer(x.into()))
                    }
                    CompoundDistribution::Bernoulli { .. } => {
                        if x > 1 {
                            return Err(OracleError::Invalid(format!(
                                "Bernoulli parameter {x} outside [0, 1]"
                            )));
                        }
                        Distribution::Bernoulli(Rational::from_integer(x.into()))
                    }
                }
            }
        })
    }

    /// `P[d = v]` in the kernel's own arithmetic. Binomial, negative
    /// binomial and Poisson masses use product forms so that large counts
    /// never go through exact rationals.
    fn pmf(&self, d: &Distribution, v: u64) -> Result<T, OracleError> {
        let one = T::one();
        Ok(match d {
            Distribution::Binomial { n, p } => {
                if v > *n {
                    return Ok(T::zero());
                }
                let p = self.q(p);
                let grow = (0..v).map(|i| T::from_u64(n - i).mul(&p).div_u64(i + 1));
                balanced(grow, &one.sub(&p), n - v)?
            }
            Distribution::NegBinomial { r, p } => {
                let p = self.q(p);
                let q = one.sub(&p);
                let grow = (0..v).map(|i| T::from_u64(r + i).mul(&q).div_u64(i + 1));
                balanced(grow, &p, *r)?
            }
            Distribution::Geometric(p) => {
                let p = self.q(p);
                p.mul(&one.sub(&p).powi(v))
            }
            Distribution::Poisson(l) => {
                let lt = self.q(l);
                let mut m = lt.neg().exp()?;
                for i in 1..=v {
                    m = m.mul(&lt).div_u64(i)?;
                }
                m
            }
            _ => self.q(&pmf_rational(d, v).unwrap_or_default()),
        })
    }

    /// Binomial masses by ratios outward from the mode, so that large `n`
    /// neither overflows nor costs a product per value.
    fn binomial_support(&self, n: u64, p: &Rational) -> Result<Vec<(u64, T)>, OracleError> {
        let d = Distribution::Binomial { n, p: p.clone() };
        let mode = (p * Rational::from_integer((n + 1).into()))
            .floor()
            .to_integer()
            .to_u64()
            .unwrap_or(0)
            .min(n);
        let pt = self.q(p);
        let qt = T::one().sub(&pt);
        let mut below = Vec::new();
        let mut m = self.pmf(&d, mode)?;
        for v in (1..=mode).rev() {
            if m.is_zero() {
                break;
            }
            // P[v - 1] = P[v] · v q / ((n - v + 1) p)
            m = m
                .mul(&qt)
                .mul(&T::from_u64(v))
                .div(&pt.mul(&T::from_u64(n - v + 1)))?;
            below.push((v - 1, m.clone()));
        }
        let mut out: Vec<(u64, T)> = below.into_iter().rev().collect();
        let mut m = self.pmf(&d, mode)?;
        out.push((mode, m.clone()));
        for v in mode..n {
            if m.is_zero() {
                break;
            }
            m = m
                .mul(&pt)
                .mul(&T::from_u64(n - v))
                .div(&qt.mul(&T::from_u64(v + 1)))?;
            out.push((v + 1, m.clone()));
        }
        out.retain(|(_, m)| !m.is_zero());
        Ok(out)
    }

    /// `P[d = v + 1] / P[d = v]` for the infinite supports.
    fn ratio(&self, d: &Distribution, v: u64) -> Result<Option<T>, OracleError> {
        let one = T::one();
        Ok(Some(match d {
            Distribution::Poisson(l) => self.q(l).div_u64(v + 1)?,
            Distribution::Geometric(p) => one.sub(&self.q(p)),
            Distribution::NegBinomial { r, p } => one
                .sub(&self.q(p))
                .mul(&T::from_u64(r + v))
                .div_u64(v + 1)?,
            _ => return Ok(None),
        }))
    }

    fn support(&mut self, d: &Distribution) -> Result<Vec<(u64, T)>, OracleError> {
        let key = format!("{d:?}");
        if let Some(v) = self.draws.get(&key) {
            return Ok(v.clone());
        }
        let out = if let Distribution::Binomial { n, p } = d {
            self.binomial_support(*n, p)?
        } else if let Some(n) = finite_bound(d)? {
            let mut out = Vec::new();
            for v in 0..=n {
                let p = self.pmf(d, v)?;
                if !p.is_zero() {
                    out.push((v, p));
                }
            }
            out
        } else {
            let mut out = Vec::new();
            let mut cum = 0.0;
            let mut p = self.pmf(d, 0)?;
            let mut v = 0u64;
            loop {
                if let Some(cap) = self.opts.truncate_at {
                    if v > cap {
                        break;
                    }
                } else if cum >= 1.0 - 1e-12 {
                    break;
                }
                cum += p.to_f64();
                if !p.is_zero() {
                    out.push((v, p.clone()));
                }
                p = match self.ratio(d, v)? {
                    Some(r) => p.mul(&r),
                    None => self.pmf(d, v + 1)?,
                };
                v += 1;
            }
            out
        };
        self.draws.insert(key, out.clone());
        Ok(out)
    }

    fn cond_prob(&mut self, c: &Cond, vals: &[u64]) -> Result<T, OracleError> {
        let one = T::one();
        let indicator = |b: bool| if b { T::one() } else { T::zero() };
        Ok(match c {
            Cond::Event(e) => indicator(event_holds(e, vals)),
            Cond::Cmp { var, op, value } => {
                let x = vals[var.0];
                indicator(match op {
                    CmpOp::Eq => x == *value,
                    CmpOp::Ne => x != *value,
                    CmpOp::Lt => x < *value,
                    CmpOp::Le => x <= *value,
                    CmpOp::Gt => x > *value,
                    CmpOp::Ge => x >= *value,
                })
            }
            Cond::Sampled { value, dist } => {
                let d = self.resolve(dist, vals)?;
                self.pmf(&d, *value)?
            }
            Cond::Not(a) => one.sub(&self.cond_prob(a, vals)?),
            Cond::And(a, b) => self.cond_prob(a, vals)?.mul(&self.cond_prob(b, vals)?),
            Cond::Or(a, b) => {
                let pa = self.cond_prob(a, vals)?;
                let pb = self.cond_prob(b, vals)?;
                pa.add(&one.sub(&pa).mul(&pb))
            }
        })
    }

    fn assign(&self, expr: &Affine, vals: &[u64], old: u64) -> Result<u64, OracleError> {
        let mut v = expr.constant.clone();
        for (var, c) in &expr.coeffs {
            v += c * Rational::from_integer(vals[var.0].into());
        }
        as_count(&(v + Rational::from_integer(old.into())))
    }

    fn stmt(&mut self, s: &Statement, frontier: Frontier<T>) -> Result<Frontier<T>, OracleError> {
        if frontier.is_empty() {
            return Ok(frontier);
        }
        let mut out: Frontier<T> = HashMap::with_capacity(frontier.len());
        match s {
            Statement::Skip => return Ok(frontier),
            Statement::Fail => return Ok(out),
            Statement::Seq(items) => {
                let mut f = frontier;
                for s in items {
                    f = self.stmt(s, f)?;
                }
                return Ok(f);
            }
            Statement::Assign {
                target,
                expr,
                accumulate,
            } => {
                for (mut vals, p) in frontier {
                    let old = if *accumulate { vals[target.0] } else { 0 };
                    vals[target.0] = self.assign(expr, &vals, old)?;
                    merge(&mut out, vals, p);
                }
            }
            Statement::Sample {
                target,
                dist,
                accumulate,
            } => {
                for (vals, p) in frontier {
                    let d = self.resolve(dist, &vals)?;
                    let old = if *accumulate { vals[target.0] } else { 0 };
                    for (v, pv) in self.support(&d)? {
                        let mut next = vals.clone();
                        next[target.0] = old + v;
                        merge(&mut out, next, p.mul(&pv));
                    }
                }
            }
            Statement::If { cond, then, els } => {
                let mut yes: Frontier<T> = HashMap::new();
                let mut no: Frontier<T> = HashMap::new();
                for (vals, p) in frontier {
                    let c = self.cond_prob(cond, &vals)?;
                    merge(&mut no, vals.clone(), p.mul(&T::one().sub(&c)));
                    merge(&mut yes, vals, p.mul(&c));
                }
                out = self.stmt(then, yes)?;
                for (vals, p) in self.stmt(els, no)? {
                    merge(&mut out, vals, p);
                }
            }
            Statement::Observe(c) => {
                for (vals, p) in frontier {
                    let w = self.cond_prob(c, &vals)?;
                    merge(&mut out, vals, p.mul(&w));
                }
            }
            Statement::ObserveFrom { value, dist } => {
                for (vals, p) in frontier {
                    let d = self.resolve(dist, &vals)?;
                    let w = self.pmf(&d, *value)?;
                    merge(&mut out, vals, p.mul(&w));
                }
            }
        }
        Ok(out)
    }
}

fn event_holds(e: &Event, vals: &[u64]) -> bool {
    match e {
        Event::InSet { var, set } => set.contains(&vals[var.0]),
        Event::Complement(inner) => !event_holds(inner, vals),
    }
}
