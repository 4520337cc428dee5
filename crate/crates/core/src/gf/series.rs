//! Generating functions of the primitive distributions and exact point
//! probabilities used by observation weights.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::ast::{Distribution, Rational};
use crate::kernel::{KernelCtx, Scalar};
use crate::taylor::{TaylorPoly, Truncation};

use super::{GfError, Rep};

/// Row `d` of the Lah triangle: `L[d][i]` for `i = 0..=d`.
pub fn lah_numbers(d: usize) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for n in 0..d {
        let mut next = vec![BigUint::zero(); n + 2];
        for (i, slot) in next.iter_mut().enumerate() {
            if i <= n {
                *slot += &row[i] * BigUint::from(n + i);
            }
            if i > 0 {
                *slot += &row[i - 1];
            }
        }
        row = next;
    }
    row
}

fn binomial(n: u64, k: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |a, i| a * BigUint::from(i))
}

fn rat_pow(r: &Rational, n: u64) -> Rational {
    num_traits::pow(r.clone(), n as usize)
}

/// `1/n!` as an exact rational.
pub(crate) fn inv_factorial(n: u64) -> Rational {
    Rational::new(BigInt::one(), BigInt::from(factorial(n)))
}

/// Probability masses at `0..` of a distribution with finite support.
pub(crate) fn finite_pmf(d: &Distribution) -> Option<Vec<Rational>> {
    let one = <Rational as One>::one();
    Some(match d {
        Distribution::Dirac(a) if a.is_integer() => {
            let a = a.to_integer().to_usize()?;
            let mut v = vec![<Rational as Zero>::zero(); a + 1];
            v[a] = one;
            v
        }
        Distribution::Bernoulli(p) => vec![&one - p, p.clone()],
        Distribution::Categorical(ps) => ps.clone(),
        Distribution::Binomial { n, p } => (0..=*n)
            .map(|i| {
                Rational::from_integer(BigInt::from(binomial(*n, i)))
                    * rat_pow(p, i)
                    * rat_pow(&(&one - p), n - i)
            })
            .collect(),
        Distribution::UniformDisc { lo, hi } => {
            let w = Rational::new(BigInt::one(), BigInt::from(hi - lo + 1));
            (0..=*hi)
                .map(|i| {
                    if i >= *lo {
                        w.clone()
                    } else {
                        <Rational as Zero>::zero()
                    }
                })
                .collect()
        }
        _ => return None,
    })
}

/// Exact `P[D = v]` for every discrete distribution except Poisson.
pub(crate) fn pmf_rational(d: &Distribution, v: u64) -> Option<Rational> {
    let one = <Rational as One>::one();
    match d {
        Distribution::Geometric(p) => Some(rat_pow(&(&one - p), v) * p),
        Distribution::NegBinomial { r, p } => {
            if *r == 0 {
                return Some(if v == 0 {
                    one
                } else {
                    <Rational as Zero>::zero()
                });
            }
            let c = Rational::from_integer(BigInt::from(binomial(v + r - 1, v)));
            Some(c * rat_pow(p, *r) * rat_pow(&(&one - p), v))
        }
        d => finite_pmf(d).map(|pm| pm.get(v as usize).cloned().unwrap_or_default()),
    }
}

/// `P[D ∈ set]`, or of the complement.
pub fn probability_of<T: Scalar>(
    d: &Distribution,
    set: &BTreeSet<u64>,
    complement: bool,
    ctx: &KernelCtx,
) -> Result<T, GfError> {
    if d.is_continuous() {
        return Err(GfError::NotCore(format!(
            "observation from continuous {}",
            d.name()
        )));
    }
    let p = if let Distribution::Poisson(lambda) = d {
        let s: Rational = set
            .iter()
            .map(|&v| rat_pow(lambda, v) * inv_factorial(v))
            .sum();
        if Zero::is_zero(lambda) {
            T::from_rational(&s, ctx)
        } else {
            let e = T::from_rational(&-lambda.clone(), ctx).exp()?;
            T::from_rational(&s, ctx).mul(&e)
        }
    } else {
        let s: Rational = set
            .iter()
            .map(|&v| pmf_rational(d, v).unwrap_or_default())
            .sum();
        T::from_rational(&s, ctx)
    };
    Ok(if complement { T::one().sub(&p) } else { p })
}

/// Expansion point and truncation shared by the factors of one product.
#[derive(Debug, Clone)]
pub(crate) struct Ring<T> {
    pub base: Vec<T>,
    pub trunc: Truncation,
}

impl<T: Scalar> Ring<T> {
    pub fn new(base: Vec<T>, trunc: Truncation) -> Self {
        Ring { base, trunc }
    }

    pub fn var(&self, i: usize) -> Result<TaylorPoly<T>, GfError> {
        Ok(TaylorPoly::var(i, self.base.clone(), self.trunc.clone())?)
    }

    pub fn constant(&self, c: T) -> TaylorPoly<T> {
        TaylorPoly::constant(c, self.base.clone(), self.trunc.clone())
    }

    pub fn polynomial(&self, k: usize, coeffs: &[T]) -> Result<TaylorPoly<T>, GfError> {
        Ok(TaylorPoly::polynomial(
            k,
            coeffs,
            self.base.clone(),
            self.trunc.clone(),
        )?)
    }

    /// `x_k^a` in pgf coordinates, `e^{a t_k}` in mgf coordinates.
    pub fn power_of_coord(
        &self,
        rep: Rep,
        k: usize,
        a: &Rational,
        ctx: &KernelCtx,
    ) -> Result<TaylorPoly<T>, GfError> {
        let v = self.var(k)?;
        match rep {
            Rep::Mgf => Ok(v.scale(&T::from_rational(a, ctx)).exp()?),
            Rep::Pgf if a.is_integer() && !a.is_negative() => {
                let n = a
                    .to_integer()
                    .to_u64()
                    .ok_or_else(|| GfError::NotCore("exponent too large".into()))?;
                if n <= 8 {
                    let mut c = vec![T::zero(); n as usize + 1];
                    c[n as usize] = T::one();
                    self.polynomial(k, &c)
                } else {
                    Ok(v.powi(n)?)
                }
            }
            Rep::Pgf => Ok(v.pow(&T::from_rational(a, ctx))?),
        }
    }

    /// `x_k` in pgf coordinates, `e^{t_k}` in mgf coordinates.
    pub fn coord_exp(&self, rep: Rep, k: usize) -> Result<TaylorPoly<T>, GfError> {
        let v = self.var(k)?;
        Ok(match rep {
            Rep::Pgf => v,
            Rep::Mgf => v.exp()?,
        })
    }

    /// `t_k`: the coordinate itself in mgf form, `ln x_k` in pgf form.
    fn coord_log(&self, rep: Rep, k: usize) -> Result<TaylorPoly<T>, GfError> {
        let v = self.var(k)?;
        Ok(match rep {
            Rep::Mgf => v,
            Rep::Pgf => v.ln()?,
        })
    }

    /// Generating function of `d` in coordinate `k`.
    pub fn distribution(
        &self,
        d: &Distribution,
        rep: Rep,
        k: usize,
        ctx: &KernelCtx,
    ) -> Result<TaylorPoly<T>, GfError> {
        let c = |r: &Rational| T::from_rational(r, ctx);
        if d.is_continuous() {
            return self.continuous(d, self.coord_log(rep, k)?, k, ctx);
        }
        if let Some(pm) = finite_pmf(d) {
            let coeffs: Vec<T> = pm.iter().map(c).collect();
            return match rep {
                Rep::Pgf => self.polynomial(k, &coeffs),
                Rep::Mgf => {
                    let e = self.coord_exp(rep, k)?;
                    let mut acc = self.constant(T::zero());
                    for a in coeffs.iter().rev() {
                        acc = acc.mul(&e)?.add_constant(a);
                    }
                    Ok(acc)
                }
            };
        }
        let e = self.coord_exp(rep, k)?;
        match d {
            Distribution::Geometric(p) => negbin(&e, 1, &c(p)),
            Distribution::NegBinomial { r, p } => negbin(&e, *r, &c(p)),
            Distribution::Poisson(lambda) => {
                Ok(e.add_constant(&T::one().neg()).scale(&c(lambda)).exp()?)
            }
            _ => unreachable!("finite distributions handled above"),
        }
    }

    fn continuous(
        &self,
        d: &Distribution,
        t: TaylorPoly<T>,
        k: usize,
        ctx: &KernelCtx,
    ) -> Result<TaylorPoly<T>, GfError> {
        let c = |r: &Rational| T::from_rational(r, ctx);
        match d {
            Distribution::Dirac(a) => Ok(t.scale(&c(a)).exp()?),
            Distribution::Exponential(lambda) => {
                let l = c(lambda);
                let den = t.neg().add_constant(&l);
                Ok(self.constant(l).div(&den)?)
            }
            Distribution::Gamma { shape, rate } => {
                let b = c(rate);
                let den = t.neg().add_constant(&b);
                let base = self.constant(b).div(&den)?;
                if shape.is_integer() {
                    let n = shape.to_integer().to_u64().unwrap_or(u64::MAX);
                    Ok(base.powi(n)?)
                } else {
                    Ok(base.pow(&c(shape))?)
                }
            }
            Distribution::UniformCont { lo, hi } if lo == hi => Ok(t.scale(&c(lo)).exp()?),
            Distribution::UniformCont { lo, hi } if t.constant_term().is_zero() => {
                // (e^{bt} − e^{at}) / ((b − a) t) = Σ_n (b^{n+1} − a^{n+1}) / ((b − a)(n+1)!) tⁿ
                let width = hi - lo;
                let coeffs: Vec<T> = (0..=self.trunc.total as u64)
                    .map(|n| {
                        let num = rat_pow(hi, n + 1) - rat_pow(lo, n + 1);
                        c(&(num / &width * inv_factorial(n + 1)))
                    })
                    .collect();
                let mut base = self.base.clone();
                base[k] = T::zero();
                let series = TaylorPoly::univariate(k, &coeffs, base, self.trunc.clone())?;
                Ok(series.substitute(k, &t)?)
            }
            Distribution::UniformCont { lo, hi } => {
                let num = t.scale(&c(hi)).exp()?.sub(&t.scale(&c(lo)).exp()?)?;
                Ok(num.div(&t.scale(&c(&(hi - lo))))?)
            }
            _ => unreachable!("not a continuous distribution"),
        }
    }
}

/// `(p / (1 − (1−p)E))^r`.
fn negbin<T: Scalar>(e: &TaylorPoly<T>, r: u64, p: &T) -> Result<TaylorPoly<T>, GfError> {
    let den = e.scale(&T::one().sub(p)).neg().add_constant(&T::one());
    let one = TaylorPoly::constant(p.clone(), e.base().to_vec(), e.truncation().clone());
    Ok(one.div(&den)?.powi(r)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: u64) -> Rational {
        Rational::from_integer(BigInt::from(n))
    }

    #[test]
    fn lah_rows() {
        let to = |v: Vec<BigUint>| v.iter().map(|x| x.to_u64().unwrap()).collect::<Vec<_>>();
        assert_eq!(to(lah_numbers(0)), vec![1]);
        assert_eq!(to(lah_numbers(1)), vec![0, 1]);
        assert_eq!(to(lah_numbers(2)), vec![0, 2, 1]);
        assert_eq!(to(lah_numbers(3)), vec![0, 6, 6, 1]);
    }

    #[test]
    fn lah_closed_form() {
        // L(d, i) = C(d−1, i−1) d!/i! for i ≥ 1
        for d in 1..12u64 {
            let row = lah_numbers(d as usize);
            for i in 1..=d {
                let want = binomial(d - 1, i - 1) * factorial(d) / factorial(i);
                assert_eq!(row[i as usize], want, "L({d},{i})");
            }
        }
    }

    #[test]
    fn finite_pmfs_sum_to_one() {
        let h = Rational::new(1.into(), 3.into());
        for d in [
            Distribution::Binomial { n: 7, p: h.clone() },
            Distribution::UniformDisc { lo: 2, hi: 5 },
            Distribution::Bernoulli(h.clone()),
            Distribution::Dirac(q(4)),
        ] {
            let s: Rational = finite_pmf(&d).unwrap().into_iter().sum();
            assert_eq!(s, <Rational as One>::one(), "{d:?}");
        }
    }

    #[test]
    fn negbin_pmf_matches_series() {
        // NegBinomial(3, 1/2): P[2] = C(4,2)/2^5 = 6/32
        let d = Distribution::NegBinomial {
            r: 3,
            p: Rational::new(1.into(), 2.into()),
        };
        assert_eq!(
            pmf_rational(&d, 2),
            Some(Rational::new(6.into(), 32.into()))
        );
        let ring = Ring::<Rational>::new(vec![<Rational as Zero>::zero()], Truncation::full(1, 4));
        let g = ring
            .distribution(&d, Rep::Pgf, 0, &KernelCtx::default())
            .unwrap();
        for v in 0..=4u64 {
            assert_eq!(
                g.coefficient(&[v as usize]).unwrap(),
                pmf_rational(&d, v).unwrap()
            );
        }
    }

    #[test]
    fn poisson_weight_float() {
        let d = Distribution::Poisson(q(2));
        let p: f64 =
            probability_of(&d, &BTreeSet::from([0, 3]), false, &KernelCtx::default()).unwrap();
        let want = (-2f64).exp() * (1.0 + 8.0 / 6.0);
        assert!((p - want).abs() < 1e-15);
    }

    #[test]
    fn uniform_cont_mgf_moments() {
        // E[X] = (a+b)/2 and E[X^2] = (a^2+ab+b^2)/3 for X ~ U(1, 3)
        let d = Distribution::UniformCont { lo: q(1), hi: q(3) };
        let ring = Ring::<Rational>::new(vec![<Rational as Zero>::zero()], Truncation::full(1, 3));
        let g = ring
            .distribution(&d, Rep::Mgf, 0, &KernelCtx::default())
            .unwrap();
        assert_eq!(g.coefficient(&[0]).unwrap(), q(1));
        assert_eq!(g.coefficient(&[1]).unwrap(), q(2));
        assert_eq!(
            g.coefficient(&[2]).unwrap(),
            Rational::new(13.into(), 6.into())
        );
    }

    #[test]
    fn exponential_mgf_in_rational_mode() {
        // E[X^n]/n! = λ^{-n}
        let d = Distribution::Exponential(q(2));
        let ring = Ring::<Rational>::new(vec![<Rational as Zero>::zero()], Truncation::full(1, 3));
        let g = ring
            .distribution(&d, Rep::Mgf, 0, &KernelCtx::default())
            .unwrap();
        assert_eq!(
            g.coefficient(&[3]).unwrap(),
            Rational::new(1.into(), 8.into())
        );
    }
}
