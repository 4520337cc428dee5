use std::cmp::Ordering;
use std::fmt;

use astro_float::RoundingMode;
use num_rational::BigRational;

use super::bigfloat::with_consts;
use super::{BigFloat, KernelCtx, KernelError, Rendered, Scalar, SignClass};

/// A float type usable as an interval bound: every operation takes an
/// explicit rounding direction.
pub trait Endpoint: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    const NAME: &'static str;

    fn exact_u64(n: u64) -> Self;
    fn rational_dir(r: &BigRational, ctx: &KernelCtx, up: bool) -> Self;
    fn add_dir(&self, rhs: &Self, up: bool) -> Self;
    fn sub_dir(&self, rhs: &Self, up: bool) -> Self;
    fn mul_dir(&self, rhs: &Self, up: bool) -> Self;
    fn div_dir(&self, rhs: &Self, up: bool) -> Self;
    fn exp_dir(&self, up: bool) -> Self;
    fn ln_dir(&self, up: bool) -> Self;
    fn sqrt_dir(&self, up: bool) -> Self;
    fn negated(&self) -> Self;
    fn compare(&self, rhs: &Self) -> Ordering;
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
    fn epsilon(&self) -> f64;
    fn render(&self) -> String;

    fn min_of(a: Self, b: Self) -> Self {
        if a.compare(&b) == Ordering::Greater {
            b
        } else {
            a
        }
    }
    fn max_of(a: Self, b: Self) -> Self {
        if a.compare(&b) == Ordering::Less {
            b
        } else {
            a
        }
    }
}

fn step(v: f64, up: bool) -> f64 {
    if up {
        v.next_up()
    } else {
        v.next_down()
    }
}

/// Rounds `approx` in direction `up` given the sign of the exact residual
/// `true - approx`.
fn settle(approx: f64, residual: f64, up: bool) -> f64 {
    if !approx.is_finite() {
        return approx;
    }
    if residual.is_nan() {
        return step(approx, up);
    }
    if up && residual > 0.0 || !up && residual < 0.0 {
        step(approx, up)
    } else {
        approx
    }
}

const TINY: f64 = 1e-290;

impl Endpoint for f64 {
    const NAME: &'static str = "float64";

    fn exact_u64(n: u64) -> Self {
        n as f64
    }
    fn rational_dir(r: &BigRational, _ctx: &KernelCtx, up: bool) -> Self {
        let f = <BigRational as Scalar>::to_f64(r);
        match BigRational::from_float(f) {
            Some(back) => match back.cmp(r) {
                Ordering::Equal => f,
                Ordering::Greater => {
                    if up {
                        f
                    } else {
                        f.next_down()
                    }
                }
                Ordering::Less => {
                    if up {
                        f.next_up()
                    } else {
                        f
                    }
                }
            },
            None => f,
        }
    }
    fn add_dir(&self, rhs: &Self, up: bool) -> Self {
        let (a, b) = (*self, *rhs);
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        settle(s, err, up)
    }
    fn sub_dir(&self, rhs: &Self, up: bool) -> Self {
        self.add_dir(&-rhs, up)
    }
    fn mul_dir(&self, rhs: &Self, up: bool) -> Self {
        let (a, b) = (*self, *rhs);
        if a == 0.0 || b == 0.0 {
            return 0.0;
        }
        let p = a * b;
        if p.abs() < TINY {
            return step(p, up);
        }
        settle(p, a.mul_add(b, -p), up)
    }
    fn div_dir(&self, rhs: &Self, up: bool) -> Self {
        let (a, b) = (*self, *rhs);
        if a == 0.0 {
            return 0.0;
        }
        let q = a / b;
        if q.abs() < TINY {
            return step(q, up);
        }
        // a - q*b exactly; the sign of (a/b - q) is that of rem/b.
        let rem = -q.mul_add(b, -a);
        settle(q, rem * b.signum(), up)
    }
    fn exp_dir(&self, up: bool) -> Self {
        if *self == 0.0 {
            return 1.0;
        }
        let r = f64::exp(*self);
        let s = step(r, up);
        if up {
            s
        } else {
            s.max(0.0)
        }
    }
    fn ln_dir(&self, up: bool) -> Self {
        if *self == 1.0 {
            return 0.0;
        }
        step(f64::ln(*self), up)
    }
    fn sqrt_dir(&self, up: bool) -> Self {
        let r = f64::sqrt(*self);
        settle(r, -r.mul_add(r, -*self), up)
    }
    fn negated(&self) -> Self {
        -self
    }
    fn compare(&self, rhs: &Self) -> Ordering {
        self.partial_cmp(rhs).unwrap_or(Ordering::Equal)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn epsilon(&self) -> f64 {
        f64::EPSILON
    }
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

fn rm(up: bool) -> RoundingMode {
    if up {
        RoundingMode::Up
    } else {
        RoundingMode::Down
    }
}

impl Endpoint for BigFloat {
    const NAME: &'static str = "bigfloat";

    fn exact_u64(n: u64) -> Self {
        <BigFloat as Scalar>::from_u64(n)
    }
    fn rational_dir(r: &BigRational, ctx: &KernelCtx, up: bool) -> Self {
        if r.is_integer() && r.numer().bits() <= 64 {
            return BigFloat(BigFloat::from_bigint_exact(r.numer()));
        }
        BigFloat(BigFloat::rational_rounded(r, ctx.precision_bits, rm(up)))
    }
    fn add_dir(&self, rhs: &Self, up: bool) -> Self {
        BigFloat(self.0.add(&rhs.0, self.prec2(rhs), rm(up)))
    }
    fn sub_dir(&self, rhs: &Self, up: bool) -> Self {
        BigFloat(self.0.sub(&rhs.0, self.prec2(rhs), rm(up)))
    }
    fn mul_dir(&self, rhs: &Self, up: bool) -> Self {
        BigFloat(self.0.mul(&rhs.0, self.prec2(rhs), rm(up)))
    }
    fn div_dir(&self, rhs: &Self, up: bool) -> Self {
        BigFloat(self.0.div(&rhs.0, self.prec2(rhs), rm(up)))
    }
    fn exp_dir(&self, up: bool) -> Self {
        let p = self.prec1();
        BigFloat(with_consts(|cc| self.0.exp(p, rm(up), cc)))
    }
    fn ln_dir(&self, up: bool) -> Self {
        let p = self.prec1();
        BigFloat(with_consts(|cc| self.0.ln(p, rm(up), cc)))
    }
    fn sqrt_dir(&self, up: bool) -> Self {
        BigFloat(self.0.sqrt(self.prec1(), rm(up)))
    }
    fn negated(&self) -> Self {
        BigFloat(self.0.neg())
    }
    fn compare(&self, rhs: &Self) -> Ordering {
        self.0.partial_cmp(&rhs.0).unwrap_or(Ordering::Equal)
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
    fn to_f64(&self) -> f64 {
        BigFloat::approx_f64(&self.0)
    }
    fn epsilon(&self) -> f64 {
        2f64.powi(1 - self.precision() as i32)
    }
    fn render(&self) -> String {
        BigFloat::decimal(&self.0)
    }
}

/// Closed interval `[lo, hi]` that encloses the exact result of every
/// operation performed on it.
#[derive(Clone, PartialEq)]
pub struct Interval<E> {
    lo: E,
    hi: E,
}

impl<E: Endpoint> fmt::Debug for Interval<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo.render(), self.hi.render())
    }
}

/// Significant decimal digits of an enclosure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Digits {
    Exact,
    Count(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthReport {
    pub midpoint: f64,
    pub radius: f64,
    pub significant_digits: Digits,
}

impl<E: Endpoint> Interval<E> {
    pub fn new(lo: E, hi: E) -> Result<Self, KernelError> {
        if lo.compare(&hi) == Ordering::Greater {
            return Err(KernelError::Domain(format!(
                "empty interval [{lo:?}, {hi:?}]"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(v: E) -> Self {
        Interval {
            lo: v.clone(),
            hi: v,
        }
    }

    pub fn lo(&self) -> &E {
        &self.lo
    }

    pub fn hi(&self) -> &E {
        &self.hi
    }

    pub fn contains_f64(&self, v: f64) -> bool {
        self.lo.to_f64() <= v && v <= self.hi.to_f64()
    }

    pub fn widen_report(&self) -> WidthReport {
        let lo = self.lo.to_f64();
        let hi = self.hi.to_f64();
        let midpoint = lo / 2.0 + hi / 2.0;
        let radius = self.hi.sub_dir(&self.lo, true).to_f64() / 2.0;
        let significant_digits = if self.lo == self.hi {
            Digits::Exact
        } else if midpoint == 0.0 || radius == 0.0 {
            if radius == 0.0 {
                Digits::Exact
            } else {
                Digits::Count(0)
            }
        } else {
            let d = -(radius / midpoint.abs()).log10();
            Digits::Count(if d.is_finite() && d > 0.0 {
                d.floor() as u32
            } else {
                0
            })
        };
        WidthReport {
            midpoint,
            radius,
            significant_digits,
        }
    }

    fn contains_zero(&self) -> bool {
        self.lo.compare(&E::exact_u64(0)) != Ordering::Greater
            && self.hi.compare(&E::exact_u64(0)) != Ordering::Less
    }

    fn nonneg(&self) -> bool {
        self.lo.compare(&E::exact_u64(0)) != Ordering::Less
    }
}

impl<E: Endpoint> Scalar for Interval<E> {
    const KERNEL: &'static str = "interval";

    fn zero() -> Self {
        Interval::point(E::exact_u64(0))
    }
    fn one() -> Self {
        Interval::point(E::exact_u64(1))
    }
    fn from_u64(n: u64) -> Self {
        if n < (1u64 << 53) {
            Interval::point(E::exact_u64(n))
        } else {
            let r = BigRational::from_integer(n.into());
            let ctx = KernelCtx { precision_bits: 64 };
            Interval {
                lo: E::rational_dir(&r, &ctx, false),
                hi: E::rational_dir(&r, &ctx, true),
            }
        }
    }
    fn from_rational(r: &BigRational, ctx: &KernelCtx) -> Self {
        Interval {
            lo: E::rational_dir(r, ctx, false),
            hi: E::rational_dir(r, ctx, true),
        }
    }
    fn add(&self, rhs: &Self) -> Self {
        Interval {
            lo: self.lo.add_dir(&rhs.lo, false),
            hi: self.hi.add_dir(&rhs.hi, true),
        }
    }
    fn sub(&self, rhs: &Self) -> Self {
        Interval {
            lo: self.lo.sub_dir(&rhs.hi, false),
            hi: self.hi.sub_dir(&rhs.lo, true),
        }
    }
    fn mul(&self, rhs: &Self) -> Self {
        if self.nonneg() && rhs.nonneg() {
            return Interval {
                lo: self.lo.mul_dir(&rhs.lo, false),
                hi: self.hi.mul_dir(&rhs.hi, true),
            };
        }
        let pairs = [
            (&self.lo, &rhs.lo),
            (&self.lo, &rhs.hi),
            (&self.hi, &rhs.lo),
            (&self.hi, &rhs.hi),
        ];
        let lo = pairs
            .iter()
            .map(|(a, b)| a.mul_dir(b, false))
            .reduce(E::min_of)
            .expect("four products");
        let hi = pairs
            .iter()
            .map(|(a, b)| a.mul_dir(b, true))
            .reduce(E::max_of)
            .expect("four products");
        Interval { lo, hi }
    }
    fn neg(&self) -> Self {
        Interval {
            lo: self.hi.negated(),
            hi: self.lo.negated(),
        }
    }
    fn div(&self, rhs: &Self) -> Result<Self, KernelError> {
        if rhs.contains_zero() {
            return Err(KernelError::DivisionByZero);
        }
        let pairs = [
            (&self.lo, &rhs.lo),
            (&self.lo, &rhs.hi),
            (&self.hi, &rhs.lo),
            (&self.hi, &rhs.hi),
        ];
        let lo = pairs
            .iter()
            .map(|(a, b)| a.div_dir(b, false))
            .reduce(E::min_of)
            .expect("four quotients");
        let hi = pairs
            .iter()
            .map(|(a, b)| a.div_dir(b, true))
            .reduce(E::max_of)
            .expect("four quotients");
        Ok(Interval { lo, hi })
    }
    fn exp(&self) -> Result<Self, KernelError> {
        Ok(Interval {
            lo: self.lo.exp_dir(false),
            hi: self.hi.exp_dir(true),
        })
    }
    fn ln(&self) -> Result<Self, KernelError> {
        if self.lo.compare(&E::exact_u64(0)) != Ordering::Greater {
            return Err(KernelError::Domain(format!(
                "ln of interval {self:?} reaching nonpositive values"
            )));
        }
        Ok(Interval {
            lo: self.lo.ln_dir(false),
            hi: self.hi.ln_dir(true),
        })
    }
    fn sqrt(&self) -> Result<Self, KernelError> {
        let zero = E::exact_u64(0);
        if self.hi.compare(&zero) == Ordering::Less {
            return Err(KernelError::Domain(format!(
                "sqrt of negative interval {self:?}"
            )));
        }
        let lo = if self.lo.compare(&zero) == Ordering::Less {
            zero
        } else {
            self.lo.sqrt_dir(false)
        };
        Ok(Interval {
            lo,
            hi: self.hi.sqrt_dir(true),
        })
    }
    fn is_zero(&self) -> bool {
        self.lo.is_zero() && self.hi.is_zero()
    }
    fn sign(&self) -> SignClass {
        let zero = E::exact_u64(0);
        if self.is_zero() {
            SignClass::Zero
        } else if self.lo.compare(&zero) == Ordering::Greater {
            SignClass::Positive
        } else if self.hi.compare(&zero) == Ordering::Less {
            SignClass::Negative
        } else {
            SignClass::Mixed
        }
    }
    fn to_f64(&self) -> f64 {
        let (lo, hi) = (self.lo.to_f64(), self.hi.to_f64());
        if lo == hi {
            lo
        } else {
            lo / 2.0 + hi / 2.0
        }
    }
    fn upper_f64(&self) -> f64 {
        self.hi.to_f64().next_up()
    }
    fn epsilon(&self) -> f64 {
        self.lo.epsilon()
    }
    fn render(&self) -> Rendered {
        Rendered::Interval {
            lo: self.lo.render(),
            hi: self.hi.render(),
            digits: self.widen_report().significant_digits,
        }
    }
    fn pow_rational(&self, r: &BigRational, ctx: &KernelCtx) -> Result<Self, KernelError> {
        if r.is_integer() {
            let n = r.to_integer();
            let m: u64 = num_traits::Signed::abs(&n)
                .try_into()
                .map_err(|_| KernelError::Domain("exponent too large".into()))?;
            let p = self.powi(m);
            return if num_traits::Signed::is_negative(&n) {
                Self::one().div(&p)
            } else {
                Ok(p)
            };
        }
        Self::from_rational(r, ctx).mul(&self.ln()?).exp()
    }
}
