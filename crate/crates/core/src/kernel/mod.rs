//! Scalar arithmetic backends.
//!
//! Every numeric routine in the crate is generic over [`Scalar`]. The concrete
//! kernels are `f64`, [`BigFloat`], exact [`BigRational`] and [`Interval`]
//! enclosures over either float kind.

mod bigfloat;
mod float;
mod interval;
mod rational;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use bigfloat::{with_working_precision, BigFloat};
pub use interval::{Digits, Endpoint, Interval, WidthReport};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("operation `{op}` is not available in the {kernel} kernel")]
    UnsupportedOp {
        op: &'static str,
        kernel: &'static str,
    },
}

/// Which backend a computation runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelSpec {
    Float64,
    BigFloat { bits: u32 },
    Rational,
    IntervalFloat64,
    IntervalBigFloat { bits: u32 },
}

impl KernelSpec {
    pub fn ctx(&self) -> KernelCtx {
        match *self {
            KernelSpec::BigFloat { bits } | KernelSpec::IntervalBigFloat { bits } => KernelCtx {
                precision_bits: bits.max(53) as usize,
            },
            _ => KernelCtx::default(),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Float64 => write!(f, "float64"),
            KernelSpec::BigFloat { bits } => write!(f, "bigfloat{bits}"),
            KernelSpec::Rational => write!(f, "rational"),
            KernelSpec::IntervalFloat64 => write!(f, "interval-float64"),
            KernelSpec::IntervalBigFloat { bits } => write!(f, "interval-bigfloat{bits}"),
        }
    }
}

/// Per-computation settings needed to create inexact constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelCtx {
    pub precision_bits: usize,
}

impl Default for KernelCtx {
    fn default() -> Self {
        KernelCtx { precision_bits: 53 }
    }
}

/// A number rendered for reports.
#[derive(Debug, Clone, PartialEq)]
pub enum Rendered {
    Point(String),
    Interval {
        lo: String,
        hi: String,
        digits: Digits,
    },
}

/// Sign information that survives interval uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignClass {
    Negative,
    Zero,
    Positive,
    /// An enclosure that straddles zero.
    Mixed,
}

pub trait Scalar: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    const KERNEL: &'static str;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_u64(n: u64) -> Self;
    fn from_rational(r: &BigRational, ctx: &KernelCtx) -> Self;

    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn div(&self, rhs: &Self) -> Result<Self, KernelError>;
    fn exp(&self) -> Result<Self, KernelError>;
    fn ln(&self) -> Result<Self, KernelError>;
    fn sqrt(&self) -> Result<Self, KernelError>;

    /// True only for an exact zero (a degenerate `[0, 0]` for intervals).
    fn is_zero(&self) -> bool;
    fn sign(&self) -> SignClass;
    /// Nearest `f64`, or the midpoint for intervals.
    fn to_f64(&self) -> f64;
    /// An `f64` that is at least the value (upper end for intervals).
    fn upper_f64(&self) -> f64 {
        self.to_f64()
    }
    /// Unit roundoff of the kernel; zero when exact.
    fn epsilon(&self) -> f64;
    fn render(&self) -> Rendered;

    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        *self = self.add(&a.mul(b));
    }

    fn add_assign(&mut self, rhs: &Self) {
        *self = self.add(rhs);
    }

    fn from_i64(n: i64) -> Self {
        let m = Self::from_u64(n.unsigned_abs());
        if n < 0 {
            m.neg()
        } else {
            m
        }
    }

    fn div_u64(&self, n: u64) -> Result<Self, KernelError> {
        self.div(&Self::from_u64(n))
    }

    fn powi(&self, mut n: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// `self^r`; integer exponents use repeated squaring, others go through
    /// `exp(r ln self)`.
    fn pow_rational(&self, r: &BigRational, ctx: &KernelCtx) -> Result<Self, KernelError> {
        if r.is_integer() {
            let n = r.to_integer();
            let m = n
                .abs()
                .to_u64()
                .ok_or_else(|| KernelError::Domain("exponent too large".into()))?;
            let p = self.powi(m);
            return if n.is_negative() {
                Self::one().div(&p)
            } else {
                Ok(p)
            };
        }
        if self.is_zero() && r.is_positive() {
            return Ok(Self::zero());
        }
        Self::from_rational(r, ctx).mul(&self.ln()?).exp()
    }
}

/// Converts an exact integer into a kernel value.
pub fn from_bigint<T: Scalar>(n: &BigInt, ctx: &KernelCtx) -> T {
    T::from_rational(&BigRational::from_integer(n.clone()), ctx)
}

/// Parses a decimal or `p/q` literal into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if Zero::is_zero(&d) {
            return None;
        }
        return Some(n / d);
    }
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let den = num_traits::pow(BigInt::from(10u32), frac.len());
    Some(BigRational::new(num, den))
}

/// Canonical text for an exact rational: a terminating decimal when one
/// exists, otherwise `p/q`.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        return r.to_integer().to_string();
    }
    let mut den = r.denom().clone();
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    let scaled =
        (r * BigRational::from_integer(num_traits::pow(BigInt::from(10u32), places))).to_integer();
    let neg = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let digits = format!("{digits:0>width$}", width = places + 1);
    let (i, f) = digits.split_at(digits.len() - places);
    format!("{}{i}.{f}", if neg { "-" } else { "" })
}
