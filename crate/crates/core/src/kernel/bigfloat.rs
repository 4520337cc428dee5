use std::cell::{Cell, RefCell};
use std::fmt;

use astro_float::{Consts, Radix, RoundingMode};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;

use super::{KernelCtx, KernelError, Rendered, Scalar, SignClass};

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constant cache"));
    static WORKING_BITS: Cell<usize> = const { Cell::new(0) };
}

/// Runs `f` with a minimum precision for every BigFloat operation on this
/// thread, so that operations between exact small integers do not round at
/// 64 bits. Restores the previous floor afterwards.
pub fn with_working_precision<R>(bits: usize, f: impl FnOnce() -> R) -> R {
    let prev = WORKING_BITS.with(|w| w.replace(bits));
    struct Restore(usize);
    impl Drop for Restore {
        fn drop(&mut self) {
            WORKING_BITS.with(|w| w.set(self.0));
        }
    }
    let _restore = Restore(prev);
    f()
}

fn working_bits() -> usize {
    WORKING_BITS.with(|w| w.get())
}

pub(crate) fn with_consts<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// Arbitrary-precision binary float. Each value carries its own precision;
/// binary operations round to the larger of the two.
#[derive(Clone, PartialEq)]
pub struct BigFloat(pub(crate) astro_float::BigFloat);

impl BigFloat {
    pub fn precision(&self) -> usize {
        self.0.precision().unwrap_or(64)
    }

    pub fn from_f64(v: f64, bits: usize) -> Self {
        BigFloat(astro_float::BigFloat::from_f64(v, bits.max(64)))
    }

    pub fn raw(&self) -> &astro_float::BigFloat {
        &self.0
    }

    pub(crate) fn prec2(&self, rhs: &Self) -> usize {
        self.precision().max(rhs.precision()).max(working_bits())
    }

    pub(crate) fn prec1(&self) -> usize {
        self.precision().max(working_bits())
    }

    pub(crate) fn from_bigint_exact(n: &BigInt) -> astro_float::BigFloat {
        let bits = (n.bits() as usize + 64).max(64);
        with_consts(|cc| {
            astro_float::BigFloat::parse(&n.to_string(), Radix::Dec, bits, RoundingMode::None, cc)
        })
    }

    pub(crate) fn rational_rounded(
        r: &BigRational,
        bits: usize,
        rm: RoundingMode,
    ) -> astro_float::BigFloat {
        let n = Self::from_bigint_exact(r.numer());
        let d = Self::from_bigint_exact(r.denom());
        n.div(&d, bits, rm)
    }

    pub(crate) fn decimal(v: &astro_float::BigFloat) -> String {
        if v.is_zero() {
            return "0".into();
        }
        with_consts(|cc| v.format(Radix::Dec, RoundingMode::ToEven, cc))
            .unwrap_or_else(|_| "NaN".into())
    }

    pub(crate) fn approx_f64(v: &astro_float::BigFloat) -> f64 {
        if v.is_zero() {
            return 0.0;
        }
        if v.is_nan() {
            return f64::NAN;
        }
        if v.is_inf_pos() {
            return f64::INFINITY;
        }
        if v.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        Self::decimal(v).parse().unwrap_or(f64::NAN)
    }
}

impl fmt::Debug for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Self::decimal(&self.0))
    }
}

const RM: RoundingMode = RoundingMode::ToEven;

impl Scalar for BigFloat {
    const KERNEL: &'static str = "bigfloat";

    fn zero() -> Self {
        BigFloat(astro_float::BigFloat::from_u64(0, 64))
    }
    fn one() -> Self {
        BigFloat(astro_float::BigFloat::from_u64(1, 64))
    }
    fn from_u64(n: u64) -> Self {
        BigFloat(astro_float::BigFloat::from_u64(n, 64))
    }
    fn from_rational(r: &BigRational, ctx: &KernelCtx) -> Self {
        if r.is_integer() && r.numer().bits() <= 64 {
            return BigFloat(Self::from_bigint_exact(r.numer()));
        }
        BigFloat(Self::rational_rounded(r, ctx.precision_bits, RM))
    }
    fn add(&self, rhs: &Self) -> Self {
        BigFloat(self.0.add(&rhs.0, self.prec2(rhs), RM))
    }
    fn sub(&self, rhs: &Self) -> Self {
        BigFloat(self.0.sub(&rhs.0, self.prec2(rhs), RM))
    }
    fn mul(&self, rhs: &Self) -> Self {
        BigFloat(self.0.mul(&rhs.0, self.prec2(rhs), RM))
    }
    fn neg(&self) -> Self {
        BigFloat(self.0.neg())
    }
    fn div(&self, rhs: &Self) -> Result<Self, KernelError> {
        if rhs.0.is_zero() {
            return Err(KernelError::DivisionByZero);
        }
        Ok(BigFloat(self.0.div(&rhs.0, self.prec2(rhs), RM)))
    }
    fn exp(&self) -> Result<Self, KernelError> {
        let p = self.prec1();
        Ok(BigFloat(with_consts(|cc| self.0.exp(p, RM, cc))))
    }
    fn ln(&self) -> Result<Self, KernelError> {
        if !self.0.is_positive() || self.0.is_zero() {
            return Err(KernelError::Domain(format!(
                "ln of nonpositive value {self:?}"
            )));
        }
        let p = self.prec1();
        Ok(BigFloat(with_consts(|cc| self.0.ln(p, RM, cc))))
    }
    fn sqrt(&self) -> Result<Self, KernelError> {
        if self.0.is_negative() && !self.0.is_zero() {
            return Err(KernelError::Domain(format!(
                "sqrt of negative value {self:?}"
            )));
        }
        Ok(BigFloat(self.0.sqrt(self.prec1(), RM)))
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
    fn sign(&self) -> SignClass {
        if self.0.is_nan() {
            SignClass::Mixed
        } else if self.0.is_zero() {
            SignClass::Zero
        } else if self.0.is_positive() {
            SignClass::Positive
        } else {
            SignClass::Negative
        }
    }
    fn to_f64(&self) -> f64 {
        Self::approx_f64(&self.0)
    }
    fn epsilon(&self) -> f64 {
        2f64.powi(1 - self.precision() as i32)
    }
    fn render(&self) -> Rendered {
        Rendered::Point(Self::decimal(&self.0))
    }
    fn pow_rational(&self, r: &BigRational, ctx: &KernelCtx) -> Result<Self, KernelError> {
        if r.is_integer() {
            let n = r.to_integer();
            let m: u64 = n
                .abs()
                .try_into()
                .map_err(|_| KernelError::Domain("exponent too large".into()))?;
            let p = self.powi(m);
            return if n.is_negative() {
                Self::one().div(&p)
            } else {
                Ok(p)
            };
        }
        Self::from_rational(r, ctx).mul(&self.ln()?).exp()
    }
}
