use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::{KernelCtx, KernelError, Rendered, Scalar, SignClass};

impl Scalar for f64 {
    const KERNEL: &'static str = "float64";

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_u64(n: u64) -> Self {
        n as f64
    }
    fn from_rational(r: &BigRational, _ctx: &KernelCtx) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn div(&self, rhs: &Self) -> Result<Self, KernelError> {
        if *rhs == 0.0 {
            return Err(KernelError::DivisionByZero);
        }
        Ok(self / rhs)
    }
    fn exp(&self) -> Result<Self, KernelError> {
        Ok(f64::exp(*self))
    }
    fn ln(&self) -> Result<Self, KernelError> {
        if *self <= 0.0 {
            return Err(KernelError::Domain(format!(
                "ln of nonpositive value {self}"
            )));
        }
        Ok(f64::ln(*self))
    }
    fn sqrt(&self) -> Result<Self, KernelError> {
        if *self < 0.0 {
            return Err(KernelError::Domain(format!(
                "sqrt of negative value {self}"
            )));
        }
        Ok(f64::sqrt(*self))
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn sign(&self) -> SignClass {
        if *self > 0.0 {
            SignClass::Positive
        } else if *self < 0.0 {
            SignClass::Negative
        } else if *self == 0.0 {
            SignClass::Zero
        } else {
            SignClass::Mixed
        }
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn epsilon(&self) -> f64 {
        f64::EPSILON
    }
    fn render(&self) -> Rendered {
        Rendered::Point(format!("{self:?}"))
    }
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn add_assign(&mut self, rhs: &Self) {
        *self += rhs;
    }
}
