use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{KernelCtx, KernelError, Rendered, Scalar, SignClass};

fn unsupported(op: &'static str) -> KernelError {
    KernelError::UnsupportedOp {
        op,
        kernel: "rational",
    }
}

fn exact_sqrt(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

impl Scalar for BigRational {
    const KERNEL: &'static str = "rational";

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(n.into())
    }
    fn from_rational(r: &BigRational, _ctx: &KernelCtx) -> Self {
        r.clone()
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
        if Zero::is_zero(rhs) {
            return Err(KernelError::DivisionByZero);
        }
        Ok(self / rhs)
    }
    fn exp(&self) -> Result<Self, KernelError> {
        if Zero::is_zero(self) {
            Ok(One::one())
        } else {
            Err(unsupported("exp"))
        }
    }
    fn ln(&self) -> Result<Self, KernelError> {
        if !self.is_positive() {
            Err(KernelError::Domain(format!(
                "ln of nonpositive value {self}"
            )))
        } else if self.is_one() {
            Ok(Zero::zero())
        } else {
            Err(unsupported("ln"))
        }
    }
    fn sqrt(&self) -> Result<Self, KernelError> {
        if self.is_negative() {
            return Err(KernelError::Domain(format!(
                "sqrt of negative value {self}"
            )));
        }
        match (exact_sqrt(self.numer()), exact_sqrt(self.denom())) {
            (Some(n), Some(d)) => Ok(BigRational::new(n, d)),
            _ => Err(unsupported("sqrt")),
        }
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn sign(&self) -> SignClass {
        if Zero::is_zero(self) {
            SignClass::Zero
        } else if self.is_positive() {
            SignClass::Positive
        } else {
            SignClass::Negative
        }
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn epsilon(&self) -> f64 {
        0.0
    }
    fn render(&self) -> Rendered {
        if self.is_integer() {
            Rendered::Point(self.to_integer().to_string())
        } else {
            Rendered::Point(format!("{}/{}", self.numer(), self.denom()))
        }
    }
    fn mul_add_assign(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn add_assign(&mut self, rhs: &Self) {
        *self += rhs;
    }
}
