//! Exact arithmetic kernel.

pub mod gcd;
pub mod linsys;
pub mod modular;
pub mod poly;
pub mod ratfunc;
pub mod reconstruct;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use thiserror::Error;

pub use gcd::{gcd, lcm};
pub use linsys::{modular_rank, nullspace, LinearSystem, Unknown};
pub use modular::{eval_mod, PrimeFieldMatrix};
pub use poly::{vars, Monomial, MultiPoly, Vars};
pub use ratfunc::RatFunc;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("inexact division")]
    InexactDivision,
    #[error("division by zero")]
    DivisionByZero,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("denominator vanishes at the evaluation point")]
    BadEvaluationPoint,
    #[error("no usable evaluation point after repeated retries")]
    EvaluationExhausted,
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Positive gcd of two rationals: `gcd(a/b, c/d) = gcd(a, c) / lcm(b, d)`.
pub fn rat_gcd(x: &Rational, y: &Rational) -> Rational {
    let n = x.numer().gcd(y.numer());
    let d = x.denom().lcm(y.denom());
    if n == BigInt::from(0) {
        return Rational::from_integer(BigInt::from(1));
    }
    Rational::new(n, d)
}
