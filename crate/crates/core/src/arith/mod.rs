//! Exact scalar arithmetic: arbitrary-precision rationals, sparse
//! multivariate polynomials in a graded-lexicographic term order, and the
//! fraction field built from them.
//!
//! All higher layers (tensor fields, tractor calculus, solvers) reduce to
//! this module, so every identity the engine certifies bottoms out in exact
//! integer arithmetic — there is no floating point anywhere.

mod gcd;
mod parse;
mod poly;
mod scalar;

pub use gcd::poly_gcd;
pub use parse::parse_poly;
pub use poly::{random_poly, Mono, Poly};
pub use scalar::Scalar;

/// Arbitrary-precision rational number, always stored reduced with a
/// positive denominator.
pub type Rational = num_rational::BigRational;
pub type Int = num_bigint::BigInt;

/// Convenience constructor for small rationals.
pub fn rat(n: i64) -> Rational {
    Rational::from_integer(Int::from(n))
}

/// Convenience constructor `n/d`; panics if `d == 0` (programming error in
/// literal test data, never user input).
pub fn ratio(n: i64, d: i64) -> Rational {
    assert!(d != 0, "ratio literal with zero denominator");
    Rational::new(Int::from(n), Int::from(d))
}
