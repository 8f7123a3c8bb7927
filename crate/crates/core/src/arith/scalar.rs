//! The fraction field over [`Poly`]: every scalar the engine manipulates is a
//! reduced ratio of polynomials.  Denominators appear as soon as a
//! non-constant conformal scale enters (e.g. `Upsilon = -d sigma / sigma`),
//! and exactness of every downstream identity relies on the invariants kept
//! here: the denominator is nonzero, gcd(num, den) is constant, and the
//! denominator is graded-lex monic so representations are unique.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::One;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::gcd::poly_gcd;
use super::poly::Poly;
use super::Rational;
use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Scalar {
    num: Poly,
    den: Poly,
}

impl Scalar {
    pub fn from_poly(num: Poly) -> Scalar {
        let den = Poly::one(num.nvars());
        Scalar { num, den }
    }

    pub fn zero(nvars: usize) -> Scalar {
        Scalar::from_poly(Poly::zero(nvars))
    }

    pub fn one(nvars: usize) -> Scalar {
        Scalar::from_poly(Poly::one(nvars))
    }

    pub fn from_rational(nvars: usize, c: Rational) -> Scalar {
        Scalar::from_poly(Poly::constant(nvars, c))
    }

    pub fn from_int(nvars: usize, c: i64) -> Scalar {
        Scalar::from_rational(nvars, super::rat(c))
    }

    pub fn var(nvars: usize, v: usize) -> Scalar {
        Scalar::from_poly(Poly::var(nvars, v))
    }

    pub fn new(num: Poly, den: Poly) -> Result<Scalar> {
        if den.is_zero() {
            return Err(Error::DivisionByZero("in scalar constructor".into()));
        }
        Ok(Scalar { num, den }.reduced())
    }

    fn reduced(self) -> Scalar {
        let mut num = self.num;
        let mut den = self.den;
        if num.is_zero() {
            return Scalar::zero(den.nvars());
        }
        if !den.is_one() {
            let g = poly_gcd(&num, &den);
            if !g.is_constant() {
                num = num.try_exact_div(&g).expect("gcd divides numerator");
                den = den.try_exact_div(&g).expect("gcd divides denominator");
            }
        }
        Scalar { num, den }.monic_normalized()
    }

    /// Canonical form for an already-reduced fraction: monic denominator.
    fn monic_normalized(self) -> Scalar {
        let mut num = self.num;
        let mut den = self.den;
        if num.is_zero() {
            return Scalar::zero(den.nvars());
        }
        if !den.is_one() {
            let lc = den.leading().expect("nonzero denominator").1.clone();
            if !lc.is_one() {
                let inv = Rational::one() / lc;
                den = den.scale(&inv);
                num = num.scale(&inv);
            }
        }
        Scalar { num, den }
    }

    pub fn nvars(&self) -> usize {
        self.num.nvars()
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    /// The numerator as a polynomial, if the denominator is 1.
    pub fn as_poly(&self) -> Option<&Poly> {
        self.is_polynomial().then_some(&self.num)
    }

    pub fn constant_value(&self) -> Option<Rational> {
        if self.den.is_one() {
            self.num.constant_value()
        } else {
            None
        }
    }

    pub fn inv(&self) -> Result<Scalar> {
        if self.is_zero() {
            return Err(Error::DivisionByZero("inverting zero scalar".into()));
        }
        Scalar::new(self.den.clone(), self.num.clone())
    }

    pub fn checked_div(&self, rhs: &Scalar) -> Result<Scalar> {
        if rhs.is_zero() {
            return Err(Error::DivisionByZero("in scalar division".into()));
        }
        Scalar::new(&self.num * &rhs.den, &self.den * &rhs.num)
    }

    /// Quotient-rule derivative with respect to variable `v`.
    pub fn diff(&self, v: usize) -> Scalar {
        if self.den.is_one() {
            return Scalar::from_poly(self.num.diff(v));
        }
        let num = &(&self.num.diff(v) * &self.den) - &(&self.num * &self.den.diff(v));
        let den = &self.den * &self.den;
        Scalar { num, den }.reduced()
    }

    pub fn eval(&self, point: &[Rational]) -> Result<Rational> {
        use num_traits::Zero;
        let d = self.den.eval(point);
        if d.is_zero() {
            return Err(Error::PoleAtPoint);
        }
        Ok(self.num.eval(point) / d)
    }

    pub fn pow(&self, e: i32) -> Result<Scalar> {
        if e < 0 {
            return self.inv()?.pow(-e);
        }
        let mut acc = Scalar::one(self.nvars());
        for _ in 0..e {
            acc = &acc * self;
        }
        Ok(acc)
    }

    pub fn scale(&self, c: &Rational) -> Scalar {
        use num_traits::Zero;
        if c.is_zero() {
            return Scalar::zero(self.nvars());
        }
        Scalar {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    fn check_nvars(&self, other: &Scalar) {
        assert_eq!(
            self.nvars(),
            other.nvars(),
            "scalar arithmetic across different variable counts"
        );
    }

    /// Sum many terms over a running common denominator, reducing once at
    /// the end instead of once per addition.  This is the workhorse for the
    /// long per-component accumulations in the calculus layer.
    pub fn sum<I: IntoIterator<Item = Scalar>>(nvars: usize, terms: I) -> Scalar {
        let mut num = Poly::zero(nvars);
        let mut den = Poly::one(nvars);
        for t in terms {
            assert_eq!(t.nvars(), nvars, "scalar sum across variable counts");
            if t.is_zero() {
                continue;
            }
            if t.den == den {
                num = &num + &t.num;
            } else {
                let g = poly_gcd(&den, &t.den);
                let t_cof = t.den.try_exact_div(&g).expect("gcd divides");
                let d_cof = den.try_exact_div(&g).expect("gcd divides");
                num = &(&num * &t_cof) + &(&t.num * &d_cof);
                den = &den * &t_cof;
            }
        }
        Scalar { num, den }.reduced()
    }
}

impl From<Poly> for Scalar {
    fn from(p: Poly) -> Scalar {
        Scalar::from_poly(p)
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        self.check_nvars(rhs);
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den == rhs.den {
            return Scalar {
                num: &self.num + &rhs.num,
                den: self.den.clone(),
            }
            .reduced();
        }
        // Reduced addition: with g = gcd of the denominators, only the small
        // gcd against g is ever needed; the cofactors stay coprime to the
        // numerator automatically since both inputs are reduced.
        let g = poly_gcd(&self.den, &rhs.den);
        if g.is_constant() {
            return Scalar {
                num: &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
                den: &self.den * &rhs.den,
            }
            .monic_normalized();
        }
        let ls = self.den.try_exact_div(&g).expect("gcd divides");
        let lr = rhs.den.try_exact_div(&g).expect("gcd divides");
        let num = &(&self.num * &lr) + &(&rhs.num * &ls);
        if num.is_zero() {
            return Scalar::zero(self.nvars());
        }
        let h = poly_gcd(&num, &g);
        let (num, g) = if h.is_constant() {
            (num, g)
        } else {
            (
                num.try_exact_div(&h).expect("gcd divides"),
                g.try_exact_div(&h).expect("gcd divides"),
            )
        };
        Scalar {
            num,
            den: &(&ls * &g) * &lr,
        }
        .monic_normalized()
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        self + &(-rhs)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        self.check_nvars(rhs);
        if self.is_zero() || rhs.is_zero() {
            return Scalar::zero(self.nvars());
        }
        // Cross-reduce before multiplying; the cross-reduced product is
        // already in lowest terms when both inputs are.
        let g1 = poly_gcd(&self.num, &rhs.den);
        let g2 = poly_gcd(&rhs.num, &self.den);
        let a = self.num.try_exact_div(&g1).expect("gcd divides");
        let d2 = rhs.den.try_exact_div(&g1).expect("gcd divides");
        let b = rhs.num.try_exact_div(&g2).expect("gcd divides");
        let d1 = self.den.try_exact_div(&g2).expect("gcd divides");
        Scalar {
            num: &a * &b,
            den: &d1 * &d2,
        }
        .monic_normalized()
    }
}

impl Div for &Scalar {
    type Output = Scalar;
    /// Panics on division by zero; use [`Scalar::checked_div`] where the
    /// divisor may vanish.
    fn div(self, rhs: &Scalar) -> Scalar {
        self.checked_div(rhs)
            .expect("scalar division by zero (use checked_div)")
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

// ---------------------------------------------------------------------------
// JSON form: the polynomial schema, plus an optional "den_poly" object when
// the denominator is not 1.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ScalarJson {
    #[serde(flatten)]
    num: Poly,
    #[serde(skip_serializing_if = "Option::is_none")]
    den_poly: Option<Poly>,
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ScalarJson {
            num: self.num.clone(),
            den_poly: (!self.den.is_one()).then(|| self.den.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Scalar, D::Error> {
        let j = ScalarJson::deserialize(d)?;
        match j.den_poly {
            None => Ok(Scalar::from_poly(j.num)),
            Some(den) => {
                if den.nvars() != j.num.nvars() {
                    return Err(D::Error::custom(
                        "den_poly has a different nvars than the numerator",
                    ));
                }
                Scalar::new(j.num, den).map_err(D::Error::custom)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{rat, ratio};

    #[test]
    fn reduction_cancels_common_factor() {
        // (x^2 - 1)/(x - 1) == x + 1, checked also by evaluation at 5 points
        let num = Poly::from_terms(1, vec![(vec![2], rat(1)), (vec![0], rat(-1))]);
        let den = Poly::from_terms(1, vec![(vec![1], rat(1)), (vec![0], rat(-1))]);
        let s = Scalar::new(num.clone(), den.clone()).unwrap();
        assert!(s.is_polynomial());
        assert_eq!(
            s.numerator(),
            &Poly::from_terms(1, vec![(vec![1], rat(1)), (vec![0], rat(1))])
        );
        for k in [2i64, 3, -4, 7, 10] {
            let pt = [rat(k)];
            let direct = num.eval(&pt) / den.eval(&pt);
            assert_eq!(s.eval(&pt).unwrap(), direct);
        }
    }

    #[test]
    fn derivative_of_product_with_inverse_is_zero() {
        // (p * p^{-1})' = 0 for p = 1 + x1^2
        let p = Scalar::from_poly(Poly::from_terms(
            1,
            vec![(vec![0], rat(1)), (vec![2], rat(1))],
        ));
        let prod = &p * &p.inv().unwrap();
        assert!(prod.diff(0).is_zero());
    }

    #[test]
    fn quotient_rule() {
        // d/dx (x / (1 + x^2)) = (1 - x^2) / (1 + x^2)^2
        let x = Scalar::var(1, 0);
        let den = Scalar::from_poly(Poly::from_terms(
            1,
            vec![(vec![0], rat(1)), (vec![2], rat(1))],
        ));
        let s = &x / &den;
        let ds = s.diff(0);
        let expect_num = Poly::from_terms(1, vec![(vec![0], rat(1)), (vec![2], rat(-1))]);
        let expect_den = {
            let d = Poly::from_terms(1, vec![(vec![0], rat(1)), (vec![2], rat(1))]);
            &d * &d
        };
        assert_eq!(ds, Scalar::new(expect_num, expect_den).unwrap());
    }

    #[test]
    fn eval_pole_detected() {
        let s = Scalar::new(
            Poly::one(1),
            Poly::from_terms(1, vec![(vec![1], rat(1))]),
        )
        .unwrap();
        assert!(matches!(s.eval(&[rat(0)]), Err(Error::PoleAtPoint)));
        assert_eq!(s.eval(&[rat(2)]).unwrap(), ratio(1, 2));
    }

    #[test]
    fn json_roundtrip_with_denominator() {
        let s = Scalar::new(
            Poly::from_terms(2, vec![(vec![1, 0], rat(3))]),
            Poly::from_terms(2, vec![(vec![0, 0], rat(1)), (vec![0, 2], rat(2))]),
        )
        .unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: Scalar = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
        // Plain polynomial scalars serialize exactly like polynomials.
        let p = Scalar::from_poly(Poly::var(2, 1));
        let text = serde_json::to_string(&p).unwrap();
        assert!(!text.contains("den_poly"));
        let as_poly: Poly = serde_json::from_str(&text).unwrap();
        assert_eq!(&as_poly, p.numerator());
    }
}
