//! Sparse multivariate polynomials over the rationals.
//!
//! Terms are kept in a `BTreeMap` keyed by exponent vector under the graded
//! lexicographic order (total degree first, then lexicographic comparison of
//! the exponent vector), so iteration order — and hence serialization — is
//! canonical.  The map never stores zero coefficients.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Int, Rational};
use crate::error::{Error, Result};

/// Exponent vector of one monomial; length equals the variable count of the
/// polynomial that owns it.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Mono(pub Vec<u32>);

impl Mono {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Componentwise difference, or `None` if any exponent would go negative.
    pub fn try_sub(&self, other: &Mono) -> Option<Mono> {
        let mut out = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(&other.0) {
            out.push(a.checked_sub(*b)?);
        }
        Some(Mono(out))
    }

    pub fn mul(&self, other: &Mono) -> Mono {
        Mono(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Mono, Rational>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Poly {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Rational) -> Poly {
        let mut p = Poly::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(Mono(vec![0; nvars]), c);
        }
        p
    }

    pub fn one(nvars: usize) -> Poly {
        Poly::constant(nvars, Rational::one())
    }

    pub fn from_int(nvars: usize, c: i64) -> Poly {
        Poly::constant(nvars, super::rat(c))
    }

    /// The variable `x_{v+1}` (zero-based slot `v`).
    pub fn var(nvars: usize, v: usize) -> Poly {
        assert!(v < nvars, "variable index {v} out of range for nvars={nvars}");
        let mut exps = vec![0; nvars];
        exps[v] = 1;
        let mut p = Poly::zero(nvars);
        p.terms.insert(Mono(exps), Rational::one());
        p
    }

    pub fn from_terms<I>(nvars: usize, it: I) -> Poly
    where
        I: IntoIterator<Item = (Vec<u32>, Rational)>,
    {
        let mut p = Poly::zero(nvars);
        for (exps, c) in it {
            assert_eq!(exps.len(), nvars, "exponent vector length mismatch");
            p.add_term(Mono(exps), c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.leading().unwrap().0.degree() == 0)
    }

    pub fn constant_value(&self) -> Option<Rational> {
        if self.terms.is_empty() {
            return Some(Rational::zero());
        }
        if self.is_constant() {
            return Some(self.terms.values().next().unwrap().clone());
        }
        None
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().map_or(false, |c| c.is_one())
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(|m| m.degree())
    }

    pub fn degree_in(&self, v: usize) -> u32 {
        self.terms.keys().map(|m| m.0[v]).max().unwrap_or(0)
    }

    /// Leading term in the graded-lex order.
    pub fn leading(&self) -> Option<(&Mono, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn add_term(&mut self, m: Mono, c: Rational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, a)| (m.clone(), a * c))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one(self.nvars);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Partial derivative with respect to variable `v` (zero-based).
    pub fn diff(&self, v: usize) -> Poly {
        assert!(v < self.nvars, "diff variable out of range");
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[v];
            if e == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[v] = e - 1;
            out.add_term(Mono(exps), c * super::rat(e as i64));
        }
        out
    }

    pub fn eval(&self, point: &[Rational]) -> Rational {
        assert_eq!(point.len(), self.nvars, "evaluation point length mismatch");
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (v, &e) in m.0.iter().enumerate() {
                for _ in 0..e {
                    term *= &point[v];
                }
            }
            acc += term;
        }
        acc
    }

    /// The homogeneous part of exact total degree `d`.
    pub fn homogeneous_part(&self, d: u32) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == d)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Exact division: `Some(q)` with `self == q * d`, otherwise `None`.
    pub fn try_exact_div(&self, d: &Poly) -> Option<Poly> {
        assert_eq!(self.nvars, d.nvars, "nvars mismatch in division");
        let (dm, dc) = d.leading()?; // divisor must be nonzero
        let mut rem = self.clone();
        let mut q = Poly::zero(self.nvars);
        while let Some((rm, rc)) = rem.leading() {
            let em = rm.try_sub(dm)?;
            let c = rc / dc;
            let mut piece = Poly::zero(self.nvars);
            for (m, a) in &d.terms {
                piece.add_term(m.mul(&em), a * &c);
            }
            q.add_term(em, c);
            rem = &rem - &piece;
        }
        Some(q)
    }

    /// Scale so the graded-lex leading coefficient is 1 (canonical associate).
    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => self.clone(),
            Some((_, c)) => {
                let inv = Rational::one() / c;
                self.scale(&inv)
            }
        }
    }

    /// Pull the main-variable structure out: coefficients of `x_v^i` as
    /// polynomials in the remaining variables (exponent of `v` zeroed).
    pub fn coeffs_in(&self, v: usize) -> Vec<Poly> {
        let deg = self.degree_in(v) as usize;
        let mut out = vec![Poly::zero(self.nvars); deg + 1];
        for (m, c) in &self.terms {
            let e = m.0[v] as usize;
            let mut exps = m.0.clone();
            exps[v] = 0;
            out[e].add_term(Mono(exps), c.clone());
        }
        out
    }

    /// Inverse of [`Poly::coeffs_in`].
    pub fn from_coeffs_in(nvars: usize, v: usize, coeffs: &[Poly]) -> Poly {
        let mut out = Poly::zero(nvars);
        for (e, c) in coeffs.iter().enumerate() {
            for (m, a) in &c.terms {
                let mut exps = m.0.clone();
                exps[v] += e as u32;
                out.add_term(Mono(exps), a.clone());
            }
        }
        out
    }

    fn check_nvars(&self, other: &Poly) {
        assert_eq!(
            self.nvars, other.nvars,
            "polynomial arithmetic across different variable counts"
        );
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        self.check_nvars(rhs);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self.check_nvars(rhs);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        self.check_nvars(rhs);
        let mut out = Poly::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        // Display leading terms first for readability.
        for (m, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let mag = if neg { -c.clone() } else { c.clone() };
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut printed = false;
            if !mag.is_one() || m.degree() == 0 {
                write!(f, "{mag}")?;
                printed = true;
            }
            for (v, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if printed {
                    write!(f, "*")?;
                }
                write!(f, "x{}", v + 1)?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
                printed = true;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON form: {"nvars": n, "terms": [{"exps": [..], "num": "..", "den": ".."}]}
// with integers as decimal strings and terms in canonical order.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermJson {
    exps: Vec<u32>,
    num: String,
    den: String,
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    nvars: usize,
    terms: Vec<TermJson>,
}

pub(crate) fn rational_to_parts(c: &Rational) -> (String, String) {
    (c.numer().to_str_radix(10), c.denom().to_str_radix(10))
}

pub(crate) fn rational_from_parts(num: &str, den: &str) -> Result<Rational> {
    let n: Int = num
        .parse()
        .map_err(|_| Error::Schema(format!("bad integer string {num:?}")))?;
    let d: Int = den
        .parse()
        .map_err(|_| Error::Schema(format!("bad integer string {den:?}")))?;
    if d.is_zero() {
        return Err(Error::Schema("zero denominator in rational".into()));
    }
    Ok(Rational::new(n, d))
}

impl Poly {
    fn to_json_repr(&self) -> PolyJson {
        PolyJson {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let (num, den) = rational_to_parts(c);
                    TermJson {
                        exps: m.0.clone(),
                        num,
                        den,
                    }
                })
                .collect(),
        }
    }

    fn from_json_repr(j: PolyJson) -> Result<Poly> {
        let mut p = Poly::zero(j.nvars);
        for t in j.terms {
            if t.exps.len() != j.nvars {
                return Err(Error::Schema(format!(
                    "exponent vector of length {} in a polynomial with nvars={}",
                    t.exps.len(),
                    j.nvars
                )));
            }
            p.add_term(Mono(t.exps), rational_from_parts(&t.num, &t.den)?);
        }
        Ok(p)
    }
}

impl Serialize for Poly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_repr().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Poly, D::Error> {
        let j = PolyJson::deserialize(d)?;
        Poly::from_json_repr(j).map_err(D::Error::custom)
    }
}

/// Random sparse polynomial of total degree at most `max_degree` with small
/// integer coefficients; each monomial is present with probability one half.
/// Never returns the zero polynomial (randomized checks want nonzero data).
pub fn random_poly<R: rand::Rng + ?Sized>(rng: &mut R, nvars: usize, max_degree: u32) -> Poly {
    fn walk<R: rand::Rng + ?Sized>(
        rng: &mut R,
        exps: &mut Vec<u32>,
        var: usize,
        remaining: u32,
        out: &mut Vec<(Vec<u32>, Rational)>,
    ) {
        if var == exps.len() {
            if rng.random_bool(0.5) {
                let c: i64 = rng.random_range(-3..=3);
                if c != 0 {
                    out.push((exps.clone(), Rational::from_integer(c.into())));
                }
            }
            return;
        }
        for e in 0..=remaining {
            exps[var] = e;
            walk(rng, exps, var + 1, remaining - e, out);
        }
        exps[var] = 0;
    }

    let mut terms = Vec::new();
    let mut exps = vec![0u32; nvars];
    walk(rng, &mut exps, 0, max_degree, &mut terms);
    if terms.is_empty() {
        return Poly::from_int(nvars, 1);
    }
    Poly::from_terms(nvars, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn x(v: usize) -> Poly {
        Poly::var(2, v)
    }

    #[test]
    fn add_cancels_constant() {
        // (x1 + 1) + (-1) == x1
        let p = &x(0) + &Poly::one(2);
        let q = Poly::from_int(2, -1);
        assert_eq!(&p + &q, x(0));
    }

    #[test]
    fn mul_squares() {
        let sq = &x(0) * &x(0);
        assert_eq!(sq, Poly::from_terms(2, vec![(vec![2, 0], rat(1))]));
    }

    #[test]
    fn diff_examples() {
        // d/dx1 (x1^2 x2) = 2 x1 x2 ; d/dx2 (x1^2 x2) = x1^2
        let p = Poly::from_terms(2, vec![(vec![2, 1], rat(1))]);
        assert_eq!(
            p.diff(0),
            Poly::from_terms(2, vec![(vec![1, 1], rat(2))])
        );
        assert_eq!(p.diff(1), Poly::from_terms(2, vec![(vec![2, 0], rat(1))]));
    }

    #[test]
    fn grlex_leading_term() {
        // x1^2 beats x1*x2 beats x2^2 beats x1 in graded lex
        let p = Poly::from_terms(
            2,
            vec![
                (vec![1, 0], rat(5)),
                (vec![2, 0], rat(1)),
                (vec![1, 1], rat(2)),
            ],
        );
        let (m, c) = p.leading().unwrap();
        assert_eq!(m.0, vec![2, 0]);
        assert_eq!(*c, rat(1));
    }

    #[test]
    fn exact_division() {
        // (x1^2 - 1) / (x1 - 1) = x1 + 1
        let num = Poly::from_terms(1, vec![(vec![2], rat(1)), (vec![0], rat(-1))]);
        let den = Poly::from_terms(1, vec![(vec![1], rat(1)), (vec![0], rat(-1))]);
        let q = num.try_exact_div(&den).unwrap();
        assert_eq!(
            q,
            Poly::from_terms(1, vec![(vec![1], rat(1)), (vec![0], rat(1))])
        );
        // non-divisible input reports None
        let num2 = Poly::from_terms(1, vec![(vec![2], rat(1)), (vec![0], rat(1))]);
        assert!(num2.try_exact_div(&den).is_none());
    }

    #[test]
    fn eval_simple() {
        let p = Poly::from_terms(2, vec![(vec![2, 1], rat(3)), (vec![0, 0], rat(-2))]);
        let v = p.eval(&[rat(2), rat(5)]);
        assert_eq!(v, rat(3 * 4 * 5 - 2));
    }

    #[test]
    fn json_roundtrip() {
        let p = Poly::from_terms(
            3,
            vec![
                (vec![2, 0, 1], crate::arith::ratio(-7, 3)),
                (vec![0, 0, 0], rat(4)),
            ],
        );
        let s = serde_json::to_string(&p).unwrap();
        let q: Poly = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
