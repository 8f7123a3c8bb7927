//! Multivariate polynomial gcd over the rationals.
//!
//! Strategy, fastest first: mutual-divisibility shortcuts (the ubiquitous
//! case here is `gcd(p, sigma^k)` with one argument dividing the other),
//! then the heuristic evaluation gcd (map both inputs to integers at a
//! large point, take the integer gcd, lift it back by balanced base-`xi`
//! digits, and certify by exact division), and finally a primitive
//! pseudo-remainder sequence as the unconditional fallback.
//!
//! The result is canonical: scaled so its graded-lex leading coefficient is 1.

use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::poly::{Mono, Poly};
use super::{Int, Rational};

/// Gcd of two polynomials, normalized to graded-lex-monic form.
/// `poly_gcd(0, 0) == 0`; otherwise the result is nonzero and divides both
/// inputs exactly.
pub fn poly_gcd(a: &Poly, b: &Poly) -> Poly {
    assert_eq!(a.nvars(), b.nvars(), "gcd across different variable counts");
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        // Nonzero constants are units over the rationals.
        return Poly::one(a.nvars());
    }
    if b.try_exact_div(a).is_some() {
        return a.monic();
    }
    if a.try_exact_div(b).is_some() {
        return b.monic();
    }
    let az = integer_primitive(a);
    let bz = integer_primitive(b);
    if let Some(h) = heuristic_gcd(&az, &bz) {
        return h.monic();
    }
    gcd_inner(a, b).monic()
}

// ---------------------------------------------------------------------------
// Heuristic evaluation gcd
// ---------------------------------------------------------------------------

/// Scale to integer coefficients with content 1 (sign left as-is; callers
/// renormalize to monic form at the end).
fn integer_primitive(p: &Poly) -> Poly {
    let mut lcm = Int::one();
    for (_, c) in p.terms() {
        lcm = lcm.lcm(c.denom());
    }
    let mut content = Int::zero();
    for (_, c) in p.terms() {
        content = content.gcd(&(c.numer() * &lcm / c.denom()));
    }
    p.scale(&Rational::new(lcm, content))
}

fn max_abs_numer(p: &Poly) -> Int {
    p.terms()
        .map(|(_, c)| c.numer().abs())
        .max()
        .unwrap_or_else(Int::zero)
}

/// Substitute the integer `xi` for variable `v`.
fn eval_var(p: &Poly, v: usize, xi: &Int) -> Poly {
    let mut out = Poly::zero(p.nvars());
    for (m, c) in p.terms() {
        let e = m.0[v];
        let mut exps = m.0.clone();
        exps[v] = 0;
        let mut val = c.clone();
        if e > 0 {
            let mut pw = xi.clone();
            let mut k = 1;
            while k < e {
                pw *= xi;
                k += 1;
            }
            val *= Rational::from_integer(pw);
        }
        out.add_term(Mono(exps), val);
    }
    out
}

/// Balanced remainder in `(-xi/2, xi/2]`-ish range (symmetric residue).
fn smod(c: &Int, xi: &Int) -> Int {
    let mut r = c.mod_floor(xi);
    if &r + &r >= *xi {
        r -= xi;
    }
    r
}

/// Recover a polynomial in variable `v` from its value at `xi` by balanced
/// base-`xi` digit expansion of every coefficient.
fn lift_digits(h: &Poly, v: usize, xi: &Int) -> Option<Poly> {
    let nvars = h.nvars();
    let mut acc: Vec<(Vec<u32>, Int)> = h
        .terms()
        .map(|(m, c)| {
            debug_assert!(c.denom().is_one());
            (m.0.clone(), c.numer().clone())
        })
        .collect();
    let mut out = Poly::zero(nvars);
    let mut e = 0u32;
    while !acc.is_empty() {
        if e > 4096 {
            return None;
        }
        let mut next = Vec::with_capacity(acc.len());
        for (m, c) in acc {
            let r = smod(&c, xi);
            if !r.is_zero() {
                let mut exps = m.clone();
                exps[v] = e;
                out.add_term(Mono(exps), Rational::from_integer(r.clone()));
            }
            let q = (&c - &r) / xi;
            if !q.is_zero() {
                next.push((m, q));
            }
        }
        acc = next;
        e += 1;
    }
    Some(out)
}

/// Gcd of the integer numerators; assumes integer coefficients.
fn int_content(p: &Poly) -> Int {
    let mut acc = Int::zero();
    for (_, c) in p.terms() {
        debug_assert!(c.denom().is_one());
        acc = acc.gcd(c.numer());
    }
    acc
}

/// Heuristic gcd over the integers (content included) of two nonzero integer
/// polynomials; `None` when the trial points were all unlucky.  The integer
/// content must be carried through the recursion: an evaluated variable
/// factor turns into content of the image, and dropping it would lose that
/// factor when the next level lifts the digits back.
fn heuristic_gcd(f: &Poly, g: &Poly) -> Option<Poly> {
    if f.is_constant() || g.is_constant() {
        let acc = int_content(f).gcd(&int_content(g));
        return Some(Poly::constant(f.nvars(), Rational::from_integer(acc)));
    }
    let v = (0..f.nvars()).find(|&v| f.degree_in(v) > 0 || g.degree_in(v) > 0)?;
    let content_gcd = int_content(f).gcd(&int_content(g));
    let fp = f.scale(&Rational::new(Int::one(), int_content(f)));
    let gp = g.scale(&Rational::new(Int::one(), int_content(g)));
    let norm = max_abs_numer(&fp).min(max_abs_numer(&gp));
    let mut xi: Int = norm * 2 + 29;
    for _ in 0..6 {
        let fe = eval_var(&fp, v, &xi);
        let ge = eval_var(&gp, v, &xi);
        if !fe.is_zero() && !ge.is_zero() {
            if let Some(h) = heuristic_gcd(&fe, &ge) {
                if let Some(cand) = lift_digits(&h, v, &xi) {
                    if !cand.is_zero() {
                        let cand = cand.scale(&Rational::new(Int::one(), int_content(&cand)));
                        if fp.try_exact_div(&cand).is_some() && gp.try_exact_div(&cand).is_some()
                        {
                            return Some(cand.scale(&Rational::from_integer(content_gcd)));
                        }
                    }
                }
            }
        }
        // Grow the evaluation point quickly and irregularly to dodge
        // repeatedly unlucky choices.
        xi = (&xi * Int::from(73794)) * xi.sqrt().sqrt() / Int::from(27011);
    }
    None
}

// ---------------------------------------------------------------------------
// Primitive pseudo-remainder sequence (fallback)
// ---------------------------------------------------------------------------

fn gcd_inner(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one(a.nvars());
    }
    // Main variable: any variable occurring in either input; take the highest
    // index so recursion strictly shrinks the active variable set.
    let v = (0..a.nvars())
        .rev()
        .find(|&v| a.degree_in(v) > 0 || b.degree_in(v) > 0)
        .expect("non-constant polynomial with no active variable");

    let ua = a.coeffs_in(v);
    let ub = b.coeffs_in(v);
    let (ca, pa) = content_and_primitive(&ua);
    let (cb, pb) = content_and_primitive(&ub);
    let cont = gcd_inner(&ca, &cb);

    // Primitive pseudo-remainder sequence on the primitive parts.
    let (mut f, mut g) = if uni_deg(&pa) >= uni_deg(&pb) {
        (pa, pb)
    } else {
        (pb, pa)
    };
    loop {
        if uni_is_zero(&g) {
            break;
        }
        if uni_deg(&g) == 0 {
            // Primitive and degree zero in the main variable: unit content, so
            // the univariate gcd is trivial.
            return cont;
        }
        let r = pseudo_rem(&f, &g);
        f = g;
        g = content_and_primitive(&r).1;
    }
    let gcd_pp = Poly::from_coeffs_in(a.nvars(), v, &f);
    &cont * &gcd_pp
}

fn uni_deg(coeffs: &[Poly]) -> usize {
    coeffs
        .iter()
        .rposition(|c| !c.is_zero())
        .unwrap_or(0)
}

fn uni_is_zero(coeffs: &[Poly]) -> bool {
    coeffs.iter().all(|c| c.is_zero())
}

fn trim(mut coeffs: Vec<Poly>) -> Vec<Poly> {
    while coeffs.len() > 1 && coeffs.last().unwrap().is_zero() {
        coeffs.pop();
    }
    coeffs
}

/// Content (gcd of the coefficients) and the coefficient list divided by it.
fn content_and_primitive(coeffs: &[Poly]) -> (Poly, Vec<Poly>) {
    let nvars = coeffs
        .first()
        .map(|c| c.nvars())
        .expect("empty coefficient list");
    let mut cont = Poly::zero(nvars);
    for c in coeffs {
        if !c.is_zero() {
            cont = gcd_inner(&cont, c);
        }
        if cont.is_constant() && !cont.is_zero() {
            break;
        }
    }
    if cont.is_zero() {
        return (Poly::zero(nvars), coeffs.to_vec());
    }
    cont = cont.monic();
    let prim = coeffs
        .iter()
        .map(|c| {
            c.try_exact_div(&cont)
                .expect("content must divide every coefficient")
        })
        .collect();
    (cont, trim(prim))
}

/// Pseudo-remainder of `f` by `g` (univariate view; coefficients are
/// polynomials in the remaining variables).  The result is an associate of
/// the true remainder, which is all the primitive PRS needs.
fn pseudo_rem(f: &[Poly], g: &[Poly]) -> Vec<Poly> {
    let dg = uni_deg(g);
    let lc_g = &g[dg];
    let mut r: Vec<Poly> = f.to_vec();
    loop {
        let dr = uni_deg(&r);
        if uni_is_zero(&r) || dr < dg {
            return trim(r);
        }
        let lead = r[dr].clone();
        let shift = dr - dg;
        // r <- lc_g * r - lead * x^shift * g
        let mut out = vec![Poly::zero(lead.nvars()); dr + 1];
        for (i, c) in r.iter().enumerate() {
            if !c.is_zero() {
                out[i] = c * lc_g;
            }
        }
        for (i, c) in g.iter().enumerate() {
            if !c.is_zero() {
                out[i + shift] = &out[i + shift] - &(c * &lead);
            }
        }
        r = trim(out);
    }
}
