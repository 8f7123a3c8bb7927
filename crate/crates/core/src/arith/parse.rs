//! Parser for the inline polynomial syntax accepted on the command line:
//! integer-coefficient expressions in the variables `x1..xn` built from `+`,
//! `-`, `*`, `^`, parentheses, and the sugar `|x|^2` for `x1^2 + ... + xn^2`.

use super::poly::Poly;
use super::rat;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(u64),
    Var(usize), // zero-based
    NormSq,     // the |x| radical; only legal with an even power
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str, nvars: usize) -> Result<Vec<Tok>> {
    let src: String = src.replace('\u{2212}', "-"); // tolerate unicode minus
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                toks.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                toks.push(Tok::Star);
                i += 1;
            }
            '^' => {
                toks.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let text = &src[start..i];
                let v: u64 = text
                    .parse()
                    .map_err(|_| Error::Parse(format!("integer literal too large: {text}")))?;
                toks.push(Tok::Int(v));
            }
            'x' => {
                let start = i;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i == start + 1 {
                    return Err(Error::Parse(
                        "bare 'x': variables are written x1..xn".into(),
                    ));
                }
                let idx: usize = src[start + 1..i]
                    .parse()
                    .map_err(|_| Error::Parse("bad variable index".into()))?;
                if idx == 0 || idx > nvars {
                    return Err(Error::Parse(format!(
                        "variable x{idx} out of range 1..={nvars}"
                    )));
                }
                toks.push(Tok::Var(idx - 1));
            }
            '|' => {
                if src[i..].starts_with("|x|") {
                    toks.push(Tok::NormSq);
                    i += 3;
                } else {
                    return Err(Error::Parse("unexpected '|' (only |x|^2 is supported)".into()));
                }
            }
            other => {
                return Err(Error::Parse(format!("unexpected character {other:?}")));
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    nvars: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = match self.peek() {
            Some(Tok::Minus) => {
                self.next();
                -&self.term()?
            }
            Some(Tok::Plus) => {
                self.next();
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    acc = &acc + &self.term()?;
                }
                Some(Tok::Minus) => {
                    self.next();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.factor()?;
        while matches!(self.peek(), Some(Tok::Star)) {
            self.next();
            acc = &acc * &self.factor()?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Poly> {
        let base = self.next();
        let (base_poly, is_norm) = match base {
            Some(Tok::Int(v)) => (Poly::constant(self.nvars, rat(v as i64)), false),
            Some(Tok::Var(v)) => (Poly::var(self.nvars, v), false),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => (inner, false),
                    _ => return Err(Error::Parse("missing closing parenthesis".into())),
                }
            }
            Some(Tok::NormSq) => {
                let mut norm = Poly::zero(self.nvars);
                for v in 0..self.nvars {
                    norm = &norm + &Poly::var(self.nvars, v).pow(2);
                }
                (norm, true)
            }
            other => {
                return Err(Error::Parse(format!(
                    "expected a factor, found {other:?}"
                )))
            }
        };
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.next();
            let e = match self.next() {
                Some(Tok::Int(v)) => v,
                other => {
                    return Err(Error::Parse(format!(
                        "expected integer exponent after '^', found {other:?}"
                    )))
                }
            };
            if is_norm {
                if e % 2 != 0 {
                    return Err(Error::Parse(
                        "|x| may only be raised to an even power (write |x|^2)".into(),
                    ));
                }
                return Ok(base_poly.pow((e / 2) as u32));
            }
            return Ok(base_poly.pow(e as u32));
        }
        if is_norm {
            return Err(Error::Parse(
                "|x| may only appear squared: write |x|^2".into(),
            ));
        }
        Ok(base_poly)
    }
}

/// Parse an inline polynomial in variables `x1..x{nvars}`.
pub fn parse_poly(src: &str, nvars: usize) -> Result<Poly> {
    let toks = lex(src, nvars)?;
    if toks.is_empty() {
        return Err(Error::Parse("empty polynomial expression".into()));
    }
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        nvars,
    };
    let poly = p.expr()?;
    if p.pos != toks.len() {
        return Err(Error::Parse(format!(
            "trailing input starting at token {:?}",
            toks[p.pos]
        )));
    }
    Ok(poly)
}
