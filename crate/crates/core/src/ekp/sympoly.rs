use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};

/// A polynomial in the power sums `q_m`, stored as coefficients of monomials
/// `q_{m_1} ... q_{m_k}` keyed by the sorted multiset `(m_1, ..., m_k)`.
///
/// Text form: `2.0*q[1]q[2] - 1.0*q[3]`; the empty multiset is the constant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymPoly {
    terms: BTreeMap<Vec<u32>, f64>,
}

impl SymPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::default();
        p.add_term(Vec::new(), c);
        p
    }

    /// `q_m` for `m >= 1`.
    pub fn power_sum(m: u32) -> Result<Self> {
        Self::monomial(1.0, vec![m])
    }

    /// `coeff * q_{m_1} ... q_{m_k}`.
    pub fn monomial(coeff: f64, mut multiset: Vec<u32>) -> Result<Self> {
        if multiset.contains(&0) {
            return Err(domain("power-sum indices start at 1"));
        }
        if !coeff.is_finite() {
            return Err(domain("coefficients must be finite"));
        }
        multiset.sort_unstable();
        let mut p = Self::default();
        p.add_term(multiset, coeff);
        Ok(p)
    }

    fn add_term(&mut self, multiset: Vec<u32>, coeff: f64) {
        let c = self.terms.entry(multiset.clone()).or_insert(0.0);
        *c += coeff;
        if *c == 0.0 {
            self.terms.remove(&multiset);
        }
    }

    /// Terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(m, c)| (m.as_slice(), *c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest number of factors in a term.
    pub fn max_factors(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn add(&self, other: &SymPoly) -> SymPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }

    pub fn scale(&self, c: f64) -> SymPoly {
        let mut out = SymPoly::default();
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &SymPoly) -> SymPoly {
        let mut out = SymPoly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut m = ma.clone();
                m.extend_from_slice(mb);
                m.sort_unstable();
                out.add_term(m, ca * cb);
            }
        }
        out
    }

    /// Value at the finitely supported point `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let max_m = self.terms.keys().flat_map(|m| m.iter().copied()).max().unwrap_or(0) as usize;
        // sums[m] = sum_i x_i^{m+1}
        let mut sums = vec![0.0; max_m + 1];
        for &xi in x {
            let mut p = xi;
            for s in sums.iter_mut().skip(1) {
                p *= xi;
                *s += p;
            }
        }
        self.terms
            .iter()
            .map(|(m, c)| c * m.iter().map(|&j| sums[j as usize]).product::<f64>())
            .sum()
    }
}

impl fmt::Display for SymPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0.0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            match (i, *c < 0.0) {
                (0, false) => write!(f, "{mag:?}")?,
                (0, true) => write!(f, "-{mag:?}")?,
                (_, false) => write!(f, " + {mag:?}")?,
                (_, true) => write!(f, " - {mag:?}")?,
            }
            if !m.is_empty() {
                write!(f, "*")?;
                for j in m {
                    write!(f, "q[{j}]")?;
                }
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn err(&self, what: &str) -> Error {
        Error::Parse(format!("{what} at byte {}", self.pos))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() {
            let ch = self.s[self.pos];
            let exp_sign = (ch == b'-' || ch == b'+') && self.pos > start && matches!(self.s[self.pos - 1], b'e' | b'E');
            if ch.is_ascii_digit() || ch == b'.' || ch == b'e' || ch == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).map_err(|_| self.err("invalid text"))?;
        text.parse::<f64>().map_err(|_| self.err("expected a number"))
    }

    fn integer(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err("expected an integer"))
    }

    fn expect(&mut self, ch: u8) -> Result<()> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", ch as char)))
        }
    }

    /// `q[m]` optionally followed by `^p`.
    fn factor(&mut self, out: &mut Vec<u32>) -> Result<()> {
        self.expect(b'q')?;
        self.expect(b'[')?;
        let m = self.integer()?;
        self.expect(b']')?;
        let mut times = 1;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            times = self.integer()?;
        }
        out.extend(std::iter::repeat_n(m, times as usize));
        Ok(())
    }

    fn term(&mut self) -> Result<(f64, Vec<u32>)> {
        let mut coeff = 1.0;
        let mut has_coeff = false;
        if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
            coeff = self.number()?;
            has_coeff = true;
            if self.peek() == Some(b'*') {
                self.pos += 1;
                if self.peek() != Some(b'q') {
                    return Err(self.err("expected a factor after '*'"));
                }
            }
        }
        let mut multiset = Vec::new();
        while self.peek() == Some(b'q') {
            self.factor(&mut multiset)?;
            if self.peek() == Some(b'*') {
                self.pos += 1;
                if self.peek() != Some(b'q') {
                    return Err(self.err("expected a factor after '*'"));
                }
            }
        }
        if !has_coeff && multiset.is_empty() {
            return Err(self.err("expected a term"));
        }
        Ok((coeff, multiset))
    }
}

impl FromStr for SymPoly {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser { s: s.as_bytes(), pos: 0 };
        let mut poly = SymPoly::default();
        let mut sign = 1.0;
        if p.peek() == Some(b'-') {
            sign = -1.0;
            p.pos += 1;
        } else if p.peek() == Some(b'+') {
            p.pos += 1;
        }
        loop {
            let (c, m) = p.term()?;
            poly = poly.add(&SymPoly::monomial(sign * c, m)?);
            match p.peek() {
                None => break,
                Some(b'+') => sign = 1.0,
                Some(b'-') => sign = -1.0,
                Some(_) => return Err(p.err("unexpected character")),
            }
            p.pos += 1;
        }
        Ok(poly)
    }
}
