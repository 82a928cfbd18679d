//! Sparse multivariate polynomials with exact differentiation.

use std::collections::BTreeMap;

/// Variable index and exponent pairs, sorted by variable, exponents positive.
pub(crate) type Factors = Vec<(usize, u32)>;

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct MPoly {
    terms: BTreeMap<Factors, f64>,
}

impl MPoly {
    pub fn monomial(coeff: f64, exponents: &[u32]) -> Self {
        let factors = exponents.iter().enumerate().filter(|(_, e)| **e > 0).map(|(i, e)| (i, *e)).collect();
        let mut p = Self::default();
        p.add_term(factors, coeff);
        p
    }

    /// `sum_i x_i^power` over `vars`.
    pub fn power_sum(vars: usize, power: u32) -> Self {
        let mut p = Self::default();
        for i in 0..vars {
            p.add_term(vec![(i, power)], 1.0);
        }
        p
    }

    fn add_term(&mut self, factors: Factors, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let e = self.terms.entry(factors).or_insert(0.0);
        *e += coeff;
    }

    #[cfg(test)]
    pub fn terms(&self) -> impl Iterator<Item = (&Factors, f64)> {
        self.terms.iter().map(|(f, c)| (f, *c))
    }

    pub fn mul(&self, other: &MPoly) -> MPoly {
        let mut out = MPoly::default();
        for (fa, ca) in &self.terms {
            for (fb, cb) in &other.terms {
                out.add_term(merge(fa, fb), ca * cb);
            }
        }
        out
    }

    /// Partial derivative in variable `var`.
    pub fn derivative(&self, var: usize) -> MPoly {
        let mut out = MPoly::default();
        for (f, c) in &self.terms {
            if let Some(pos) = f.iter().position(|(v, _)| *v == var) {
                let e = f[pos].1;
                let mut g = f.clone();
                if e == 1 {
                    g.remove(pos);
                } else {
                    g[pos].1 = e - 1;
                }
                out.add_term(g, c * e as f64);
            }
        }
        out
    }

    /// Variables that occur in some term.
    pub fn support(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.terms.keys().flat_map(|f| f.iter().map(|(i, _)| *i)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Smallest exponent with which any variable occurs.
    pub fn min_exponent(&self) -> Option<u32> {
        self.terms.keys().flat_map(|f| f.iter().map(|(_, e)| *e)).min()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(f, c)| c * f.iter().map(|(i, e)| x[*i].powi(*e as i32)).product::<f64>())
            .sum()
    }

    /// Evaluates
    /// `sum_i a_i(x) d_i^2 f + sum_{i,j} b_ij(x) d_i d_j f + sum_i c_i(x) d_i f`
    /// where `a`, `b`, `c` are supplied as closures. Variables outside the support
    /// of `f` have vanishing derivatives and are skipped.
    pub fn apply_second_order<A, B, C>(&self, x: &[f64], diag: A, cross: B, drift: C) -> f64
    where
        A: Fn(usize) -> f64,
        B: Fn(usize, usize) -> f64,
        C: Fn(usize) -> f64,
    {
        // Index the terms by variable so each first derivative touches only the
        // terms that contain its variable.
        let mut by_var: BTreeMap<usize, Vec<(&Factors, f64)>> = BTreeMap::new();
        for (f, c) in &self.terms {
            for (v, _) in f {
                by_var.entry(*v).or_default().push((f, *c));
            }
        }
        let mut total = 0.0;
        for (i, terms) in by_var {
            let mut di = MPoly::default();
            for (f, c) in terms {
                let pos = f.iter().position(|(v, _)| *v == i).expect("indexed variable");
                let e = f[pos].1;
                let mut g = f.clone();
                if e == 1 {
                    g.remove(pos);
                } else {
                    g[pos].1 = e - 1;
                }
                di.add_term(g, c * e as f64);
            }
            total += drift(i) * di.eval(x);
            for j in di.support() {
                let dij = di.derivative(j).eval(x);
                total += cross(i, j) * dij;
                if i == j {
                    total += diag(i) * dij;
                }
            }
        }
        total
    }
}

fn merge(a: &Factors, b: &Factors) -> Factors {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
