//! Monomials as sorted variable multisets, in graded-lex order.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Default cap on the number of monomials in a basis.
pub const DEFAULT_MONOMIAL_CAP: usize = 200_000;

/// Sorted list of variable indices; the empty list is the constant 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u16>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(i: usize) -> Self {
        Monomial(vec![i as u16])
    }

    pub fn var_pow(i: usize, e: usize) -> Self {
        Monomial(vec![i as u16; e])
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                out.push(a[i]);
                i += 1;
            } else {
                out.push(b[j]);
                j += 1;
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// Value at a point.
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0.iter().map(|&v| point[v as usize]).product()
    }

    /// Renders as e.g. `A_1_1*b_1_1^3`, or `1` for the constant.
    pub fn render(&self, names: &[String]) -> String {
        if self.0.is_empty() {
            return "1".to_string();
        }
        let mut parts = Vec::new();
        let mut i = 0;
        while i < self.0.len() {
            let v = self.0[i];
            let mut e = 1;
            while i + e < self.0.len() && self.0[i + e] == v {
                e += 1;
            }
            let name = &names[v as usize];
            parts.push(if e == 1 { name.clone() } else { format!("{name}^{e}") });
            i += e;
        }
        parts.join("*")
    }
}

pub fn graded_lex_cmp(a: &Monomial, b: &Monomial) -> Ordering {
    a.degree().cmp(&b.degree()).then_with(|| a.0.cmp(&b.0))
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    usize::try_from(acc).ok()
}

fn push_degree(var_count: usize, deg: usize, start: usize, cur: &mut Vec<u16>, out: &mut Vec<Monomial>) {
    if cur.len() == deg {
        out.push(Monomial(cur.clone()));
        return;
    }
    for v in start..var_count {
        cur.push(v as u16);
        push_degree(var_count, deg, v, cur, out);
        cur.pop();
    }
}

/// All monomials of degree at most `degree` in `var_count` variables.
pub fn enumerate_monomials(var_count: usize, degree: usize, cap: usize) -> Result<Vec<Monomial>> {
    let count = binomial(var_count + degree, degree).unwrap_or(usize::MAX);
    if count > cap {
        return Err(Error::CapExceeded(format!(
            "{count} monomials in {var_count} variables up to degree {degree} (cap {cap})"
        )));
    }
    let mut out = Vec::with_capacity(count);
    for deg in 0..=degree {
        push_degree(var_count, deg, 0, &mut Vec::with_capacity(deg), &mut out);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MonomialBasis {
    pub var_count: usize,
    pub degree: usize,
    pub monomials: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

impl MonomialBasis {
    pub fn new(var_count: usize, degree: usize, cap: usize) -> Result<Self> {
        let monomials = enumerate_monomials(var_count, degree, cap)?;
        let index = monomials.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        Ok(Self { var_count, degree, monomials, index })
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Number of leading monomials with degree at most `deg`.
    pub fn count_up_to(&self, deg: usize) -> usize {
        self.monomials.partition_point(|m| m.degree() <= deg)
    }
}
