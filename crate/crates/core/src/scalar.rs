//! Exact coefficients.
//!
//! Everything in this crate is computed over the rationals. Renormalization
//! characters may additionally take *formal* values (named constants such as
//! `c_1`), so tree coefficients live in the polynomial ring `Q[c_1, c_2, ...]`.
//! [`Scalar`] keeps a fast path for plain rationals and only allocates once a
//! formal symbol shows up.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::Ratio<i128>;

pub fn rat(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

pub fn int(n: i128) -> Rational {
    Rational::from_integer(n)
}

/// Parses `"3"`, `"-3/2"` or `" 1 / 4 "`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse { pos: 0, msg: format!("not a rational number: {s:?}") };
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i128 = n.trim().parse().map_err(|_| bad())?;
            let d: i128 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(int(s.parse().map_err(|_| bad())?)),
    }
}

pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Monomial in the formal symbols: sorted `(name, exponent)` pairs.
pub type ParamMonomial = Vec<(Arc<str>, u32)>;

fn mul_param_monomials(a: &ParamMonomial, b: &ParamMonomial) -> ParamMonomial {
    let mut out: ParamMonomial = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0.clone(), a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// A rational number, or a polynomial in named formal constants.
///
/// Invariant: the `Poly` variant always contains at least one non-constant
/// monomial; purely constant values are normalized back to `Const`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scalar {
    Const(Rational),
    Poly(Arc<BTreeMap<ParamMonomial, Rational>>),
}

impl Scalar {
    pub fn symbol(name: &str) -> Scalar {
        let mut m = BTreeMap::new();
        m.insert(vec![(Arc::<str>::from(name), 1)], Rational::one());
        Scalar::Poly(Arc::new(m))
    }

    pub fn from_int(n: i128) -> Scalar {
        Scalar::Const(int(n))
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match self {
            Scalar::Const(r) => Some(r),
            Scalar::Poly(_) => None,
        }
    }

    /// Monomials with their coefficients; a constant is the empty monomial.
    pub fn terms(&self) -> Vec<(ParamMonomial, Rational)> {
        match self {
            Scalar::Const(r) if r.is_zero() => vec![],
            Scalar::Const(r) => vec![(vec![], *r)],
            Scalar::Poly(p) => p.iter().map(|(m, c)| (m.clone(), *c)).collect(),
        }
    }

    fn from_map(mut m: BTreeMap<ParamMonomial, Rational>) -> Scalar {
        m.retain(|_, c| !c.is_zero());
        if m.keys().all(|k| k.is_empty()) {
            return Scalar::Const(m.values().next().copied().unwrap_or_else(Rational::zero));
        }
        Scalar::Poly(Arc::new(m))
    }

    fn to_map(&self) -> BTreeMap<ParamMonomial, Rational> {
        self.terms().into_iter().collect()
    }

    pub fn scale(&self, r: &Rational) -> Scalar {
        match self {
            Scalar::Const(c) => Scalar::Const(c * r),
            Scalar::Poly(_) if r.is_zero() => Scalar::zero(),
            Scalar::Poly(p) => Scalar::Poly(Arc::new(p.iter().map(|(m, c)| (m.clone(), c * r)).collect())),
        }
    }
}

impl Zero for Scalar {
    fn zero() -> Self {
        Scalar::Const(Rational::zero())
    }
    fn is_zero(&self) -> bool {
        matches!(self, Scalar::Const(r) if r.is_zero())
    }
}

impl One for Scalar {
    fn one() -> Self {
        Scalar::Const(Rational::one())
    }
}

impl From<Rational> for Scalar {
    fn from(r: Rational) -> Self {
        Scalar::Const(r)
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Const(a), Scalar::Const(b)) => Scalar::Const(a + b),
            _ => {
                let mut m = self.to_map();
                for (k, v) in rhs.terms() {
                    *m.entry(k).or_insert_with(Rational::zero) += v;
                }
                Scalar::from_map(m)
            }
        }
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        &self + &rhs
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        if let (Scalar::Const(a), Scalar::Const(b)) = (&mut *self, rhs) {
            *a += b;
            return;
        }
        *self = &*self + rhs;
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        self.scale(&-Rational::one())
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        self + &(-rhs)
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Const(a), Scalar::Const(b)) => Scalar::Const(a * b),
            (Scalar::Const(a), p) | (p, Scalar::Const(a)) => p.scale(a),
            (Scalar::Poly(a), Scalar::Poly(b)) => {
                let mut m: BTreeMap<ParamMonomial, Rational> = BTreeMap::new();
                for (ka, va) in a.iter() {
                    for (kb, vb) in b.iter() {
                        *m.entry(mul_param_monomials(ka, kb)).or_insert_with(Rational::zero) += va * vb;
                    }
                }
                Scalar::from_map(m)
            }
        }
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        &self * &rhs
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Const(r) => write!(f, "{}", fmt_rational(r)),
            Scalar::Poly(p) => {
                let mut first = true;
                for (m, c) in p.iter() {
                    let neg = c.is_negative();
                    if first {
                        if neg {
                            write!(f, "-")?;
                        }
                    } else {
                        write!(f, " {} ", if neg { "-" } else { "+" })?;
                    }
                    first = false;
                    let a = c.abs();
                    let mut parts: Vec<String> = Vec::new();
                    if !a.is_one() || m.is_empty() {
                        parts.push(fmt_rational(&a));
                    }
                    for (name, e) in m {
                        if *e == 1 {
                            parts.push(name.to_string());
                        } else {
                            parts.push(format!("{name}^{e}"));
                        }
                    }
                    write!(f, "{}", parts.join("*"))?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_cancel_back_to_constants() {
        let c = Scalar::symbol("c");
        let two = Scalar::from_int(2);
        let s = &(&c + &two) - &c;
        assert_eq!(s, two);
        assert!(s.as_const().is_some());
    }

    #[test]
    fn polynomial_product() {
        let a = Scalar::symbol("a");
        let b = Scalar::symbol("b");
        let p = &(&a + &b) * &(&a - &b);
        assert_eq!(p.to_string(), "a^2 - b^2");
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("-3/2").unwrap(), rat(-3, 2));
        assert_eq!(parse_rational(" 4 ").unwrap(), int(4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }
}
