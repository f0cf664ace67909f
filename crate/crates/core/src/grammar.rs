//! Text form of trees.
//!
//! ```text
//! tree    := factor ( "*" factor )*
//! factor  := "1" | "X[" mindex "]" | "xi_" INT [ "[" mindex "]" ] | "I[" NAME "," mindex "](" tree ")"
//! mindex  := "(" INT ("," INT)* ")"
//! ```
//!
//! Noise indices are 1-based in text. The optional `[mindex]` after a noise is a
//! derivative on the noise edge; it is printed only when nonzero. Printing puts
//! `X` first, then noises, then planted factors, all in canonical order.

use std::fmt;

use num_traits::{One, Signed};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tree::{DecoratedTree, EdgeLabel, MultiIndex, Signature, TypeRef};
use crate::treevec::TreeVec;

pub fn parse_tree(input: &str, sig: &Signature) -> Result<DecoratedTree> {
    let mut p = Parser { src: input.as_bytes(), pos: 0, sig };
    let t = p.tree()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(t)
}

/// Renders a parse error with the input and a caret under the offending column.
pub fn render_parse_error(input: &str, err: &Error) -> String {
    match err {
        Error::Parse { pos, msg } => {
            let col = input[..(*pos).min(input.len())].chars().count();
            format!("parse error: {msg}\n  {input}\n  {}^", " ".repeat(col))
        }
        other => other.to_string(),
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    sig: &'a Signature,
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.err(format!("expected {tok:?}")))
        }
    }

    fn int(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a non-negative integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse { pos: start, msg: "integer too large".into() })
    }

    fn name(&mut self) -> Result<&str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a kernel type name"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).unwrap())
    }

    fn mindex(&mut self) -> Result<MultiIndex> {
        let start = self.pos;
        self.expect("(")?;
        let mut c = vec![self.int()?];
        while self.eat(",") {
            c.push(self.int()?);
        }
        self.expect(")")?;
        let m = MultiIndex::from_slice(&c);
        if m.len() != self.sig.dimension() {
            return Err(Error::Parse {
                pos: start,
                msg: format!("multi-index has {} components, expected {}", m.len(), self.sig.dimension()),
            });
        }
        Ok(m)
    }

    fn tree(&mut self) -> Result<DecoratedTree> {
        let mut acc = self.factor()?;
        while self.eat("*") {
            let f = self.factor()?;
            acc = acc.join(&f);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<DecoratedTree> {
        let dim = self.sig.dimension();
        match self.peek() {
            Some(b'1') => {
                self.pos += 1;
                Ok(DecoratedTree::one(dim))
            }
            Some(b'X') => {
                self.expect("X[")?;
                let k = self.mindex()?;
                self.expect("]")?;
                Ok(DecoratedTree::x(k))
            }
            Some(b'x') => {
                self.expect("xi_")?;
                let at = self.pos;
                let l = self.int()? as usize;
                if l == 0 || l > self.sig.noises().len() {
                    return Err(Error::Parse {
                        pos: at,
                        msg: format!("noise index {l} out of range 1..={}", self.sig.noises().len()),
                    });
                }
                let deriv = if self.peek() == Some(b'[') {
                    self.expect("[")?;
                    let p = self.mindex()?;
                    self.expect("]")?;
                    p
                } else {
                    MultiIndex::zeros(dim)
                };
                Ok(DecoratedTree::noise_factor(EdgeLabel::noise(l - 1, deriv)))
            }
            Some(b'I') => {
                self.expect("I[")?;
                let at = self.pos;
                let name = self.name()?.to_string();
                let t = self
                    .sig
                    .kernel_index(&name)
                    .ok_or(Error::Parse { pos: at, msg: format!("unknown kernel type {name:?}") })?;
                self.expect(",")?;
                let p = self.mindex()?;
                self.expect("]")?;
                self.expect("(")?;
                let inner = self.tree()?;
                self.expect(")")?;
                Ok(DecoratedTree::planted(EdgeLabel::kernel(t, p), inner))
            }
            _ => Err(self.err("expected 1, X[..], xi_<n> or I[..](..)")),
        }
    }
}

fn write_tree(f: &mut fmt::Formatter<'_>, t: &DecoratedTree, kernel: &dyn Fn(usize) -> String) -> fmt::Result {
    let mut first = true;
    let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
        if !first {
            write!(f, " * ")?;
        }
        first = false;
        Ok(())
    };
    if !t.deco().is_zero() {
        sep(f)?;
        write!(f, "X[{}]", t.deco())?;
    }
    for n in t.noises() {
        sep(f)?;
        let TypeRef::Noise(l) = n.ty else { unreachable!() };
        write!(f, "xi_{}", l + 1)?;
        if !n.deriv.is_zero() {
            write!(f, "[{}]", n.deriv)?;
        }
    }
    for (e, c) in t.children() {
        sep(f)?;
        let TypeRef::Kernel(k) = e.ty else { unreachable!() };
        write!(f, "I[{},{}](", kernel(k), e.deriv)?;
        write_tree(f, c, kernel)?;
        write!(f, ")")?;
    }
    if first {
        write!(f, "1")?;
    }
    Ok(())
}

/// Display adapter that resolves kernel names through a signature.
pub struct TreeDisplay<'a> {
    tree: &'a DecoratedTree,
    sig: &'a Signature,
}

impl fmt::Display for TreeDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_tree(f, self.tree, &|k| self.sig.kernels()[k].name.clone())
    }
}

impl DecoratedTree {
    pub fn display<'a>(&'a self, sig: &'a Signature) -> TreeDisplay<'a> {
        TreeDisplay { tree: self, sig }
    }

    pub fn to_text(&self, sig: &Signature) -> String {
        self.display(sig).to_string()
    }
}

impl EdgeLabel {
    /// `t1,(0,1)` for kernels, `xi_1` or `xi_1[(1,0)]` for noises.
    pub fn to_text(&self, sig: &Signature) -> String {
        match self.ty {
            TypeRef::Kernel(k) => format!("{},{}", sig.kernels()[k].name, self.deriv),
            TypeRef::Noise(l) if self.deriv.is_zero() => format!("xi_{}", l + 1),
            TypeRef::Noise(l) => format!("xi_{}[{}]", l + 1, self.deriv),
        }
    }
}

/// Parses a kernel edge label `NAME,(k_0,...,k_d)`.
pub fn parse_label(input: &str, sig: &Signature) -> Result<EdgeLabel> {
    let wrapped = format!("I[{input}](1)");
    let offset = 2;
    let t = parse_tree(&wrapped, sig).map_err(|e| match e {
        Error::Parse { pos, msg } => Error::Parse { pos: pos.saturating_sub(offset).min(input.len()), msg },
        other => other,
    })?;
    Ok(t.children()[0].0.clone())
}

/// Kernel `i` prints as `t{i+1}` when no signature is at hand.
impl fmt::Debug for DecoratedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_tree(f, self, &|k| format!("t{}", k + 1))
    }
}

/// `c₁ * τ₁ + c₂ * τ₂ - ...`; unit coefficients are omitted.
pub fn format_vec(v: &TreeVec, sig: &Signature) -> String {
    if v.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (i, (t, c)) in v.iter().enumerate() {
        let (neg, mag) = match c {
            Scalar::Const(r) if r.is_negative() => (true, Scalar::Const(-r)),
            _ => (false, c.clone()),
        };
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        match &mag {
            Scalar::Const(r) if r.is_one() => {}
            Scalar::Const(_) => out.push_str(&format!("{mag} * ")),
            Scalar::Poly(_) => out.push_str(&format!("({mag}) * ")),
        }
        out.push_str(&t.to_text(sig));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::test_support::*;

    #[test]
    fn parses_and_prints_canonically() {
        let sig = sig2();
        let t = parse_tree("I[t1,(0,0)](xi_1) * xi_1 * X[(1,0)]", &sig).unwrap();
        assert_eq!(t.to_text(&sig), "X[(1,0)] * xi_1 * I[t1,(0,0)](xi_1)");
        assert_eq!(parse_tree(" 1 ", &sig).unwrap(), DecoratedTree::one(2));
        assert_eq!(parse_tree("1 * 1", &sig).unwrap().to_text(&sig), "1");
        let d = parse_tree("xi_1[(0,1)]", &sig).unwrap();
        assert_eq!(d.to_text(&sig), "xi_1[(0,1)]");
    }

    #[test]
    fn reports_positions() {
        let sig = sig2();
        let e = parse_tree("X[(1,0)] * I[t9,(0,0)](1)", &sig).unwrap_err();
        assert_eq!(e, Error::Parse { pos: 13, msg: "unknown kernel type \"t9\"".into() });
        let r = render_parse_error("X[(1,0)] * I[t9,(0,0)](1)", &e);
        assert!(r.ends_with(&format!("{}^", " ".repeat(15))));
        assert!(matches!(parse_tree("X[(1,0,0)]", &sig), Err(Error::Parse { pos: 2, .. })));
        assert!(parse_tree("xi_2", &sig).is_err());
        assert!(parse_tree("xi_1 xi_1", &sig).is_err());
        assert!(parse_tree("", &sig).is_err());
    }

    #[test]
    fn prints_vectors() {
        let sig = sig2();
        let mut v = TreeVec::from_tree(xi());
        v.add_term(DecoratedTree::one(2), Scalar::from_int(-2));
        assert_eq!(format_vec(&v, &sig), "-2 * 1 + xi_1");
    }

    use proptest::prelude::*;
    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn print_parse_roundtrip(t in crate::tree::test_support::arb_tree()) {
            let sig = sig2();
            prop_assert_eq!(parse_tree(&t.to_text(&sig), &sig).unwrap(), t);
        }
    }
}
