//! Finite linear combinations of trees.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::scalar::{Rational, Scalar};
use crate::tree::DecoratedTree;

/// `Σ c_τ τ` with exact coefficients; zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Default, Hash, PartialOrd, Ord)]
pub struct TreeVec {
    terms: BTreeMap<DecoratedTree, Scalar>,
}

impl TreeVec {
    pub fn zero() -> Self {
        TreeVec { terms: BTreeMap::new() }
    }

    pub fn from_tree(t: DecoratedTree) -> Self {
        Self::term(t, Scalar::one())
    }

    pub fn term(t: DecoratedTree, c: Scalar) -> Self {
        let mut v = Self::zero();
        v.add_term(t, c);
        v
    }

    pub fn add_term(&mut self, t: DecoratedTree, c: Scalar) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(t) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_rational(&mut self, t: DecoratedTree, c: Rational) {
        self.add_term(t, Scalar::Const(c));
    }

    pub fn add_scaled(&mut self, other: &TreeVec, c: &Scalar) {
        if c.is_zero() {
            return;
        }
        for (t, v) in &other.terms {
            self.add_term(t.clone(), v * c);
        }
    }

    pub fn add_assign(&mut self, other: &TreeVec) {
        self.add_scaled(other, &Scalar::one());
    }

    pub fn sub(&self, other: &TreeVec) -> TreeVec {
        let mut out = self.clone();
        out.add_scaled(other, &Scalar::from_int(-1));
        out
    }

    pub fn plus(&self, other: &TreeVec) -> TreeVec {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn scale(&self, c: &Scalar) -> TreeVec {
        let mut out = TreeVec::zero();
        out.add_scaled(self, c);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, t: &DecoratedTree) -> Scalar {
        self.terms.get(t).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DecoratedTree, &Scalar)> {
        self.terms.iter()
    }

    pub fn trees(&self) -> impl Iterator<Item = &DecoratedTree> {
        self.terms.keys()
    }

    /// Extends `f` linearly.
    pub fn map_linear<F: FnMut(&DecoratedTree) -> TreeVec>(&self, mut f: F) -> TreeVec {
        let mut out = TreeVec::zero();
        for (t, c) in &self.terms {
            out.add_scaled(&f(t), c);
        }
        out
    }

    /// Fallible linear extension.
    pub fn try_map_linear<E, F: FnMut(&DecoratedTree) -> Result<TreeVec, E>>(&self, mut f: F) -> Result<TreeVec, E> {
        let mut out = TreeVec::zero();
        for (t, c) in &self.terms {
            out.add_scaled(&f(t)?, c);
        }
        Ok(out)
    }

    /// Extends a bilinear map on trees.
    pub fn bilinear<F: FnMut(&DecoratedTree, &DecoratedTree) -> TreeVec>(&self, other: &TreeVec, mut f: F) -> TreeVec {
        let mut out = TreeVec::zero();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_scaled(&f(a, b), &(ca * cb));
            }
        }
        out
    }

    /// Root-join product, bilinearly extended (trees from the larger space allowed).
    pub fn join(&self, other: &TreeVec) -> TreeVec {
        self.bilinear(other, |a, b| TreeVec::from_tree(a.join(b)))
    }

    /// Keeps only the terms whose tree satisfies `keep`.
    pub fn filter<F: Fn(&DecoratedTree) -> bool>(&self, keep: F) -> TreeVec {
        TreeVec { terms: self.terms.iter().filter(|(t, _)| keep(t)).map(|(t, c)| (t.clone(), c.clone())).collect() }
    }

    /// Every coefficient as a plain rational, if none is formal.
    pub fn const_terms(&self) -> Option<Vec<(&DecoratedTree, Rational)>> {
        self.terms.iter().map(|(t, c)| c.as_const().map(|r| (t, *r))).collect()
    }
}

impl FromIterator<(DecoratedTree, Scalar)> for TreeVec {
    fn from_iter<I: IntoIterator<Item = (DecoratedTree, Scalar)>>(iter: I) -> Self {
        let mut v = TreeVec::zero();
        for (t, c) in iter {
            v.add_term(t, c);
        }
        v
    }
}

/// `⟨u, v⟩ = Σ_τ u_τ v_τ S(τ)`
pub fn inner_product(u: &TreeVec, v: &TreeVec) -> Scalar {
    let (small, large) = if u.len() <= v.len() { (u, v) } else { (v, u) };
    let mut acc = Scalar::zero();
    for (t, c) in small.iter() {
        if let Some(d) = large.terms.get(t) {
            acc += &(c * d).scale(&t.symmetry_factor());
        }
    }
    acc
}

/// Pairing of a tree against a vector: `⟨σ, v⟩ = S(σ) v_σ`.
pub fn pair_tree(sigma: &DecoratedTree, v: &TreeVec) -> Scalar {
    v.coeff(sigma).scale(&sigma.symmetry_factor())
}

impl fmt::Debug for TreeVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (t, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c}) {t:?}")?;
        }
        Ok(())
    }
}

/// `Σ c τ₁⊗τ₂`
#[derive(Clone, PartialEq, Eq, Default)]
pub struct TensorVec {
    terms: BTreeMap<(DecoratedTree, DecoratedTree), Scalar>,
}

impl TensorVec {
    pub fn zero() -> Self {
        TensorVec { terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, left: DecoratedTree, right: DecoratedTree, c: Scalar) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry((left, right)) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(DecoratedTree, DecoratedTree), &Scalar)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, left: &DecoratedTree, right: &DecoratedTree) -> Scalar {
        self.terms.get(&(left.clone(), right.clone())).cloned().unwrap_or_else(Scalar::zero)
    }

    /// `(f ⊗ g)` applied termwise.
    pub fn map_each<F, G>(&self, mut f: F, mut g: G) -> TensorVec
    where
        F: FnMut(&DecoratedTree) -> TreeVec,
        G: FnMut(&DecoratedTree) -> TreeVec,
    {
        let mut out = TensorVec::zero();
        for ((a, b), c) in &self.terms {
            let fa = f(a);
            let gb = g(b);
            for (x, cx) in fa.iter() {
                for (y, cy) in gb.iter() {
                    out.add_term(x.clone(), y.clone(), &(c * cx) * cy);
                }
            }
        }
        out
    }
}

/// `⟨σ₁⊗σ₂, τ₁⊗τ₂⟩ = ⟨σ₁,τ₁⟩⟨σ₂,τ₂⟩`, extended bilinearly.
pub fn tensor_inner_product(u: &TensorVec, v: &TensorVec) -> Scalar {
    let mut acc = Scalar::zero();
    for ((a, b), c) in u.iter() {
        if let Some(d) = v.terms.get(&(a.clone(), b.clone())) {
            acc += &(c * d).scale(&(a.symmetry_factor() * b.symmetry_factor()));
        }
    }
    acc
}

impl fmt::Debug for TensorVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, ((a, b), c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c}) {a:?} ⊗ {b:?}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::int;
    use crate::tree::test_support::*;
    use crate::tree::DecoratedTree;

    #[test]
    fn addition_drops_zeros() {
        let mut v = TreeVec::from_tree(xi());
        v.add_term(xi(), Scalar::from_int(-1));
        assert!(v.is_zero());
    }

    #[test]
    fn inner_product_is_diagonal_with_symmetry_weights() {
        let x2 = DecoratedTree::x(mi(&[2, 1]));
        assert_eq!(inner_product(&TreeVec::from_tree(xi()), &TreeVec::from_tree(xi())), Scalar::one());
        assert_eq!(
            inner_product(&TreeVec::from_tree(x2.clone()), &TreeVec::from_tree(x2.clone())),
            Scalar::Const(int(2))
        );
        assert!(inner_product(&TreeVec::from_tree(xi()), &TreeVec::from_tree(x2)).is_zero());
    }

    #[test]
    fn tensor_pairing_factorizes() {
        let x2 = DecoratedTree::x(mi(&[2, 0]));
        let mut t = TensorVec::zero();
        t.add_term(x2.clone(), x2.clone(), Scalar::from_int(3));
        assert_eq!(tensor_inner_product(&t, &t), Scalar::Const(int(9 * 4)));
    }
}
