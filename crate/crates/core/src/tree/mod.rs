//! Decorated rooted trees in canonical form.
//!
//! A tree is a root decoration `X^k`, a multiset of noise factors sitting at
//! the root, and a multiset of planted subtrees `𝓘_a(τ)`. Children are kept
//! sorted so that structural equality is tree isomorphism.
//!
//! The admissible trees carry at most one noise per node. Grafting a noise onto
//! a node that already holds one yields a node with two noise factors; such
//! trees are kept (they form the larger space in which the star product is
//! associative) and [`DecoratedTree::is_admissible`] tells them apart.

mod multiindex;
mod signature;

pub use multiindex::{binomial, factorial, MultiIndex};
pub use signature::{Signature, TypeDecl};

use std::collections::BTreeMap;

use num_traits::One;

use crate::error::{Error, Result};
use crate::scalar::{int, Rational};

/// Noise types sort before kernel types.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum TypeRef {
    Noise(usize),
    Kernel(usize),
}

/// A type together with a derivative multi-index: `(𝔱, p)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct EdgeLabel {
    pub ty: TypeRef,
    pub deriv: MultiIndex,
}

impl EdgeLabel {
    pub fn kernel(t: usize, deriv: MultiIndex) -> Self {
        EdgeLabel { ty: TypeRef::Kernel(t), deriv }
    }

    pub fn noise(l: usize, deriv: MultiIndex) -> Self {
        EdgeLabel { ty: TypeRef::Noise(l), deriv }
    }

    pub fn is_noise(&self) -> bool {
        matches!(self.ty, TypeRef::Noise(_))
    }

    /// `|𝔱|_𝔰 − |p|_𝔰`
    pub fn degree(&self, sig: &Signature) -> Rational {
        let base = match self.ty {
            TypeRef::Noise(l) => sig.noise_degree(l),
            TypeRef::Kernel(t) => sig.kernel_degree(t),
        };
        base - sig.scaled(&self.deriv)
    }

    pub fn with_deriv(&self, deriv: MultiIndex) -> Self {
        EdgeLabel { ty: self.ty, deriv }
    }

    pub fn validate(&self, sig: &Signature) -> Result<()> {
        sig.check_dim(&self.deriv)?;
        let ok = match self.ty {
            TypeRef::Noise(l) => l < sig.noises().len(),
            TypeRef::Kernel(t) => t < sig.kernels().len(),
        };
        if !ok {
            return Err(Error::InvalidSignature(format!("type {:?} not declared", self.ty)));
        }
        Ok(())
    }
}

/// Canonical decorated tree. Construct through [`DecoratedTree::new`] and the
/// helpers; every value is canonical.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DecoratedTree {
    deco: MultiIndex,
    noises: Vec<EdgeLabel>,
    children: Vec<(EdgeLabel, DecoratedTree)>,
}

impl DecoratedTree {
    /// Builds `X^deco ∏ noises ∏ 𝓘_a(τ)`. Subtrees are canonical already, so
    /// only this level gets sorted.
    pub fn new(deco: MultiIndex, mut noises: Vec<EdgeLabel>, mut children: Vec<(EdgeLabel, DecoratedTree)>) -> Self {
        debug_assert!(noises.iter().all(|n| n.is_noise()));
        debug_assert!(children.iter().all(|(e, _)| !e.is_noise()));
        noises.sort();
        children.sort();
        DecoratedTree { deco, noises, children }
    }

    /// The unit `𝟏`.
    pub fn one(dim: usize) -> Self {
        DecoratedTree { deco: MultiIndex::zeros(dim), noises: vec![], children: vec![] }
    }

    pub fn x(k: MultiIndex) -> Self {
        DecoratedTree { deco: k, noises: vec![], children: vec![] }
    }

    /// `ζ_l` with a derivative-free noise edge.
    pub fn noise(l: usize, dim: usize) -> Self {
        Self::noise_factor(EdgeLabel::noise(l, MultiIndex::zeros(dim)))
    }

    pub fn noise_factor(label: EdgeLabel) -> Self {
        let dim = label.deriv.len();
        DecoratedTree { deco: MultiIndex::zeros(dim), noises: vec![label], children: vec![] }
    }

    /// `𝓘_a(τ)`: a bare root with one child.
    pub fn planted(edge: EdgeLabel, tree: DecoratedTree) -> Self {
        let dim = tree.dim();
        DecoratedTree { deco: MultiIndex::zeros(dim), noises: vec![], children: vec![(edge, tree)] }
    }

    pub fn dim(&self) -> usize {
        self.deco.len()
    }

    pub fn deco(&self) -> &MultiIndex {
        &self.deco
    }

    pub fn noises(&self) -> &[EdgeLabel] {
        &self.noises
    }

    pub fn children(&self) -> &[(EdgeLabel, DecoratedTree)] {
        &self.children
    }

    pub fn is_one(&self) -> bool {
        self.deco.is_zero() && self.noises.is_empty() && self.children.is_empty()
    }

    /// The root noise of an admissible tree.
    pub fn noise_label(&self) -> Option<&EdgeLabel> {
        self.noises.first()
    }

    /// `τ = X^k ζ ∏ 𝓘_{a_i}(τ_i)`
    pub fn decompose(&self) -> (MultiIndex, Option<EdgeLabel>, Vec<(EdgeLabel, DecoratedTree)>) {
        (self.deco.clone(), self.noises.first().cloned(), self.children.clone())
    }

    pub fn with_deco(&self, deco: MultiIndex) -> Self {
        DecoratedTree { deco, noises: self.noises.clone(), children: self.children.clone() }
    }

    /// Root join without the one-noise check.
    pub fn join(&self, other: &DecoratedTree) -> DecoratedTree {
        let mut noises = self.noises.clone();
        noises.extend(other.noises.iter().cloned());
        let mut children = self.children.clone();
        children.extend(other.children.iter().cloned());
        DecoratedTree::new(self.deco.add(&other.deco), noises, children)
    }

    /// Tree product; fails when both roots carry a noise.
    pub fn product(&self, other: &DecoratedTree) -> Result<DecoratedTree> {
        if !self.noises.is_empty() && !other.noises.is_empty() {
            return Err(Error::NoiseCollision);
        }
        Ok(self.join(other))
    }

    /// `S(τ) = k! ∏ S(τ_j)^{β_j} β_j!`, with an extra factorial for repeated
    /// identical noise factors at a node.
    pub fn symmetry_factor(&self) -> Rational {
        let mut s = self.deco.factorial();
        for run in runs(&self.noises) {
            s *= int(factorial(run as u32));
        }
        let mut i = 0;
        while i < self.children.len() {
            let mut j = i + 1;
            while j < self.children.len() && self.children[j] == self.children[i] {
                j += 1;
            }
            let beta = (j - i) as u32;
            let sub = self.children[i].1.symmetry_factor();
            s *= pow(sub, beta) * int(factorial(beta));
            i = j;
        }
        s
    }

    pub fn degree(&self, sig: &Signature) -> Rational {
        let mut d = sig.scaled(&self.deco);
        for n in &self.noises {
            d += n.degree(sig);
        }
        for (e, t) in &self.children {
            d += e.degree(sig) + t.degree(sig);
        }
        d
    }

    /// Number of noise factors in the whole tree.
    pub fn noise_count(&self) -> usize {
        self.noises.len() + self.children.iter().map(|(_, t)| t.noise_count()).sum::<usize>()
    }

    /// Number of nodes (noise leaves are not nodes).
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|(_, t)| t.node_count()).sum::<usize>()
    }

    /// Number of kernel edges.
    pub fn edge_count(&self) -> usize {
        self.node_count() - 1
    }

    /// Sum of `|n_v|_1` over all nodes.
    pub fn deco_total(&self) -> u32 {
        self.deco.total() + self.children.iter().map(|(_, t)| t.deco_total()).sum::<u32>()
    }

    /// Largest `|p|_1` over all edges, noise edges included.
    pub fn max_edge_deriv(&self) -> u32 {
        let here = self.noises.iter().map(|n| n.deriv.total()).max().unwrap_or(0);
        self.children.iter().map(|(e, t)| e.deriv.total().max(t.max_edge_deriv())).max().unwrap_or(0).max(here)
    }

    /// Largest number of noise factors found at a single node.
    pub fn max_noises_per_node(&self) -> usize {
        self.children.iter().map(|(_, t)| t.max_noises_per_node()).max().unwrap_or(0).max(self.noises.len())
    }

    pub fn is_admissible(&self) -> bool {
        self.max_noises_per_node() <= 1
    }

    /// Whether some noise edge carries a derivative.
    pub fn has_noise_derivative(&self) -> bool {
        self.noises.iter().any(|n| !n.deriv.is_zero()) || self.children.iter().any(|(_, t)| t.has_noise_derivative())
    }

    /// Checks dimensions and type references.
    pub fn validate(&self, sig: &Signature) -> Result<()> {
        sig.check_dim(&self.deco)?;
        for n in &self.noises {
            n.validate(sig)?;
        }
        for (e, t) in &self.children {
            e.validate(sig)?;
            t.validate(sig)?;
        }
        Ok(())
    }

    /// All node decorations in preorder (root first, children in canonical order).
    pub fn preorder_decos(&self) -> Vec<MultiIndex> {
        let mut out = Vec::with_capacity(self.node_count());
        fn rec(t: &DecoratedTree, out: &mut Vec<MultiIndex>) {
            out.push(t.deco.clone());
            for (_, c) in &t.children {
                rec(c, out);
            }
        }
        rec(self, &mut out);
        out
    }
}

fn runs<T: PartialEq>(xs: &[T]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < xs.len() {
        let mut j = i + 1;
        while j < xs.len() && xs[j] == xs[i] {
            j += 1;
        }
        out.push(j - i);
        i = j;
    }
    out
}

fn pow(r: Rational, e: u32) -> Rational {
    (0..e).fold(Rational::one(), |acc, _| acc * r)
}

/// A tree with children in arbitrary order, as read from input or built by hand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanarTree {
    pub deco: MultiIndex,
    pub noises: Vec<EdgeLabel>,
    pub children: Vec<(EdgeLabel, PlanarTree)>,
}

impl PlanarTree {
    pub fn from_tree(t: &DecoratedTree) -> Self {
        PlanarTree {
            deco: t.deco.clone(),
            noises: t.noises.clone(),
            children: t.children.iter().map(|(e, c)| (e.clone(), PlanarTree::from_tree(c))).collect(),
        }
    }
}

/// Sorts children recursively, checking every multi-index against the signature.
pub fn canonicalize(raw: &PlanarTree, sig: &Signature) -> Result<DecoratedTree> {
    sig.check_dim(&raw.deco)?;
    for n in &raw.noises {
        if !n.is_noise() {
            return Err(Error::InvalidSignature("kernel type used as a noise factor".into()));
        }
        n.validate(sig)?;
    }
    let mut children = Vec::with_capacity(raw.children.len());
    for (e, c) in &raw.children {
        if e.is_noise() {
            return Err(Error::InvalidSignature("noise edges lead to leaves, not subtrees".into()));
        }
        e.validate(sig)?;
        children.push((e.clone(), canonicalize(c, sig)?));
    }
    Ok(DecoratedTree::new(raw.deco.clone(), raw.noises.clone(), children))
}

/// Commutative product of trees; the empty forest is the unit.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Forest(Vec<DecoratedTree>);

impl Forest {
    pub fn empty() -> Self {
        Forest(Vec::new())
    }

    pub fn new(mut trees: Vec<DecoratedTree>) -> Self {
        trees.sort();
        Forest(trees)
    }

    pub fn trees(&self) -> &[DecoratedTree] {
        &self.0
    }

    pub fn product(&self, other: &Forest) -> Forest {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Forest::new(v)
    }

    /// Multiplicities of distinct trees.
    pub fn counts(&self) -> BTreeMap<&DecoratedTree, usize> {
        let mut m = BTreeMap::new();
        for t in &self.0 {
            *m.entry(t).or_insert(0) += 1;
        }
        m
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::scalar::rat;

    /// d+1 = 2, 𝔰 = (2,1), one noise of degree −3/2, one kernel of degree 2.
    pub fn sig2() -> Signature {
        Signature::new(&[2, 1], vec![TypeDecl::new("xi", rat(-3, 2))], vec![TypeDecl::new("t1", rat(2, 1))]).unwrap()
    }

    pub fn mi(c: &[u32]) -> MultiIndex {
        MultiIndex::from_slice(c)
    }

    pub fn xi() -> DecoratedTree {
        DecoratedTree::noise(0, 2)
    }

    pub fn kernel(p: &[u32]) -> EdgeLabel {
        EdgeLabel::kernel(0, mi(p))
    }

    pub fn planted(p: &[u32], t: DecoratedTree) -> DecoratedTree {
        DecoratedTree::planted(kernel(p), t)
    }

    /// |Aut(τ)| by brute force: apply every tuple of per-node child
    /// permutations to the ordered tree and count those that fix it.
    pub fn automorphisms(t: &DecoratedTree) -> usize {
        let p = PlanarTree::from_tree(t);
        all_planar(&p).into_iter().filter(|q| *q == p).count()
    }

    fn all_planar(p: &PlanarTree) -> Vec<PlanarTree> {
        let sub: Vec<Vec<PlanarTree>> = p.children.iter().map(|(_, c)| all_planar(c)).collect();
        let mut noise_orders = Vec::new();
        permutations(p.noises.len(), &mut |perm| {
            noise_orders.push(perm.iter().map(|&i| p.noises[i].clone()).collect::<Vec<_>>())
        });
        let mut out = Vec::new();
        permutations(p.children.len(), &mut |perm| {
            let mut choices: Vec<Vec<(EdgeLabel, PlanarTree)>> = vec![vec![]];
            for &i in perm {
                let mut next = Vec::new();
                for prefix in &choices {
                    for variant in &sub[i] {
                        let mut v = prefix.clone();
                        v.push((p.children[i].0.clone(), variant.clone()));
                        next.push(v);
                    }
                }
                choices = next;
            }
            for ch in choices {
                for ns in &noise_orders {
                    out.push(PlanarTree { deco: p.deco.clone(), noises: ns.clone(), children: ch.clone() });
                }
            }
        });
        out
    }

    fn permutations(n: usize, f: &mut dyn FnMut(&[usize])) {
        fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, f: &mut dyn FnMut(&[usize])) {
            if cur.len() == used.len() {
                f(cur);
                return;
            }
            for i in 0..used.len() {
                if !used[i] {
                    used[i] = true;
                    cur.push(i);
                    rec(cur, used, f);
                    cur.pop();
                    used[i] = false;
                }
            }
        }
        rec(&mut Vec::new(), &mut vec![false; n], f);
    }

    pub fn decoration_factorials(t: &DecoratedTree) -> Rational {
        t.preorder_decos().iter().map(|k| k.factorial()).product()
    }

    pub fn arb_tree() -> impl proptest::strategy::Strategy<Value = DecoratedTree> {
        use proptest::strategy::Strategy;
        let leaf = (0u32..3, 0u32..2, proptest::prelude::any::<bool>()).prop_map(|(a, b, n)| {
            let t = DecoratedTree::x(mi(&[a % 2, b]));
            if n {
                t.join(&xi())
            } else {
                t
            }
        });
        leaf.prop_recursive(3, 7, 3, |inner| {
            (0u32..2, proptest::collection::vec((0u32..2, inner), 0..3), proptest::prelude::any::<bool>()).prop_map(
                |(k, kids, n)| {
                    let ch = kids.into_iter().map(|(p, t)| (kernel(&[0, p]), t)).collect();
                    let noises = if n { vec![EdgeLabel::noise(0, mi(&[0, 0]))] } else { vec![] };
                    DecoratedTree::new(mi(&[0, k]), noises, ch)
                },
            )
        })
    }

    /// Every planar ordering of the children, recursively.
    pub fn planar_variants(t: &DecoratedTree) -> Vec<PlanarTree> {
        all_planar(&PlanarTree::from_tree(t))
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::scalar::rat;
    use proptest::prelude::*;

    #[test]
    fn canonical_order_sorts_children() {
        let sig = sig2();
        let a = (kernel(&[0, 0]), PlanarTree::from_tree(&xi()));
        let b = (kernel(&[0, 1]), PlanarTree::from_tree(&xi()));
        let raw = PlanarTree { deco: mi(&[0, 0]), noises: vec![], children: vec![b.clone(), a.clone()] };
        let sorted = PlanarTree { deco: mi(&[0, 0]), noises: vec![], children: vec![a, b] };
        let t = canonicalize(&raw, &sig).unwrap();
        assert_eq!(PlanarTree::from_tree(&t), sorted);
        assert_eq!(canonicalize(&PlanarTree::from_tree(&t), &sig).unwrap(), t);
    }

    #[test]
    fn planar_encodings_share_one_canonical_form() {
        let sig = sig2();
        let t = planted(&[0, 0], xi()).join(&planted(&[0, 0], DecoratedTree::x(mi(&[1, 0]))));
        let images: std::collections::BTreeSet<_> =
            planar_variants(&t).iter().map(|p| canonicalize(p, &sig).unwrap()).collect();
        assert_eq!(images.len(), 1);
        assert!(images.contains(&t));
    }

    #[test]
    fn canonicalize_rejects_dimension_mismatch() {
        let raw = PlanarTree { deco: mi(&[0, 0, 0]), noises: vec![], children: vec![] };
        assert!(matches!(canonicalize(&raw, &sig2()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn symmetry_factor_examples() {
        assert_eq!(xi().symmetry_factor(), int(1));
        assert_eq!(DecoratedTree::x(mi(&[2, 3])).symmetry_factor(), int(12));
        let cherry = planted(&[0, 0], xi()).join(&planted(&[0, 0], xi()));
        assert_eq!(cherry.symmetry_factor(), int(2));
        assert_eq!(automorphisms(&cherry), 2);
    }

    #[test]
    fn degree_examples() {
        let sig = sig2();
        assert_eq!(DecoratedTree::x(mi(&[1, 0])).degree(&sig), int(2));
        assert_eq!(xi().degree(&sig), rat(-3, 2));
        assert_eq!(planted(&[0, 1], xi()).degree(&sig), rat(-1, 2));
    }

    #[test]
    fn noise_count_examples() {
        assert_eq!(DecoratedTree::one(2).noise_count(), 0);
        assert_eq!(xi().noise_count(), 1);
        let inner = xi().join(&planted(&[0, 0], xi()));
        let t = xi().join(&planted(&[0, 0], inner));
        assert_eq!(t.noise_count(), 3);
    }

    #[test]
    fn product_and_decompose() {
        let one = DecoratedTree::one(2);
        let x = DecoratedTree::x(mi(&[1, 0]));
        let y = DecoratedTree::x(mi(&[0, 2]));
        assert_eq!(one.product(&x).unwrap(), x);
        assert_eq!(x.product(&y).unwrap(), DecoratedTree::x(mi(&[1, 2])));
        let body = x.join(&planted(&[0, 0], xi()));
        let full = body.product(&xi()).unwrap();
        assert_eq!(full.deco(), &mi(&[1, 0]));
        assert_eq!(full.noises().len(), 1);
        assert!(matches!(xi().product(&xi()), Err(Error::NoiseCollision)));

        assert_eq!(one.decompose(), (mi(&[0, 0]), None, vec![]));
        let (k, n, f) = full.decompose();
        let mut rebuilt = DecoratedTree::x(k);
        if let Some(n) = n {
            rebuilt = rebuilt.product(&DecoratedTree::noise_factor(n)).unwrap();
        }
        for (e, t) in f {
            rebuilt = rebuilt.product(&DecoratedTree::planted(e, t)).unwrap();
        }
        assert_eq!(rebuilt, full);
    }

    #[test]
    fn inner_product_weight_is_symmetry_factor_for_repeated_noises() {
        let two = xi().join(&xi());
        assert!(!two.is_admissible());
        assert_eq!(two.symmetry_factor(), int(2));
        assert_eq!(automorphisms(&two), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn canonicalize_is_idempotent(t in arb_tree()) {
            let sig = sig2();
            let once = canonicalize(&PlanarTree::from_tree(&t), &sig).unwrap();
            prop_assert_eq!(&once, &t);
            prop_assert_eq!(canonicalize(&PlanarTree::from_tree(&once), &sig).unwrap(), once);
        }

        #[test]
        fn symmetry_factor_matches_automorphism_count(t in arb_tree()) {
            let oracle = decoration_factorials(&t) * int(automorphisms(&t) as i128);
            prop_assert_eq!(t.symmetry_factor(), oracle);
        }

        #[test]
        fn degree_and_noise_count_are_additive(a in arb_tree(), b in arb_tree()) {
            let sig = sig2();
            let p = a.join(&b);
            prop_assert_eq!(p.degree(&sig), a.degree(&sig) + b.degree(&sig));
            prop_assert_eq!(p.noise_count(), a.noise_count() + b.noise_count());
        }
    }
}
