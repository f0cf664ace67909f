//! Finite graded bases and linear maps tabulated on them.
//!
//! A [`GradedBasis`] is every tree within a set of [`Bounds`]: noise count,
//! kernel-edge count, total node decoration and per-edge derivative order.
//! Maps are evaluated column by column; an image that leaves the basis is an
//! error, never silently truncated.

use std::collections::HashMap;
use std::sync::Arc;

use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tree::{DecoratedTree, EdgeLabel, MultiIndex, Signature};
use crate::treevec::TreeVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bounds {
    pub max_noises: usize,
    /// Kernel edges only; noise edges end in leaves and are not counted.
    pub max_edges: usize,
    /// Sum of `|n_v|_1` over all nodes.
    pub max_deco: u32,
    /// Bound on `|p|_1` for each kernel edge.
    pub max_deriv: u32,
    pub max_noises_per_node: usize,
    pub cap: usize,
}

impl Bounds {
    pub fn new(max_noises: usize, max_edges: usize, max_deco: u32, max_deriv: u32) -> Self {
        Bounds { max_noises, max_edges, max_deco, max_deriv, max_noises_per_node: 1, cap: 500_000 }
    }

    pub fn contains(&self, t: &DecoratedTree) -> bool {
        t.noise_count() <= self.max_noises
            && t.edge_count() <= self.max_edges
            && t.deco_total() <= self.max_deco
            && t.max_edge_deriv() <= self.max_deriv
            && t.max_noises_per_node() <= self.max_noises_per_node
            && !t.has_noise_derivative()
    }

    /// Every bound one larger.
    pub fn enlarged(&self) -> Bounds {
        Bounds {
            max_noises: self.max_noises + 1,
            max_edges: self.max_edges + 1,
            max_deco: self.max_deco + 1,
            max_deriv: self.max_deriv + 1,
            ..*self
        }
    }
}

type Generator = Arc<dyn Fn(&Bounds) -> Result<Vec<DecoratedTree>> + Send + Sync>;

/// An ordered, duplicate-free list of trees with index lookup.
#[derive(Clone)]
pub struct GradedBasis {
    sig: Signature,
    bounds: Bounds,
    trees: Vec<DecoratedTree>,
    index: HashMap<DecoratedTree, usize>,
    generator: Option<Generator>,
}

impl GradedBasis {
    /// All trees within `bounds` (noise edges without derivatives).
    pub fn enumerate(sig: &Signature, bounds: Bounds) -> Result<Self> {
        let s = sig.clone();
        let gen: Generator = Arc::new(move |b: &Bounds| enumerate_trees(&s, b));
        Self::generated(sig, bounds, gen)
    }

    /// A basis produced by `generator`, which is also used to enlarge it on demand.
    pub fn generated(sig: &Signature, bounds: Bounds, generator: Generator) -> Result<Self> {
        let trees = generator(&bounds)?;
        let mut b = Self::from_trees(sig, bounds, trees);
        b.generator = Some(generator);
        Ok(b)
    }

    pub fn from_trees(sig: &Signature, bounds: Bounds, mut trees: Vec<DecoratedTree>) -> Self {
        trees.sort();
        trees.dedup();
        let index = trees.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        GradedBasis { sig: sig.clone(), bounds, trees, index, generator: None }
    }

    /// The same kind of basis with every bound one larger, if it knows how to grow.
    pub fn enlarged(&self) -> Option<Result<GradedBasis>> {
        let gen = self.generator.clone()?;
        Some(Self::generated(&self.sig, self.bounds.enlarged(), gen))
    }

    /// Keeps the trees satisfying `keep`.
    pub fn filter<F: Fn(&DecoratedTree) -> bool>(&self, keep: F) -> GradedBasis {
        let trees = self.trees.iter().filter(|t| keep(t)).cloned().collect();
        Self::from_trees(&self.sig, self.bounds, trees)
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn trees(&self) -> &[DecoratedTree] {
        &self.trees
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn contains(&self, t: &DecoratedTree) -> bool {
        self.index.contains_key(t)
    }

    pub fn index_of(&self, t: &DecoratedTree) -> Option<usize> {
        self.index.get(t).copied()
    }

    /// First tree of `v` outside the basis, if any.
    pub fn escape<'a>(&self, v: &'a TreeVec) -> Option<&'a DecoratedTree> {
        v.trees().find(|t| !self.contains(t))
    }

    pub fn check_closed(&self, source: &DecoratedTree, v: &TreeVec) -> Result<()> {
        match self.escape(v) {
            None => Ok(()),
            Some(t) => {
                Err(Error::BasisEscape { source_tree: source.to_text(&self.sig), escaped: t.to_text(&self.sig) })
            }
        }
    }
}

/// `T_+`: no root noise, and every planted root factor has positive degree.
pub fn is_positive(t: &DecoratedTree, sig: &Signature) -> bool {
    t.noises().is_empty() && t.children().iter().all(|(e, c)| (e.degree(sig) + c.degree(sig)) > Zero::zero())
}

/// All kernel edge labels with `|p|_1 ≤ max_deriv`.
pub fn kernel_labels(sig: &Signature, max_deriv: u32) -> Vec<EdgeLabel> {
    let mut out = Vec::new();
    for t in 0..sig.kernels().len() {
        for p in MultiIndex::all_up_to(sig.dimension(), max_deriv) {
            out.push(EdgeLabel::kernel(t, p));
        }
    }
    out
}

pub(crate) fn noise_multisets(kinds: usize, dim: usize, size: usize) -> Vec<Vec<EdgeLabel>> {
    fn rec(start: usize, kinds: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for l in start..kinds {
            cur.push(l);
            rec(l, kinds, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut idx = Vec::new();
    rec(0, kinds, size, &mut Vec::new(), &mut idx);
    idx.into_iter().map(|ls| ls.into_iter().map(|l| EdgeLabel::noise(l, MultiIndex::zeros(dim))).collect()).collect()
}

/// Exhaustive enumeration of trees with exact sizes, assembled bottom-up.
struct Enumerator<'a> {
    sig: &'a Signature,
    bounds: &'a Bounds,
    labels: Vec<EdgeLabel>,
    memo: HashMap<(usize, usize, u32), Arc<Vec<DecoratedTree>>>,
    produced: usize,
}

/// A candidate planted factor with its size.
pub(crate) struct Item {
    pub label: EdgeLabel,
    pub tree: DecoratedTree,
    pub edges: usize,
    pub noises: usize,
    pub deco: u32,
}

impl Enumerator<'_> {
    fn exact(&mut self, e: usize, n: usize, d: u32) -> Result<Arc<Vec<DecoratedTree>>> {
        if let Some(v) = self.memo.get(&(e, n, d)) {
            return Ok(v.clone());
        }
        let dim = self.sig.dimension();
        let mut items = Vec::new();
        for ce in 1..=e {
            for cn in 0..=n {
                for cd in 0..=d {
                    for t in self.exact(ce - 1, cn, cd)?.iter() {
                        for l in &self.labels {
                            items.push(Item { label: l.clone(), tree: t.clone(), edges: ce, noises: cn, deco: cd });
                        }
                    }
                }
            }
        }
        items.sort_by(|a, b| (&a.label, &a.tree).cmp(&(&b.label, &b.tree)));
        let mut out = Vec::new();
        for root_noises in 0..=n.min(self.bounds.max_noises_per_node) {
            let noise_sets = noise_multisets(self.sig.noises().len(), dim, root_noises);
            for root_deco in 0..=d {
                let decos = MultiIndex::all_up_to(dim, root_deco);
                let decos: Vec<_> = decos.into_iter().filter(|k| k.total() == root_deco).collect();
                let mut child_sets = Vec::new();
                choose(&items, 0, e, n - root_noises, d - root_deco, &mut Vec::new(), &mut child_sets);
                for ns in &noise_sets {
                    for k in &decos {
                        for ch in &child_sets {
                            let children =
                                ch.iter().map(|&i: &usize| (items[i].label.clone(), items[i].tree.clone())).collect();
                            out.push(DecoratedTree::new(k.clone(), ns.clone(), children));
                        }
                    }
                }
            }
        }
        self.produced += out.len();
        if self.produced > self.bounds.cap {
            return Err(Error::BasisTooLarge { cap: self.bounds.cap });
        }
        let out = Arc::new(out);
        self.memo.insert((e, n, d), out.clone());
        Ok(out)
    }
}

/// Multisets of `items` (as sorted index lists) with exactly the given sizes.
pub(crate) fn choose(
    items: &[Item],
    start: usize,
    e: usize,
    n: usize,
    d: u32,
    cur: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if e == 0 {
        if n == 0 && d == 0 {
            out.push(cur.clone());
        }
        return;
    }
    for j in start..items.len() {
        let it = &items[j];
        if it.edges <= e && it.noises <= n && it.deco <= d {
            cur.push(j);
            choose(items, j, e - it.edges, n - it.noises, d - it.deco, cur, out);
            cur.pop();
        }
    }
}

/// All trees within `bounds`, sorted.
pub fn enumerate_trees(sig: &Signature, bounds: &Bounds) -> Result<Vec<DecoratedTree>> {
    let mut en =
        Enumerator { sig, bounds, labels: kernel_labels(sig, bounds.max_deriv), memo: HashMap::new(), produced: 0 };
    let mut out = Vec::new();
    for e in 0..=bounds.max_edges {
        for n in 0..=bounds.max_noises {
            for d in 0..=bounds.max_deco {
                out.extend(en.exact(e, n, d)?.iter().cloned());
                if out.len() > bounds.cap {
                    return Err(Error::BasisTooLarge { cap: bounds.cap });
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// A linear map on trees, extended linearly to [`TreeVec`]s.
pub trait TreeMap: Sync {
    fn apply(&self, t: &DecoratedTree) -> Result<TreeVec>;

    fn apply_vec(&self, v: &TreeVec) -> Result<TreeVec> {
        v.try_map_linear(|t| self.apply(t))
    }
}

/// Wraps a closure as a [`TreeMap`].
pub struct FnMap<F>(pub F);

impl<F: Fn(&DecoratedTree) -> Result<TreeVec> + Sync> TreeMap for FnMap<F> {
    fn apply(&self, t: &DecoratedTree) -> Result<TreeVec> {
        (self.0)(t)
    }
}

pub struct Identity;

impl TreeMap for Identity {
    fn apply(&self, t: &DecoratedTree) -> Result<TreeVec> {
        Ok(TreeVec::from_tree(t.clone()))
    }
}

/// A map given by its images on a basis.
#[derive(Clone)]
pub struct TabulatedMap {
    basis: Arc<GradedBasis>,
    images: Vec<TreeVec>,
}

impl TabulatedMap {
    /// Evaluates `map` on every basis tree in parallel; fails on escape.
    pub fn tabulate(map: &dyn TreeMap, basis: &Arc<GradedBasis>) -> Result<Self> {
        let images: Result<Vec<TreeVec>> = basis
            .trees()
            .par_iter()
            .map(|t| {
                let v = map.apply(t)?;
                basis.check_closed(t, &v)?;
                Ok(v)
            })
            .collect();
        Ok(TabulatedMap { basis: basis.clone(), images: images? })
    }

    /// Evaluates without the closure check.
    pub fn tabulate_unchecked(map: &dyn TreeMap, basis: &Arc<GradedBasis>) -> Result<Self> {
        let images: Result<Vec<TreeVec>> = basis.trees().par_iter().map(|t| map.apply(t)).collect();
        Ok(TabulatedMap { basis: basis.clone(), images: images? })
    }

    pub fn from_images(basis: &Arc<GradedBasis>, images: Vec<TreeVec>) -> Self {
        assert_eq!(basis.len(), images.len());
        TabulatedMap { basis: basis.clone(), images }
    }

    pub fn basis(&self) -> &Arc<GradedBasis> {
        &self.basis
    }

    pub fn images(&self) -> &[TreeVec] {
        &self.images
    }

    pub fn image(&self, t: &DecoratedTree) -> Option<&TreeVec> {
        self.basis.index_of(t).map(|i| &self.images[i])
    }

    /// `self ∘ other` on the common basis.
    pub fn compose(&self, other: &TabulatedMap) -> Result<TabulatedMap> {
        let images: Result<Vec<TreeVec>> = other.images.par_iter().map(|v| self.apply_vec(v)).collect();
        Ok(TabulatedMap { basis: other.basis.clone(), images: images? })
    }

    pub fn minus_identity(&self) -> TabulatedMap {
        let images = self
            .basis
            .trees()
            .iter()
            .zip(self.images.iter())
            .map(|(t, v)| v.sub(&TreeVec::from_tree(t.clone())))
            .collect();
        TabulatedMap { basis: self.basis.clone(), images }
    }

    pub fn is_zero(&self) -> bool {
        self.images.iter().all(|v| v.is_zero())
    }

    /// Basis trees on which the two maps differ.
    pub fn differences(&self, other: &TabulatedMap) -> Vec<DecoratedTree> {
        self.basis
            .trees()
            .iter()
            .zip(self.images.iter().zip(other.images.iter()))
            .filter(|(_, (a, b))| a != b)
            .map(|(t, _)| t.clone())
            .collect()
    }
}

impl std::fmt::Debug for TabulatedMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut m = f.debug_map();
        for (t, v) in self.basis.trees().iter().zip(self.images.iter()) {
            m.entry(t, v);
        }
        m.finish()
    }
}

impl TreeMap for TabulatedMap {
    fn apply(&self, t: &DecoratedTree) -> Result<TreeVec> {
        self.image(t).cloned().ok_or_else(|| Error::OutsideBasis(t.to_text(self.basis.signature())))
    }
}

/// `A*` on `B`: the coefficient of `τ'` in `A*σ` is `(S(σ)/S(τ')) · [σ]Aτ'`.
///
/// On escape the computation is retried once on the enlarged basis (when the
/// basis knows how to grow); the result is then restricted back to `B`.
pub fn adjoint(map: &dyn TreeMap, basis: &Arc<GradedBasis>) -> Result<TabulatedMap> {
    match adjoint_on(map, basis) {
        Err(Error::BasisEscape { .. }) if basis.enlarged().is_some() => {
            let big = Arc::new(basis.enlarged().expect("checked")?);
            let wide = adjoint_on(map, &big)?;
            let images = basis
                .trees()
                .iter()
                .map(|t| {
                    let v = wide.image(t).expect("enlarged basis contains the original").clone();
                    basis.check_closed(t, &v)?;
                    Ok(v)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TabulatedMap { basis: basis.clone(), images })
        }
        other => other,
    }
}

fn adjoint_on(map: &dyn TreeMap, basis: &Arc<GradedBasis>) -> Result<TabulatedMap> {
    let forward = TabulatedMap::tabulate(map, basis)?;
    Ok(transpose(&forward))
}

/// Transpose with respect to the symmetry-weighted pairing, on the basis.
pub fn transpose(forward: &TabulatedMap) -> TabulatedMap {
    let basis = forward.basis.clone();
    let mut images = vec![TreeVec::zero(); basis.len()];
    for (tp, v) in basis.trees().iter().zip(forward.images.iter()) {
        let stp = tp.symmetry_factor();
        for (sigma, c) in v.iter() {
            if let Some(i) = basis.index_of(sigma) {
                let w = sigma.symmetry_factor() / stp;
                images[i].add_term(tp.clone(), c.scale(&w));
            }
        }
    }
    TabulatedMap { basis, images }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, Scalar};
    use crate::tree::test_support::*;
    use crate::treevec::inner_product;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent generator: grow trees by attaching one more leaf/noise/unit
    /// of decoration in every possible place, then filter by bounds.
    fn brute_force(sig: &Signature, b: &Bounds) -> Vec<DecoratedTree> {
        use std::collections::BTreeSet;
        let dim = sig.dimension();
        let mut seen: BTreeSet<DecoratedTree> = BTreeSet::new();
        let mut frontier = vec![DecoratedTree::one(dim)];
        seen.insert(DecoratedTree::one(dim));
        let labels = kernel_labels(sig, b.max_deriv);
        while let Some(t) = frontier.pop() {
            let n = t.node_count();
            let mut next = Vec::new();
            for v in 0..n {
                for l in &labels {
                    next.push(modify(&t, v, &mut |node| {
                        node.join(&DecoratedTree::planted(l.clone(), DecoratedTree::one(dim)))
                    }));
                }
                for l in 0..sig.noises().len() {
                    next.push(modify(&t, v, &mut |node| node.join(&DecoratedTree::noise(l, dim))));
                }
                for i in 0..dim {
                    next.push(modify(&t, v, &mut |node| node.with_deco(node.deco().add(&MultiIndex::unit(dim, i)))));
                }
            }
            for s in next {
                if b.contains(&s) && seen.insert(s.clone()) {
                    frontier.push(s);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Applies `f` to the `v`-th node in preorder.
    fn modify(t: &DecoratedTree, v: usize, f: &mut dyn FnMut(&DecoratedTree) -> DecoratedTree) -> DecoratedTree {
        fn rec(t: &DecoratedTree, v: &mut isize, f: &mut dyn FnMut(&DecoratedTree) -> DecoratedTree) -> DecoratedTree {
            if *v == 0 {
                *v = -1;
                return f(t);
            }
            *v -= 1;
            let children = t.children().iter().map(|(e, c)| (e.clone(), rec(c, v, f))).collect();
            DecoratedTree::new(t.deco().clone(), t.noises().to_vec(), children)
        }
        rec(t, &mut (v as isize), f)
    }

    #[test]
    fn small_bases() {
        let sig = sig2();
        let b = GradedBasis::enumerate(&sig, Bounds::new(0, 0, 1, 0)).unwrap();
        let expected = vec![DecoratedTree::one(2), DecoratedTree::x(mi(&[0, 1])), DecoratedTree::x(mi(&[1, 0]))];
        assert_eq!(b.trees(), expected.as_slice());
        let zero = GradedBasis::enumerate(&sig, Bounds::new(0, 0, 0, 0)).unwrap();
        assert_eq!(zero.trees(), &[DecoratedTree::one(2)]);
        let one_edge = GradedBasis::enumerate(&sig, Bounds::new(1, 1, 0, 0)).unwrap();
        // 𝟏, ζ, 𝓘(𝟏), ζ𝓘(𝟏), 𝓘(ζ)
        assert_eq!(one_edge.len(), 5);
    }

    #[test]
    fn enumeration_matches_brute_force() {
        let sig = sig2();
        for b in [Bounds::new(2, 2, 1, 1), Bounds::new(3, 3, 0, 0), Bounds::new(1, 2, 2, 1), Bounds::new(2, 3, 1, 0)] {
            let fast = enumerate_trees(&sig, &b).unwrap();
            assert_eq!(fast, brute_force(&sig, &b), "bounds {b:?}");
        }
        let mut wide = Bounds::new(2, 2, 0, 0);
        wide.max_noises_per_node = 2;
        assert_eq!(enumerate_trees(&sig, &wide).unwrap(), brute_force(&sig, &wide));
    }

    #[test]
    fn cap_guard() {
        let mut b = Bounds::new(3, 4, 2, 1);
        b.cap = 50;
        assert!(matches!(enumerate_trees(&sig2(), &b), Err(Error::BasisTooLarge { cap: 50 })));
    }

    fn random_map(basis: &Arc<GradedBasis>, seed: u64) -> TabulatedMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let images = basis
            .trees()
            .iter()
            .map(|_| {
                let mut v = TreeVec::zero();
                for _ in 0..rng.gen_range(0..4) {
                    let j = rng.gen_range(0..basis.len());
                    v.add_rational(basis.trees()[j].clone(), int(rng.gen_range(-3..4)));
                }
                v
            })
            .collect();
        TabulatedMap::from_images(basis, images)
    }

    #[test]
    fn adjoint_contract_on_random_sparse_maps() {
        let basis = Arc::new(GradedBasis::enumerate(&sig2(), Bounds::new(2, 2, 1, 1)).unwrap());
        for seed in 0..5 {
            let a = random_map(&basis, seed);
            let astar = adjoint(&a, &basis).unwrap();
            for s in basis.trees() {
                for t in basis.trees() {
                    let lhs = inner_product(&astar.apply(s).unwrap(), &TreeVec::from_tree(t.clone()));
                    let rhs = inner_product(&TreeVec::from_tree(s.clone()), &a.apply(t).unwrap());
                    assert_eq!(lhs, rhs);
                }
            }
            let back = adjoint(&astar, &basis).unwrap();
            assert!(back.differences(&a).is_empty());
        }
    }

    #[test]
    fn adjoint_of_identity_and_scaling() {
        let basis = Arc::new(GradedBasis::enumerate(&sig2(), Bounds::new(2, 2, 1, 0)).unwrap());
        let id = TabulatedMap::tabulate(&Identity, &basis).unwrap();
        assert!(adjoint(&Identity, &basis).unwrap().differences(&id).is_empty());
        let double = FnMap(|t: &DecoratedTree| Ok(TreeVec::term(t.clone(), Scalar::from_int(2))));
        let d = TabulatedMap::tabulate(&double, &basis).unwrap();
        assert!(adjoint(&double, &basis).unwrap().differences(&d).is_empty());
    }

    #[test]
    fn escape_is_reported() {
        let basis = Arc::new(GradedBasis::enumerate(&sig2(), Bounds::new(1, 1, 0, 0)).unwrap());
        let grow = FnMap(|t: &DecoratedTree| Ok(TreeVec::from_tree(t.join(&xi()).join(&xi()))));
        assert!(matches!(adjoint(&grow, &basis), Err(Error::BasisEscape { .. })));
    }

    #[test]
    fn positive_trees() {
        let sig = sig2();
        assert!(is_positive(&DecoratedTree::x(mi(&[1, 0])), &sig));
        assert!(!is_positive(&xi(), &sig));
        assert!(is_positive(&planted(&[0, 0], xi()), &sig));
        assert!(!is_positive(&planted(&[0, 1], xi()), &sig));
    }
}
