//! Deformed grafting `σ ↷_a τ`, decoration raising `↑^k_B`, the planted
//! multi-graft and the star product.
//!
//! All of these work on a mutable planar copy of `τ` (an [`Arena`]) so that
//! grafts always target nodes of the original tree, never nodes brought in
//! by an earlier graft.

use std::rc::Rc;

use num_traits::One;

use crate::error::{Error, Result};
use crate::scalar::{int, Rational};
use crate::tree::{DecoratedTree, EdgeLabel, MultiIndex, PlanarTree};
use crate::treevec::TreeVec;

/// `∏ 𝓘_{a_i}(σ_i)`; a noise-typed pair must carry `𝟏`.
pub type PlantedForest = Vec<(EdgeLabel, DecoratedTree)>;

#[derive(Clone)]
struct Node {
    deco: MultiIndex,
    noises: Vec<EdgeLabel>,
    kids: Vec<(EdgeLabel, usize)>,
    grafted: Vec<(EdgeLabel, Rc<DecoratedTree>)>,
}

/// Planar working copy of a tree, nodes in preorder.
#[derive(Clone)]
pub struct Arena {
    nodes: Vec<Node>,
}

impl Arena {
    pub fn from_tree(t: &DecoratedTree) -> Self {
        let mut nodes = Vec::with_capacity(t.node_count());
        fn rec(t: &DecoratedTree, nodes: &mut Vec<Node>) -> usize {
            let id = nodes.len();
            nodes.push(Node { deco: t.deco().clone(), noises: t.noises().to_vec(), kids: vec![], grafted: vec![] });
            for (e, c) in t.children() {
                let cid = rec(c, nodes);
                nodes[id].kids.push((e.clone(), cid));
            }
            id
        }
        rec(t, &mut nodes);
        Arena { nodes }
    }

    pub fn from_planar(t: &PlanarTree) -> Self {
        let mut nodes = Vec::new();
        fn rec(t: &PlanarTree, nodes: &mut Vec<Node>) -> usize {
            let id = nodes.len();
            nodes.push(Node { deco: t.deco.clone(), noises: t.noises.clone(), kids: vec![], grafted: vec![] });
            for (e, c) in &t.children {
                let cid = rec(c, nodes);
                nodes[id].kids.push((e.clone(), cid));
            }
            id
        }
        rec(t, &mut nodes);
        Arena { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn deco(&self, v: usize) -> &MultiIndex {
        &self.nodes[v].deco
    }

    pub fn to_tree(&self) -> DecoratedTree {
        self.build(0)
    }

    fn build(&self, v: usize) -> DecoratedTree {
        let n = &self.nodes[v];
        let mut children: Vec<(EdgeLabel, DecoratedTree)> =
            n.kids.iter().map(|(e, c)| (e.clone(), self.build(*c))).collect();
        children.extend(n.grafted.iter().map(|(e, t)| (e.clone(), (**t).clone())));
        DecoratedTree::new(n.deco.clone(), n.noises.clone(), children)
    }

    fn attach(&mut self, v: usize, edge: EdgeLabel, sigma: &Rc<DecoratedTree>) {
        if edge.is_noise() {
            self.nodes[v].noises.push(edge);
        } else {
            self.nodes[v].grafted.push((edge, Rc::clone(sigma)));
        }
    }

    /// Every way of grafting `σ` along `a` onto one node, as (coefficient, arena).
    fn graft_terms(&self, sigma: &Rc<DecoratedTree>, a: &EdgeLabel) -> Vec<(i128, Arena)> {
        let mut out = Vec::new();
        for v in 0..self.nodes.len() {
            let n = &self.nodes[v].deco;
            for m in n.below() {
                let Some(p) = a.deriv.checked_sub(&m) else { continue };
                let mut next = self.clone();
                next.nodes[v].deco = n.checked_sub(&m).expect("m ≤ n_v");
                next.attach(v, a.with_deriv(p), sigma);
                out.push((n.binomial(&m), next));
            }
        }
        out
    }

    /// `↑^k_B` on this arena: every split `k = Σ_{v∈B} k_v`, weighted by the
    /// multinomial `k! / ∏ k_v!`.
    fn raise_terms(&self, nodes: &[usize], k: &MultiIndex) -> Vec<(Rational, Arena)> {
        let kf = k.factorial();
        k.compositions(nodes.len())
            .into_iter()
            .map(|parts| {
                let mut next = self.clone();
                let mut w = kf;
                for (&v, part) in nodes.iter().zip(parts.iter()) {
                    next.nodes[v].deco = next.nodes[v].deco.add(part);
                    w /= part.factorial();
                }
                (w, next)
            })
            .collect()
    }
}

fn check_noise_pair(a: &EdgeLabel, sigma: &DecoratedTree) -> Result<()> {
    if a.is_noise() && !sigma.is_one() {
        return Err(Error::NoiseGraftNonTrivial(format!("{sigma:?}")));
    }
    Ok(())
}

/// `↑^k_B τ` with `B` given as preorder indices of the canonical representative.
pub fn raise(tau: &DecoratedTree, nodes: &[usize], k: &MultiIndex) -> TreeVec {
    let arena = Arena::from_tree(tau);
    let mut out = TreeVec::zero();
    for (c, a) in arena.raise_terms(nodes, k) {
        out.add_rational(a.to_tree(), c);
    }
    out
}

/// `↑^k τ = ↑^k_{N_τ} τ`
pub fn raise_all(tau: &DecoratedTree, k: &MultiIndex) -> TreeVec {
    let all: Vec<usize> = (0..tau.node_count()).collect();
    raise(tau, &all, k)
}

/// `σ ↷_a τ`
pub fn graft(sigma: &DecoratedTree, a: &EdgeLabel, tau: &DecoratedTree) -> Result<TreeVec> {
    graft_arena(sigma, a, &Arena::from_tree(tau))
}

/// `σ ↷_a τ` computed from a given planar representative of `τ`.
pub fn graft_planar(sigma: &DecoratedTree, a: &EdgeLabel, tau: &PlanarTree) -> Result<TreeVec> {
    graft_arena(sigma, a, &Arena::from_planar(tau))
}

fn graft_arena(sigma: &DecoratedTree, a: &EdgeLabel, arena: &Arena) -> Result<TreeVec> {
    check_noise_pair(a, sigma)?;
    let mut out = TreeVec::zero();
    for (c, t) in arena.graft_terms(&Rc::new(sigma.clone()), a) {
        out.add_rational(t.to_tree(), int(c));
    }
    Ok(out)
}

/// `σ ↷_a τ` extended bilinearly.
pub fn graft_vec(sigma: &TreeVec, a: &EdgeLabel, tau: &TreeVec) -> Result<TreeVec> {
    let mut out = TreeVec::zero();
    for (s, cs) in sigma.iter() {
        for (t, ct) in tau.iter() {
            out.add_scaled(&graft(s, a, t)?, &(cs * ct));
        }
    }
    Ok(out)
}

/// Grafts every planted factor independently onto the original nodes of the arena.
fn multi_graft_arena(forest: &[(EdgeLabel, DecoratedTree)], arena: Arena) -> Result<Vec<(Rational, Arena)>> {
    for (a, s) in forest {
        check_noise_pair(a, s)?;
    }
    let mut states = vec![(Rational::one(), arena)];
    for (a, s) in forest {
        let s = Rc::new(s.clone());
        let mut next = Vec::with_capacity(states.len() * 2);
        for (c, st) in &states {
            for (b, t) in st.graft_terms(&s, a) {
                next.push((c * int(b), t));
            }
        }
        states = next;
    }
    Ok(states)
}

/// `∏ 𝓘_{a_i}(σ_i) ↷ τ`
pub fn multi_graft(forest: &[(EdgeLabel, DecoratedTree)], tau: &DecoratedTree) -> Result<TreeVec> {
    let mut out = TreeVec::zero();
    for (c, a) in multi_graft_arena(forest, Arena::from_tree(tau))? {
        out.add_rational(a.to_tree(), c);
    }
    Ok(out)
}

/// Splits `σ = X^k ∏ ζ ∏ 𝓘_{a_i}(σ_i)` into `k` and the planted forest, root
/// noises turned into noise-typed pairs with `𝟏` on the left.
pub fn star_factors(sigma: &DecoratedTree) -> (MultiIndex, PlantedForest) {
    let one = DecoratedTree::one(sigma.dim());
    let mut forest: PlantedForest = sigma.noises().iter().map(|n| (n.clone(), one.clone())).collect();
    forest.extend(sigma.children().iter().cloned());
    (sigma.deco().clone(), forest)
}

/// `σ ⋆ τ = ↑^k_{N_τ}(∏ 𝓘_{a_i}(σ_i) ↷ τ)`
///
/// With the multinomial weights in `↑^k` this product is associative; with
/// unit weights `(X𝓘(𝟏) ⋆ X𝓘(𝟏)) ⋆ 𝓘(𝟏)` and `X𝓘(𝟏) ⋆ (X𝓘(𝟏) ⋆ 𝓘(𝟏))` differ.
pub fn star(sigma: &DecoratedTree, tau: &DecoratedTree) -> TreeVec {
    if sigma.is_one() {
        return TreeVec::from_tree(tau.clone());
    }
    let (k, forest) = star_factors(sigma);
    let arena = Arena::from_tree(tau);
    let original: Vec<usize> = (0..arena.len()).collect();
    let grafted = multi_graft_arena(&forest, arena).expect("star factors are well formed");
    let mut out = TreeVec::zero();
    for (c, a) in grafted {
        if k.is_zero() {
            out.add_rational(a.to_tree(), c);
            continue;
        }
        for (w, r) in a.raise_terms(&original, &k) {
            out.add_rational(r.to_tree(), c * w);
        }
    }
    out
}

pub fn star_vec(sigma: &TreeVec, tau: &TreeVec) -> TreeVec {
    sigma.bilinear(tau, star)
}
