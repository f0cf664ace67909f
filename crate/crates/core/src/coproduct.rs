//! The coaction `Δ`, computed as the dual of the star product:
//! `⟨σ ⋆ τ, μ⟩ = ⟨τ ⊗ σ, Δμ⟩` for `σ ∈ T_+`.
//!
//! Every pair `(τ, σ)` with `μ` in the support of `σ ⋆ τ` arises from a *root
//! cut* of `μ`: a root-connected node set becomes `τ`, the branches hanging off
//! it become the planted factors of `σ`, and node decorations are split between
//! the two. [`root_cuts`] enumerates those candidates; coefficients are then
//! read off the actual star product, so the enumeration only has to be a
//! superset.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::Zero;

use rayon::prelude::*;

use crate::basis::{is_positive, GradedBasis};
use crate::grafting::star;
use crate::scalar::Scalar;
use crate::tree::{DecoratedTree, EdgeLabel, MultiIndex, Signature};
use crate::treevec::TensorVec;

/// One way of splitting a tree at its root: `inner` keeps the root.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct RootCut {
    pub inner: DecoratedTree,
    pub outer: DecoratedTree,
}

struct Partial {
    inner: DecoratedTree,
    raise: MultiIndex,
    noises: Vec<EdgeLabel>,
    factors: Vec<(EdgeLabel, DecoratedTree)>,
}

/// Candidate `(inner, outer)` pairs with `μ ∈ supp(outer ⋆ inner)`.
///
/// `shifts(a, σ)` lists the derivative increments `m` allowed when the branch
/// `𝓘_a(σ)` is cut off (the outer factor then carries `a + m`).
/// `outer_noises` allows noises at cut nodes to move into the outer factor.
pub fn root_cuts(
    mu: &DecoratedTree,
    outer_noises: bool,
    shifts: &dyn Fn(&EdgeLabel, &DecoratedTree) -> Vec<MultiIndex>,
) -> Vec<RootCut> {
    let mut set = BTreeSet::new();
    for p in partial_cuts(mu, outer_noises, shifts) {
        let outer = DecoratedTree::new(p.raise, p.noises, p.factors);
        set.insert(RootCut { inner: p.inner, outer });
    }
    set.into_iter().collect()
}

fn partial_cuts(
    node: &DecoratedTree,
    outer_noises: bool,
    shifts: &dyn Fn(&EdgeLabel, &DecoratedTree) -> Vec<MultiIndex>,
) -> Vec<Partial> {
    let dim = node.dim();
    // per child: either a branch (with each allowed shift) or kept inside.
    enum Choice {
        Branch(EdgeLabel, MultiIndex),
        Keep(Vec<Partial>),
    }
    let mut per_child: Vec<Vec<Choice>> = Vec::new();
    for (e, c) in node.children() {
        let mut opts: Vec<Choice> = shifts(e, c).into_iter().map(|m| Choice::Branch(e.clone(), m)).collect();
        opts.push(Choice::Keep(partial_cuts(c, outer_noises, shifts)));
        per_child.push(opts);
    }

    struct Acc {
        kids: Vec<(EdgeLabel, DecoratedTree)>,
        lowered: MultiIndex,
        raise: MultiIndex,
        noises: Vec<EdgeLabel>,
        factors: Vec<(EdgeLabel, DecoratedTree)>,
    }
    let mut accs = vec![Acc {
        kids: vec![],
        lowered: MultiIndex::zeros(dim),
        raise: MultiIndex::zeros(dim),
        noises: vec![],
        factors: vec![],
    }];
    for ((e, c), opts) in node.children().iter().zip(per_child.iter()) {
        let mut next = Vec::new();
        for acc in &accs {
            for opt in opts {
                match opt {
                    Choice::Branch(label, m) => {
                        let mut factors = acc.factors.clone();
                        factors.push((label.with_deriv(label.deriv.add(m)), c.clone()));
                        next.push(Acc {
                            kids: acc.kids.clone(),
                            lowered: acc.lowered.add(m),
                            raise: acc.raise.clone(),
                            noises: acc.noises.clone(),
                            factors,
                        });
                    }
                    Choice::Keep(parts) => {
                        for p in parts {
                            let mut kids = acc.kids.clone();
                            kids.push((e.clone(), p.inner.clone()));
                            let mut noises = acc.noises.clone();
                            noises.extend(p.noises.iter().cloned());
                            let mut factors = acc.factors.clone();
                            factors.extend(p.factors.iter().cloned());
                            next.push(Acc {
                                kids,
                                lowered: acc.lowered.clone(),
                                raise: acc.raise.add(&p.raise),
                                noises,
                                factors,
                            });
                        }
                    }
                }
            }
        }
        accs = next;
    }

    let noise_splits: Vec<(Vec<EdgeLabel>, Vec<EdgeLabel>)> = if outer_noises {
        let n = node.noises().len();
        (0..1u32 << n)
            .map(|mask| {
                let (mut inn, mut out) = (vec![], vec![]);
                for (i, l) in node.noises().iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        out.push(l.clone())
                    } else {
                        inn.push(l.clone())
                    }
                }
                (inn, out)
            })
            .collect()
    } else {
        vec![(node.noises().to_vec(), vec![])]
    };

    let mut out = Vec::new();
    for acc in accs {
        for r in node.deco().below() {
            let inner_deco = node.deco().checked_sub(&r).expect("r ≤ n_v").add(&acc.lowered);
            for (inn, outn) in &noise_splits {
                let mut noises = acc.noises.clone();
                noises.extend(outn.iter().cloned());
                out.push(Partial {
                    inner: DecoratedTree::new(inner_deco.clone(), inn.clone(), acc.kids.clone()),
                    raise: acc.raise.add(&r),
                    noises,
                    factors: acc.factors.clone(),
                });
            }
        }
    }
    out
}

/// Shifts `m` keeping `deg 𝓘_{a+m}(σ) > 0`.
pub fn positive_shifts(sig: &Signature) -> impl Fn(&EdgeLabel, &DecoratedTree) -> Vec<MultiIndex> + '_ {
    move |a, s| {
        let room = a.degree(sig) + s.degree(sig);
        if room <= Zero::zero() {
            return vec![];
        }
        // |m|_𝔰 < room and every 𝔰_i ≥ 1 bound |m|_1.
        let max_total = room.ceil().to_integer().max(0) as u32;
        MultiIndex::all_up_to(sig.dimension(), max_total).into_iter().filter(|m| sig.scaled(m) < room).collect()
    }
}

/// `Δμ = Σ (⟨σ⋆τ, μ⟩ / (S(τ)S(σ))) τ ⊗ σ` over `σ ∈ T_+`.
pub fn coproduct_dual(mu: &DecoratedTree, sig: &Signature) -> TensorVec {
    let shifts = positive_shifts(sig);
    let smu = mu.symmetry_factor();
    let mut out = TensorVec::zero();
    for cut in root_cuts(mu, false, &shifts) {
        if !is_positive(&cut.outer, sig) {
            continue;
        }
        let c = star(&cut.outer, &cut.inner).coeff(mu);
        if c.is_zero() {
            continue;
        }
        let w = smu / (cut.inner.symmetry_factor() * cut.outer.symmetry_factor());
        out.add_term(cut.inner, cut.outer, c.scale(&w));
    }
    out
}

/// Outcome of [`check_duality`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualityReport {
    /// Number of nonzero `(σ, τ, μ)` entries compared.
    pub checked: usize,
    /// First mismatch as `(σ, τ, μ)`.
    pub failure: Option<Mismatch>,
}

/// A mismatching entry `(σ, τ, μ)` of the duality check.
pub type Mismatch = (DecoratedTree, DecoratedTree, DecoratedTree);

/// `⟨σ⋆τ, μ⟩ = ⟨τ⊗σ, Δμ⟩` for all `σ ∈ T_+` and `τ, μ` in the basis. Only
/// entries nonzero on at least one side are visited.
pub fn check_duality(basis: &GradedBasis) -> DualityReport {
    let sig = basis.signature();
    let deltas: Vec<TensorVec> = basis.trees().par_iter().map(|m| coproduct_dual(m, sig)).collect();
    let mut index: HashMap<(&DecoratedTree, &DecoratedTree), Vec<(usize, Scalar)>> = HashMap::new();
    for (i, d) in deltas.iter().enumerate() {
        for ((t, s), c) in d.iter() {
            index.entry((t, s)).or_default().push((i, c.clone()));
        }
    }
    // Noise and edge counts add up under ⋆, so other pairs are zero on both sides.
    let b = basis.bounds();
    let mut by_size: BTreeMap<(usize, usize), Vec<&DecoratedTree>> = BTreeMap::new();
    for t in basis.trees() {
        by_size.entry((t.noise_count(), t.edge_count())).or_default().push(t);
    }
    let positives: Vec<&DecoratedTree> = basis.trees().iter().filter(|s| is_positive(s, sig)).collect();
    let compare = |s: &DecoratedTree, t: &DecoratedTree| {
        let prod = star(s, t);
        let st = s.symmetry_factor() * t.symmetry_factor();
        let mut seen = 0;
        let from_delta: HashMap<usize, &Scalar> =
            index.get(&(t, s)).map(|v| v.iter().map(|(i, c)| (*i, c)).collect()).unwrap_or_default();
        for (mu, c) in prod.iter() {
            let Some(i) = basis.index_of(mu) else { continue };
            seen += 1;
            let lhs = c.scale(&mu.symmetry_factor());
            let rhs = from_delta.get(&i).map(|d| d.scale(&st)).unwrap_or_else(Scalar::zero);
            if lhs != rhs {
                return (seen, Some(mu.clone()));
            }
        }
        for (&i, d) in &from_delta {
            let mu = &basis.trees()[i];
            if prod.coeff(mu).is_zero() && !d.is_zero() {
                return (seen, Some(mu.clone()));
            }
        }
        (seen, None)
    };
    let results: Vec<(usize, Option<Mismatch>)> = positives
        .par_iter()
        .map(|&s| {
            let (n, e) = (s.noise_count(), s.edge_count());
            let mut seen = 0;
            for (_, ts) in by_size.iter().filter(|((tn, te), _)| n + tn <= b.max_noises && e + te <= b.max_edges) {
                for &t in ts {
                    let (k, failure) = compare(s, t);
                    seen += k;
                    if let Some(mu) = failure {
                        return (seen, Some((s.clone(), t.clone(), mu)));
                    }
                }
            }
            (seen, None)
        })
        .collect();
    DualityReport { checked: results.iter().map(|r| r.0).sum(), failure: results.into_iter().find_map(|r| r.1) }
}

/// `⟨τ⊗σ, Δμ⟩` read off a computed coproduct.
pub fn pair_with_coproduct(delta: &TensorVec, tau: &DecoratedTree, sigma: &DecoratedTree) -> Scalar {
    delta.coeff(tau, sigma).scale(&(tau.symmetry_factor() * sigma.symmetry_factor()))
}
