//! Search for preparation maps that are not strong.
//!
//! On a basis `B`, write `R = Id + N` with `N μ = Σ x_{μν} ν` over pairs
//! allowed by the degree and noise conditions. The commutation axiom
//! `(R⊗id)Δ = ΔR` on `B` and the strong right-morphism identity (for the
//! extension of `R` by the identity off `B`, projected onto `B`) are both
//! linear in `x`. Comparing the dimensions of their solution spaces tells
//! whether a non-strong preparation map exists at this truncation; nothing
//! is asserted either way.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::basis::{GradedBasis, TabulatedMap};
use crate::coproduct::coproduct_dual;
use crate::error::Result;
use crate::grafting::star;
use crate::scalar::Rational;
use crate::tree::DecoratedTree;
use crate::treevec::TreeVec;

/// Row-reduced sparse system over the rationals.
#[derive(Default)]
struct Echelon {
    /// Pivot rows in insertion order; each is reduced against earlier pivots.
    rows: Vec<(usize, BTreeMap<usize, Rational>)>,
    pivot_of: HashMap<usize, usize>,
}

impl Echelon {
    fn insert(&mut self, mut row: BTreeMap<usize, Rational>) {
        loop {
            let hit = row.keys().find(|c| self.pivot_of.contains_key(c)).copied();
            let Some(c) = hit else { break };
            let f = row[&c];
            let (_, prow) = &self.rows[self.pivot_of[&c]];
            for (k, v) in prow {
                let e = row.entry(*k).or_insert_with(Rational::zero);
                *e -= f * v;
                if e.is_zero() {
                    row.remove(k);
                }
            }
        }
        let Some((&p, lead)) = row.iter().next() else { return };
        let inv = lead.recip();
        for v in row.values_mut() {
            *v *= &inv;
        }
        self.pivot_of.insert(p, self.rows.len());
        self.rows.push((p, row));
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    /// One kernel vector per free column.
    fn kernel(&self, n: usize) -> Vec<Vec<Rational>> {
        (0..n)
            .filter(|c| !self.pivot_of.contains_key(c))
            .map(|free| {
                let mut x = vec![Rational::zero(); n];
                x[free] = Rational::one();
                for (p, row) in self.rows.iter().rev() {
                    let s: Rational = row.iter().filter(|(c, _)| *c != p).map(|(c, v)| v * x[*c]).sum();
                    x[*p] = -s;
                }
                x
            })
            .collect()
    }
}

/// Result of [`search_non_strong`].
#[derive(Clone, Debug)]
pub struct SearchReport {
    pub basis_size: usize,
    /// Entries `x_{μν}` allowed by the degree and noise conditions.
    pub unknowns: usize,
    /// Dimension of the space of preparation maps `R − Id` on the basis.
    pub preparation_dim: usize,
    /// Dimension of its strong subspace.
    pub strong_dim: usize,
    /// A preparation map on the basis that is not strong, if one was found.
    pub witness: Option<TabulatedMap>,
}

type Column = BTreeMap<(usize, DecoratedTree, DecoratedTree), Rational>;

/// Builds both linear systems and compares their solution spaces.
pub fn search_non_strong(basis: &Arc<GradedBasis>) -> Result<SearchReport> {
    let sig = basis.signature();
    let trees = basis.trees();
    let unknowns: Vec<(usize, usize)> = trees
        .iter()
        .enumerate()
        .flat_map(|(i, mu)| {
            trees.iter().enumerate().filter_map(move |(j, nu)| {
                (nu.noise_count() < mu.noise_count() && nu.degree(sig) >= mu.degree(sig)).then_some((i, j))
            })
        })
        .collect();
    let n = unknowns.len();
    let deltas: Vec<_> = trees.par_iter().map(|t| coproduct_dual(t, sig)).collect();
    let one = DecoratedTree::one(sig.dimension());

    // Δ-commutation residual of R = Id + E_{μν}: rows keyed by (μ', left, right).
    let delta_cols: Vec<Column> = unknowns
        .par_iter()
        .map(|&(i, j)| {
            let mut col = Column::new();
            let mut add = |key: (usize, DecoratedTree, DecoratedTree), v: Rational| {
                let e = col.entry(key.clone()).or_insert_with(Rational::zero);
                *e += v;
                if e.is_zero() {
                    col.remove(&key);
                }
            };
            for ((l, r), c) in deltas[j].iter() {
                add((i, l.clone(), r.clone()), *c.as_const().expect("rational"));
            }
            for (k, d) in deltas.iter().enumerate() {
                for ((l, r), c) in d.iter() {
                    if l == &trees[i] {
                        add((k, trees[j].clone(), r.clone()), -*c.as_const().expect("rational"));
                    }
                }
            }
            col
        })
        .collect();

    // Strong residual for R* = Id + E*_{μν}, E*ν = (S(ν)/S(μ)) μ, on pairs
    // (σ, τ) of basis trees, projected onto the basis.
    let pairs: Vec<(usize, usize)> = (0..trees.len()).flat_map(|a| (0..trees.len()).map(move |b| (a, b))).collect();
    let products: Vec<TreeVec> = pairs.par_iter().map(|&(a, b)| star(&trees[a], &trees[b])).collect();
    let strong_cols: Vec<Column> = unknowns
        .par_iter()
        .map(|&(i, j)| {
            let (mu, nu) = (&trees[i], &trees[j]);
            let w = nu.symmetry_factor() / mu.symmetry_factor();
            let mut col = Column::new();
            for (p, &(a, b)) in pairs.iter().enumerate() {
                let mut res = TreeVec::zero();
                let c = products[p].coeff(nu);
                if !c.is_zero() {
                    res.add_term(mu.clone(), c.scale(&w));
                }
                if b == j {
                    res.add_scaled(&star(&trees[a], mu), &crate::Scalar::from(-w));
                }
                for (t, c) in res.iter() {
                    if basis.contains(t) {
                        col.insert((p, t.clone(), one.clone()), *c.as_const().expect("rational"));
                    }
                }
            }
            col
        })
        .collect();

    let to_rows = |cols: &[Column]| -> Vec<BTreeMap<usize, Rational>> {
        let mut rows: BTreeMap<&(usize, DecoratedTree, DecoratedTree), BTreeMap<usize, Rational>> = BTreeMap::new();
        for (k, col) in cols.iter().enumerate() {
            for (key, v) in col {
                rows.entry(key).or_default().insert(k, *v);
            }
        }
        rows.into_values().collect()
    };
    let mut prep = Echelon::default();
    for row in to_rows(&delta_cols) {
        prep.insert(row);
    }
    let kernel = prep.kernel(n);
    let preparation_dim = n - prep.rank();
    let strong_rows = to_rows(&strong_cols);
    let mut both = Echelon::default();
    for row in to_rows(&delta_cols).into_iter().chain(strong_rows.iter().cloned()) {
        both.insert(row);
    }
    let strong_dim = n - both.rank();

    let violates =
        |x: &[Rational]| strong_rows.iter().any(|row| !row.iter().map(|(c, v)| v * x[*c]).sum::<Rational>().is_zero());
    let witness = if strong_dim < preparation_dim {
        kernel.iter().find(|x| violates(x)).map(|x| {
            let mut images: Vec<TreeVec> = trees.iter().map(|t| TreeVec::from_tree(t.clone())).collect();
            for (k, &(i, j)) in unknowns.iter().enumerate() {
                if !x[k].is_zero() {
                    images[i].add_rational(trees[j].clone(), x[k]);
                }
            }
            TabulatedMap::from_images(basis, images)
        })
    } else {
        None
    };
    Ok(SearchReport { basis_size: trees.len(), unknowns: n, preparation_dim, strong_dim, witness })
}
