//! The renormalized nonlinearity as an identity between tree series, and the
//! counterterms of a BPHZ character.
//!
//! With `U_b = Σ_k Z_{b+k} X^k/k! + Σ_τ F_{j(b)}(τ)/S(τ) 𝓘_b(τ)` the lifted
//! solution component for the variable `b`,
//!
//! ```text
//! Σ_τ F_i(R*τ)/S(τ) τ  =  Σ_l  Σ_β  ∏_b (U_b − Z_b 𝟏)^{β_b}/β_b! · D^β F_i(R*ζ_l) · ζ_l
//! ```
//!
//! is compared coefficient by coefficient on every tree of a bounded basis.
//! Bounded bases contain every root piece (planted branch, root monomial) of
//! their trees, so truncating `U_b` to the basis leaves each coefficient exact.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::basis::{GradedBasis, TreeMap};
use crate::check::Check;
use crate::diff::{d_a, upsilon, upsilon_vec, DiffExpr, DiffVar};
use crate::error::{Error, Result};
use crate::renorm::{BphzStar, Character};
use crate::rules::EquationSpec;
use crate::scalar::int;
use crate::tree::{DecoratedTree, EdgeLabel, MultiIndex};
use crate::treevec::TreeVec;

type Series = BTreeMap<DecoratedTree, DiffExpr>;

fn add_into(s: &mut Series, t: DecoratedTree, c: DiffExpr) {
    if c.is_zero() {
        return;
    }
    let e = s.entry(t.clone()).or_insert_with(DiffExpr::zero);
    e.add_assign(&c);
    if e.is_zero() {
        s.remove(&t);
    }
}

/// Product of two series, dropping trees outside the basis bounds.
fn product(a: &Series, b: &Series, basis: &GradedBasis) -> Series {
    let bd = basis.bounds();
    let mut out = Series::new();
    for (x, cx) in a {
        for (y, cy) in b {
            if x.noise_count() + y.noise_count() > bd.max_noises
                || x.edge_count() + y.edge_count() > bd.max_edges
                || x.deco_total() + y.deco_total() > bd.max_deco
            {
                continue;
            }
            let t = x.join(y);
            if basis.contains(&t) {
                add_into(&mut out, t, cx.mul(cy));
            }
        }
    }
    out
}

/// `U_b − Z_b 𝟏` truncated to the basis.
fn lifted_variable(spec: &EquationSpec, b: &DiffVar, basis: &GradedBasis) -> Series {
    let sig = spec.signature();
    let nl = spec.nonlinearity();
    let bd = basis.bounds();
    let mut out = Series::new();
    for k in MultiIndex::all_up_to(sig.dimension(), bd.max_deco) {
        if k.is_zero() {
            continue;
        }
        let c = DiffExpr::var(b.shifted(&k)).scale_rational(&k.factorial().recip());
        add_into(&mut out, DecoratedTree::x(k), c);
    }
    let label = EdgeLabel::kernel(b.kernel, b.deriv.clone());
    let j = nl.component_of_kernel(b.kernel);
    for t in basis.trees() {
        let planted = DecoratedTree::planted(label.clone(), t.clone());
        if !basis.contains(&planted) {
            continue;
        }
        let f = upsilon(nl, j, t);
        if !f.is_zero() {
            add_into(&mut out, planted, f.scale_rational(&t.symmetry_factor().recip()));
        }
    }
    out
}

/// Outcome of [`verify_renormalized_series`].
#[derive(Clone, Debug)]
pub struct SeriesReport {
    pub component: usize,
    /// Trees compared.
    pub window: usize,
    /// Trees with a nonzero coefficient.
    pub nonzero: usize,
    pub check: Check,
}

/// Compares both sides of the renormalized series identity for component
/// `component` on every tree of `basis`. `rstar` is the adjoint of a strong
/// preparation map.
pub fn verify_renormalized_series(
    spec: &EquationSpec,
    rstar: &dyn TreeMap,
    component: usize,
    basis: &GradedBasis,
) -> Result<SeriesReport> {
    let sig = spec.signature();
    let nl = spec.nonlinearity();
    let bd = basis.bounds();
    let dim = sig.dimension();

    let left: Vec<DiffExpr> = basis
        .trees()
        .par_iter()
        .map(|t| Ok(upsilon_vec(nl, component, &rstar.apply(t)?).scale_rational(&t.symmetry_factor().recip())))
        .collect::<Result<_>>()?;

    let mut right = Series::new();
    let mut lifted: HashMap<DiffVar, Series> = HashMap::new();
    let max_factors = bd.max_edges + bd.max_deco as usize;
    for &l in &spec.components()[component].noises {
        let zeta = if l == 0 { DecoratedTree::one(dim) } else { DecoratedTree::noise(l - 1, dim) };
        let g = upsilon_vec(nl, component, &rstar.apply(&zeta)?);
        if g.is_zero() {
            continue;
        }
        let vars = g.active_vars();
        for v in &vars {
            lifted.entry(v.clone()).or_insert_with(|| lifted_variable(spec, v, basis));
        }
        let mut unit = Series::new();
        unit.insert(DecoratedTree::one(dim), DiffExpr::one());
        // Multisets of variable indices, grown in non-decreasing order:
        // (last index, its multiplicity, ∏ (U−Z)^β/β!, D^β G).
        let mut layer: Vec<(usize, u32, Series, DiffExpr)> = vec![(0, 0, unit, g.clone())];
        for _ in 0..=max_factors {
            let mut next = Vec::new();
            for (last, mult, pw, dg) in &layer {
                for (s, c) in pw {
                    let t = if l == 0 { s.clone() } else { s.join(&zeta) };
                    if basis.contains(&t) {
                        add_into(&mut right, t, c.mul(dg));
                    }
                }
                for (idx, v) in vars.iter().enumerate().skip(*last) {
                    let d = d_a(v, dg);
                    if d.is_zero() {
                        continue;
                    }
                    let m = if idx == *last && *mult > 0 { mult + 1 } else { 1 };
                    let mut p = product(pw, &lifted[v], basis);
                    if p.is_empty() {
                        continue;
                    }
                    let inv = int(m as i128).recip();
                    for c in p.values_mut() {
                        *c = c.scale_rational(&inv);
                    }
                    next.push((idx, m, p, d));
                }
            }
            layer = next;
        }
    }

    let items: Vec<usize> = (0..basis.len()).collect();
    let nonzero = items.iter().filter(|&&i| !left[i].is_zero() || right.contains_key(&basis.trees()[i])).count();
    if nonzero == 0 {
        return Err(Error::EmptyWindow);
    }
    let check = Check::run(&format!("renormalized series, component {}", component + 1), &items, |&i| {
        let t = &basis.trees()[i];
        let r = right.get(t).cloned().unwrap_or_else(DiffExpr::zero);
        (left[i] != r)
            .then(|| format!("coefficient of {}: {} vs {}", t.to_text(sig), left[i].to_text(sig), r.to_text(sig)))
    });
    Ok(SeriesReport { component, window: basis.len(), nonzero, check })
}

/// Counterterms of a character for one component.
#[derive(Clone, Debug)]
pub struct Counterterms {
    pub component: usize,
    /// `(τ, ℓ(τ) F_i(τ)/S(τ))` over negative trees, zero entries left out.
    pub entries: Vec<(DecoratedTree, DiffExpr)>,
    /// Sum of the entries.
    pub total: DiffExpr,
    /// `F_i((R* − Id)𝟏)`.
    pub drift: DiffExpr,
    /// `total == drift`.
    pub equivalence: Check,
    /// `F_i(R*ζ_l) = F_i(ζ_l)` for every noise `l ≠ 0`: no counterterm
    /// multiplies a noise.
    pub noise_free: Check,
    /// `(l, F_i((R* − Id)ζ_l))` for the noises where it is nonzero.
    pub noise_terms: Vec<(usize, DiffExpr)>,
}

pub fn counterterms(spec: &EquationSpec, character: &Character, component: usize) -> Result<Counterterms> {
    let sig = spec.signature();
    let nl = spec.nonlinearity();
    let dim = sig.dimension();
    let mut entries = Vec::new();
    let mut total = DiffExpr::zero();
    for (t, v) in character.support() {
        let e = upsilon(nl, component, t).scale(&v.scale(&t.symmetry_factor().recip()));
        if !e.is_zero() {
            total.add_assign(&e);
            entries.push((t.clone(), e));
        }
    }
    let rstar = BphzStar::new(character.clone());
    let one = DecoratedTree::one(dim);
    let drift = upsilon_vec(nl, component, &rstar.apply(&one)?.sub(&TreeVec::from_tree(one.clone())));
    let equivalence = Check::from_parts(
        "sum of counterterms = F((R* - Id) 1)",
        1,
        (total != drift).then(|| format!("{} vs {}", total.to_text(sig), drift.to_text(sig))),
    );
    let mut noise_terms = Vec::new();
    for l in 1..=sig.noises().len() {
        let z = DecoratedTree::noise(l - 1, dim);
        let d = upsilon_vec(nl, component, &rstar.apply(&z)?.sub(&TreeVec::from_tree(z.clone())));
        if !d.is_zero() {
            noise_terms.push((l, d));
        }
    }
    let noise_free = Check::from_parts(
        "F(R* zeta_l) = F(zeta_l) for every noise",
        sig.noises().len(),
        noise_terms.first().map(|(l, d)| format!("F((R* - Id) xi_{l}) = {}", d.to_text(sig))),
    );
    Ok(Counterterms { component, entries, total, drift, equivalence, noise_free, noise_terms })
}

/// The formal character with one symbol per negative tree of `spec`.
pub fn formal_character(spec: &EquationSpec) -> Result<Character> {
    Ok(Character::formal(spec.negative_basis()?.trees()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Bounds, FnMap, Identity};
    use crate::renorm::test_support::{gkpz_one_point, LOOP};
    use crate::tree::TypeRef;
    use crate::{parse_tree, Scalar};

    fn basis(spec: &EquationSpec, b: Bounds) -> GradedBasis {
        GradedBasis::enumerate(spec.signature(), b).unwrap()
    }

    #[test]
    fn identity_series_holds() {
        for name in ["gkpz", "phi4-like", "gpam2d"] {
            let spec = EquationSpec::preset(name).unwrap();
            let b = basis(&spec, Bounds::new(2, 2, 1, 1));
            for i in 0..spec.components().len() {
                let rep = verify_renormalized_series(&spec, &Identity, i, &b).unwrap();
                assert!(rep.check.passed(), "{name}: {}", rep.check);
                assert!(rep.nonzero > 0);
            }
        }
    }

    #[test]
    fn bphz_series_holds() {
        let (spec, ch) = gkpz_one_point();
        let b = basis(&spec, Bounds::new(3, 3, 1, 1));
        let rep = verify_renormalized_series(&spec, &BphzStar::new(ch), 0, &b).unwrap();
        assert!(rep.check.passed(), "{}", rep.check);

        let spec = EquationSpec::preset("phi4-like").unwrap();
        let negs = spec.negative_basis().unwrap();
        let t = negs.trees().iter().find(|t| t.noise_count() == 2).unwrap().clone();
        let ch = Character::one_point(negs.trees(), t, Scalar::symbol("c")).unwrap();
        let b = basis(&spec, Bounds::new(3, 3, 1, 0));
        let rep = verify_renormalized_series(&spec, &BphzStar::new(ch), 0, &b).unwrap();
        assert!(rep.check.passed(), "{}", rep.check);
    }

    #[test]
    fn non_morphism_breaks_the_series() {
        let (spec, _) = gkpz_one_point();
        let b = basis(&spec, Bounds::new(2, 2, 1, 1));
        let doubled = FnMap(|t: &DecoratedTree| {
            let v = TreeVec::from_tree(t.clone());
            Ok(if t.edge_count() == 1 { v.scale(&Scalar::from_int(2)) } else { v })
        });
        let rep = verify_renormalized_series(&spec, &doubled, 0, &b).unwrap();
        assert!(!rep.check.passed());
    }

    #[test]
    fn empty_window_is_an_error() {
        let spec = EquationSpec::preset("gkpz").unwrap();
        let zero = FnMap(|_: &DecoratedTree| Ok(TreeVec::zero()));
        let b = basis(&spec, Bounds::new(1, 1, 0, 0));
        assert!(matches!(verify_renormalized_series(&spec, &zero, 0, &b), Err(Error::EmptyWindow)));
    }

    /// `D^{a_1}…D^{a_n} F^l ∏ F(τ_j)`, written out for decoration-free trees.
    fn oracle(nl: &crate::diff::Nonlinearity, i: usize, t: &DecoratedTree) -> DiffExpr {
        let l = match t.noises() {
            [] => 0,
            [n] => match n.ty {
                TypeRef::Noise(l) => l + 1,
                _ => unreachable!(),
            },
            _ => return DiffExpr::zero(),
        };
        let Some(sym) = nl.symbol(i, l) else { return DiffExpr::zero() };
        let mut d = DiffExpr::symbol(sym.clone());
        let mut prod = DiffExpr::one();
        for (e, c) in t.children() {
            let TypeRef::Kernel(k) = e.ty else { unreachable!() };
            d = d_a(&DiffVar::new(k, e.deriv.clone()), &d);
            prod = prod.mul(&oracle(nl, nl.component_of_kernel(k), c));
        }
        d.mul(&prod)
    }

    #[test]
    fn counterterms_match_oracle() {
        let (spec, ch) = gkpz_one_point();
        let nl = spec.nonlinearity();
        let ct = counterterms(&spec, &ch, 0).unwrap();
        assert!(ct.equivalence.passed(), "{}", ct.equivalence);
        let lp = parse_tree(LOOP, spec.signature()).unwrap();
        let want = oracle(nl, 0, &lp).scale(&Scalar::symbol("c").scale(&lp.symmetry_factor().recip()));
        assert_eq!(ct.total, want);
        assert!(!want.is_zero());
        // The noise coefficient depends on the gradient, so the loop also
        // renormalizes the noise term.
        assert!(!ct.noise_free.passed());

        let formal = formal_character(&spec).unwrap();
        let ct = counterterms(&spec, &formal, 0).unwrap();
        assert!(ct.equivalence.passed(), "{}", ct.equivalence);
        let mut total = DiffExpr::zero();
        for (t, v) in formal.support() {
            if t.deco_total() == 0 {
                total.add_assign(&oracle(nl, 0, t).scale(&v.scale(&t.symmetry_factor().recip())));
            } else {
                total.add_assign(&upsilon(nl, 0, t).scale(&v.scale(&t.symmetry_factor().recip())));
            }
        }
        assert_eq!(ct.total, total);
    }

    #[test]
    fn additive_noise_is_not_renormalized() {
        let spec = EquationSpec::preset("phi4-like").unwrap();
        let ct = counterterms(&spec, &formal_character(&spec).unwrap(), 0).unwrap();
        assert!(ct.noise_free.passed(), "{}", ct.noise_free);
        assert!(ct.equivalence.passed());
        assert!(!ct.entries.is_empty());
    }
}
