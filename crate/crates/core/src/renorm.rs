//! Preparation maps, the BPHZ family and the renormalization maps built
//! from them.
//!
//! Maps are stated on trees: [`BphzStar`] is the adjoint-side map
//! `τ ↦ Σ ℓ(σ)/S(σ) τ⋆σ`, [`BphzForward`] its transpose computed directly
//! from root cuts. Everything else is checked on finite graded bases.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::basis::{kernel_labels, FnMap, GradedBasis, TabulatedMap, TreeMap};
use crate::check::Check;
use crate::coproduct::{coproduct_dual, root_cuts};
use crate::error::{Error, Result};
use crate::grafting::{graft, graft_vec, raise_all, star, star_vec};
use crate::grammar::parse_tree;
use crate::scalar::{fmt_rational, parse_rational, Scalar};
use crate::tree::{DecoratedTree, EdgeLabel, Forest, MultiIndex, Signature};
use crate::treevec::{TensorVec, TreeVec};

/// A character on forests of negative trees, given by its values on trees.
///
/// Values are exact rationals or polynomials in named symbols. `ℓ(𝟏) = 1`
/// is implicit; trees not listed have value zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Character {
    dim: usize,
    values: BTreeMap<DecoratedTree, Scalar>,
}

impl Character {
    /// The unit character, supported on `𝟏` only.
    pub fn unit(dim: usize) -> Self {
        Character { dim, values: BTreeMap::new() }
    }

    /// Builds a character, rejecting trees outside `negatives`.
    pub fn new(negatives: &[DecoratedTree], values: Vec<(DecoratedTree, Scalar)>) -> Result<Self> {
        let dim = negatives.first().map(|t| t.dim()).unwrap_or(1);
        let allowed: BTreeSet<&DecoratedTree> = negatives.iter().collect();
        let mut out = BTreeMap::new();
        for (t, v) in values {
            if !allowed.contains(&t) {
                return Err(Error::CharacterOutsideNegatives(format!("{t:?}")));
            }
            if t.is_one() {
                if v != Scalar::one() {
                    return Err(Error::CharacterOutsideNegatives("the value on 1 must be 1".into()));
                }
                continue;
            }
            if !v.is_zero() {
                out.insert(t, v);
            }
        }
        Ok(Character { dim, values: out })
    }

    pub fn one_point(negatives: &[DecoratedTree], tree: DecoratedTree, value: Scalar) -> Result<Self> {
        Self::new(negatives, vec![(tree, value)])
    }

    /// Symbols `c1, c2, …` on every negative tree other than `𝟏`, in basis order.
    pub fn formal(negatives: &[DecoratedTree]) -> Self {
        let values = negatives
            .iter()
            .filter(|t| !t.is_one())
            .enumerate()
            .map(|(i, t)| (t.clone(), Scalar::symbol(&format!("c{}", i + 1))))
            .collect();
        Self::new(negatives, values).expect("trees come from the negatives")
    }

    /// Reads `{"tree": "value", …}` with rational strings or symbol names.
    pub fn from_json(text: &str, sig: &Signature, negatives: &[DecoratedTree]) -> Result<Self> {
        let obj: Map<String, Value> =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("malformed character file: {e}")))?;
        let mut values = Vec::new();
        for (key, v) in obj {
            let t = parse_tree(&key, sig)?;
            let s = match &v {
                Value::String(s) => parse_value(s)?,
                Value::Number(n) => parse_value(&n.to_string())?,
                _ => return Err(Error::InvalidSpec(format!("character value for {key:?} must be a string"))),
            };
            values.push((t, s));
        }
        let mut c = Self::new(negatives, values)?;
        c.dim = sig.dimension();
        Ok(c)
    }

    pub fn to_json(&self, sig: &Signature) -> Value {
        let mut m = Map::new();
        for (t, v) in &self.values {
            let text = match v.as_const() {
                Some(r) => fmt_rational(r),
                None => v.to_string(),
            };
            m.insert(t.to_text(sig), Value::String(text));
        }
        Value::Object(m)
    }

    pub fn value(&self, t: &DecoratedTree) -> Scalar {
        if t.is_one() {
            return Scalar::one();
        }
        self.values.get(t).cloned().unwrap_or_else(Scalar::zero)
    }

    /// Multiplicative extension: `ℓ(τ_1 ⋯ τ_n) = ∏ ℓ(τ_i)`.
    pub fn eval_forest(&self, f: &Forest) -> Scalar {
        f.trees().iter().fold(Scalar::one(), |acc, t| acc * self.value(t))
    }

    /// Trees with a nonzero value, `𝟏` excluded.
    pub fn support(&self) -> impl Iterator<Item = (&DecoratedTree, &Scalar)> {
        self.values.iter()
    }

    pub fn is_unit(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn parse_value(s: &str) -> Result<Scalar> {
    let s = s.trim();
    if let Ok(r) = parse_rational(s) {
        return Ok(r.into());
    }
    let ident = !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ident {
        Ok(Scalar::symbol(s))
    } else {
        Err(Error::InvalidSpec(format!("bad character value {s:?}")))
    }
}

/// `R*_ℓ τ = Σ_{σ ∈ B⁻} ℓ(σ)/S(σ) τ⋆σ`, the `σ = 𝟏` term being `τ`.
pub struct BphzStar {
    character: Character,
}

impl BphzStar {
    pub fn new(character: Character) -> Self {
        BphzStar { character }
    }

    pub fn character(&self) -> &Character {
        &self.character
    }
}

impl TreeMap for BphzStar {
    fn apply(&self, t: &DecoratedTree) -> Result<TreeVec> {
        let mut out = TreeVec::from_tree(t.clone());
        for (sigma, v) in self.character.support() {
            let w = v.scale(&sigma.symmetry_factor().recip());
            out.add_scaled(&star(t, sigma), &w);
        }
        Ok(out)
    }
}

/// The preparation map `R` whose adjoint is [`BphzStar`].
///
/// `[σ']Rμ = S(μ)/S(σ') Σ_ρ ℓ(ρ)/S(ρ) [μ](σ'⋆ρ)`; the pairs `(σ', ρ)` are
/// the root cuts of `μ` whose inner part is in the support of `ℓ`.
pub struct BphzForward {
    character: Character,
    max_shift: u32,
}

impl BphzForward {
    pub fn new(character: Character) -> Self {
        let max_shift = character.support().map(|(t, _)| t.deco_total()).max().unwrap_or(0);
        BphzForward { character, max_shift }
    }

    pub fn character(&self) -> &Character {
        &self.character
    }
}

impl TreeMap for BphzForward {
    fn apply(&self, mu: &DecoratedTree) -> Result<TreeVec> {
        let mut out = TreeVec::from_tree(mu.clone());
        if self.character.is_unit() {
            return Ok(out);
        }
        let dim = mu.dim();
        let shifts = MultiIndex::all_up_to(dim, self.max_shift);
        let shift_fn = |_: &EdgeLabel, _: &DecoratedTree| shifts.clone();
        let smu = mu.symmetry_factor();
        for cut in root_cuts(mu, true, &shift_fn) {
            if cut.inner.is_one() {
                continue;
            }
            let v = self.character.value(&cut.inner);
            if v.is_zero() {
                continue;
            }
            let c = star(&cut.outer, &cut.inner).coeff(mu);
            if c.is_zero() {
                continue;
            }
            let w = smu / (cut.outer.symmetry_factor() * cut.inner.symmetry_factor());
            out.add_term(cut.outer, (v * c).scale(&w));
        }
        Ok(out)
    }
}

/// Transpose of a forward map, projected onto a basis.
///
/// Built from the forward images on `domain`; the value on `ρ` is
/// `Σ_{μ ∈ domain} (S(ρ)/S(μ)) [ρ]Aμ · μ`, i.e. `P A* ρ` for every `ρ`
/// that occurs in some image.
pub struct ProjectedAdjoint {
    table: BTreeMap<DecoratedTree, TreeVec>,
}

impl ProjectedAdjoint {
    pub fn new(forward: &dyn TreeMap, domain: &Arc<GradedBasis>) -> Result<Self> {
        let images: Vec<TreeVec> = domain.trees().par_iter().map(|t| forward.apply(t)).collect::<Result<_>>()?;
        let mut table: BTreeMap<DecoratedTree, TreeVec> = BTreeMap::new();
        for (mu, v) in domain.trees().iter().zip(images.iter()) {
            let smu = mu.symmetry_factor();
            for (rho, c) in v.iter() {
                let w = rho.symmetry_factor() / smu;
                table.entry(rho.clone()).or_default().add_term(mu.clone(), c.scale(&w));
            }
        }
        Ok(ProjectedAdjoint { table })
    }
}

impl TreeMap for ProjectedAdjoint {
    fn apply(&self, t: &DecoratedTree) -> Result<TreeVec> {
        Ok(self.table.get(t).cloned().unwrap_or_default())
    }
}

/// `P_B A` as a map: images of `inner` restricted to the trees of `basis`.
pub fn projected(inner: &dyn TreeMap, basis: &GradedBasis, t: &DecoratedTree) -> Result<TreeVec> {
    Ok(inner.apply(t)?.filter(|s| basis.contains(s)))
}

/// Tabulates `map` on `basis` keeping only the part inside the basis.
pub fn tabulate_projected(map: &dyn TreeMap, basis: &Arc<GradedBasis>) -> Result<TabulatedMap> {
    let images: Vec<TreeVec> = basis.trees().par_iter().map(|t| projected(map, basis, t)).collect::<Result<_>>()?;
    Ok(TabulatedMap::from_images(basis, images))
}

/// A map given on a basis, extended by the identity to all other trees.
///
/// When the table is closed on its basis, the transpose of the table
/// extended the same way is the exact adjoint on all of `T`.
pub struct ExtendedByIdentity(pub TabulatedMap);

impl TreeMap for ExtendedByIdentity {
    fn apply(&self, t: &DecoratedTree) -> Result<TreeVec> {
        Ok(self.0.image(t).cloned().unwrap_or_else(|| TreeVec::from_tree(t.clone())))
    }
}

/// Which preparation-map axioms hold on a basis.
#[derive(Clone, Debug)]
pub struct PreparationReport {
    /// `Rτ = τ + Σ λ_i τ_i` with `deg τ_i ≥ deg τ` and fewer noises.
    pub shape: Check,
    /// `(R − Id)^n = 0` for `n = 1 +` the largest noise count.
    pub nilpotency: Check,
    /// Smallest `n` with `(R − Id)^n = 0` on the basis.
    pub nilpotency_order: usize,
    /// `(R ⊗ id)Δ = ΔR` on the basis.
    pub delta_commutation: Check,
    /// `R*(σ⋆τ) = σ⋆R*τ` for `σ ∈ T_+`, projected onto the basis.
    pub star_commutation: Check,
    /// `R*(σ⋆τ) = σ⋆R*τ` exactly, for all `σ`.
    pub strong: Check,
}

impl PreparationReport {
    pub fn is_preparation(&self) -> bool {
        self.shape.passed() && self.delta_commutation.passed()
    }

    pub fn is_strong(&self) -> bool {
        self.is_preparation() && self.strong.passed()
    }

    /// The two forms of the commutation axiom agree.
    pub fn equivalence_holds(&self) -> bool {
        self.delta_commutation.passed() == self.star_commutation.passed()
    }

    pub fn checks(&self) -> Vec<Check> {
        let eq = Check::from_parts(
            "delta/star commutation equivalence",
            2,
            (!self.equivalence_holds()).then(|| {
                format!(
                    "delta form {}, star form {}",
                    verdict(&self.delta_commutation),
                    verdict(&self.star_commutation)
                )
            }),
        );
        vec![
            self.shape.clone(),
            self.nilpotency.clone(),
            self.delta_commutation.clone(),
            self.star_commutation.clone(),
            eq,
            self.strong.clone(),
        ]
    }
}

fn verdict(c: &Check) -> &'static str {
    if c.passed() {
        "holds"
    } else {
        "fails"
    }
}

fn add_scaled_tensor(acc: &mut TensorVec, v: &TensorVec, c: &Scalar) {
    for ((a, b), x) in v.iter() {
        acc.add_term(a.clone(), b.clone(), x * c);
    }
}

/// Pairs `(σ, τ)` of basis trees whose star product can land in the basis.
pub(crate) fn small_pairs(basis: &GradedBasis, extra_edges: usize) -> Vec<(&DecoratedTree, &DecoratedTree)> {
    let b = basis.bounds();
    let mut buckets: BTreeMap<(usize, usize, u32), Vec<&DecoratedTree>> = BTreeMap::new();
    for t in basis.trees() {
        buckets.entry((t.noise_count(), t.edge_count(), t.deco_total())).or_default().push(t);
    }
    let mut out = Vec::new();
    for (&(n1, e1, d1), left) in &buckets {
        for (&(n2, e2, d2), right) in &buckets {
            if n1 + n2 <= b.max_noises && e1 + e2 + extra_edges <= b.max_edges && d1 + d2 <= b.max_deco {
                out.extend(left.iter().flat_map(|s| right.iter().map(move |t| (*s, *t))));
            }
        }
    }
    out
}

/// Checks every preparation-map axiom for `r` on `basis`.
///
/// `rstar` must be the adjoint of `r` on all of `T` (for instance
/// [`BphzStar`] with [`BphzForward`], or two [`ExtendedByIdentity`] maps).
pub fn check_preparation(r: &dyn TreeMap, rstar: &dyn TreeMap, basis: &Arc<GradedBasis>) -> Result<PreparationReport> {
    let sig = basis.signature();
    let table = TabulatedMap::tabulate(r, basis)?;
    let text = |t: &DecoratedTree| t.to_text(sig);

    let items: Vec<usize> = (0..basis.len()).collect();
    let shape = Check::run("perturbation of the identity", &items, |&i| {
        let mu = &basis.trees()[i];
        let diff = table.images()[i].sub(&TreeVec::from_tree(mu.clone()));
        let bad = diff.trees().find(|t| t.degree(sig) < mu.degree(sig) || t.noise_count() >= mu.noise_count());
        bad.map(|t| format!("R({}) contains {}", text(mu), text(t)))
    });

    let bound = 1 + basis.trees().iter().map(|t| t.noise_count()).max().unwrap_or(0);
    let nil = table.minus_identity();
    let orders: Vec<Result<usize>> = basis
        .trees()
        .par_iter()
        .map(|t| {
            let mut v = TreeVec::from_tree(t.clone());
            let mut n = 0;
            while !v.is_zero() && n <= bound {
                v = nil.apply_vec(&v)?;
                n += 1;
            }
            Ok(n)
        })
        .collect();
    let orders = orders.into_iter().collect::<Result<Vec<_>>>()?;
    let nilpotency_order = orders.iter().copied().max().unwrap_or(0);
    let worst = orders.iter().position(|&n| n > bound);
    let nilpotency = Check::from_parts(
        &format!("(R - Id)^{bound} = 0"),
        basis.len(),
        worst.map(|i| format!("(R - Id)^{bound} {} != 0", text(&basis.trees()[i]))),
    );

    let sides: Vec<Result<(TensorVec, TensorVec)>> = basis
        .trees()
        .par_iter()
        .zip(table.images().par_iter())
        .map(|(mu, img)| {
            let mut lhs = TensorVec::zero();
            for (nu, c) in img.iter() {
                add_scaled_tensor(&mut lhs, &coproduct_dual(nu, sig), c);
            }
            let mut rhs = TensorVec::zero();
            for ((t, s), c) in coproduct_dual(mu, sig).iter() {
                for (t2, c2) in r.apply(t)?.iter() {
                    rhs.add_term(t2.clone(), s.clone(), c * c2);
                }
            }
            Ok((lhs, rhs))
        })
        .collect();
    let sides = sides.into_iter().collect::<Result<Vec<_>>>()?;
    let delta_commutation = Check::run("(R x id) Delta = Delta R", &items, |&i| {
        let (l, r) = &sides[i];
        (l != r).then(|| format!("at {}", text(&basis.trees()[i])))
    });

    let mut pairs: BTreeSet<(DecoratedTree, DecoratedTree)> = BTreeSet::new();
    for (l, r) in &sides {
        for ((t, s), _) in l.iter().chain(r.iter()) {
            pairs.insert((s.clone(), t.clone()));
        }
    }
    let pairs: Vec<_> = pairs.into_iter().collect();
    let star_commutation = Check::try_run("R*(s * t) = s * R*t for positive s, on the basis", &pairs, |(s, t)| {
        let lhs = rstar.apply_vec(&star(s, t))?.filter(|x| basis.contains(x));
        let rhs = star_vec(&TreeVec::from_tree(s.clone()), &rstar.apply(t)?).filter(|x| basis.contains(x));
        Ok((lhs != rhs).then(|| format!("s = {}, t = {}", text(s), text(t))))
    });

    let all_pairs = small_pairs(basis, 0);
    let strong = Check::try_run("R*(s * t) = s * R*t for all s", &all_pairs, |(s, t)| {
        let lhs = rstar.apply_vec(&star(s, t))?;
        let rhs = star_vec(&TreeVec::from_tree((*s).clone()), &rstar.apply(t)?);
        Ok((lhs != rhs).then(|| format!("s = {}, t = {}", text(s), text(t))))
    });

    Ok(PreparationReport { shape, nilpotency, nilpotency_order, delta_commutation, star_commutation, strong })
}

/// `R*(σ ↷_a τ) = σ ↷_a R*τ` and `R*(↑^k τ) = ↑^k R*τ` on basis pairs whose
/// results stay within the bounds.
pub fn special_identities(rstar: &dyn TreeMap, basis: &GradedBasis) -> Vec<Check> {
    let sig = basis.signature();
    let b = basis.bounds();
    let labels = kernel_labels(sig, b.max_deriv);
    let triples: Vec<(&DecoratedTree, &EdgeLabel, &DecoratedTree)> =
        small_pairs(basis, 1).into_iter().flat_map(|(s, t)| labels.iter().map(move |a| (s, a, t))).collect();
    let graft_check = Check::try_run("R*(s graft_a t) = s graft_a R*t", &triples, |(s, a, t)| {
        let lhs = rstar.apply_vec(&graft(s, a, t)?)?;
        let rhs = graft_vec(&TreeVec::from_tree((*s).clone()), a, &rstar.apply(t)?)?;
        Ok((lhs != rhs).then(|| format!("s = {}, a = {}, t = {}", s.to_text(sig), a.to_text(sig), t.to_text(sig))))
    });

    let raises: Vec<(&DecoratedTree, MultiIndex)> = basis
        .trees()
        .iter()
        .flat_map(|t| {
            let room = b.max_deco.saturating_sub(t.deco_total());
            MultiIndex::all_up_to(sig.dimension(), room).into_iter().map(move |k| (t, k))
        })
        .collect();
    let raise_check = Check::try_run("R*(raise^k t) = raise^k R*t", &raises, |(t, k)| {
        let lhs = rstar.apply_vec(&raise_all(t, k))?;
        let rhs = rstar.apply(t)?.map_linear(|x| raise_all(x, k));
        Ok((lhs != rhs).then(|| format!("t = {}, k = {k}", t.to_text(sig))))
    });
    if b.max_deco == 0 {
        return vec![graft_check];
    }
    vec![graft_check, raise_check]
}

/// The multiplicative map `M°` of a preparation map `R`:
/// `M°(X^k ζ ∏ 𝓘_a(τ_j)) = X^k · M°ζ · ∏ 𝓘_a(M°(Rτ_j))`.
///
/// Values on noises default to `M°ζ_l = ζ_l`.
#[derive(Clone)]
pub struct MCirc<'a> {
    r: &'a dyn TreeMap,
    on_noises: BTreeMap<EdgeLabel, TreeVec>,
}

impl<'a> MCirc<'a> {
    pub fn new(r: &'a dyn TreeMap) -> Self {
        MCirc { r, on_noises: BTreeMap::new() }
    }

    /// Sets `M°ζ` for the noise factor `ζ` with edge `label`.
    pub fn with_noise_value(mut self, label: EdgeLabel, value: TreeVec) -> Self {
        self.on_noises.insert(label, value);
        self
    }

    fn rec(&self, t: &DecoratedTree, depth: usize, limit: usize) -> Result<TreeVec> {
        if depth > limit {
            return Err(Error::RecursionDepth(limit));
        }
        let dim = t.dim();
        let mut acc = TreeVec::from_tree(DecoratedTree::x(t.deco().clone()));
        for n in t.noises() {
            let v = match self.on_noises.get(n) {
                Some(v) => v.clone(),
                None => TreeVec::from_tree(DecoratedTree::noise_factor(n.clone())),
            };
            acc = acc.join(&v);
        }
        for (a, c) in t.children() {
            let inner = self.r.apply(c)?;
            let mut below = TreeVec::zero();
            for (x, cx) in inner.iter() {
                below.add_scaled(&self.rec(x, depth + 1, limit)?, cx);
            }
            let planted = below.map_linear(|x| TreeVec::from_tree(DecoratedTree::planted(a.clone(), x.clone())));
            acc = acc.join(&planted);
        }
        debug_assert!(acc.trees().all(|x| x.dim() == dim));
        Ok(acc)
    }
}

impl TreeMap for MCirc<'_> {
    /// Fails with [`Error::RecursionDepth`] when the nesting exceeds the
    /// node count of `t`, which a map satisfying the noise condition never does.
    fn apply(&self, t: &DecoratedTree) -> Result<TreeVec> {
        self.rec(t, 0, t.node_count())
    }
}

/// The renormalization map `M = M°R`.
pub struct RenormMap<'a> {
    mcirc: MCirc<'a>,
}

impl<'a> RenormMap<'a> {
    pub fn new(r: &'a dyn TreeMap) -> Self {
        RenormMap { mcirc: MCirc::new(r) }
    }

    /// `M = M°R` with the `R` that `mcirc` was built from.
    pub fn from_mcirc(mcirc: MCirc<'a>) -> Self {
        RenormMap { mcirc }
    }

    pub fn mcirc(&self) -> &MCirc<'a> {
        &self.mcirc
    }
}

impl TreeMap for RenormMap<'_> {
    fn apply(&self, t: &DecoratedTree) -> Result<TreeVec> {
        self.mcirc.apply_vec(&self.mcirc.r.apply(t)?)
    }
}

fn in_basis(basis: &GradedBasis, v: TreeVec) -> TreeVec {
    v.filter(|x| basis.contains(x))
}

/// `A(σ ↷_a τ) = Aσ ↷_a Aτ` and, when the bounds allow decorations,
/// `A ↑^k = ↑^k A`, compared after projecting onto the basis.
///
/// Grafting, raising and tree products never shrink a tree in any bounded
/// quantity, so both sides only need `A` projected onto the basis; a
/// [`ProjectedAdjoint`] on the same basis is enough to test an adjoint.
pub fn check_good_morphism(a: &dyn TreeMap, basis: &GradedBasis) -> Vec<Check> {
    let sig = basis.signature();
    let b = basis.bounds();
    let labels = kernel_labels(sig, b.max_deriv);
    let triples: Vec<(&DecoratedTree, &EdgeLabel, &DecoratedTree)> =
        small_pairs(basis, 1).into_iter().flat_map(|(s, t)| labels.iter().map(move |l| (s, l, t))).collect();
    let graft_check = Check::try_run("A(s graft_a t) = As graft_a At", &triples, |(s, l, t)| {
        let lhs = in_basis(basis, a.apply_vec(&graft(s, l, t)?)?);
        let rhs = in_basis(basis, graft_vec(&a.apply(s)?, l, &a.apply(t)?)?);
        Ok((lhs != rhs).then(|| format!("s = {}, a = {}, t = {}", s.to_text(sig), l.to_text(sig), t.to_text(sig))))
    });
    let raises: Vec<(&DecoratedTree, MultiIndex)> = basis
        .trees()
        .iter()
        .flat_map(|t| {
            let room = b.max_deco.saturating_sub(t.deco_total());
            MultiIndex::all_up_to(sig.dimension(), room).into_iter().filter(|k| !k.is_zero()).map(move |k| (t, k))
        })
        .collect();
    let raise_check = Check::try_run("A raise^k = raise^k A", &raises, |(t, k)| {
        let lhs = in_basis(basis, a.apply_vec(&raise_all(t, k))?);
        let rhs = in_basis(basis, a.apply(t)?.map_linear(|x| raise_all(x, k)));
        Ok((lhs != rhs).then(|| format!("t = {}, k = {k}", t.to_text(sig))))
    });
    if b.max_deco == 0 {
        return vec![graft_check];
    }
    vec![graft_check, raise_check]
}

/// Adjoint-side identities of `M = M°R` on a basis: `M*` is a good morphism,
/// `M*ζ_l = R*ζ_l`, `(M°)*(σ ↷_a τ) = M*σ ↷_a (M°)*τ`, `(M°)*` is
/// multiplicative and `(M°)*𝓘_a(σ) = 𝓘_a(M*σ)`. `rstar` is the adjoint of
/// the `R` inside `mcirc`.
pub fn check_renorm_adjoint(rstar: &dyn TreeMap, mcirc: &MCirc<'_>, basis: &Arc<GradedBasis>) -> Result<Vec<Check>> {
    let sig = basis.signature();
    let b = basis.bounds();
    let m = RenormMap::from_mcirc(mcirc.clone());
    let mstar = ProjectedAdjoint::new(&m, basis)?;
    let mcstar = ProjectedAdjoint::new(mcirc, basis)?;
    let mut out = check_good_morphism(&mstar, basis);

    let noises: Vec<DecoratedTree> =
        (0..sig.noises().len()).map(|l| DecoratedTree::noise(l, sig.dimension())).collect();
    out.push(Check::try_run("M* zeta_l = R* zeta_l", &noises, |z| {
        let lhs = in_basis(basis, mstar.apply(z)?);
        let rhs = in_basis(basis, rstar.apply(z)?);
        Ok((lhs != rhs).then(|| format!("l = {}", z.to_text(sig))))
    }));

    let labels = kernel_labels(sig, b.max_deriv);
    let triples: Vec<(&DecoratedTree, &EdgeLabel, &DecoratedTree)> =
        small_pairs(basis, 1).into_iter().flat_map(|(s, t)| labels.iter().map(move |l| (s, l, t))).collect();
    out.push(Check::try_run("(M°)*(s graft_a t) = M*s graft_a (M°)*t", &triples, |(s, l, t)| {
        let lhs = in_basis(basis, mcstar.apply_vec(&graft(s, l, t)?)?);
        let rhs = in_basis(basis, graft_vec(&mstar.apply(s)?, l, &mcstar.apply(t)?)?);
        Ok((lhs != rhs).then(|| format!("s = {}, a = {}, t = {}", s.to_text(sig), l.to_text(sig), t.to_text(sig))))
    }));

    let products: Vec<(&DecoratedTree, &DecoratedTree)> = small_pairs(basis, 0)
        .into_iter()
        .filter(|(s, t)| s.noises().len() + t.noises().len() <= b.max_noises_per_node)
        .collect();
    out.push(Check::try_run("(M°)* multiplicative", &products, |(s, t)| {
        let lhs = in_basis(basis, mcstar.apply(&s.join(t))?);
        let rhs = in_basis(basis, mcstar.apply(s)?.join(&mcstar.apply(t)?));
        Ok((lhs != rhs).then(|| format!("s = {}, t = {}", s.to_text(sig), t.to_text(sig))))
    }));

    let planted: Vec<(&EdgeLabel, &DecoratedTree)> = basis
        .trees()
        .iter()
        .filter(|t| t.edge_count() < b.max_edges)
        .flat_map(|t| labels.iter().map(move |l| (l, t)))
        .collect();
    out.push(Check::try_run("(M°)* I_a(s) = I_a(M* s)", &planted, |(l, s)| {
        let lhs = in_basis(basis, mcstar.apply(&DecoratedTree::planted((*l).clone(), (*s).clone()))?);
        let rhs = in_basis(
            basis,
            mstar.apply(s)?.map_linear(|x| TreeVec::from_tree(DecoratedTree::planted((*l).clone(), x.clone()))),
        );
        Ok((lhs != rhs).then(|| format!("a = {}, s = {}", l.to_text(sig), s.to_text(sig))))
    }));
    Ok(out)
}

/// `R*τ = τ̃ ⋆ A(ζ)` where `ζ` is the root noise of `τ` (or `𝟏`) and `τ̃` is
/// `τ` without it: the right-morphism extension of `R*ζ := Aζ`.
pub struct RstarFromNoiseValues<'a> {
    values: &'a dyn TreeMap,
}

impl<'a> RstarFromNoiseValues<'a> {
    pub fn new(values: &'a dyn TreeMap) -> Self {
        RstarFromNoiseValues { values }
    }
}

impl TreeMap for RstarFromNoiseValues<'_> {
    fn apply(&self, t: &DecoratedTree) -> Result<TreeVec> {
        let rest = DecoratedTree::new(t.deco().clone(), vec![], t.children().to_vec());
        let z = match t.noises() {
            [] => DecoratedTree::one(t.dim()),
            [n] => DecoratedTree::noise_factor(n.clone()),
            _ => return Err(Error::NoiseCollision),
        };
        Ok(star_vec(&TreeVec::from_tree(rest), &self.values.apply(&z)?))
    }
}

fn require_bck(basis: &GradedBasis) -> Result<()> {
    let b = basis.bounds();
    if b.max_deco != 0 || b.max_deriv != 0 || basis.signature().kernels().len() != 1 {
        return Err(Error::InvalidSpec("BCK mode needs one kernel type and no decorations".into()));
    }
    Ok(())
}

/// The preparation map of a morphism `A` in BCK mode, as `(P R*, R)` on the basis.
///
/// Fails with [`Error::NotAMorphism`] when `A` is not a good morphism there.
pub fn bck_preparation_from_morphism(
    a: &dyn TreeMap,
    basis: &Arc<GradedBasis>,
) -> Result<(TabulatedMap, TabulatedMap)> {
    require_bck(basis)?;
    if let Some(c) = check_good_morphism(a, basis).into_iter().find(|c| !c.passed()) {
        return Err(Error::NotAMorphism(c.to_string()));
    }
    let proj = FnMap(|t: &DecoratedTree| Ok(in_basis(basis, a.apply(t)?)));
    let rstar = tabulate_projected(&RstarFromNoiseValues::new(&proj), basis)?;
    let r = crate::basis::transpose(&rstar);
    Ok((rstar, r))
}

/// Morphism → preparation map → morphism: `M*` of the reconstructed `R`
/// equals `A` on the basis, and the reconstructed `R` is a preparation map.
pub fn bck_roundtrip(a: &dyn TreeMap, basis: &Arc<GradedBasis>) -> Result<Vec<Check>> {
    let (rstar, r) = bck_preparation_from_morphism(a, basis)?;
    let sig = basis.signature();
    let mstar = ProjectedAdjoint::new(&RenormMap::new(&r), basis)?;
    let same = Check::try_run("M* = A", basis.trees(), |t| {
        let lhs = in_basis(basis, mstar.apply(t)?);
        let rhs = in_basis(basis, a.apply(t)?);
        Ok((lhs != rhs).then(|| format!("at {}", t.to_text(sig))))
    });
    let rep = check_preparation(&ExtendedByIdentity(r), &ExtendedByIdentity(rstar), basis)?;
    Ok(vec![same, rep.shape, rep.nilpotency])
}

/// Preparation map → morphism → preparation map: the `R` rebuilt from
/// `M*` with `M = M°R` equals `R` on the basis.
pub fn bck_recover_preparation(r: &dyn TreeMap, basis: &Arc<GradedBasis>) -> Result<Check> {
    let mstar = ProjectedAdjoint::new(&RenormMap::new(r), basis)?;
    let (_, rebuilt) = bck_preparation_from_morphism(&mstar, basis)?;
    let original = TabulatedMap::tabulate(r, basis)?;
    let diff = original.differences(&rebuilt);
    Ok(Check::from_parts(
        "R -> M -> R",
        basis.len(),
        diff.first().map(|t| format!("at {}", t.to_text(basis.signature()))),
    ))
}

/// `Rτ = τ` for every planted tree `𝓘_a(σ)` and every `X^k` in the basis.
pub fn check_fixes_planted(r: &dyn TreeMap, basis: &GradedBasis) -> Check {
    let sig = basis.signature();
    let targets: Vec<&DecoratedTree> = basis
        .trees()
        .iter()
        .filter(|t| {
            let planted = t.deco().is_zero() && t.noises().is_empty() && t.children().len() == 1;
            let poly = t.noises().is_empty() && t.children().is_empty();
            planted || poly
        })
        .collect();
    Check::try_run("R fixes planted trees and polynomials", &targets, |t| {
        let v = r.apply(t)?;
        Ok((v != TreeVec::from_tree((*t).clone()))
            .then(|| format!("R({}) = {}", t.to_text(sig), crate::format_vec(&v, sig))))
    })
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::basis::{transpose, Bounds, Identity};
    use crate::rules::EquationSpec;
    use crate::scalar::int;

    #[test]
    fn character_rejects_trees_outside_negatives() {
        let (spec, _) = gkpz_one_point();
        let negs = spec.negative_basis().unwrap();
        let sig = spec.signature();
        let pos = parse_tree("I[t1,(0,0)](xi_1)", sig).unwrap();
        assert!(matches!(
            Character::one_point(negs.trees(), pos, int(1).into()),
            Err(Error::CharacterOutsideNegatives(_))
        ));
        let text = format!("{{\"{LOOP}\": \"3/2\", \"xi_1\": \"k\"}}");
        let c = Character::from_json(&text, sig, negs.trees()).unwrap();
        assert_eq!(c.value(&parse_tree("xi_1", sig).unwrap()), Scalar::symbol("k"));
        let back = Character::from_json(&c.to_json(sig).to_string(), sig, negs.trees()).unwrap();
        assert_eq!(back, c);
        assert!(Character::from_json("{\"xi_1\": \"1+\"}", sig, negs.trees()).is_err());
    }

    #[test]
    fn formal_character_is_multiplicative_on_forests() {
        let (spec, _) = gkpz_one_point();
        let negs = spec.negative_basis().unwrap();
        let c = Character::formal(negs.trees());
        let nonunit: Vec<_> = negs.trees().iter().filter(|t| !t.is_one()).take(2).cloned().collect();
        let f = Forest::new(nonunit.clone());
        assert_eq!(c.eval_forest(&f), c.value(&nonunit[0]) * c.value(&nonunit[1]));
        assert_eq!(c.eval_forest(&Forest::empty()), Scalar::one());
        assert_eq!(c.value(&DecoratedTree::one(2)), Scalar::one());
    }

    #[test]
    fn unit_character_gives_identity() {
        let (spec, _) = gkpz_one_point();
        let sig = spec.signature();
        let t = parse_tree("X[(0,1)] * xi_1 * I[t1,(0,1)](xi_1)", sig).unwrap();
        let unit = Character::unit(2);
        assert_eq!(BphzStar::new(unit.clone()).apply(&t).unwrap(), Identity.apply(&t).unwrap());
        assert_eq!(BphzForward::new(unit).apply(&t).unwrap(), Identity.apply(&t).unwrap());
    }

    #[test]
    fn rstar_on_a_noise_is_one_extra_term() {
        let (spec, c) = gkpz_one_point();
        let sig = spec.signature();
        let s0 = parse_tree(LOOP, sig).unwrap();
        let z = parse_tree("xi_1", sig).unwrap();
        let got = BphzStar::new(c).apply(&z).unwrap();
        let mut expected = TreeVec::from_tree(z.clone());
        expected.add_scaled(&star(&z, &s0), &Scalar::symbol("c").scale(&s0.symmetry_factor().recip()));
        assert_eq!(got, expected);
    }

    fn small_gkpz() -> Arc<GradedBasis> {
        let (spec, _) = gkpz_one_point();
        Arc::new(GradedBasis::enumerate(spec.signature(), Bounds::new(2, 2, 1, 1)).unwrap())
    }

    /// Random `R = Id + N` on the basis, `N` lowering the noise count and not
    /// lowering the degree, or (when `violate`) keeping the noise count.
    fn random_prep(basis: &Arc<GradedBasis>, seed: u64, violate: bool) -> TabulatedMap {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sig = basis.signature();
        let images = basis
            .trees()
            .iter()
            .map(|mu| {
                let mut v = TreeVec::from_tree(mu.clone());
                let targets: Vec<&DecoratedTree> = basis
                    .trees()
                    .iter()
                    .filter(|t| *t != mu && t.degree(sig) >= mu.degree(sig))
                    .filter(|t| {
                        if violate {
                            t.noise_count() == mu.noise_count()
                        } else {
                            t.noise_count() < mu.noise_count()
                        }
                    })
                    .collect();
                if !targets.is_empty() && rng.gen_bool(0.5) {
                    let t = targets[rng.gen_range(0..targets.len())];
                    v.add_rational(t.clone(), int(rng.gen_range(1..4)));
                }
                v
            })
            .collect();
        TabulatedMap::from_images(basis, images)
    }

    #[test]
    fn identity_is_a_strong_preparation_map() {
        let basis = small_gkpz();
        let rep = check_preparation(&Identity, &Identity, &basis).unwrap();
        assert!(rep.checks().iter().all(|c| c.passed()), "{rep:?}");
        assert!(rep.is_strong());
        assert_eq!(rep.nilpotency_order, 1);
        assert!(special_identities(&Identity, &basis).iter().all(|c| c.passed()));
    }

    #[test]
    fn bphz_is_a_strong_preparation_map() {
        let (_, c) = gkpz_one_point();
        let basis = small_gkpz();
        let rep = check_preparation(&BphzForward::new(c.clone()), &BphzStar::new(c.clone()), &basis).unwrap();
        for check in rep.checks() {
            assert!(check.passed(), "{check}");
            assert!(check.checked > 0, "{check}");
        }
        assert!(rep.nilpotency_order >= 2);
        for check in special_identities(&BphzStar::new(c), &basis) {
            assert!(check.passed() && check.checked > 0, "{check}");
        }
    }

    #[test]
    fn random_maps_fail_where_expected() {
        let basis = small_gkpz();
        let bad = random_prep(&basis, 7, true);
        let rstar = ExtendedByIdentity(transpose(&bad));
        let rep = check_preparation(&ExtendedByIdentity(bad), &rstar, &basis).unwrap();
        assert!(!rep.shape.passed());

        for seed in 0..4 {
            let r = random_prep(&basis, seed, false);
            let rstar = ExtendedByIdentity(transpose(&r));
            let rep = check_preparation(&ExtendedByIdentity(r), &rstar, &basis).unwrap();
            assert!(rep.shape.passed() && rep.nilpotency.passed());
            assert!(!rep.delta_commutation.passed());
            assert!(rep.equivalence_holds(), "{rep:?}");
        }
    }

    #[test]
    fn mcirc_of_identity_is_identity() {
        let basis = small_gkpz();
        let mc = MCirc::new(&Identity);
        let m = RenormMap::new(&Identity);
        for t in basis.trees() {
            assert_eq!(mc.apply(t).unwrap(), TreeVec::from_tree(t.clone()));
            assert_eq!(m.apply(t).unwrap(), TreeVec::from_tree(t.clone()));
        }
    }

    #[test]
    fn mcirc_recursion_matches_hand_expansion() {
        let (spec, c) = gkpz_one_point();
        let sig = spec.signature();
        let r = BphzForward::new(c);
        let mc = MCirc::new(&r);
        let p = |s: &str| parse_tree(s, sig).unwrap();
        // R(ξ·L) = ξ·L + c ξ for the loop L, so M° threads the counterterm under the edge.
        let inner = format!("xi_1 * {LOOP}");
        let got = mc.apply(&p(&format!("I[t1,(0,0)]({inner})"))).unwrap();
        let mut expected = TreeVec::from_tree(p(&format!("I[t1,(0,0)]({inner})")));
        expected.add_term(p("I[t1,(0,0)](xi_1)"), Scalar::symbol("c"));
        assert_eq!(got, expected);

        let basis = small_gkpz();
        for t in basis.trees().iter().filter(|t| t.noises().is_empty() && t.deco().is_zero() && t.children().len() == 1)
        {
            let (a, inner) = &t.children()[0];
            let below = mc.apply_vec(&r.apply(inner).unwrap()).unwrap();
            let expected = below.map_linear(|x| TreeVec::from_tree(DecoratedTree::planted(a.clone(), x.clone())));
            assert_eq!(mc.apply(t).unwrap(), expected);
        }
    }

    #[test]
    fn renorm_map_fixes_unit_and_polynomials() {
        let (_, c) = gkpz_one_point();
        let r = BphzForward::new(c);
        let m = RenormMap::new(&r);
        for k in MultiIndex::all_up_to(2, 3) {
            let x = DecoratedTree::x(k);
            assert_eq!(m.apply(&x).unwrap(), TreeVec::from_tree(x.clone()));
        }
    }

    #[test]
    fn recursion_guard_trips_on_a_growing_map() {
        let (spec, _) = gkpz_one_point();
        let sig = spec.signature();
        let grow = crate::basis::FnMap(|t: &DecoratedTree| {
            Ok(TreeVec::from_tree(DecoratedTree::planted(
                crate::tree::EdgeLabel::kernel(0, MultiIndex::zeros(2)),
                t.clone(),
            )))
        });
        let mc = MCirc::new(&grow);
        let t = parse_tree("I[t1,(0,0)](xi_1)", sig).unwrap();
        assert!(matches!(mc.apply(&t), Err(Error::RecursionDepth(_))));
    }

    #[test]
    fn renormalization_adjoint_identities() {
        let (_, c) = gkpz_one_point();
        let basis = small_gkpz();
        let r = BphzForward::new(c.clone());
        let checks = check_renorm_adjoint(&BphzStar::new(c), &MCirc::new(&r), &basis).unwrap();
        for check in &checks {
            assert!(check.passed() && check.checked > 0, "{check}");
        }
        let mstar = ProjectedAdjoint::new(&RenormMap::new(&r), &basis).unwrap();
        let moved = basis
            .trees()
            .iter()
            .any(|t| mstar.apply(t).unwrap().filter(|x| basis.contains(x)) != TreeVec::from_tree(t.clone()));
        assert!(moved);
    }

    #[test]
    fn diagonal_map_is_not_a_morphism() {
        let basis = small_gkpz();
        let diag = crate::basis::FnMap(|t: &DecoratedTree| {
            let w = int(1 + t.node_count() as i128 * 7 + t.deco_total() as i128 * 3 + t.noise_count() as i128);
            Ok(TreeVec::term(t.clone(), w.into()))
        });
        let checks = check_good_morphism(&diag, &basis);
        assert!(!checks[0].passed());
        assert!(check_good_morphism(&Identity, &basis).iter().all(|c| c.passed()));
    }

    fn bck() -> (EquationSpec, Arc<GradedBasis>) {
        let spec = EquationSpec::preset("bck").unwrap();
        let basis = Arc::new(GradedBasis::enumerate(spec.signature(), Bounds::new(4, 3, 0, 0)).unwrap());
        (spec, basis)
    }

    #[test]
    fn bck_roundtrip_from_identity_and_bphz() {
        let (spec, basis) = bck();
        for c in bck_roundtrip(&Identity, &basis).unwrap() {
            assert!(c.passed(), "{c}");
        }
        let negs = spec.negative_basis().unwrap();
        let loop_tree = parse_tree("xi_1 * I[t1,(0)](xi_1)", spec.signature()).unwrap();
        let ch = Character::one_point(negs.trees(), loop_tree, Scalar::symbol("c")).unwrap();
        let r = BphzForward::new(ch);
        let mstar = ProjectedAdjoint::new(&RenormMap::new(&r), &basis).unwrap();
        for c in bck_roundtrip(&mstar, &basis).unwrap() {
            assert!(c.passed(), "{c}");
        }
        assert!(bck_recover_preparation(&r, &basis).unwrap().passed());
    }

    #[test]
    fn bck_arbitrary_noise_values_give_morphisms() {
        use rand::{Rng, SeedableRng};
        let (spec, basis) = bck();
        let z = parse_tree("xi_1", spec.signature()).unwrap();
        let bigger: Vec<&DecoratedTree> = basis.trees().iter().filter(|t| t.noise_count() >= 2).collect();
        for seed in 0..3 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut value = TreeVec::from_tree(z.clone());
            for _ in 0..3 {
                value.add_rational(bigger[rng.gen_range(0..bigger.len())].clone(), int(rng.gen_range(-3..4)));
            }
            let zz = z.clone();
            let on_noise = FnMap(move |t: &DecoratedTree| {
                Ok(if *t == zz { value.clone() } else { TreeVec::from_tree(t.clone()) })
            });
            let rstar = tabulate_projected(&RstarFromNoiseValues::new(&on_noise), &basis).unwrap();
            let r = transpose(&rstar);
            let mstar = ProjectedAdjoint::new(&RenormMap::new(&r), &basis).unwrap();
            assert!(check_good_morphism(&mstar, &basis).iter().all(|c| c.passed()));
        }
    }

    #[test]
    fn bck_rejects_non_morphisms() {
        let (_, basis) = bck();
        let diag = FnMap(|t: &DecoratedTree| Ok(TreeVec::term(t.clone(), int(1 + t.node_count() as i128).into())));
        assert!(matches!(bck_roundtrip(&diag, &basis), Err(Error::NotAMorphism(_))));
    }

    #[test]
    fn one_point_bphz_fixes_planted_trees() {
        let (_, c) = gkpz_one_point();
        let basis = small_gkpz();
        let check = check_fixes_planted(&BphzForward::new(c), &basis);
        assert!(check.passed() && check.checked > 10, "{check}");
        let (spec, _) = gkpz_one_point();
        let negs = spec.negative_basis().unwrap();
        let planted = parse_tree("I[t1,(0,1)](xi_1)", spec.signature()).unwrap();
        let on_planted = Character::one_point(negs.trees(), planted, int(1).into()).unwrap();
        assert!(!check_fixes_planted(&BphzForward::new(on_planted), &basis).passed());
    }

    #[test]
    fn forward_is_the_transpose_of_rstar() {
        let (spec, c) = gkpz_one_point();
        let basis = Arc::new(GradedBasis::enumerate(spec.signature(), Bounds::new(3, 3, 1, 1)).unwrap());
        let fwd = TabulatedMap::tabulate(&BphzForward::new(c.clone()), &basis).unwrap();
        let from_fwd = transpose(&fwd);
        let direct = tabulate_projected(&BphzStar::new(c), &basis).unwrap();
        assert!(from_fwd.differences(&direct).is_empty());
        assert!(fwd.minus_identity().images().iter().any(|v| !v.is_zero()));
    }
}
