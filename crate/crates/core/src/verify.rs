//! Verification suites: every algebraic identity of the library checked
//! exhaustively on a bounded basis, with the first counterexample kept.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_traits::Zero;
use serde::Serialize;
use serde_json::{json, Value};

use crate::basis::{kernel_labels, Bounds, GradedBasis};
use crate::check::Check;
use crate::coproduct::check_duality;
use crate::diff::{
    commutation_check, d_a, faa_di_bruno_check, prop_combined_check, star_morphism_check, DiffExpr, DiffVar,
};
use crate::error::{Error, Result};
use crate::grafting::{graft, graft_vec, star};
use crate::renorm::{
    bck_recover_preparation, bck_roundtrip, check_fixes_planted, check_preparation, check_renorm_adjoint, small_pairs,
    special_identities, BphzForward, BphzStar, Character, MCirc, ProjectedAdjoint, RenormMap,
};
use crate::rules::EquationSpec;
use crate::scalar::{Rational, Scalar};
use crate::series::{counterterms, verify_renormalized_series};
use crate::tree::{DecoratedTree, EdgeLabel, MultiIndex};
use crate::treevec::TreeVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Star,
    Prelie,
    Prep,
    Morphism,
    Series,
    Faa,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Star, Suite::Prelie, Suite::Prep, Suite::Morphism, Suite::Series, Suite::Faa];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Star => "star",
            Suite::Prelie => "prelie",
            Suite::Prep => "prep",
            Suite::Morphism => "morphism",
            Suite::Series => "series",
            Suite::Faa => "faa",
        }
    }

    /// Bounds used when none are given on the command line.
    pub fn default_bounds(self, spec: &EquationSpec) -> Bounds {
        let c = spec.cutoffs();
        let n = c.max_noises.min(3);
        let (d, p) = (c.max_node_deco.min(1), c.max_edge_deriv.min(1));
        match self {
            Suite::Star | Suite::Series | Suite::Faa => Bounds::new(n, n + 1, d, p),
            Suite::Prelie => Bounds::new(n, 2, d, 0),
            Suite::Prep | Suite::Morphism => Bounds::new(n, n, d, p),
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::InvalidSpec(format!("unknown suite {s:?}")))
    }
}

/// Everything a suite needs.
#[derive(Clone)]
pub struct VerifyConfig {
    pub spec: EquationSpec,
    pub bounds: Bounds,
    pub character: Character,
}

impl VerifyConfig {
    /// `spec` with the default bounds of `suite` and [`default_character`].
    pub fn new(spec: EquationSpec, suite: Suite) -> Result<Self> {
        let bounds = suite.default_bounds(&spec);
        let character = default_character(&spec)?;
        Ok(VerifyConfig { spec, bounds, character })
    }
}

/// One-point formal character `c` on a most negative two-noise tree without
/// root noise or decorations; ties go to the tree with more root branches.
/// The unit character if there is no such tree.
pub fn default_character(spec: &EquationSpec) -> Result<Character> {
    let sig = spec.signature();
    let negs = spec.negative_basis()?;
    let pick =
        negs.trees().iter().filter(|t| t.noise_count() == 2 && t.noises().is_empty() && t.deco_total() == 0).min_by(
            |a, b| {
                (a.degree(sig), std::cmp::Reverse(a.children().len()), *a).cmp(&(
                    b.degree(sig),
                    std::cmp::Reverse(b.children().len()),
                    *b,
                ))
            },
        );
    match pick {
        Some(t) => Character::one_point(negs.trees(), t.clone(), Scalar::symbol("c")),
        None => Ok(Character::unit(sig.dimension())),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub suite: String,
    pub spec: String,
    pub bounds: BoundsRecord,
    pub basis_size: usize,
    pub checks: Vec<Check>,
    /// Facts worth reporting that are not identities, e.g. counterterms that
    /// multiply a noise.
    pub notes: Vec<String>,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundsRecord {
    pub max_noises: usize,
    pub max_edges: usize,
    pub max_deco: u32,
    pub max_deriv: u32,
}

impl From<&Bounds> for BoundsRecord {
    fn from(b: &Bounds) -> Self {
        BoundsRecord { max_noises: b.max_noises, max_edges: b.max_edges, max_deco: b.max_deco, max_deriv: b.max_deriv }
    }
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).unwrap_or_else(|e| json!({ "error": e.to_string() }))
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.bounds;
        writeln!(
            f,
            "suite {} on {} (noises <= {}, edges <= {}, deco <= {}, deriv <= {}; {} trees)",
            self.suite, self.spec, b.max_noises, b.max_edges, b.max_deco, b.max_deriv, self.basis_size
        )?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        write!(f, "{} in {:.2}s", if self.passed() { "PASS" } else { "FAIL" }, self.seconds)
    }
}

/// Runs one suite.
pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<VerificationReport> {
    let start = Instant::now();
    let mut notes = Vec::new();
    let (checks, basis_size) = if suite == Suite::Faa {
        (faa_suite(&cfg.spec), 0)
    } else {
        let basis = Arc::new(GradedBasis::enumerate(cfg.spec.signature(), cfg.bounds)?);
        let checks = match suite {
            Suite::Star => vec![star_associativity(&basis), duality(&basis)],
            Suite::Prelie => vec![multi_pre_lie(&basis, 3, 1), graft_spanning(&cfg.spec, cfg.bounds.max_noises)?],
            Suite::Prep => prep_suite(cfg, &basis)?,
            Suite::Morphism => morphism_suite(cfg, &basis)?,
            Suite::Series => series_suite(cfg, &basis, &mut notes)?,
            Suite::Faa => unreachable!(),
        };
        (checks, basis.len())
    };
    Ok(VerificationReport {
        suite: suite.name().into(),
        spec: cfg.spec.name().unwrap_or("custom").into(),
        bounds: (&cfg.bounds).into(),
        basis_size,
        checks,
        notes,
        seconds: start.elapsed().as_secs_f64(),
    })
}

type Bucket = (usize, usize, u32);

fn buckets(basis: &GradedBasis) -> BTreeMap<Bucket, Vec<&DecoratedTree>> {
    let mut out: BTreeMap<Bucket, Vec<&DecoratedTree>> = BTreeMap::new();
    for t in basis.trees() {
        out.entry((t.noise_count(), t.edge_count(), t.deco_total())).or_default().push(t);
    }
    out
}

type Sparse = Vec<(u32, Rational)>;

/// Star products between interned trees, each pair computed once.
#[derive(Default)]
struct StarTable {
    ids: HashMap<DecoratedTree, u32>,
    trees: Vec<DecoratedTree>,
    memo: HashMap<(u32, u32), Rc<Sparse>>,
}

impl StarTable {
    fn intern(&mut self, t: &DecoratedTree) -> u32 {
        if let Some(&i) = self.ids.get(t) {
            return i;
        }
        let i = self.trees.len() as u32;
        self.trees.push(t.clone());
        self.ids.insert(t.clone(), i);
        i
    }

    fn product(&mut self, a: u32, b: u32) -> Rc<Sparse> {
        if let Some(v) = self.memo.get(&(a, b)) {
            return Rc::clone(v);
        }
        let prod = star(&self.trees[a as usize], &self.trees[b as usize]);
        let mut v: Sparse = prod
            .iter()
            .map(|(t, c)| (self.intern(t), *c.as_const().expect("star has rational coefficients")))
            .collect();
        v.sort_unstable_by_key(|e| e.0);
        let v = Rc::new(v);
        self.memo.insert((a, b), Rc::clone(&v));
        v
    }

    /// `x ⋆ z`
    fn left(&mut self, x: &Sparse, z: u32) -> Sparse {
        let mut acc = Vec::new();
        for &(t, c) in x {
            acc.extend(self.product(t, z).iter().map(|&(s, d)| (s, c * d)));
        }
        collect(acc)
    }

    /// `u ⋆ y`
    fn right(&mut self, u: u32, y: &Sparse) -> Sparse {
        let mut acc = Vec::new();
        for &(t, c) in y {
            acc.extend(self.product(u, t).iter().map(|&(s, d)| (s, c * d)));
        }
        collect(acc)
    }
}

fn collect(mut acc: Sparse) -> Sparse {
    acc.sort_unstable_by_key(|e| e.0);
    let mut out: Sparse = Vec::with_capacity(acc.len());
    for (i, c) in acc {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += c,
            _ => out.push((i, c)),
        }
    }
    out.retain(|e| !e.1.is_zero());
    out
}

/// `(u ⋆ w) ⋆ z = u ⋆ (w ⋆ z)` for basis triples whose noise, edge and
/// decoration totals stay within the bounds.
pub fn star_associativity(basis: &GradedBasis) -> Check {
    let sig = basis.signature();
    let b = basis.bounds();
    let bk = buckets(basis);
    let fits = |n: usize, e: usize, d: u32| n <= b.max_noises && e <= b.max_edges && d <= b.max_deco;
    let mut table = StarTable::default();
    let zs: Vec<(Bucket, Vec<u32>)> =
        bk.iter().map(|(k, v)| (*k, v.iter().map(|t| table.intern(t)).collect())).collect();
    let mut checked = 0;
    for ((n1, e1, d1), us) in &zs {
        for ((n2, e2, d2), ws) in &zs {
            let (n, e, d) = (n1 + n2, e1 + e2, d1 + d2);
            if !fits(n, e, d) {
                continue;
            }
            for &u in us {
                for &w in ws {
                    let uw = table.product(u, w);
                    for ((n3, e3, d3), z_list) in &zs {
                        if !fits(n + n3, e + e3, d + d3) {
                            continue;
                        }
                        for &z in z_list {
                            checked += 1;
                            let lhs = table.left(&uw, z);
                            let wz = table.product(w, z);
                            let rhs = table.right(u, &wz);
                            if lhs != rhs {
                                let name = |x: u32| table.trees[x as usize].to_text(sig);
                                let text = format!("u = {}, w = {}, z = {}", name(u), name(w), name(z));
                                return Check::from_parts("star associativity", checked, Some(text));
                            }
                        }
                    }
                }
            }
        }
    }
    Check::from_parts("star associativity", checked, None)
}

/// `⟨σ⋆τ, μ⟩ = ⟨τ⊗σ, Δμ⟩` for `σ ∈ T_+` and `τ, μ` in the basis.
pub fn duality(basis: &GradedBasis) -> Check {
    let sig = basis.signature();
    let rep = check_duality(basis);
    Check::from_parts(
        "star/coproduct duality",
        rep.checked,
        rep.failure
            .map(|(s, t, m)| format!("sigma = {}, tau = {}, mu = {}", s.to_text(sig), t.to_text(sig), m.to_text(sig))),
    )
}

/// Nodes in the usual picture, where each noise is an edge to a leaf.
pub fn node_count_with_leaves(t: &DecoratedTree) -> usize {
    t.node_count() + t.noise_count()
}

/// The associator `s ↷_a (t ↷_b u) − (s ↷_a t) ↷_b u` is symmetric under
/// `(s, a) ↔ (t, b)`, for basis trees with at most `max_nodes` nodes (noise
/// leaves included) and every kernel label with derivative order up to
/// `label_deriv`.
pub fn multi_pre_lie(basis: &GradedBasis, max_nodes: usize, label_deriv: u32) -> Check {
    let sig = basis.signature();
    let labels = kernel_labels(sig, label_deriv);
    let small: Vec<&DecoratedTree> = basis.trees().iter().filter(|t| node_count_with_leaves(t) <= max_nodes).collect();
    let left: Vec<(&DecoratedTree, &EdgeLabel)> =
        small.iter().flat_map(|s| labels.iter().map(move |a| (*s, a))).collect();
    let one = |x: &DecoratedTree| TreeVec::from_tree(x.clone());
    let mut c = Check::try_run("multi-pre-Lie relation", &small, |&u| {
        let mut assoc = Vec::with_capacity(left.len() * left.len());
        let onto_u: Vec<TreeVec> = left.iter().map(|(t, b)| graft(t, b, u)).collect::<Result<_>>()?;
        for (s, a) in &left {
            for (j, (t, b)) in left.iter().enumerate() {
                let x = graft_vec(&one(s), a, &onto_u[j])?.sub(&graft_vec(&graft(s, a, t)?, b, &one(u))?);
                assoc.push(x);
            }
        }
        let n = left.len();
        for i in 0..n {
            for j in i + 1..n {
                if assoc[i * n + j] != assoc[j * n + i] {
                    let ((s, a), (t, b)) = (left[i], left[j]);
                    return Ok(Some(format!(
                        "s = {}, t = {}, u = {}, a = {}, b = {}",
                        s.to_text(sig),
                        t.to_text(sig),
                        u.to_text(sig),
                        a.to_text(sig),
                        b.to_text(sig)
                    )));
                }
            }
        }
        Ok(None)
    });
    c.checked = small.len() * left.len() * left.len();
    c
}

/// Whether `t` lies in the span of iterated grafts of the generators
/// `X^k ∏ζ`. With `ρ = t` minus its last branch `𝓘_a(c)`, the graft `c ↷_a ρ`
/// is `t` plus trees with fewer root branches or less root decoration.
fn graft_spanned(t: &DecoratedTree, memo: &mut HashMap<DecoratedTree, bool>) -> Result<bool> {
    if t.children().is_empty() {
        return Ok(true);
    }
    if let Some(&known) = memo.get(t) {
        return Ok(known);
    }
    let (a, c) = t.children().last().expect("nonempty");
    let rest = t.children()[..t.children().len() - 1].to_vec();
    let rho = DecoratedTree::new(t.deco().clone(), t.noises().to_vec(), rest);
    let v = graft(c, a, &rho)?;
    let mut ok = !v.coeff(t).is_zero() && graft_spanned(c, memo)? && graft_spanned(&rho, memo)?;
    for (s, _) in v.iter() {
        if !ok {
            break;
        }
        if s != t {
            ok = graft_spanned(s, memo)?;
        }
    }
    memo.insert(t.clone(), ok);
    Ok(ok)
}

/// Every conforming tree with at most `max_noises` noises is a linear
/// combination of iterated grafts of `X^k ζ_l`.
pub fn graft_spanning(spec: &EquationSpec, max_noises: usize) -> Result<Check> {
    let sig = spec.signature();
    let trees: Vec<DecoratedTree> =
        spec.generate_conforming()?.trees().iter().filter(|t| t.noise_count() <= max_noises).cloned().collect();
    let mut memo = HashMap::new();
    for t in &trees {
        if !graft_spanned(t, &mut memo)? {
            return Ok(Check::from_parts("spanned by iterated grafts", trees.len(), Some(t.to_text(sig))));
        }
    }
    Ok(Check::from_parts("spanned by iterated grafts", trees.len(), None))
}

fn prep_suite(cfg: &VerifyConfig, basis: &Arc<GradedBasis>) -> Result<Vec<Check>> {
    let r = BphzForward::new(cfg.character.clone());
    let rstar = BphzStar::new(cfg.character.clone());
    let rep = check_preparation(&r, &rstar, basis)?;
    let mut out = rep.checks();
    out.extend(special_identities(&rstar, basis));
    out.push(check_fixes_planted(&r, basis));
    Ok(out)
}

fn morphism_suite(cfg: &VerifyConfig, basis: &Arc<GradedBasis>) -> Result<Vec<Check>> {
    let r = BphzForward::new(cfg.character.clone());
    let rstar = BphzStar::new(cfg.character.clone());
    let mut out = check_renorm_adjoint(&rstar, &MCirc::new(&r), basis)?;
    let b = basis.bounds();
    if b.max_deco == 0 && b.max_deriv == 0 && basis.signature().kernels().len() == 1 {
        let mstar = ProjectedAdjoint::new(&RenormMap::new(&r), basis)?;
        out.extend(bck_roundtrip(&mstar, basis)?);
        out.push(bck_recover_preparation(&r, basis)?);
    }
    Ok(out)
}

/// `F_i` turns `⋆` into differentiation, and `F_i(R*τ)` factorizes through
/// `R*ζ_l`, for every component.
pub fn differentiation_checks(spec: &EquationSpec, character: &Character, basis: &GradedBasis) -> Result<Vec<Check>> {
    let sig = spec.signature();
    let nl = spec.nonlinearity();
    let rstar = BphzStar::new(character.clone());
    let pairs: Vec<(&DecoratedTree, &DecoratedTree)> =
        small_pairs(basis, 0).into_iter().filter(|(t, _)| t.noises().is_empty()).collect();
    let mut out = Vec::new();
    for i in 0..spec.components().len() {
        let name = &spec.components()[i].name;
        out.push(Check::run(&format!("F_{name} turns star into differentiation"), &pairs, |(t, s)| {
            (!star_morphism_check(nl, i, s, t)).then(|| format!("tau = {}, sigma = {}", t.to_text(sig), s.to_text(sig)))
        }));
        out.push(Check::try_run(&format!("F_{name}(R* tau) factorizes through R* zeta_l"), basis.trees(), |t| {
            Ok((!prop_combined_check(nl, i, t, &rstar)?).then(|| format!("tau = {}", t.to_text(sig))))
        }));
    }
    Ok(out)
}

/// The renormalized series identity and the counterterm equivalence for
/// every component. Counterterms that multiply a noise go to `notes`.
pub fn series_checks(
    spec: &EquationSpec,
    character: &Character,
    basis: &GradedBasis,
    notes: &mut Vec<String>,
) -> Result<Vec<Check>> {
    let sig = spec.signature();
    let rstar = BphzStar::new(character.clone());
    let mut out = Vec::new();
    for i in 0..spec.components().len() {
        let name = &spec.components()[i].name;
        match verify_renormalized_series(spec, &rstar, i, basis) {
            Ok(rep) => out.push(rep.check),
            Err(Error::EmptyWindow) => notes.push(format!("component {name}: comparison window empty")),
            Err(e) => return Err(e),
        }
        let ct = counterterms(spec, character, i)?;
        out.push(Check { name: format!("{} ({name})", ct.equivalence.name), ..ct.equivalence });
        for (l, d) in &ct.noise_terms {
            notes.push(format!("component {name}: the counterterm multiplies noise {l}: {}", d.to_text(sig)));
        }
    }
    Ok(out)
}

fn series_suite(cfg: &VerifyConfig, basis: &Arc<GradedBasis>, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let mut out = differentiation_checks(&cfg.spec, &cfg.character, basis)?;
    out.extend(series_checks(&cfg.spec, &cfg.character, basis, notes)?);
    Ok(out)
}

/// Test expressions for the operator identities: products of up to two
/// variables with a symbol or a first derivative of one.
fn operator_samples(spec: &EquationSpec) -> Vec<(DiffExpr, Vec<DiffVar>)> {
    let mut out = Vec::new();
    for sym in spec.nonlinearity().symbols() {
        let vars: Vec<DiffVar> = sym.deps().iter().take(3).cloned().collect();
        let f = DiffExpr::symbol(sym.clone());
        let z = |v: &DiffVar| DiffExpr::var(v.clone());
        out.push((f.clone(), vars.clone()));
        for v in &vars {
            out.push((z(v).mul(&f), vars.clone()));
            out.push((d_a(v, &f).mul(&f), vars.clone()));
            for w in &vars {
                out.push((z(v).mul(&z(w)).mul(&d_a(w, &f)).plus(&f.pow(2)), vars.clone()));
            }
        }
    }
    out
}

fn faa_suite(spec: &EquationSpec) -> Vec<Check> {
    let dim = spec.signature().dimension();
    let orders: Vec<MultiIndex> = MultiIndex::all_up_to(dim, 3).into_iter().filter(|k| !k.is_zero()).collect();
    let samples = operator_samples(spec);
    let faa: Vec<(&MultiIndex, &(DiffExpr, Vec<DiffVar>))> =
        orders.iter().flat_map(|k| samples.iter().map(move |s| (k, s))).collect();
    let sig = spec.signature();
    let faa_check = Check::run("Faa di Bruno", &faa, |(k, (g, vars))| {
        (!faa_di_bruno_check(k, g, vars)).then(|| format!("k = {k}, G = {}", g.to_text(sig)))
    });
    let shifts = MultiIndex::all_up_to(dim, 1);
    let mut comm: Vec<(DiffVar, &MultiIndex, &DiffExpr)> = Vec::new();
    for (g, vars) in &samples {
        for v in vars {
            for m in &orders {
                comm.extend(shifts.iter().map(|s| (v.shifted(s), m, g)));
            }
        }
    }
    let comm_check = Check::run("derivatives commute with the total derivative", &comm, |(a, m, g)| {
        (!commutation_check(a, m, g)).then(|| format!("a = {:?}, m = {m}, G = {}", a, g.to_text(sig)))
    });
    vec![faa_check, comm_check]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_tree;

    fn gkpz() -> EquationSpec {
        EquationSpec::preset("gkpz").unwrap()
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("stars".parse::<Suite>().is_err());
    }

    #[test]
    fn default_character_sits_on_the_loop() {
        let spec = gkpz();
        let ch = default_character(&spec).unwrap();
        let support: Vec<_> = ch.support().map(|(t, _)| t.clone()).collect();
        let looped = parse_tree("I[t1,(0,1)](xi_1) * I[t1,(0,1)](xi_1)", spec.signature()).unwrap();
        assert_eq!(support, vec![looped]);
        // every bck node carries a noise
        let bck = EquationSpec::preset("bck").unwrap();
        assert_eq!(default_character(&bck).unwrap().support().count(), 0);
    }

    #[test]
    fn small_star_checks_pass() {
        let spec = gkpz();
        let basis = GradedBasis::enumerate(spec.signature(), Bounds::new(2, 2, 1, 1)).unwrap();
        let assoc = star_associativity(&basis);
        assert!(assoc.passed(), "{assoc}");
        assert!(assoc.checked > 1000);
        let dual = duality(&basis);
        assert!(dual.passed(), "{dual}");
        assert!(dual.checked > 0);
    }

    #[test]
    fn small_multi_pre_lie_passes() {
        let spec = gkpz();
        let basis = GradedBasis::enumerate(spec.signature(), Bounds::new(2, 1, 1, 0)).unwrap();
        let c = multi_pre_lie(&basis, 3, 1);
        assert!(c.passed(), "{c}");
        assert!(c.checked > 0);
    }

    #[test]
    fn node_count_includes_noise_leaves() {
        let spec = gkpz();
        let t = parse_tree("xi_1 * I[t1,(0,0)](xi_1)", spec.signature()).unwrap();
        assert_eq!(node_count_with_leaves(&t), 4);
    }

    #[test]
    fn conforming_trees_are_spanned_by_grafts() {
        for name in ["bck", "gkpz"] {
            let spec = EquationSpec::preset(name).unwrap();
            let c = graft_spanning(&spec, 3).unwrap();
            assert!(c.passed(), "{name}: {c}");
            assert!(c.checked > 0);
        }
    }

    #[test]
    fn a_tree_whose_branch_is_not_spanned_is_not_spanned() {
        let spec = gkpz();
        let sig = spec.signature();
        let branch = parse_tree("xi_1 * I[t1,(0,0)](xi_1)", sig).unwrap();
        let t = parse_tree("I[t1,(0,1)](xi_1 * I[t1,(0,0)](xi_1))", sig).unwrap();
        let mut memo = HashMap::new();
        assert!(graft_spanned(&t, &mut memo).unwrap());
        let mut poisoned = HashMap::from([(branch, false)]);
        assert!(!graft_spanned(&t, &mut poisoned).unwrap());
    }

    #[test]
    fn faa_report_serializes() {
        let cfg = VerifyConfig::new(gkpz(), Suite::Faa).unwrap();
        let r = run_suite(Suite::Faa, &cfg).unwrap();
        assert!(r.passed(), "{r}");
        let j = r.to_json();
        assert_eq!(j["suite"], "faa");
        assert_eq!(j["spec"], "gkpz");
        assert!(j["checks"].as_array().unwrap().len() >= 2);
        assert!(r.to_string().starts_with("suite faa on gkpz"));
    }

    #[test]
    fn default_bounds_follow_the_cutoffs() {
        let spec = gkpz();
        assert_eq!(Suite::Star.default_bounds(&spec), Bounds::new(3, 4, 1, 1));
        assert_eq!(Suite::Prelie.default_bounds(&spec), Bounds::new(3, 2, 1, 0));
        assert_eq!(Suite::Prep.default_bounds(&spec), Bounds::new(3, 3, 1, 1));
    }
}
