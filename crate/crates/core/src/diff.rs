//! Elementary differentials.
//!
//! A [`DiffExpr`] is a polynomial in the variables `Z_a` (one per kernel type
//! and derivative) and in derived symbols `D_{b_1}…D_{b_r} F_i^l`. Each symbol
//! knows the finite set of variables it depends on, so `D_b F = 0` for `b`
//! outside it and every total derivative is a finite sum.
//!
//! `∂^k` is the iterated total derivative `∏_j (∂^{e_j})^{k_j}` with
//! `∂^{e_j} = Σ_b Z_{b+e_j} D_b`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::basis::TreeMap;
use crate::error::Result;
use crate::grafting::star;
use crate::scalar::{int, Rational, Scalar};
use crate::tree::{DecoratedTree, MultiIndex, Signature, TypeRef};
use crate::treevec::TreeVec;

/// The variable `Z_a`, `a = (kernel type, derivative)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiffVar {
    pub kernel: usize,
    pub deriv: MultiIndex,
}

impl DiffVar {
    pub fn new(kernel: usize, deriv: MultiIndex) -> Self {
        DiffVar { kernel, deriv }
    }

    pub fn shifted(&self, k: &MultiIndex) -> DiffVar {
        DiffVar { kernel: self.kernel, deriv: self.deriv.add(k) }
    }

    fn text(&self, names: &dyn Fn(usize) -> String) -> String {
        format!("[{},{}]", names(self.kernel), self.deriv)
    }
}

/// `F_i^l`: component `i` (0-based), noise `l` with `0` standing for `ζ_0 = 𝟏`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FSymbol {
    pub component: usize,
    pub noise: usize,
    deps: Arc<Vec<DiffVar>>,
}

impl FSymbol {
    pub fn new(component: usize, noise: usize, mut deps: Vec<DiffVar>) -> Self {
        deps.sort();
        deps.dedup();
        FSymbol { component, noise, deps: Arc::new(deps) }
    }

    pub fn deps(&self) -> &[DiffVar] {
        &self.deps
    }

    pub fn depends_on(&self, a: &DiffVar) -> bool {
        self.deps.binary_search(a).is_ok()
    }
}

/// `D_{b_1}…D_{b_r} F_i^l`, derivatives kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Derived {
    pub symbol: FSymbol,
    pub ds: Vec<DiffVar>,
}

impl Derived {
    fn with(&self, a: &DiffVar) -> Derived {
        let mut ds = self.ds.clone();
        let at = ds.partition_point(|d| d <= a);
        ds.insert(at, a.clone());
        Derived { symbol: self.symbol.clone(), ds }
    }
}

/// A product of variable powers and derived symbols, in sorted normal form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DiffMonomial {
    vars: Vec<(DiffVar, u32)>,
    syms: Vec<Derived>,
}

impl DiffMonomial {
    pub fn vars(&self) -> &[(DiffVar, u32)] {
        &self.vars
    }

    pub fn symbols(&self) -> &[Derived] {
        &self.syms
    }

    pub fn is_one(&self) -> bool {
        self.vars.is_empty() && self.syms.is_empty()
    }

    fn mul(&self, other: &DiffMonomial) -> DiffMonomial {
        let mut vars: BTreeMap<DiffVar, u32> = self.vars.iter().cloned().collect();
        for (v, p) in &other.vars {
            *vars.entry(v.clone()).or_insert(0) += p;
        }
        let mut syms = self.syms.clone();
        syms.extend(other.syms.iter().cloned());
        syms.sort();
        DiffMonomial { vars: vars.into_iter().collect(), syms }
    }

    fn without_var(&self, i: usize) -> DiffMonomial {
        let mut m = self.clone();
        if m.vars[i].1 == 1 {
            m.vars.remove(i);
        } else {
            m.vars[i].1 -= 1;
        }
        m
    }

    fn replace_sym(&self, i: usize, s: Derived) -> DiffMonomial {
        let mut syms = self.syms.clone();
        syms.remove(i);
        let at = syms.partition_point(|d| d <= &s);
        syms.insert(at, s);
        DiffMonomial { vars: self.vars.clone(), syms }
    }

    fn times_var(&self, v: &DiffVar) -> DiffMonomial {
        self.mul(&DiffMonomial { vars: vec![(v.clone(), 1)], syms: vec![] })
    }

    /// Variables this monomial can depend on.
    pub fn active_vars(&self) -> Vec<DiffVar> {
        let mut out: Vec<DiffVar> = self.vars.iter().map(|(v, _)| v.clone()).collect();
        for s in &self.syms {
            out.extend(s.symbol.deps().iter().cloned());
        }
        out.sort();
        out.dedup();
        out
    }
}

/// A finite sum of monomials with exact (possibly formal) coefficients.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct DiffExpr {
    terms: BTreeMap<DiffMonomial, Scalar>,
}

impl DiffExpr {
    pub fn zero() -> Self {
        DiffExpr::default()
    }

    pub fn one() -> Self {
        Self::constant(Scalar::one())
    }

    pub fn constant(c: Scalar) -> Self {
        let mut e = DiffExpr::zero();
        e.add_term(DiffMonomial::default(), c);
        e
    }

    pub fn var(v: DiffVar) -> Self {
        let mut e = DiffExpr::zero();
        e.add_term(DiffMonomial { vars: vec![(v, 1)], syms: vec![] }, Scalar::one());
        e
    }

    pub fn symbol(s: FSymbol) -> Self {
        let mut e = DiffExpr::zero();
        e.add_term(DiffMonomial { vars: vec![], syms: vec![Derived { symbol: s, ds: vec![] }] }, Scalar::one());
        e
    }

    pub fn add_term(&mut self, m: DiffMonomial, c: Scalar) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let s = e.get() + &c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &DiffExpr) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn plus(&self, other: &DiffExpr) -> DiffExpr {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn sub(&self, other: &DiffExpr) -> DiffExpr {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }

    pub fn scale(&self, c: &Scalar) -> DiffExpr {
        let mut out = DiffExpr::zero();
        for (m, d) in &self.terms {
            out.add_term(m.clone(), c * d);
        }
        out
    }

    pub fn scale_rational(&self, r: &Rational) -> DiffExpr {
        self.scale(&Scalar::Const(*r))
    }

    pub fn mul(&self, other: &DiffExpr) -> DiffExpr {
        let mut out = DiffExpr::zero();
        for (a, c) in &self.terms {
            for (b, d) in &other.terms {
                out.add_term(a.mul(b), c * d);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> DiffExpr {
        (0..n).fold(DiffExpr::one(), |acc, _| acc.mul(self))
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

    pub fn terms(&self) -> impl Iterator<Item = (&DiffMonomial, &Scalar)> {
        self.terms.iter()
    }

    /// Coefficient of the constant monomial.
    pub fn constant_term(&self) -> Scalar {
        self.terms.get(&DiffMonomial::default()).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn active_vars(&self) -> Vec<DiffVar> {
        let mut out: Vec<DiffVar> = self.terms.keys().flat_map(|m| m.active_vars()).collect();
        out.sort();
        out.dedup();
        out
    }

    fn derive<F: Fn(&DiffMonomial) -> Vec<(Rational, DiffMonomial)>>(&self, f: F) -> DiffExpr {
        let mut out = DiffExpr::zero();
        for (m, c) in &self.terms {
            for (w, n) in f(m) {
                out.add_term(n, c.scale(&w));
            }
        }
        out
    }

    pub fn display<'a>(&'a self, sig: &'a Signature) -> DiffDisplay<'a> {
        DiffDisplay { expr: self, sig: Some(sig) }
    }

    pub fn to_text(&self, sig: &Signature) -> String {
        self.display(sig).to_string()
    }

    /// Machine-readable mirror of the printed form.
    pub fn to_json(&self, sig: &Signature) -> Value {
        let name = |k: usize| sig.kernels()[k].name.clone();
        let var = |v: &DiffVar| json!({ "kernel": name(v.kernel), "deriv": v.deriv.components() });
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(m, c)| {
                json!({
                    "coeff": c.to_string(),
                    "vars": m.vars.iter().map(|(v, p)| {
                        let mut o = var(v);
                        o["power"] = json!(p);
                        o
                    }).collect::<Vec<_>>(),
                    "symbols": m.syms.iter().map(|s| json!({
                        "component": s.symbol.component + 1,
                        "noise": s.symbol.noise,
                        "derivatives": s.ds.iter().map(var).collect::<Vec<_>>(),
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({ "terms": terms })
    }
}

impl FromIterator<(DiffMonomial, Scalar)> for DiffExpr {
    fn from_iter<I: IntoIterator<Item = (DiffMonomial, Scalar)>>(iter: I) -> Self {
        let mut e = DiffExpr::zero();
        for (m, c) in iter {
            e.add_term(m, c);
        }
        e
    }
}

/// `D_a`
pub fn d_a(a: &DiffVar, e: &DiffExpr) -> DiffExpr {
    e.derive(|m| {
        let mut out = Vec::new();
        for (i, (v, p)) in m.vars.iter().enumerate() {
            if v == a {
                out.push((int(*p as i128), m.without_var(i)));
            }
        }
        for (i, s) in m.syms.iter().enumerate() {
            if s.symbol.depends_on(a) {
                out.push((Rational::one(), m.replace_sym(i, s.with(a))));
            }
        }
        out
    })
}

/// `∂^{e_j} = Σ_b Z_{b+e_j} D_b`
pub fn partial(j: usize, e: &DiffExpr) -> DiffExpr {
    e.derive(|m| {
        let mut out = Vec::new();
        for (i, (v, p)) in m.vars.iter().enumerate() {
            let mut up = v.deriv.clone();
            up = up.add(&MultiIndex::unit(up.len(), j));
            out.push((int(*p as i128), m.without_var(i).times_var(&DiffVar::new(v.kernel, up))));
        }
        for (i, s) in m.syms.iter().enumerate() {
            for b in s.symbol.deps() {
                let shifted = b.shifted(&MultiIndex::unit(b.deriv.len(), j));
                out.push((Rational::one(), m.replace_sym(i, s.with(b)).times_var(&shifted)));
            }
        }
        out
    })
}

/// `∂^k = ∏_j (∂^{e_j})^{k_j}`
pub fn partial_total(k: &MultiIndex, e: &DiffExpr) -> DiffExpr {
    let mut out = e.clone();
    for (j, &n) in k.components().iter().enumerate() {
        for _ in 0..n {
            if out.is_zero() {
                return out;
            }
            out = partial(j, &out);
        }
    }
    out
}

/// Right side of the Faà di Bruno formula for `∂^k G / k!`, with `G` a
/// function of the distinct variables `vars`.
pub fn faa_di_bruno_rhs(k: &MultiIndex, g: &DiffExpr, vars: &[DiffVar]) -> DiffExpr {
    let dim = k.len();
    let shifts: Vec<MultiIndex> =
        MultiIndex::all_up_to(dim, k.total()).into_iter().filter(|l| !l.is_zero() && l.le(k)).collect();
    let pairs: Vec<(usize, MultiIndex)> =
        (0..vars.len()).flat_map(|b| shifts.iter().map(move |l| (b, l.clone()))).collect();

    struct Ctx<'a> {
        pairs: &'a [(usize, MultiIndex)],
        vars: &'a [DiffVar],
        g: &'a DiffExpr,
        out: DiffExpr,
    }
    fn rec(cx: &mut Ctx<'_>, at: usize, left: MultiIndex, weight: Rational, zs: DiffExpr, ds: &mut Vec<usize>) {
        if left.is_zero() {
            let mut dg = cx.g.clone();
            for &b in ds.iter() {
                dg = d_a(&cx.vars[b], &dg);
            }
            cx.out.add_assign(&zs.mul(&dg).scale_rational(&weight));
            return;
        }
        if at == cx.pairs.len() {
            return;
        }
        let (b, l) = &cx.pairs[at];
        let mut beta = 0u32;
        let mut rest = left.clone();
        let mut w = weight;
        let mut z = zs.clone();
        loop {
            rec(cx, at + 1, rest.clone(), w, z.clone(), ds);
            let Some(r) = rest.checked_sub(l) else { break };
            rest = r;
            beta += 1;
            w = w / int(beta as i128) / l.factorial();
            z = z.mul(&DiffExpr::var(cx.vars[*b].shifted(l)));
            ds.push(*b);
        }
        for _ in 0..beta {
            ds.pop();
        }
    }
    let mut cx = Ctx { pairs: &pairs, vars, g, out: DiffExpr::zero() };
    rec(&mut cx, 0, k.clone(), Rational::one(), DiffExpr::one(), &mut Vec::new());
    cx.out
}

/// `∂^k G / k!` against its Faà di Bruno expansion. `G` must only involve `vars`.
pub fn faa_di_bruno_check(k: &MultiIndex, g: &DiffExpr, vars: &[DiffVar]) -> bool {
    let lhs = partial_total(k, g).scale_rational(&(Rational::one() / k.factorial()));
    lhs == faa_di_bruno_rhs(k, g, vars)
}

/// `Σ_{ℓ ≤ m} (m choose ℓ) ∂^{m−ℓ} D_{a−ℓ} G = D_a ∂^m G`, with `D_{a−ℓ} = 0`
/// unless `ℓ ≤ a`.
pub fn commutation_check(a: &DiffVar, m: &MultiIndex, g: &DiffExpr) -> bool {
    let mut lhs = DiffExpr::zero();
    for l in m.below() {
        let Some(lowered) = a.deriv.checked_sub(&l) else { continue };
        let inner = d_a(&DiffVar::new(a.kernel, lowered), g);
        let rest = m.checked_sub(&l).expect("l ≤ m");
        lhs.add_assign(&partial_total(&rest, &inner).scale_rational(&int(m.binomial(&l))));
    }
    lhs == d_a(a, &partial_total(m, g))
}

/// The nonlinearities of a system: which `F_i^l` exist, what they depend on,
/// and which component each kernel type integrates.
#[derive(Clone, Debug)]
pub struct Nonlinearity {
    dim: usize,
    symbols: HashMap<(usize, usize), FSymbol>,
    kernel_component: Vec<usize>,
}

impl Nonlinearity {
    pub fn new(dim: usize, symbols: Vec<FSymbol>, kernel_component: Vec<usize>) -> Self {
        let symbols = symbols.into_iter().map(|s| ((s.component, s.noise), s)).collect();
        Nonlinearity { dim, symbols, kernel_component }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn symbol(&self, component: usize, noise: usize) -> Option<&FSymbol> {
        self.symbols.get(&(component, noise))
    }

    pub fn symbols(&self) -> impl Iterator<Item = &FSymbol> {
        self.symbols.values()
    }

    pub fn components(&self) -> usize {
        self.kernel_component.len()
    }

    pub fn component_of_kernel(&self, kernel: usize) -> usize {
        self.kernel_component[kernel]
    }
}

/// Root noise index of `τ` in the `ζ_0 = 𝟏` convention, `None` outside `T`.
fn root_noise(t: &DecoratedTree) -> Option<usize> {
    match t.noises() {
        [] => Some(0),
        [n] if n.deriv.is_zero() => match n.ty {
            TypeRef::Noise(l) => Some(l + 1),
            TypeRef::Kernel(_) => None,
        },
        _ => None,
    }
}

/// `∂^k D_{a_1}…D_{a_n} G`, the root operator of `X^k ∏ 𝓘_{a_j}(·)` applied to `G`.
pub fn root_operator(t: &DecoratedTree, g: &DiffExpr) -> DiffExpr {
    let mut out = g.clone();
    for (e, _) in t.children() {
        let TypeRef::Kernel(k) = e.ty else { unreachable!("children are kernel edges") };
        out = d_a(&DiffVar::new(k, e.deriv.clone()), &out);
        if out.is_zero() {
            return out;
        }
    }
    partial_total(t.deco(), &out)
}

/// `F_i(τ)`; zero on trees with several noises at a node.
pub fn upsilon(nl: &Nonlinearity, i: usize, t: &DecoratedTree) -> DiffExpr {
    let Some(l) = root_noise(t) else { return DiffExpr::zero() };
    let Some(sym) = nl.symbol(i, l) else { return DiffExpr::zero() };
    let mut out = root_operator(t, &DiffExpr::symbol(sym.clone()));
    for (e, c) in t.children() {
        if out.is_zero() {
            break;
        }
        let TypeRef::Kernel(k) = e.ty else { unreachable!() };
        out = out.mul(&upsilon(nl, nl.component_of_kernel(k), c));
    }
    out
}

/// `F_i` extended linearly.
pub fn upsilon_vec(nl: &Nonlinearity, i: usize, v: &TreeVec) -> DiffExpr {
    let mut out = DiffExpr::zero();
    for (t, c) in v.iter() {
        out.add_assign(&upsilon(nl, i, t).scale(c));
    }
    out
}

/// `∏_j F_{l_j}(τ_j)` over the planted factors of `τ`.
fn children_product(nl: &Nonlinearity, t: &DecoratedTree) -> DiffExpr {
    let mut out = DiffExpr::one();
    for (e, c) in t.children() {
        let TypeRef::Kernel(k) = e.ty else { unreachable!() };
        out = out.mul(&upsilon(nl, nl.component_of_kernel(k), c));
    }
    out
}

/// `F_i(τ ⋆ σ) = ∂^k D_{a_1}…D_{a_n} F_i(σ) ∏ F_{l_j}(τ_j)` for a noise-free root in `τ`.
pub fn star_morphism_check(nl: &Nonlinearity, i: usize, sigma: &DecoratedTree, tau: &DecoratedTree) -> bool {
    assert!(tau.noises().is_empty(), "left factor must have no root noise");
    let lhs = upsilon_vec(nl, i, &star(tau, sigma));
    let rhs = root_operator(tau, &upsilon(nl, i, sigma)).mul(&children_product(nl, tau));
    lhs == rhs
}

/// `F_i(R*τ) = ∂^k D_{a_1}…D_{a_n} F_i(R*ζ_l) ∏ F_{l_j}(τ_j)`.
pub fn prop_combined_check(nl: &Nonlinearity, i: usize, tau: &DecoratedTree, rstar: &dyn TreeMap) -> Result<bool> {
    let lhs = upsilon_vec(nl, i, &rstar.apply(tau)?);
    let noise = DecoratedTree::new(MultiIndex::zeros(tau.dim()), tau.noises().to_vec(), vec![]);
    let rhs = root_operator(tau, &upsilon_vec(nl, i, &rstar.apply(&noise)?)).mul(&children_product(nl, tau));
    Ok(lhs == rhs)
}

pub struct DiffDisplay<'a> {
    expr: &'a DiffExpr,
    sig: Option<&'a Signature>,
}

fn write_monomial(f: &mut fmt::Formatter<'_>, m: &DiffMonomial, names: &dyn Fn(usize) -> String) -> fmt::Result {
    let mut parts: Vec<String> = Vec::new();
    for (v, p) in &m.vars {
        if *p == 1 {
            parts.push(format!("Z{}", v.text(names)));
        } else {
            parts.push(format!("Z{}^{p}", v.text(names)));
        }
    }
    for s in &m.syms {
        let ds: String = s.ds.iter().map(|d| format!("D{}", d.text(names))).collect();
        parts.push(format!("{ds}F_{}^{}", s.symbol.component + 1, s.symbol.noise));
    }
    write!(f, "{}", parts.join(" * "))
}

impl fmt::Display for DiffDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = |k: usize| match self.sig {
            Some(sig) => sig.kernels()[k].name.clone(),
            None => format!("t{}", k + 1),
        };
        if self.expr.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.expr.terms.iter().enumerate() {
            let (neg, mag) = match c.as_const() {
                Some(r) if *r < Rational::zero() => (true, Scalar::Const(-r)),
                _ => (false, c.clone()),
            };
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if m.is_one() {
                match &mag {
                    Scalar::Poly(_) => write!(f, "({mag})")?,
                    _ => write!(f, "{mag}")?,
                }
                continue;
            }
            match &mag {
                Scalar::Const(r) if r.is_one() => {}
                Scalar::Const(_) => write!(f, "{mag} * ")?,
                Scalar::Poly(_) => write!(f, "({mag}) * ")?,
            }
            write_monomial(f, m, &names)?;
        }
        Ok(())
    }
}

impl fmt::Debug for DiffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&DiffDisplay { expr: self, sig: None }, f)
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::Rng;

    pub fn z(k: usize, d: &[u32]) -> DiffVar {
        DiffVar::new(k, MultiIndex::from_slice(d))
    }

    /// Two-dimensional setting, one kernel, `F_1^0` and `F_1^1` depending on
    /// `Z_{(t1,0)}` and `Z_{(t1,(0,1))}`.
    pub fn kpz_like() -> Nonlinearity {
        let deps = vec![z(0, &[0, 0]), z(0, &[0, 1])];
        Nonlinearity::new(2, vec![FSymbol::new(0, 0, deps.clone()), FSymbol::new(0, 1, deps)], vec![0])
    }

    /// Random small expression in the given symbols and variables.
    pub fn random_expr<R: Rng>(rng: &mut R, syms: &[FSymbol], vars: &[DiffVar]) -> DiffExpr {
        let mut e = DiffExpr::zero();
        for _ in 0..rng.gen_range(1..4) {
            let mut t = DiffExpr::constant(Scalar::from_int(rng.gen_range(-3..4)));
            for _ in 0..rng.gen_range(0..3) {
                t = t.mul(&DiffExpr::var(vars[rng.gen_range(0..vars.len())].clone()));
            }
            for _ in 0..rng.gen_range(0..3) {
                let mut s = DiffExpr::symbol(syms[rng.gen_range(0..syms.len())].clone());
                if rng.gen_bool(0.4) {
                    s = d_a(&vars[rng.gen_range(0..vars.len())], &s);
                }
                t = t.mul(&s);
            }
            e.add_assign(&t);
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::tree::test_support::{mi, planted, sig2, xi};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f(deps: &[DiffVar]) -> FSymbol {
        FSymbol::new(0, 1, deps.to_vec())
    }

    #[test]
    fn derivative_basics() {
        let a = z(0, &[0, 0]);
        let b = z(0, &[0, 1]);
        assert_eq!(d_a(&a, &DiffExpr::var(a.clone())), DiffExpr::one());
        let fs = DiffExpr::symbol(f(&[a.clone(), b.clone()]));
        let zb_f = DiffExpr::var(b.clone()).mul(&fs);
        assert_eq!(d_a(&a, &zb_f), DiffExpr::var(b.clone()).mul(&d_a(&a, &fs)));
        let g = DiffExpr::symbol(FSymbol::new(0, 0, vec![a.clone()]));
        let lhs = d_a(&a, &fs.mul(&g));
        let rhs = d_a(&a, &fs).mul(&g).plus(&fs.mul(&d_a(&a, &g)));
        assert_eq!(lhs, rhs);
        assert!(d_a(&z(0, &[1, 0]), &fs).is_zero());
    }

    #[test]
    fn first_order_total_derivative() {
        let a = z(0, &[0, 0]);
        let b = z(0, &[0, 1]);
        let g = DiffExpr::symbol(f(&[a.clone(), b.clone()]));
        let expected =
            DiffExpr::var(z(0, &[0, 1])).mul(&d_a(&a, &g)).plus(&DiffExpr::var(z(0, &[0, 2])).mul(&d_a(&b, &g)));
        assert_eq!(partial(1, &g), expected);
        assert_eq!(partial_total(&mi(&[0, 0]), &g), g);
    }

    #[test]
    fn total_derivatives_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vars = [z(0, &[0, 0]), z(0, &[0, 1]), z(1, &[1, 0])];
        let syms = [f(&vars[..2]), FSymbol::new(1, 0, vec![vars[2].clone()])];
        for _ in 0..30 {
            let e = random_expr(&mut rng, &syms, &vars);
            assert_eq!(partial(0, &partial(1, &e)), partial(1, &partial(0, &e)));
        }
    }

    #[test]
    fn second_derivative_of_one_variable() {
        let a = z(0, &[0, 0]);
        let g = DiffExpr::symbol(f(std::slice::from_ref(&a)));
        let two = partial_total(&mi(&[0, 2]), &g);
        let daa = d_a(&a, &d_a(&a, &g));
        let expected =
            DiffExpr::var(z(0, &[0, 1])).pow(2).mul(&daa).plus(&DiffExpr::var(z(0, &[0, 2])).mul(&d_a(&a, &g)));
        assert_eq!(two, expected);
        assert!(faa_di_bruno_check(&mi(&[0, 2]), &g, &[a]));
    }

    #[test]
    fn faa_di_bruno_on_constants_and_first_order() {
        let c = DiffExpr::constant(Scalar::from_int(5));
        assert!(partial_total(&mi(&[1, 1]), &c).is_zero());
        assert!(faa_di_bruno_check(&mi(&[1, 1]), &c, &[]));
        let a = z(0, &[0, 0]);
        let b = z(0, &[0, 1]);
        let g = DiffExpr::symbol(f(&[a.clone(), b.clone()]));
        assert!(faa_di_bruno_check(&mi(&[1, 0]), &g, &[a, b]));
    }

    #[test]
    fn commutation_of_derivatives_on_random_expressions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vars = [z(0, &[0, 0]), z(0, &[0, 1]), z(0, &[1, 1])];
        let syms = [f(&vars), FSymbol::new(0, 0, vec![vars[0].clone()])];
        for _ in 0..20 {
            let e = random_expr(&mut rng, &syms, &vars);
            for m in [mi(&[0, 1]), mi(&[1, 1]), mi(&[0, 2])] {
                for a in &vars {
                    assert!(commutation_check(a, &m, &e), "{e:?} {m} {:?}", a.deriv);
                }
            }
        }
    }

    #[test]
    fn upsilon_unfolds_one_step() {
        let nl = kpz_like();
        let a = z(0, &[0, 0]);
        let f1 = DiffExpr::symbol(nl.symbol(0, 1).unwrap().clone());
        assert_eq!(upsilon(&nl, 0, &xi()), f1);
        let xk = xi().with_deco(mi(&[1, 0]));
        assert_eq!(upsilon(&nl, 0, &xk), partial_total(&mi(&[1, 0]), &f1));
        let t = xi().join(&planted(&[0, 0], xi()));
        assert_eq!(upsilon(&nl, 0, &t), d_a(&a, &f1).mul(&f1));
        // a derivative outside the dependency set kills the tree
        let out = xi().join(&planted(&[1, 0], xi()));
        assert!(upsilon(&nl, 0, &out).is_zero());
        // two noises at a node
        assert!(upsilon(&nl, 0, &xi().join(&xi())).is_zero());
    }

    #[test]
    fn star_morphism_small_cases() {
        let nl = kpz_like();
        let one = DecoratedTree::one(2);
        let s = xi().join(&planted(&[0, 1], xi()));
        assert!(star_morphism_check(&nl, 0, &s, &one));
        assert!(star_morphism_check(&nl, 0, &xi(), &planted(&[0, 1], xi())));
        let tau = DecoratedTree::x(mi(&[0, 1])).join(&planted(&[0, 0], xi()));
        assert!(star_morphism_check(&nl, 0, &s, &tau));
        // 𝓘_a(σ) ↷ τ = 𝓘_a(σ) ⋆ τ, so F_i(𝓘_a(σ) ↷ τ) = F_j(σ) D_a F_i(τ)
        let a = z(0, &[0, 1]);
        let lhs = upsilon_vec(&nl, 0, &star(&planted(&[0, 1], xi()), &s));
        let rhs = upsilon(&nl, 0, &xi()).mul(&d_a(&a, &upsilon(&nl, 0, &s)));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn prints_in_normal_form() {
        let sig = sig2();
        let a = z(0, &[0, 0]);
        let g = DiffExpr::symbol(f(std::slice::from_ref(&a)));
        let e = DiffExpr::var(z(0, &[0, 1])).pow(2).mul(&d_a(&a, &d_a(&a, &g))).scale(&Scalar::from_int(3));
        assert_eq!(e.to_text(&sig), "3 * Z[t1,(0,1)]^2 * D[t1,(0,0)]D[t1,(0,0)]F_1^1");
        let j = e.to_json(&sig);
        assert_eq!(j["terms"][0]["vars"][0]["power"], 2);
        assert_eq!(DiffExpr::zero().to_text(&sig), "0");
        let c = g.scale(&Scalar::symbol("c")).sub(&DiffExpr::one());
        assert_eq!(c.to_text(&sig), "-1 + (c) * F_1^1");
    }
}
