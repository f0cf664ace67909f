//! Equation specs, rule-conforming trees and the negative basis.
//!
//! A system `(∂_t − L_i) u_i = Σ_l F_i^l(u, ∇u) ξ_l` is described by its
//! signature, one component per kernel type, and the variables each `F_i^l`
//! depends on. Index `l = 0` is the drift term (`ξ_0 = 1`, tree `ζ_0 = 𝟏`);
//! in spec files it is written as the noise name `"1"`.
//!
//! A tree conforms when its elementary differential does not vanish for
//! generic nonlinearities with those dependencies: at every node the symbol
//! `F_i^l` exists, every child edge label is one of its variables, and a
//! nonzero node decoration needs at least one variable.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::basis::{choose, Bounds, GradedBasis, Item};
use crate::diff::{DiffVar, FSymbol, Nonlinearity};
use crate::error::{Error, Result};
use crate::scalar::{int, Rational};
use crate::tree::{DecoratedTree, EdgeLabel, MultiIndex, Signature, TypeDecl, TypeRef};

const PRESET_GKPZ: &str = include_str!("../presets/gkpz.json");
const PRESET_PHI4: &str = include_str!("../presets/phi4-like.json");
const PRESET_BCK: &str = include_str!("../presets/bck.json");
const PRESET_GPAM2D: &str = include_str!("../presets/gpam2d.json");

pub const PRESET_NAMES: [&str; 4] = ["gkpz", "phi4-like", "bck", "gpam2d"];

/// Name written in spec files for the drift term.
pub const DRIFT: &str = "1";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum MIndexFile {
    List(Vec<u32>),
    Text(String),
}

impl MIndexFile {
    fn parse(&self) -> Result<Vec<u32>> {
        match self {
            MIndexFile::List(v) => Ok(v.clone()),
            MIndexFile::Text(s) => {
                let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
                inner
                    .split(',')
                    .map(|c| c.trim().parse().map_err(|_| Error::InvalidSpec(format!("bad multi-index {s:?}"))))
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DepFile(String, MIndexFile);

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ComponentFile {
    name: String,
    kernel: String,
    #[serde(default)]
    deps: Vec<DepFile>,
    noises: Vec<String>,
    /// Per-noise dependency sets overriding `deps`.
    #[serde(default, rename = "noiseDeps", skip_serializing_if = "BTreeMap::is_empty")]
    noise_deps: BTreeMap<String, Vec<DepFile>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CutoffsFile {
    #[serde(with = "crate::serde_rational")]
    gamma: Rational,
    #[serde(rename = "maxNoises")]
    max_noises: usize,
    #[serde(rename = "maxNodeDeco")]
    max_node_deco: u32,
    #[serde(rename = "maxEdgeDeriv")]
    max_edge_deriv: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    dimension: usize,
    scaling: Vec<u32>,
    kernels: Vec<TypeDecl>,
    noises: Vec<TypeDecl>,
    components: Vec<ComponentFile>,
    cutoffs: CutoffsFile,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub kernel: usize,
    /// Noise indices with a nonlinearity, `0` for the drift.
    pub noises: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cutoffs {
    /// Degree cutoff: conforming trees have degree `< gamma`.
    pub gamma: Rational,
    pub max_noises: usize,
    /// Bound on the sum of node decorations `Σ_v |n_v|_1`.
    pub max_node_deco: u32,
    /// Bound on `|p|_1` for each kernel edge.
    pub max_edge_deriv: u32,
}

/// A system of equations: signature, nonlinearity dependencies, cutoffs.
#[derive(Clone, Debug)]
pub struct EquationSpec {
    name: Option<String>,
    sig: Signature,
    components: Vec<Component>,
    cutoffs: Cutoffs,
    nl: Nonlinearity,
    file: SpecFile,
}

impl EquationSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpecFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("malformed spec file: {e}")))?;
        Self::from_file(file)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "gkpz" => PRESET_GKPZ,
            "phi4-like" => PRESET_PHI4,
            "bck" => PRESET_BCK,
            "gpam2d" => PRESET_GPAM2D,
            _ => return Err(Error::UnknownPreset(name.into())),
        };
        Self::from_json(text)
    }

    fn from_file(file: SpecFile) -> Result<Self> {
        if file.scaling.len() != file.dimension {
            return Err(Error::InvalidSpec(format!(
                "scaling has {} entries, dimension is {}",
                file.scaling.len(),
                file.dimension
            )));
        }
        let sig = Signature::new(&file.scaling, file.noises.clone(), file.kernels.clone())?;
        let noise_index = |name: &str| -> Result<usize> {
            if name == DRIFT {
                return Ok(0);
            }
            sig.noises()
                .iter()
                .position(|n| n.name == name)
                .map(|l| l + 1)
                .ok_or_else(|| Error::InvalidSpec(format!("unknown noise {name:?}")))
        };
        let var = |d: &DepFile| -> Result<DiffVar> {
            let k = sig.kernel_index(&d.0).ok_or_else(|| Error::InvalidSpec(format!("unknown kernel {:?}", d.0)))?;
            let m = d.1.parse()?;
            if m.len() != sig.dimension() {
                return Err(Error::InvalidSpec(format!(
                    "dependency multi-index {m:?} has {} entries, dimension is {}",
                    m.len(),
                    sig.dimension()
                )));
            }
            Ok(DiffVar::new(k, MultiIndex::from_slice(&m)))
        };

        let mut kernel_component = vec![usize::MAX; sig.kernels().len()];
        let mut components = Vec::new();
        let mut symbols = Vec::new();
        for (i, c) in file.components.iter().enumerate() {
            let k = sig.kernel_index(&c.kernel).ok_or_else(|| {
                Error::InvalidSpec(format!("component {} uses unknown kernel {:?}", c.name, c.kernel))
            })?;
            if kernel_component[k] != usize::MAX {
                return Err(Error::InvalidSpec(format!("kernel {} is used by two components", c.kernel)));
            }
            kernel_component[k] = i;
            let deps = c.deps.iter().map(var).collect::<Result<Vec<_>>>()?;
            let mut noises = Vec::new();
            for name in &c.noises {
                let l = noise_index(name)?;
                if noises.contains(&l) {
                    return Err(Error::InvalidSpec(format!("noise {name:?} listed twice in {}", c.name)));
                }
                let own = match c.noise_deps.get(name) {
                    Some(ds) => ds.iter().map(var).collect::<Result<Vec<_>>>()?,
                    None => deps.clone(),
                };
                symbols.push(FSymbol::new(i, l, own));
                noises.push(l);
            }
            for name in c.noise_deps.keys() {
                if !c.noises.contains(name) {
                    return Err(Error::InvalidSpec(format!(
                        "noiseDeps entry {name:?} is not among the noises of {}",
                        c.name
                    )));
                }
            }
            noises.sort();
            components.push(Component { name: c.name.clone(), kernel: k, noises });
        }
        if let Some(k) = kernel_component.iter().position(|&c| c == usize::MAX) {
            return Err(Error::InvalidSpec(format!("kernel {} has no component", sig.kernels()[k].name)));
        }
        let cutoffs = Cutoffs {
            gamma: file.cutoffs.gamma,
            max_noises: file.cutoffs.max_noises,
            max_node_deco: file.cutoffs.max_node_deco,
            max_edge_deriv: file.cutoffs.max_edge_deriv,
        };
        let nl = Nonlinearity::new(sig.dimension(), symbols, kernel_component);
        Ok(EquationSpec { name: file.name.clone(), sig, components, cutoffs, nl, file })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("spec serializes")
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn cutoffs(&self) -> &Cutoffs {
        &self.cutoffs
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    /// The same spec with other cutoffs.
    pub fn with_cutoffs(&self, cutoffs: Cutoffs) -> Self {
        let mut s = self.clone();
        s.file.cutoffs = CutoffsFile {
            gamma: cutoffs.gamma,
            max_noises: cutoffs.max_noises,
            max_node_deco: cutoffs.max_node_deco,
            max_edge_deriv: cutoffs.max_edge_deriv,
        };
        s.cutoffs = cutoffs;
        s
    }

    /// Kernel edge labels some nonlinearity can differentiate in.
    fn used_labels(&self) -> Vec<EdgeLabel> {
        let mut out: Vec<EdgeLabel> = self
            .nl
            .symbols()
            .flat_map(|s| s.deps().iter())
            .filter(|v| v.deriv.total() <= self.cutoffs.max_edge_deriv)
            .map(|v| EdgeLabel::kernel(v.kernel, v.deriv.clone()))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Largest kernel-edge count a tree of degree `< gamma` can have.
    pub fn max_edges(&self) -> Result<usize> {
        let labels = self.used_labels();
        let Some(min_edge) = labels.iter().map(|l| l.degree(&self.sig)).min() else { return Ok(0) };
        if !min_edge.is_positive() {
            return Err(Error::InvalidSpec(
                "a kernel edge of non-positive degree is reachable; the degree cutoff does not bound the trees".into(),
            ));
        }
        let min_noise = self.sig.noises().iter().map(|n| n.degree).min().unwrap_or_else(Rational::zero);
        let room = self.cutoffs.gamma - min_noise * int(self.cutoffs.max_noises as i128);
        if !room.is_positive() {
            return Ok(0);
        }
        Ok(((room / min_edge).ceil().to_integer() - 1).max(0) as usize)
    }

    /// Bounds covering every conforming tree.
    pub fn bounds(&self) -> Result<Bounds> {
        Ok(Bounds::new(
            self.cutoffs.max_noises,
            self.max_edges()?,
            self.cutoffs.max_node_deco,
            self.cutoffs.max_edge_deriv,
        ))
    }

    /// Whether `τ` conforms with component `i` at its root.
    pub fn conforms_as(&self, i: usize, t: &DecoratedTree) -> bool {
        let l = match t.noises() {
            [] => 0,
            [n] if n.deriv.is_zero() => match n.ty {
                TypeRef::Noise(l) => l + 1,
                TypeRef::Kernel(_) => return false,
            },
            _ => return false,
        };
        let Some(sym) = self.nl.symbol(i, l) else { return false };
        if !t.deco().is_zero() && sym.deps().is_empty() {
            return false;
        }
        t.children().iter().all(|(e, c)| {
            let TypeRef::Kernel(k) = e.ty else { return false };
            sym.depends_on(&DiffVar::new(k, e.deriv.clone())) && self.conforms_as(self.nl.component_of_kernel(k), c)
        })
    }

    /// Conforms with some component at the root.
    pub fn is_conforming(&self, t: &DecoratedTree) -> bool {
        (0..self.components.len()).any(|i| self.conforms_as(i, t))
    }

    /// Conforming trees of degree `< gamma` within the cutoffs.
    pub fn generate_conforming(&self) -> Result<GradedBasis> {
        let bounds = self.bounds()?;
        let spec = Arc::new(self.clone());
        let gen = Arc::new(move |b: &Bounds| generate(&spec, b));
        GradedBasis::generated(&self.sig, bounds, gen)
    }

    /// `B⁻`: `𝟏` and the conforming trees of negative degree.
    pub fn negative_basis(&self) -> Result<GradedBasis> {
        let all = self.generate_conforming()?;
        let mut trees: Vec<DecoratedTree> =
            all.trees().iter().filter(|t| t.degree(&self.sig).is_negative()).cloned().collect();
        trees.push(DecoratedTree::one(self.sig.dimension()));
        Ok(GradedBasis::from_trees(&self.sig, *all.bounds(), trees))
    }
}

struct RuleGen<'a> {
    spec: &'a EquationSpec,
    bounds: &'a Bounds,
    memo: HashMap<(usize, usize, usize, u32), Arc<Vec<DecoratedTree>>>,
    produced: usize,
}

impl RuleGen<'_> {
    /// Trees conforming as component `comp` with exactly `e` kernel edges,
    /// `n` noises and decoration total `d`.
    fn exact(&mut self, comp: usize, e: usize, n: usize, d: u32) -> Result<Arc<Vec<DecoratedTree>>> {
        if let Some(v) = self.memo.get(&(comp, e, n, d)) {
            return Ok(v.clone());
        }
        let dim = self.spec.sig.dimension();
        let nl = self.spec.nonlinearity();
        let mut out = Vec::new();
        for &l in &self.spec.components[comp].noises {
            let root_noises = usize::from(l > 0);
            if root_noises > n {
                continue;
            }
            let sym = nl.symbol(comp, l).expect("declared symbol").clone();
            let labels: Vec<EdgeLabel> = sym
                .deps()
                .iter()
                .filter(|v| v.deriv.total() <= self.bounds.max_deriv)
                .map(|v| EdgeLabel::kernel(v.kernel, v.deriv.clone()))
                .collect();
            let mut items = Vec::new();
            for ce in 1..=e {
                for cn in 0..=n - root_noises {
                    for cd in 0..=d {
                        for label in &labels {
                            let TypeRef::Kernel(k) = label.ty else { unreachable!() };
                            for t in self.exact(nl.component_of_kernel(k), ce - 1, cn, cd)?.iter() {
                                items.push(Item {
                                    label: label.clone(),
                                    tree: t.clone(),
                                    edges: ce,
                                    noises: cn,
                                    deco: cd,
                                });
                            }
                        }
                    }
                }
            }
            items.sort_by(|a, b| (&a.label, &a.tree).cmp(&(&b.label, &b.tree)));
            let noise: Vec<EdgeLabel> =
                if l == 0 { vec![] } else { vec![EdgeLabel::noise(l - 1, MultiIndex::zeros(dim))] };
            for rd in 0..=d {
                if rd > 0 && sym.deps().is_empty() {
                    continue;
                }
                let mut sets = Vec::new();
                choose(&items, 0, e, n - root_noises, d - rd, &mut Vec::new(), &mut sets);
                for k in MultiIndex::all_up_to(dim, rd).into_iter().filter(|k| k.total() == rd) {
                    for set in &sets {
                        let children = set.iter().map(|&i| (items[i].label.clone(), items[i].tree.clone())).collect();
                        out.push(DecoratedTree::new(k.clone(), noise.clone(), children));
                    }
                }
            }
        }
        self.produced += out.len();
        if self.produced > self.bounds.cap {
            return Err(Error::BasisTooLarge { cap: self.bounds.cap });
        }
        let out = Arc::new(out);
        self.memo.insert((comp, e, n, d), out.clone());
        Ok(out)
    }
}

fn generate(spec: &EquationSpec, bounds: &Bounds) -> Result<Vec<DecoratedTree>> {
    let sig = &spec.sig;
    let min_edge = spec.used_labels().iter().map(|l| l.degree(sig)).min().unwrap_or_else(Rational::zero);
    let min_noise = sig.noises().iter().map(|n| n.degree).min().unwrap_or_else(Rational::zero);
    let min_scale = int(*sig.scaling().components().iter().min().expect("dimension ≥ 1") as i128);
    let mut g = RuleGen { spec, bounds, memo: HashMap::new(), produced: 0 };
    let mut out = Vec::new();
    for comp in 0..spec.components.len() {
        for e in 0..=bounds.max_edges {
            for n in 0..=bounds.max_noises {
                for d in 0..=bounds.max_deco {
                    let lowest = min_edge * int(e as i128) + min_noise * int(n as i128) + min_scale * int(d as i128);
                    if lowest >= spec.cutoffs.gamma {
                        continue;
                    }
                    for t in g.exact(comp, e, n, d)?.iter() {
                        if t.degree(&spec.sig) < spec.cutoffs.gamma {
                            out.push(t.clone());
                        }
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_trees;
    use crate::diff::upsilon;
    use crate::grammar::parse_tree;

    fn oracle(spec: &EquationSpec) -> Vec<DecoratedTree> {
        let nl = spec.nonlinearity();
        let b = spec.bounds().unwrap();
        let mut all = enumerate_trees(spec.signature(), &b).unwrap();
        all.retain(|t| {
            t.degree(spec.signature()) < spec.cutoffs().gamma
                && (0..spec.components().len()).any(|i| !upsilon(nl, i, t).is_zero())
        });
        all
    }

    #[test]
    fn presets_load() {
        for name in PRESET_NAMES {
            let s = EquationSpec::preset(name).unwrap();
            let back = EquationSpec::from_json(&s.to_json()).unwrap();
            assert_eq!(back.signature(), s.signature());
        }
        assert_eq!(EquationSpec::preset("kpz").unwrap_err(), Error::UnknownPreset("kpz".into()));
        let g = EquationSpec::preset("gkpz").unwrap();
        assert_eq!(g.signature().dimension(), 2);
        assert_eq!(g.signature().noise_degree(0), crate::scalar::rat(-151, 100));
    }

    #[test]
    fn generation_matches_filter_oracle() {
        for name in PRESET_NAMES {
            let spec = EquationSpec::preset(name).unwrap();
            let small = spec.with_cutoffs(Cutoffs { max_noises: 2, ..spec.cutoffs().clone() });
            let got = small.generate_conforming().unwrap();
            assert_eq!(got.trees(), oracle(&small).as_slice(), "{name}");
            assert!(got.trees().iter().all(|t| t.is_admissible()));
        }
    }

    #[test]
    fn multiplicative_heat_equation() {
        let text = r#"{
            "dimension": 2, "scaling": [2, 1],
            "kernels": [{"name": "t1", "degree": "2"}],
            "noises": [{"name": "xi", "degree": "-3/2"}],
            "components": [{"name": "u", "kernel": "t1", "deps": [["t1", "(0,0)"]], "noises": ["xi"]}],
            "cutoffs": {"gamma": "1", "maxNoises": 2, "maxNodeDeco": 0, "maxEdgeDeriv": 1}
        }"#;
        let spec = EquationSpec::from_json(text).unwrap();
        let sig = spec.signature();
        let b = spec.generate_conforming().unwrap();
        assert!(b.contains(&parse_tree("xi_1", sig).unwrap()));
        assert!(b.contains(&parse_tree("xi_1 * I[t1,(0,0)](xi_1)", sig).unwrap()));
        assert!(b.trees().iter().all(|t| t.max_edge_deriv() == 0));
        assert_eq!(b.trees(), oracle(&spec).as_slice());
    }

    #[test]
    fn no_noises_gives_polynomials() {
        let text = r#"{
            "dimension": 2, "scaling": [2, 1],
            "kernels": [{"name": "t1", "degree": "2"}], "noises": [],
            "components": [{"name": "u", "kernel": "t1", "deps": [["t1", [0, 0]]], "noises": ["1"]}],
            "cutoffs": {"gamma": "3/2", "maxNoises": 0, "maxNodeDeco": 1, "maxEdgeDeriv": 0}
        }"#;
        let spec = EquationSpec::from_json(text).unwrap();
        let b = spec.generate_conforming().unwrap();
        let texts: Vec<String> = b.trees().iter().map(|t| t.to_text(spec.signature())).collect();
        assert_eq!(texts, ["1", "X[(0,1)]"]);
    }

    #[test]
    fn negative_basis_contents() {
        let spec = EquationSpec::preset("gkpz").unwrap();
        let sig = spec.signature();
        let neg = spec.negative_basis().unwrap();
        assert!(neg.contains(&DecoratedTree::one(2)));
        assert!(neg.contains(&parse_tree("xi_1", sig).unwrap()));
        assert!(!neg.contains(&parse_tree("X[(0,1)]", sig).unwrap()));
        for t in neg.trees() {
            assert!(t.is_one() || t.degree(sig).is_negative());
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = r#"{
            "dimension": 2, "scaling": [2],
            "kernels": [{"name": "t1", "degree": "2"}], "noises": [],
            "components": [], "cutoffs": {"gamma": "1", "maxNoises": 0, "maxNodeDeco": 0, "maxEdgeDeriv": 0}
        }"#;
        assert!(matches!(EquationSpec::from_json(bad), Err(Error::InvalidSpec(_))));
        let unknown = r#"{
            "dimension": 1, "scaling": [1],
            "kernels": [{"name": "t1", "degree": "2"}], "noises": [],
            "components": [{"name": "u", "kernel": "t1", "deps": [["t2", [0]]], "noises": ["1"]}],
            "cutoffs": {"gamma": "1", "maxNoises": 0, "maxNodeDeco": 0, "maxEdgeDeriv": 0}
        }"#;
        assert!(matches!(EquationSpec::from_json(unknown), Err(Error::InvalidSpec(_))));
    }
}
