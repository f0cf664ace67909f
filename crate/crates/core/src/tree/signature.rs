use std::collections::HashSet;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::MultiIndex;
use crate::error::{Error, Result};
use crate::scalar::Rational;

/// A named type with its degree `|𝔱|_𝔰`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDecl {
    pub name: String,
    #[serde(with = "crate::serde_rational")]
    pub degree: Rational,
}

impl TypeDecl {
    pub fn new(name: impl Into<String>, degree: Rational) -> Self {
        TypeDecl { name: name.into(), degree }
    }
}

/// Dimension, scaling and the noise/kernel type tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    scaling: MultiIndex,
    noises: Vec<TypeDecl>,
    kernels: Vec<TypeDecl>,
}

impl Signature {
    pub fn new(scaling: &[u32], noises: Vec<TypeDecl>, kernels: Vec<TypeDecl>) -> Result<Self> {
        if scaling.is_empty() {
            return Err(Error::InvalidSignature("dimension must be at least 1".into()));
        }
        if scaling.contains(&0) {
            return Err(Error::InvalidSignature("scaling components must be positive".into()));
        }
        for n in &noises {
            if !n.degree.is_negative() {
                return Err(Error::InvalidSignature(format!(
                    "noise type {} has non-negative degree {}",
                    n.name, n.degree
                )));
            }
        }
        for k in &kernels {
            if !k.degree.is_positive() {
                return Err(Error::InvalidSignature(format!(
                    "kernel type {} has non-positive degree {}",
                    k.name, k.degree
                )));
            }
        }
        let mut seen = HashSet::new();
        for t in noises.iter().chain(kernels.iter()) {
            if !seen.insert(t.name.as_str()) {
                return Err(Error::InvalidSignature(format!("duplicate type name {}", t.name)));
            }
            let ok = !t.name.is_empty()
                && t.name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && t.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !ok {
                return Err(Error::InvalidSignature(format!("bad type name {:?}", t.name)));
            }
        }
        Ok(Signature { scaling: MultiIndex::from_slice(scaling), noises, kernels })
    }

    pub fn dimension(&self) -> usize {
        self.scaling.len()
    }

    pub fn scaling(&self) -> &MultiIndex {
        &self.scaling
    }

    pub fn noises(&self) -> &[TypeDecl] {
        &self.noises
    }

    pub fn kernels(&self) -> &[TypeDecl] {
        &self.kernels
    }

    pub fn kernel_index(&self, name: &str) -> Option<usize> {
        self.kernels.iter().position(|k| k.name == name)
    }

    pub fn noise_degree(&self, l: usize) -> Rational {
        self.noises[l].degree
    }

    pub fn kernel_degree(&self, t: usize) -> Rational {
        self.kernels[t].degree
    }

    pub fn check_dim(&self, m: &MultiIndex) -> Result<()> {
        if m.len() != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), got: m.len() });
        }
        Ok(())
    }

    /// `|m|_𝔰` as a rational.
    pub fn scaled(&self, m: &MultiIndex) -> Rational {
        Rational::from_integer(m.scaled(&self.scaling))
    }

    /// Smallest noise degree, or zero when there are no noises.
    pub fn min_noise_degree(&self) -> Rational {
        self.noises.iter().map(|n| n.degree).min().unwrap_or_else(Rational::zero)
    }
}
