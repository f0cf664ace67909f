//! Exact computation in the algebra of decorated trees used to renormalize
//! singular stochastic PDEs.

pub mod basis;
pub mod check;
pub mod coproduct;
pub mod diff;
pub mod error;
pub mod grafting;
pub mod grammar;
pub mod renorm;
pub mod rules;
pub mod scalar;
pub mod search;
mod serde_rational;
pub mod series;
pub mod tree;
pub mod treevec;
pub mod verify;

pub use error::{Error, Result};
pub use grammar::{format_vec, parse_label, parse_tree};
pub use scalar::{Rational, Scalar};
pub use tree::{canonicalize, DecoratedTree, EdgeLabel, Forest, MultiIndex, PlanarTree, Signature, TypeDecl, TypeRef};
pub use treevec::{inner_product, TensorVec, TreeVec};
