use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("multi-index has length {got}, signature dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid signature: {0}")]
    InvalidSignature(String),

    #[error("both factors carry a noise at the root; a node holds at most one noise")]
    NoiseCollision,

    #[error("a noise-typed edge only accepts the trivial tree on its left, got {0}")]
    NoiseGraftNonTrivial(String),

    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("basis size exceeds the configured cap of {cap} trees")]
    BasisTooLarge { cap: usize },

    #[error("image of {source_tree} leaves the basis: {escaped}")]
    BasisEscape { source_tree: String, escaped: String },

    #[error("tree {0} is not in the basis the map is defined on")]
    OutsideBasis(String),

    #[error("character value given for {0}, which is not in the negative basis")]
    CharacterOutsideNegatives(String),

    #[error("M° recursion exceeded depth {0}; the preparation map does not lower the noise count")]
    RecursionDepth(usize),

    #[error("the map is not a multi-pre-Lie morphism: {0}")]
    NotAMorphism(String),

    #[error("comparison window is empty for the given bounds")]
    EmptyWindow,

    #[error("unknown preset {0:?} (expected one of gpam2d, gkpz, phi4-like, bck)")]
    UnknownPreset(String),

    #[error("invalid equation spec: {0}")]
    InvalidSpec(String),

    #[error("{0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
