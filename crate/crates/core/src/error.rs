use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurveError {
    #[error("label sets differ: {left:?} vs {right:?}")]
    LabelMismatch { left: Vec<String>, right: Vec<String> },
    #[error("genus mismatch: {left} vs {right}")]
    GenusMismatch { left: u32, right: u32 },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("diagonal class needs two distinct labels, got `{0}` twice")]
    EqualLabels(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("letter {letter} does not exist in genus {genus}")]
    InvalidLetter { letter: String, genus: u32 },
    #[error("monomial has {got} letters but the class has {expected} labels")]
    Arity { expected: usize, got: usize },
    #[error("{0:?} is not a permutation of the labels")]
    NotAPermutation(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FockError {
    #[error("a-index {k} out of range: the basis only admits k < r = {r}")]
    IndexOutOfRange { k: u32, r: u32 },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("{kind}-index {index} out of range (must be at most {max})")]
    IndexOutOfRange { kind: char, index: u32, max: u32 },
    #[error("fuel exhausted after {0} rewrite steps")]
    FuelExhausted(u64),
    #[error("open label `{0}` used twice")]
    DuplicateLabel(String),
    #[error("cap must live on exactly one label, got {0}")]
    CapArity(usize),
    #[error("word has {word} operators but the state has charge {charge}")]
    LengthMismatch { word: usize, charge: usize },
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}
