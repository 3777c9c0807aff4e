//! Exact computer-algebra model of `⊕_d H*(Quot_d(V))` for rank-0 quotients of a
//! rank `r` bundle on a genus `g` curve, presented on the Fock basis
//! `a_{k_1}(γ_1) … a_{k_d}(γ_d)|0⟩`, together with the creation, annihilation
//! and multiplication operators of the shifted Yangian of `sl_2` and an
//! executable check of their commutation relations.
//!
//! All core types are generic over the coefficient [`Scalar`]; the aliases
//! below fix it to arbitrary-precision rationals, which is what every
//! identity in this crate is checked with.

pub mod curve;
pub mod engine;
pub mod error;
pub mod fock;
pub mod relations;
pub mod scalar;

pub use curve::{CurveClass, CurveLetter, DualPair, ModuliParams};
pub use engine::{Cap, Engine, OpKind, OperatorToken, OperatorWord, PeelOrder, SparseMatrix};
pub use error::{CurveError, EngineError, FockError};
pub use fock::{Basis, FockBasisVector, FockState};
pub use relations::{CheckReport, RelationCase, RelationId};
pub use scalar::Scalar;

/// Exact rational scalar used throughout.
pub type Q = num_rational::BigRational;

pub type CurveClassQ = CurveClass<Q>;
pub type FockStateQ = FockState<Q>;
pub type EngineQ = Engine<Q>;
pub type SparseMatrixQ = SparseMatrix<Q>;
