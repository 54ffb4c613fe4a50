//! Numerics for linear twists of degree-2 L-functions: gamma-factor
//! invariants, the asymptotic expansion algebra behind the twisted functional
//! equation, character decompositions of additive twists, and the checks built
//! from them.

pub mod arith;
pub mod catalog;
pub mod bernoulli;
pub mod characters;
pub mod error;
pub mod kronecker;
pub mod mellin;
pub mod expansion;
pub mod extraction;
pub mod mp;
pub mod probe;
pub mod selberg;
pub mod series;
pub mod special;
pub mod twists;

pub use error::{Error, Result};
pub use mp::{Cx, Prec};
pub use selberg::{h_invariant, invariants, GammaFactor, GammaFactorData, Invariants};
