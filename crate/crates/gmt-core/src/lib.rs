//! A laboratory for dyadic-grid geometric measure theory: exact covering
//! numbers and set algebra, non-concentration certificates, uniform subsets
//! and branching functions, piecewise-affine decomposition lemmas, dyadic
//! tubes under point-line duality with incidence counting, deterministic
//! example constructions, closed-form exponent calculators, and an
//! experiment harness that fits empirical exponents against them.

pub mod bounds;
pub mod branching;
pub mod constructions;
pub mod dyadic;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod frostman;
pub mod incidence;
pub mod lipschitz;

pub use dyadic::{Ambient, DyadicCell, DyadicSet, Scale};
pub use error::{GmtError, Result};
pub use exact::Rat;
