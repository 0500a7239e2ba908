//! Higher-order averaging for discontinuous piecewise differential systems
//! with sectors bounded by rays through the origin.
//!
//! A planar field `Z(x, y; ε) = Σ ε^i X_i^j(x, y)` on sectors `C_j` is moved
//! to the standard form `r'(θ) = Σ ε^i F_i^j(θ, r)` by [`model::polar_standard_form`];
//! [`averaging`] integrates the cascade that yields the averaged functions
//! `f_l`; [`cycles`] locates their simple zeros and runs rank arguments on
//! parameter families; [`oracle`] simulates the full system to check every
//! prediction.

pub mod averaging;
pub mod bell;
pub mod cycles;
pub mod error;
pub mod examples;
pub mod integrate;
pub mod model;
pub mod oracle;
pub mod par;
pub mod series;

pub use error::{Error, Result};
pub use integrate::Tolerances;
pub use par::Execution;
pub use series::{Jet, Scalar};
