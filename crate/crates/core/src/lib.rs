//! Special (pseudo-)Kähler metrics from holomorphic prepotentials via the
//! bilagrangian embedding M ⊂ V × V*, the hyperkähler structure they induce
//! on M × R^{2n}, and residual checks for every identity involved.
//!
//! Layering, bottom up:
//!
//! * [`jets`]: forward-mode Taylor arithmetic to third order.
//! * [`symplectic`]: constant forms Ω₁, Ω₂ and the pairing metric.
//! * [`prepotential`]: expression language for 𝓕 and the graph `v = 𝓕'(w)`.
//! * [`special_kahler`]: metric g, complex structure I, and their checks.
//! * [`hyperkahler`]: σ₁, σ₂, σ₃, the quaternionic triple, moment maps.
//! * [`verify`]: seeded batch verification, signature scans, fixtures.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hyperkahler;
pub mod jets;
pub mod linalg;
pub mod prepotential;
pub mod special_kahler;
pub mod symplectic;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
