//! A numerical laboratory for the Volterra-type operator
//! `T_g f(z) = int_0^z f(w) g'(w) dw` on Hardy spaces of the unit disc.
//!
//! The crate builds the objects of the gliding-hump construction showing
//! that a non-compact `T_g` fixes a copy of `l^p` in `H^p`: the normalized
//! test functions `f_a`, their arc masses, the localization of `T_g f_a`,
//! and inductive selections of points whose finite sections are certified
//! to embed `l^p` with explicit constants.

pub mod disc_fn;
pub mod error;
pub mod gliding_hump;
pub mod lemma_lab;
pub mod norms;
pub mod point;
pub mod quadrature;
pub mod volterra;

pub use error::{HvlError, Result};
