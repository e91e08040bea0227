//! Computational toolkit for Paley–Wiener (bandlimited) functions.
//!
//! Bandlimited functions are represented either by closed-form catalog
//! expressions or by grid-sampled spectral densities, with the inversion
//! convention `f(t) = ∫ g(u) e^{i(u,t)} du`. The crate composes them with
//! affine and non-affine warps and measures whether the result stays
//! bandlimited.

pub mod affine;
pub mod analysis;
pub mod error;
pub mod pwcore;
pub mod spectra;

pub use error::{PwError, Result};
