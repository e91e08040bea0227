//! Domain types, the catalog of test functions, and pointwise evaluation of
//! bandlimited functions.

pub mod catalog;
pub mod density;
pub mod io;
pub mod map;
pub mod signal;
pub mod warp;

pub use catalog::{identity_residual, identity_sides, sinc, sinc_safe, CatalogKind, Identity};
pub use density::{ball_volume, BandSupport, Evaluation, GridSpec, Pullback, SpectralDensity};
pub use map::AffineMap;
pub use signal::{
    eval_pw, eval_pw_complex_on_line, eval_pw_with_error, make_catalog, make_catalog_with, CatalogSignal, Evaluable,
    FnSignal, PwSignal, Representation,
};
pub use warp::{Warp, Warped};
