//! Matrix beta integrals over the ten classical series of Riemannian
//! noncompact symmetric spaces: gamma-product closed forms for the
//! integral families, importance-sampling Monte-Carlo verification of
//! every identity, a deterministic separation-of-variables reduction
//! oracle, and the O(p,q) Plancherel density with a spherical-function
//! layer and a spectral reconstruction check.

pub mod closed_form;
pub mod gamma;
pub mod ground_fields;
pub mod matk;
pub mod mc_verify;
pub mod models;
pub mod plancherel;
pub mod quad;
pub mod report;
pub mod sampling;
pub mod suite;

#[doc(hidden)]
pub mod test_support;

pub use ground_fields::{GroundField, Quat, Scalar};
pub use matk::MatK;
