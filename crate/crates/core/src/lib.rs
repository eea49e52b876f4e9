//! Spectra in a spectral gap and bifurcation branches for radial Dirac-type
//! systems `J z' + P z = λ z + S(x, z) z` on `(0, ∞)`, via Prüfer angles.
//!
//! The numerical core is generic over `num_traits::Float` (f32 or f64). The
//! aliases below fix f64.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bifurcation;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod prufer;
pub mod scalar;
pub mod spectrum;
pub mod spline;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Family = model::CoefficientFamily<f64>;
pub type Potential = model::PotentialSpec<f64>;
pub type Coupling = model::NonlinearCoupling<f64>;
pub type Window = asymptotics::TruncationWindow<f64>;
pub type Eigenvalue = spectrum::EigenvalueRecord<f64>;
pub type Branch = bifurcation::Branch<f64>;
