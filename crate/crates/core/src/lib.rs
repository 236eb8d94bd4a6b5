//! Random features ridge regression and kernel ridge regression on the
//! high-dimensional sphere and the Boolean hypercube.
//!
//! The crate is `no_std` (it needs `alloc`). It contains the numerical core:
//! sampling, Gegenbauer/Kravchuk/Hermite machinery, spectral bookkeeping,
//! estimators, closed-form and Monte Carlo risks, and concentration
//! diagnostics. File formats, parallel grid execution and the command line
//! live in the `rfkr` companion crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod domains;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod orthopoly;
pub mod risk;
pub mod rng;
pub mod spectrum;

pub use domains::{inner_products, sample_points, DomainKind, DomainSpec, PointMatrix};
pub use error::{Error, Result};
pub use orthopoly::{
    activation_coeffs, degeneracy, gegenbauer_eval, hermite_coeffs, marginal_quadrature,
    target_from_masses, Activation, ActivationKind, GegenbauerCoeffs, QuadratureRule,
};
pub use spectrum::{
    check_assumptions, effective_gamma, profile, select_levels, theory_risk, AssumptionReport,
    LevelSelection, Regime, SpectrumProfile, TargetFunction,
};
