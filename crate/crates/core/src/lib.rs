//! Linear inviscid-damping simulator for stratified shear flows near Couette.
//!
//! The perturbation is advanced one x-wavenumber `k` at a time in moving-frame
//! Fourier variables `(Theta_k, Q_k)` on a truncated `eta` grid. For Couette
//! flow all operators are Fourier multipliers; for a perturbed monotone
//! profile they pick up convolutions with the transforms of the profile
//! coefficients, inverted by fixed-point iteration.

// Parameter checks are written as `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod grid;
pub mod multipliers;
pub mod observables;
pub mod shear;
pub mod spectral_ops;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{FrequencyGrid, SpectralField};
pub use multipliers::Frequency;
pub use shear::{build_profile, sample_spectrum, ProfileKind, ProfileSpectrum, ShearProfile};
pub use spectral_ops::{NeumannStats, SolverSettings, SpectralOperators};
pub use weights::WeightSet;
