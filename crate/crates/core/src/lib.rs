//! Magnetic random Schrödinger operators `1/2[(-i grad - A)^2 - B] + V_omega`
//! with Poissonian impurities on a finite-difference grid: spectra, the
//! integrated density of states and its Lifschitz tail, torsion functions of
//! perforated domains, and the rearrangement lower bound for the Dirichlet
//! ground state.
//!
//! The numerical core is generic over the real type through [`scalar::Real`];
//! the aliases below fix it to `f64`.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod error;
pub mod greens;
pub mod ids;
pub mod isobound;
pub mod linalg;
pub mod operator;
pub mod potential;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};

pub type Grid = operator::MagneticGrid<f64>;
pub type Hamiltonian = linalg::sparse::SparseHermitian<num_complex::Complex64>;
pub type Profile = potential::SingleSiteProfile<f64>;
pub type Impurities = potential::ImpurityConfiguration<f64>;
pub type Setup = ids::IdsSetup<f64>;
pub type Domain = greens::ObstacleDomain<f64>;
pub type Green = greens::GreenField<f64>;
pub type Radial = isobound::RadialProfile<f64>;
