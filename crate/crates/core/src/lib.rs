//! Quantum fluctuations of polarized light coupled to a collective atomic spin
//! during off-resonant coherent forward scattering.
//!
//! The crate is organised bottom-up:
//!
//! * [`angular`] – Clebsch-Gordan, 3j and 6j coefficients;
//! * [`couplings`] – polarizabilities and the dimensionless coupling constants;
//! * [`spinhalf`] – closed-form input/output maps for the alignment-free case;
//! * [`kernels`] – Laplace-image transfer matrices and their time-domain inversion;
//! * [`moments`] – second-moment propagation of the discretized linear system,
//!   the Monte-Carlo oracle and the variance sweeps.

pub mod angular;
pub mod couplings;
mod error;
pub mod kernels;
pub mod moments;
pub mod quadrature;
pub mod spinhalf;
pub mod units;

pub use angular::HalfInt;
pub use couplings::{BeamGeometry, CouplingSet, HyperfineSpec, TransitionSpec};
pub use error::{Error, Result};
pub use kernels::{KernelMatrices, LaplacePoint};
pub use moments::{CovarianceState, CurvePoint, Engine, Grid, NoiseSpec, SweepScenario, VarianceCurve};
