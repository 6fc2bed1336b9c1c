//! Asymptotic Bayesian quantum state tomography: Laplace expansions of
//! likelihood integrals, maximum-likelihood estimation with optimality
//! certificates, asymptotic posterior moments, and a Monte Carlo oracle.

pub mod bayes;
pub mod convergence;
pub mod error;
pub mod hermitian;
pub mod laplace;
pub mod likelihood;
pub mod maxlike;
pub mod oracle_mc;
pub mod povm;
pub mod quadrature;
pub mod random;
pub mod simulate;

pub use error::{Error, Result};
pub use hermitian::{DensityMatrix, HermitianMatrix};
pub use likelihood::{MeasurementDataset, PovmEffect};
