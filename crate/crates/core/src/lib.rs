//! Stochastic Galerkin particle methods for a kinetic flocking model with
//! uncertain parameters.

pub mod basis;
pub mod error;
pub mod experiments;
pub mod params;
pub mod particles;
pub mod reconstruction;
pub mod reference;
pub mod rng;

pub use basis::{ChaosVector, NodalBasis, OrthonormalBasis, QuadratureRule};
pub use error::{Error, Result};
pub use params::{KernelSpec, UncertainScalar};
pub use particles::{Dynamics, GaussianInit, ParticleEnsemble, PeriodicDomain, StepConfig};
