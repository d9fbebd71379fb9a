//! Controlled Cucker-Smale flocking: simulation, consensus certificates in
//! the initial dispersions, and Monte-Carlo consensus regions.

pub mod algebra;
pub mod certificates;
pub mod controllers;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod kernel;
pub mod monitor;
pub mod quadrature;
pub mod state;

pub use certificates::{
    certified_boundary, extended_certificate, hhk_certificate, CertificateFamily, CertificateQuery,
    CertificateResult, TailIntegral, Verdict,
};
pub use controllers::{ControllerSpec, DeltaRule, Normalization};
pub use error::{Error, Result};
pub use integrator::{simulate, SimConfig, Trajectory};
pub use kernel::{KernelSpec, TabulatedKernel};
pub use state::{dispersion, DispersionPair, FlockState};
