//! Leveled Module-LWE homomorphic encryption fused with a density-matrix
//! channel simulator: encrypted quantum-state evaluation with noise scheduling,
//! encrypted classical control, weak-measurement statistics, Pauli-twirl
//! privacy, knowledge-base capsules and an audited multi-node pipeline.

pub mod error;
pub mod kb;
pub mod params;
pub mod qhe;
pub mod qsim;
pub mod mlwe;
pub mod orchestrator;
pub mod ring;
pub mod rng;

pub use error::{Error, Result};
pub use params::Preset;
pub use ring::{inf_norm, poly_mul, RingElement, RingParams};
pub use rng::SeededGenerator;
