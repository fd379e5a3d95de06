//! Plaintext density-matrix oracle: states, Kraus channels, dyadic gate
//! superoperators, masks, distances and Born sampling.

pub mod channel;
pub mod density;
pub mod superop;

pub use channel::{apply_channel, born_sample, depolarize, sample_index, weak_kraus, Channel, MaskSpec, Normalization};
pub use density::{random_unitary, trace_distance, CMatrix, DensityMatrix, MAX_DIM};
pub use superop::{embed, local_superop, pauli_matrices, GateLabel, GateSuperop, GaussInt};
