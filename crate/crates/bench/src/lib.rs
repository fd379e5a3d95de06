//! Benchmark helpers; the benches live in `benches/`.

use qfhe_core::qhe::{enc_state, ClientKeys, EncryptedState, EvalKeys};
use qfhe_core::qsim::{DensityMatrix, MaskSpec};
use qfhe_core::{Preset, SeededGenerator};

pub struct Fixture {
    pub preset: Preset,
    pub ck: ClientKeys,
    pub ek: EvalKeys,
    pub rng: SeededGenerator,
}

impl Fixture {
    pub fn new(preset: Preset, seed: u64) -> Self {
        let mut rng = SeededGenerator::from_u64(seed);
        let (ck, ek) = ClientKeys::generate(&preset, &mut rng).expect("keygen");
        Self { preset, ck, ek, rng }
    }

    /// A random n-qubit state under the public key.
    pub fn state(&mut self, n: usize) -> EncryptedState {
        let rho = DensityMatrix::random(n, &mut self.rng).expect("state");
        enc_state(&self.ek.pk, &rho, MaskSpec::depolarizing(0.75).expect("mask"), &self.preset, &mut self.rng).expect("enc")
    }
}
