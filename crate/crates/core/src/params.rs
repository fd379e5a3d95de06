//! Parameter presets and their modulus chains.
//!
//! Each modulus q_i is the smallest prime above 2^(E − 10·i) with q_i ≡ 1 (mod 2d);
//! the chain stops after three moduli or when the bound drops below 2d.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::RingParams;

pub const TOY_CHAIN: [u64; 3] = [1_073_741_953, 1_049_089, 1_153];
pub const TELEPORT_CHAIN: [u64; 3] = [1_125_899_906_844_161, 1_099_511_630_849, 1_073_750_017];
pub const WIDE_CHAIN: [u64; 3] = [1_125_899_906_856_961, 1_099_511_630_849, 1_073_750_017];
/// Scheduler-test preset: small enough that refreshes actually happen.
pub const TINY_CHAIN: [u64; 2] = [131_713, 257];

pub const DEFAULT_FRAC_BITS: u32 = 20;
pub const DEFAULT_SIGMA: u32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub d: usize,
    /// Module rank k.
    pub k: usize,
    pub sigma: u32,
    pub chain: Vec<u64>,
    /// Fixed-point fractional bits F reported by decryption.
    pub frac_bits: u32,
    /// Extra scale bits above F for scalar encryption (absorbs fresh noise).
    pub scalar_guard_bits: u32,
    /// Extra scale bits above F for encrypted density-matrix entries.
    pub state_guard_bits: u32,
    /// log2 of the gadget base B_g.
    pub gadget_log2: u32,
    /// Largest |α| accepted by constant multiplication.
    pub const_cap: i64,
}

impl Preset {
    fn base(name: &str, d: usize, k: usize, chain: &[u64]) -> Self {
        Self {
            name: name.to_string(),
            d,
            k,
            sigma: DEFAULT_SIGMA,
            chain: chain.to_vec(),
            frac_bits: DEFAULT_FRAC_BITS,
            scalar_guard_bits: 8,
            state_guard_bits: 4,
            gadget_log2: 4,
            const_cap: 1 << 24,
        }
    }

    pub fn toy() -> Self {
        Self::base("toy", 64, 2, &TOY_CHAIN)
    }

    pub fn teleport() -> Self {
        Self::base("teleport", 256, 3, &TELEPORT_CHAIN)
    }

    pub fn wide() -> Self {
        Self::base("wide", 512, 2, &WIDE_CHAIN)
    }

    pub fn tiny() -> Self {
        Self::base("tiny", 64, 2, &TINY_CHAIN)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "toy" => Ok(Self::toy()),
            "teleport" => Ok(Self::teleport()),
            "wide" => Ok(Self::wide()),
            "tiny" => Ok(Self::tiny()),
            other => Err(Error::InvalidParams(format!("unknown preset {other:?}"))),
        }
    }

    pub fn all_named() -> Vec<Self> {
        vec![Self::toy(), Self::teleport(), Self::wide()]
    }

    pub fn with_sigma(mut self, sigma: u32) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn q0(&self) -> u64 {
        self.chain[0]
    }

    pub fn levels(&self) -> usize {
        self.chain.len()
    }

    pub fn ring(&self, level: usize) -> Result<RingParams> {
        let q = *self.chain.get(level).ok_or(Error::NotInChain(level))?;
        RingParams::new(self.d, q, self.sigma, &self.name)
    }

    /// Encoding scale exponent for fresh state ciphertexts.
    pub fn state_scale(&self) -> f64 {
        (self.frac_bits + self.state_guard_bits) as f64
    }

    /// Encoding scale exponent for scalar encryption.
    pub fn scalar_scale(&self) -> f64 {
        (self.frac_bits + self.scalar_guard_bits) as f64
    }

    /// Number of gadget digits ℓ_g = ⌈log_B q⌉ at a level.
    pub fn gadget_levels(&self, level: usize) -> usize {
        let bits = 64 - self.chain[level].leading_zeros();
        bits.div_ceil(self.gadget_log2) as usize
    }
}

/// The chain rule as a function, for checking the frozen constants.
pub fn derive_chain(top_exp: u32, d: usize, max_len: usize) -> Vec<u64> {
    let two_d = 2 * d as u64;
    let mut chain = Vec::new();
    let mut e = top_exp as i64;
    while chain.len() < max_len && e >= 0 && (1u64 << e) >= two_d {
        chain.push(crate::ring::next_ntt_prime(1u64 << e, two_d));
        e -= 10;
    }
    chain
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_chains_follow_the_rule() {
        assert_eq!(derive_chain(30, 64, 3), TOY_CHAIN.to_vec());
        assert_eq!(derive_chain(50, 256, 3), TELEPORT_CHAIN.to_vec());
        assert_eq!(derive_chain(50, 512, 3), WIDE_CHAIN.to_vec());
        assert_eq!(derive_chain(17, 64, 3), TINY_CHAIN.to_vec());
    }

    #[test]
    fn presets_validate() {
        for p in [Preset::toy(), Preset::teleport(), Preset::wide(), Preset::tiny()] {
            for l in 0..p.levels() {
                p.ring(l).unwrap();
            }
        }
        assert_eq!(Preset::toy().gadget_levels(0), 8);
        assert!(Preset::by_name("huge").is_err());
    }
}
