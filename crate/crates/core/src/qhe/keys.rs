//! Key material split by role. The server only ever sees [`EvalKeys`].

use crate::error::{Error, Result};
use crate::mlwe::{gen_keyswitch_hint, keygen, KeySwitchHint, PublicKey, SecretKey};
use crate::params::Preset;
use crate::rng::SeededGenerator;

/// Client side: one secret key per chain level. Level 0 pairs with the
/// public key; each refresh moves ciphertexts to the next level's key.
#[derive(Clone, Debug)]
pub struct ClientKeys {
    pub preset: Preset,
    keys: Vec<SecretKey>,
}

/// Server side: the public key and the key-switch hints that drive refresh.
#[derive(Clone, Debug)]
pub struct EvalKeys {
    pub preset: Preset,
    pub pk: PublicKey,
    /// `hints[i]` switches key i to key i+1 at level i.
    pub hints: Vec<KeySwitchHint>,
}

impl ClientKeys {
    pub fn generate(preset: &Preset, rng: &mut SeededGenerator) -> Result<(Self, EvalKeys)> {
        let (sk0, pk) = keygen(preset, rng);
        let mut keys = vec![sk0];
        for _ in 1..preset.levels() {
            keys.push(SecretKey::generate(preset, rng));
        }
        let hints = (0..keys.len() - 1)
            .map(|i| gen_keyswitch_hint(&keys[i], &keys[i + 1], i, preset.gadget_log2, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok((Self { preset: preset.clone(), keys }, EvalKeys { preset: preset.clone(), pk, hints }))
    }

    pub fn key_for(&self, key_id: u64) -> Result<&SecretKey> {
        self.keys
            .iter()
            .find(|k| k.id == key_id)
            .ok_or_else(|| Error::KeyMismatch(key_id, self.keys[0].id))
    }

    pub fn level_key(&self, level: usize) -> Result<&SecretKey> {
        self.keys.get(level).ok_or(Error::NotInChain(level))
    }
}

impl EvalKeys {
    pub fn q0(&self) -> u64 {
        self.preset.q0()
    }

    /// Serialized size of everything the server holds, in bytes.
    pub fn byte_len(&self) -> usize {
        self.pk.to_bytes().len() + self.hints.iter().map(|h| h.byte_len()).sum::<usize>()
    }
}
