//! Scalar leveled homomorphic encryption over R_q^k.

pub mod ciphertext;
pub mod gadget;
pub mod keys;
pub mod noise;
pub mod switch;

pub use ciphertext::{
    decrypt, decrypt_raw, decrypt_with, encrypt, encrypt_sk_level, he_add, he_const_mul, he_neg, he_sub, noise_actual,
    raise_scale, Ciphertext, CtPair, Encryptor,
};
pub use gadget::{decompose, external_product, gsw_encrypt, gsw_encrypt_level, GswCiphertext};
pub use keys::{expand_a, keygen, keygen_with, PublicKey, SecretKey};
pub use noise::{noise_bound_of, teleport_trace, TraceOp};
pub use switch::{gen_keyswitch_hint, key_switch, mod_switch, KeySwitchHint};
