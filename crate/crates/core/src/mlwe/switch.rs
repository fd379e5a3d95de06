//! Key switching and modulus switching; together they form the refresh step.

use crate::error::{Error, Result};
use crate::ring::{ntt, Modulus, RingElement};
use crate::rng::SeededGenerator;

use super::ciphertext::{encrypt_poly_sk, Ciphertext};
use super::gadget::{decompose, digit_var};
use super::keys::SecretKey;

/// Encryptions of B^j·s_from[i] under `to`, at one chain level.
#[derive(Clone)]
pub struct KeySwitchHint {
    pub from_key_id: u64,
    pub to_key_id: u64,
    pub level: usize,
    pub gadget_base_log2: u32,
    pub levels: usize,
    /// Indexed [i·levels + j]; each entry holds (a, b) in NTT form.
    rows_ntt: Vec<(Vec<Vec<u64>>, Vec<u64>)>,
    row_bound: u64,
    d: usize,
    q: u64,
}

impl std::fmt::Debug for KeySwitchHint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KeySwitchHint {{ {:016x} -> {:016x}, level {} }}", self.from_key_id, self.to_key_id, self.level)
    }
}

pub fn gen_keyswitch_hint(
    sk_from: &SecretKey,
    sk_to: &SecretKey,
    level: usize,
    base_log2: u32,
    rng: &mut SeededGenerator,
) -> Result<KeySwitchHint> {
    if sk_from.d != sk_to.d || sk_from.chain != sk_to.chain || sk_from.k != sk_to.k {
        return Err(Error::ParamMismatch("keys do not share parameters".into()));
    }
    let q = *sk_from.chain.get(level).ok_or(Error::NotInChain(level))?;
    let m = Modulus::new(q);
    let bits = 64 - q.leading_zeros();
    let levels = bits.div_ceil(base_log2) as usize;
    let mut rows_ntt = Vec::with_capacity(sk_from.k * levels);
    for i in 0..sk_from.k {
        let s_i = sk_from.component(i, level);
        for j in 0..levels {
            let g = m.pow(2, base_log2 as u64 * j as u64);
            let mu = RingElement { coeffs: s_i.coeffs.iter().map(|&c| m.mul(c, g)).collect(), q };
            let row = encrypt_poly_sk(sk_to, &mu, level, rng);
            rows_ntt.push((row.a.iter().map(|p| p.to_ntt()).collect(), row.c.to_ntt()));
        }
    }
    Ok(KeySwitchHint {
        from_key_id: sk_from.id,
        to_key_id: sk_to.id,
        level,
        gadget_base_log2: base_log2,
        levels,
        rows_ntt,
        row_bound: 6 * sk_to.sigma as u64,
        d: sk_to.d,
        q,
    })
}

impl KeySwitchHint {
    pub fn added_noise(&self) -> u64 {
        let half = 1u64 << (self.gadget_base_log2 - 1);
        self.rows_ntt.len() as u64 * half * self.d as u64 * self.row_bound
    }

    fn added_var(&self) -> f64 {
        let row_var = (self.row_bound as f64 / 6.0).powi(2);
        self.rows_ntt.len() as f64 * self.d as f64 * digit_var(self.gadget_base_log2) * row_var
    }

    pub fn byte_len(&self) -> usize {
        self.rows_ntt.iter().map(|(a, _)| (a.len() + 1) * self.d * 8).sum()
    }
}

/// Re-keys ct from `from_key_id` to `to_key_id`: (c − Σ D_ij·b_ij, −Σ D_ij·a_ij).
pub fn key_switch(ct: &Ciphertext, hint: &KeySwitchHint) -> Result<Ciphertext> {
    if ct.key_id != hint.from_key_id {
        return Err(Error::KeyMismatch(ct.key_id, hint.from_key_id));
    }
    if ct.modulus_index != hint.level || ct.q() != hint.q {
        return Err(Error::ModulusMismatch(ct.modulus_index, hint.level));
    }
    let t = ntt::table(hint.d, hint.q);
    let k = ct.k();
    let mut a_acc = vec![vec![0u64; hint.d]; k];
    let mut c_acc = vec![0u64; hint.d];
    for (i, ai) in ct.a.iter().enumerate() {
        for (j, digit) in decompose(ai, hint.gadget_base_log2, hint.levels).into_iter().enumerate() {
            if digit.is_zero() {
                continue;
            }
            let mut f = digit.coeffs;
            t.forward(&mut f);
            let (ra, rb) = &hint.rows_ntt[i * hint.levels + j];
            for (acc, r) in a_acc.iter_mut().zip(ra) {
                for ((o, x), y) in acc.iter_mut().zip(&f).zip(r) {
                    *o = t.m.add(*o, t.m.mul(*x, *y));
                }
            }
            for ((o, x), y) in c_acc.iter_mut().zip(&f).zip(rb) {
                *o = t.m.add(*o, t.m.mul(*x, *y));
            }
        }
    }
    let a = a_acc.into_iter().map(|v| RingElement::from_ntt(v, hint.q).neg()).collect();
    let c = ct.c.sub(&RingElement::from_ntt(c_acc, hint.q));
    Ok(Ciphertext {
        a,
        c,
        noise_bound: ct.noise_bound.saturating_add(hint.added_noise()),
        noise_var: ct.noise_var + hint.added_var(),
        key_id: hint.to_key_id,
        ..ct.clone()
    })
}

/// Rescales every coefficient by q'/q with rounding; the scale exponent moves
/// by log2(q'/q) so the plaintext is preserved.
pub fn mod_switch(ct: &Ciphertext, target_index: usize, chain: &[u64]) -> Result<Ciphertext> {
    let q_to = *chain.get(target_index).ok_or(Error::NotInChain(target_index))?;
    if chain.get(ct.modulus_index) != Some(&ct.q()) {
        return Err(Error::NotInChain(ct.modulus_index));
    }
    let q_from = ct.q();
    if target_index == ct.modulus_index {
        return Ok(ct.clone());
    }
    if q_to > q_from {
        return Err(Error::InvalidParams(format!("mod_switch must go down the chain ({q_from} -> {q_to})")));
    }
    let from = Modulus::new(q_from);
    let to = Modulus::new(q_to);
    let rescale = |p: &RingElement| RingElement {
        coeffs: p
            .coeffs
            .iter()
            .map(|&c| {
                // round(c·q'/q) on the centered value, exact in i128.
                let v = from.center(c) as i128 * q_to as i128;
                let qf = q_from as i128;
                let r = (2 * v + qf).div_euclid(2 * qf);
                to.from_i128(r)
            })
            .collect(),
        q: q_to,
    };
    let ratio = q_to as f64 / q_from as f64;
    let k = ct.k() as f64;
    let d = ct.d() as f64;
    let rounding = 0.5 + k * d / 2.0;
    Ok(Ciphertext {
        a: ct.a.iter().map(rescale).collect(),
        c: rescale(&ct.c),
        scale_log2: ct.scale_log2 + ratio.log2(),
        noise_bound: (ct.noise_bound as f64 * ratio + rounding).ceil() as u64,
        noise_var: ct.noise_var * ratio * ratio + (1.0 + k * d * 2.0 / 3.0) / 12.0,
        modulus_index: target_index,
        key_id: ct.key_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlwe::ciphertext::{decrypt, decrypt_raw, encrypt, noise_actual, Encryptor};
    use crate::mlwe::keys::{keygen, SecretKey};
    use crate::params::Preset;
    use rand::Rng;

    #[test]
    fn switch_preserves_plaintext() {
        let preset = Preset::toy();
        let mut rng = SeededGenerator::from_u64(21);
        let (a, pk) = keygen(&preset, &mut rng);
        let b = SecretKey::generate(&preset, &mut rng);
        let ab = gen_keyswitch_hint(&a, &b, 0, preset.gadget_log2, &mut rng).unwrap();
        let ba = gen_keyswitch_hint(&b, &a, 0, preset.gadget_log2, &mut rng).unwrap();
        for _ in 0..100 {
            let m: f64 = rng.gen_range(-0.99..0.99);
            let ct = encrypt(&pk, m, &preset, &mut rng).unwrap();
            let s = key_switch(&ct, &ab).unwrap();
            assert_eq!(s.key_id, b.id);
            assert!((decrypt(&b, &s, &preset).unwrap() - m).abs() < 1e-3);
            assert!(noise_actual(&b, &s, m).unwrap() <= s.noise_bound);
            let back = key_switch(&s, &ba).unwrap();
            assert!((decrypt(&a, &back, &preset).unwrap() - m).abs() < 1e-3);
        }
        let z = encrypt(&pk, 0.0, &preset, &mut rng).unwrap();
        assert!(decrypt(&b, &key_switch(&z, &ab).unwrap(), &preset).unwrap().abs() < 1e-3);
        assert!(matches!(key_switch(&z, &ba), Err(Error::KeyMismatch(..))));
    }

    #[test]
    fn modulus_switch_rescales_noise() {
        let preset = Preset::teleport();
        let mut rng = SeededGenerator::from_u64(22);
        let (sk, _) = keygen(&preset, &mut rng);
        assert_eq!(mod_switch(&sk.encrypt_at(1.0, 30.0, &mut rng).unwrap(), 0, &preset.chain).unwrap().scale_log2, 30.0);
        for _ in 0..100 {
            let m: f64 = rng.gen_range(-4.0..4.0);
            let ct = sk.encrypt_at(m, 36.0, &mut rng).unwrap();
            let before = decrypt_raw(&sk, &ct).unwrap();
            let down = mod_switch(&ct, 1, &preset.chain).unwrap();
            assert!((down.scale_log2 - (36.0 + (preset.chain[1] as f64 / preset.chain[0] as f64).log2())).abs() < 1e-12);
            assert!((decrypt_raw(&sk, &down).unwrap() - before).abs() < 1e-6);
            assert!(noise_actual(&sk, &down, m).unwrap() <= down.noise_bound);
        }
        let ct = sk.encrypt_at(1.0, 36.0, &mut rng).unwrap();
        assert!(matches!(mod_switch(&ct, 5, &preset.chain), Err(Error::NotInChain(5))));
    }

    #[test]
    fn halving_chain_step_halves_noise() {
        // A two-prime chain with ratio ≈ 1/2 at d = 64.
        let big = crate::ring::next_ntt_prime(1 << 40, 128);
        let mut small = big / 2;
        while !(crate::ring::is_prime(small) && small % 128 == 1) {
            small -= 1;
        }
        let preset = Preset { chain: vec![big, small], ..Preset::toy() };
        let mut rng = SeededGenerator::from_u64(23);
        let sk = SecretKey::generate(&preset, &mut rng);
        let mut ct = sk.encrypt_at(0.0, 20.0, &mut rng).unwrap();
        let m = Modulus::new(big);
        ct.c.coeffs[3] = m.add(ct.c.coeffs[3], 1 << 20);
        let before = noise_actual(&sk, &ct, 0.0).unwrap();
        let after = noise_actual(&sk, &mod_switch(&ct, 1, &preset.chain).unwrap(), 0.0).unwrap();
        let halved = before as f64 / 2.0;
        assert!((after as f64 - halved).abs() <= 1.0 + 64.0, "before {before} after {after}");
    }
}
