//! Gadget decomposition, GSW bit encryptions and the external product.

use crate::error::{Error, Result};
use crate::ring::codec::{write_poly, Header, ObjectKind};
use crate::ring::{ntt, Modulus, RingElement};
use crate::rng::SeededGenerator;

use super::ciphertext::{encrypt_poly_sk, Ciphertext};
use super::keys::SecretKey;

/// Balanced base-2^b digits of every coefficient, digit j of all
/// coefficients forming polynomial j. Digits lie in (−B/2, B/2].
pub fn decompose(a: &RingElement, base_log2: u32, levels: usize) -> Vec<RingElement> {
    let m = Modulus::new(a.q);
    let base = 1i64 << base_log2;
    let half = base / 2;
    let d = a.coeffs.len();
    let mut out = vec![vec![0i64; d]; levels];
    for (i, &c) in a.coeffs.iter().enumerate() {
        let mut v = m.center(c);
        for digits in out.iter_mut() {
            let mut r = v.rem_euclid(base);
            if r > half {
                r -= base;
            }
            digits[i] = r;
            v = (v - r) >> base_log2;
        }
        debug_assert_eq!(v, 0, "decomposition did not terminate");
    }
    out.into_iter().map(|ds| RingElement::from_signed(&ds, a.q)).collect()
}

/// Variance of one balanced digit, assuming uniform residues.
pub(crate) fn digit_var(base_log2: u32) -> f64 {
    let b = (1u64 << base_log2) as f64;
    (b * b + 2.0) / 12.0
}

/// GSW-style encryption of a bit: (k+1)·ℓ Regev rows, row (slot, j) carrying
/// bit·B^j added to component `slot` (slots 0..k are the a-part, slot k is c).
#[derive(Clone)]
pub struct GswCiphertext {
    pub rows: Vec<Ciphertext>,
    rows_ntt: Vec<Vec<Vec<u64>>>,
    pub gadget_base_log2: u32,
    pub levels: usize,
    pub modulus_index: usize,
    pub key_id: u64,
    /// Bound on each row's error.
    pub row_bound: u64,
}

impl std::fmt::Debug for GswCiphertext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GswCiphertext {{ rows: {}, levels: {}, level: {} }}", self.rows.len(), self.levels, self.modulus_index)
    }
}

impl PartialEq for GswCiphertext {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
    }
}

pub fn gsw_encrypt_level(
    sk: &SecretKey,
    bit: i64,
    base_log2: u32,
    level: usize,
    rng: &mut SeededGenerator,
) -> Result<GswCiphertext> {
    if bit != 0 && bit != 1 {
        return Err(Error::NotABit(bit));
    }
    let q = sk.chain[level];
    let m = Modulus::new(q);
    let bits = 64 - q.leading_zeros();
    let levels = bits.div_ceil(base_log2) as usize;
    let zero = RingElement::zero(sk.d, q);
    let mut rows = Vec::with_capacity((sk.k + 1) * levels);
    for slot in 0..=sk.k {
        for j in 0..levels {
            let mut row = encrypt_poly_sk(sk, &zero, level, rng);
            if bit == 1 {
                let g = m.pow(2, base_log2 as u64 * j as u64);
                let target = if slot < sk.k { &mut row.a[slot] } else { &mut row.c };
                target.coeffs[0] = m.add(target.coeffs[0], g);
            }
            rows.push(row);
        }
    }
    Ok(GswCiphertext::from_rows(rows, base_log2, levels, level, sk.id, 6 * sk.sigma as u64))
}

/// Encrypts a bit at level 0.
pub fn gsw_encrypt(sk: &SecretKey, bit: i64, base_log2: u32, rng: &mut SeededGenerator) -> Result<GswCiphertext> {
    gsw_encrypt_level(sk, bit, base_log2, 0, rng)
}

impl GswCiphertext {
    fn from_rows(rows: Vec<Ciphertext>, base_log2: u32, levels: usize, level: usize, key_id: u64, row_bound: u64) -> Self {
        let rows_ntt = rows
            .iter()
            .map(|r| r.a.iter().chain(std::iter::once(&r.c)).map(|p| p.to_ntt()).collect())
            .collect();
        Self { rows, rows_ntt, gadget_base_log2: base_log2, levels, modulus_index: level, key_id, row_bound }
    }

    pub fn q(&self) -> u64 {
        self.rows[0].q()
    }

    /// C(1 − b) = G − C(b), with G the noiseless gadget encryption of 1.
    pub fn complement(&self) -> Self {
        let q = self.q();
        let m = Modulus::new(q);
        let k = self.rows[0].k();
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(idx, r)| {
                let (slot, j) = (idx / self.levels, idx % self.levels);
                let mut out = super::ciphertext::he_neg(r);
                let g = m.pow(2, self.gadget_base_log2 as u64 * j as u64);
                let target = if slot < k { &mut out.a[slot] } else { &mut out.c };
                target.coeffs[0] = m.add(target.coeffs[0], g);
                out
            })
            .collect();
        Self::from_rows(rows, self.gadget_base_log2, self.levels, self.modulus_index, self.key_id, self.row_bound)
    }

    /// Bit recovery from the c-slot row whose gadget power B^j is the largest below q/4.
    pub fn decrypt_bit(&self, sk: &SecretKey) -> Result<u8> {
        let q = self.q();
        let k = self.rows[0].k();
        let mut j = 0;
        while j + 1 < self.levels && (1u128 << (self.gadget_base_log2 as usize * (j + 1))) <= (q / 4) as u128 {
            j += 1;
        }
        let g = 1i128 << (self.gadget_base_log2 as usize * j);
        let row = &self.rows[k * self.levels + j];
        let phase = Modulus::new(q).center(row.phase(sk)?.coeffs[0]) as i128;
        let b = ((phase as f64) / g as f64).round() as i64;
        if b != 0 && b != 1 {
            return Err(Error::NotABit(b));
        }
        Ok(b as u8)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        Header::new(ObjectKind::Gsw, self.rows[0].d(), self.q()).write(&mut out);
        out.extend_from_slice(&(self.modulus_index as u32).to_le_bytes());
        out.extend_from_slice(&self.gadget_base_log2.to_le_bytes());
        out.extend_from_slice(&(self.levels as u32).to_le_bytes());
        out.extend_from_slice(&self.key_id.to_le_bytes());
        for r in &self.rows {
            for a in &r.a {
                write_poly(&mut out, a);
            }
            write_poly(&mut out, &r.c);
        }
        out
    }

    /// Additive noise of one external product.
    pub fn product_noise(&self) -> u64 {
        let d = self.rows[0].d() as u64;
        let half = 1u64 << (self.gadget_base_log2 - 1);
        self.rows.len() as u64 * half * d * self.row_bound
    }

    pub(crate) fn product_var(&self) -> f64 {
        let d = self.rows[0].d() as f64;
        let row_var = (self.row_bound as f64 / 6.0).powi(2);
        self.rows.len() as f64 * d * digit_var(self.gadget_base_log2) * row_var
    }
}

/// ct ⊠ C(b): plaintext b·m, error b·e + Σ digit·e_row.
pub fn external_product(ct: &Ciphertext, bit: &GswCiphertext) -> Result<Ciphertext> {
    if ct.key_id != bit.key_id {
        return Err(Error::KeyMismatch(ct.key_id, bit.key_id));
    }
    if ct.modulus_index != bit.modulus_index || ct.q() != bit.q() {
        return Err(Error::ModulusMismatch(ct.modulus_index, bit.modulus_index));
    }
    let q = ct.q();
    let d = ct.d();
    let k = ct.k();
    let t = ntt::table(d, q);
    let mut acc = vec![vec![0u64; d]; k + 1];
    for (slot, comp) in ct.a.iter().chain(std::iter::once(&ct.c)).enumerate() {
        for (j, digit) in decompose(comp, bit.gadget_base_log2, bit.levels).into_iter().enumerate() {
            if digit.is_zero() {
                continue;
            }
            let mut f = digit.coeffs;
            t.forward(&mut f);
            let row = &bit.rows_ntt[slot * bit.levels + j];
            for (out, r) in acc.iter_mut().zip(row) {
                for ((o, x), y) in out.iter_mut().zip(&f).zip(r) {
                    *o = t.m.add(*o, t.m.mul(*x, *y));
                }
            }
        }
    }
    let mut polys: Vec<RingElement> = acc.into_iter().map(|v| RingElement::from_ntt(v, q)).collect();
    let c = polys.pop().unwrap();
    Ok(Ciphertext {
        a: polys,
        c,
        scale_log2: ct.scale_log2,
        noise_bound: ct.noise_bound.saturating_add(bit.product_noise()),
        noise_var: ct.noise_var + bit.product_var(),
        modulus_index: ct.modulus_index,
        key_id: ct.key_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlwe::ciphertext::{decrypt, encrypt, noise_actual, Encryptor};
    use crate::mlwe::keys::keygen;
    use crate::params::Preset;
    use crate::ring::sample_uniform;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn decomposition_recomposes(seed in any::<u64>(), preset_idx in 0usize..3, b in 2u32..9) {
            let preset = [Preset::toy(), Preset::teleport(), Preset::tiny()][preset_idx].clone();
            let p = preset.ring(0).unwrap();
            let a = sample_uniform(&p, &mut SeededGenerator::from_u64(seed));
            let bits = 64 - p.q.leading_zeros();
            let levels = bits.div_ceil(b) as usize;
            let digits = decompose(&a, b, levels);
            let m = p.modulus();
            for i in 0..p.d {
                let mut acc = 0u64;
                for (j, dg) in digits.iter().enumerate() {
                    let c = m.center(dg.coeffs[i]);
                    prop_assert!(c.unsigned_abs() <= 1 << (b - 1));
                    acc = m.add(acc, m.mul(dg.coeffs[i], m.pow(2, (b as u64) * j as u64)));
                }
                prop_assert_eq!(acc, a.coeffs[i]);
            }
        }
    }

    #[test]
    fn external_product_truth_table() {
        let preset = Preset::toy();
        let mut rng = SeededGenerator::from_u64(9);
        let (sk, pk) = keygen(&preset, &mut rng);
        for &m in &[0.75, -0.6] {
            let ct = encrypt(&pk, m, &preset, &mut rng).unwrap();
            for b1 in 0..2 {
                let g1 = gsw_encrypt(&sk, b1, preset.gadget_log2, &mut rng).unwrap();
                assert_eq!(g1.decrypt_bit(&sk).unwrap() as i64, b1);
                let once = external_product(&ct, &g1).unwrap();
                assert!((decrypt(&sk, &once, &preset).unwrap() - b1 as f64 * m).abs() < 1e-3);
                assert!(noise_actual(&sk, &once, b1 as f64 * m).unwrap() <= once.noise_bound);
                for b2 in 0..2 {
                    let g2 = gsw_encrypt(&sk, b2, preset.gadget_log2, &mut rng).unwrap();
                    let twice = external_product(&once, &g2).unwrap();
                    let want = (b1 * b2) as f64 * m;
                    assert!((decrypt(&sk, &twice, &preset).unwrap() - want).abs() < 1e-3);
                    assert!(noise_actual(&sk, &twice, want).unwrap() <= twice.noise_bound);
                }
            }
        }
        assert!(matches!(gsw_encrypt(&sk, 2, 4, &mut rng), Err(Error::NotABit(2))));
    }

    #[test]
    fn complement_flips_the_bit() {
        let preset = Preset::toy();
        let mut rng = SeededGenerator::from_u64(10);
        let (sk, _) = keygen(&preset, &mut rng);
        let ct = sk.encrypt_at(0.5, 28.0, &mut rng).unwrap();
        for b in 0..2 {
            let g = gsw_encrypt(&sk, b, preset.gadget_log2, &mut rng).unwrap().complement();
            assert_eq!(g.decrypt_bit(&sk).unwrap() as i64, 1 - b);
            let out = external_product(&ct, &g).unwrap();
            let want = (1 - b) as f64 * 0.5;
            assert!(noise_actual(&sk, &out, want).unwrap() <= out.noise_bound);
        }
    }
}
