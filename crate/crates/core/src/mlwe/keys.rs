use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::params::Preset;
use crate::ring::codec::{write_poly, Header, ObjectKind, Reader};
use crate::ring::{ntt, sample_gaussian, Modulus, RingElement, RingParams};
use crate::rng::SeededGenerator;

/// Ternary secret s ∈ R^k, kept in signed form plus NTT images at every
/// modulus of the chain.
#[derive(Clone)]
pub struct SecretKey {
    pub id: u64,
    pub k: usize,
    pub d: usize,
    pub sigma: u32,
    pub chain: Vec<u64>,
    pub s: Vec<Vec<i8>>,
    s_ntt: Vec<Vec<Vec<u64>>>,
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SecretKey {{ id: {:016x}, k: {}, d: {} }}", self.id, self.k, self.d)
    }
}

impl SecretKey {
    pub fn from_ternary(id: u64, s: Vec<Vec<i8>>, preset: &Preset) -> Result<Self> {
        if !(2..=3).contains(&s.len()) {
            return Err(Error::InvalidParams(format!("rank {} not in {{2, 3}}", s.len())));
        }
        if s.iter().any(|c| c.len() != preset.d || c.iter().any(|v| !(-1..=1).contains(v))) {
            return Err(Error::InvalidParams("secret components must be ternary of length d".into()));
        }
        let s_ntt = preset
            .chain
            .iter()
            .map(|&q| s.iter().map(|c| signed_poly(c, q).to_ntt()).collect())
            .collect();
        Ok(Self { id, k: s.len(), d: preset.d, sigma: preset.sigma, chain: preset.chain.clone(), s, s_ntt })
    }

    pub fn generate(preset: &Preset, rng: &mut SeededGenerator) -> Self {
        let id = rng.next_u64();
        let s = (0..preset.k).map(|_| (0..preset.d).map(|_| rng.gen_range(-1i8..=1)).collect()).collect();
        Self::from_ternary(id, s, preset).expect("generated key is valid")
    }

    pub fn component(&self, i: usize, level: usize) -> RingElement {
        signed_poly(&self.s[i], self.chain[level])
    }

    /// ⟨a, s⟩ at the given level.
    pub fn inner(&self, a: &[RingElement], level: usize) -> RingElement {
        let q = self.chain[level];
        let t = ntt::table(self.d, q);
        let mut acc = vec![0u64; self.d];
        for (i, ai) in a.iter().enumerate() {
            let mut f = ai.coeffs.clone();
            t.forward(&mut f);
            for (x, (y, s)) in acc.iter_mut().zip(f.iter().zip(&self.s_ntt[level][i])) {
                *x = t.m.add(*x, t.m.mul(*y, *s));
            }
        }
        RingElement::from_ntt(acc, q)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        Header::new(ObjectKind::SecretKey, self.d, self.chain[0]).write(&mut out);
        out.extend_from_slice(&self.id.to_le_bytes());
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        let flat: Vec<i8> = self.s.iter().flatten().copied().collect();
        for chunk in flat.chunks(4) {
            let mut byte = 0u8;
            for (j, v) in chunk.iter().enumerate() {
                let code = match v {
                    0 => 0u8,
                    1 => 1,
                    _ => 2,
                };
                byte |= code << (2 * j);
            }
            out.push(byte);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], preset: &Preset) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let h = Header::read(&mut r)?;
        if h.kind != ObjectKind::SecretKey || h.d as usize != preset.d || h.q != preset.q0() {
            return Err(Error::ParamMismatch("secret key header does not match preset".into()));
        }
        let id = r.u64()?;
        let k = r.u32()? as usize;
        let n = k * preset.d;
        let packed = r.take(n.div_ceil(4))?;
        r.finish()?;
        let mut flat = Vec::with_capacity(n);
        for i in 0..n {
            let code = (packed[i / 4] >> (2 * (i % 4))) & 3;
            flat.push(match code {
                0 => 0i8,
                1 => 1,
                2 => -1,
                _ => return Err(Error::Decode("invalid ternary code".into())),
            });
        }
        let s = flat.chunks(preset.d).map(|c| c.to_vec()).collect();
        Self::from_ternary(id, s, preset)
    }
}

pub(crate) fn signed_poly(c: &[i8], q: u64) -> RingElement {
    let m = Modulus::new(q);
    RingElement { coeffs: c.iter().map(|&v| m.from_i64(v as i64)).collect(), q }
}

/// Seed-expanded A (k×k) and b = A·s + e at the top modulus.
#[derive(Clone)]
pub struct PublicKey {
    pub key_id: u64,
    pub seed: [u8; 32],
    pub k: usize,
    pub params: RingParams,
    pub b: Vec<RingElement>,
    pub(crate) a_rows: Vec<Vec<RingElement>>,
}

impl std::fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PublicKey {{ key_id: {:016x}, k: {}, d: {} }}", self.key_id, self.k, self.params.d)
    }
}

/// Expands a 32-byte seed into the k×k matrix A. Row i is the `a` part of the
/// i-th encryption of zero.
pub fn expand_a(seed: &[u8; 32], k: usize, p: &RingParams) -> Vec<Vec<RingElement>> {
    let mut rng = ChaCha20Rng::from_seed(*seed);
    (0..k)
        .map(|_| {
            (0..k)
                .map(|_| RingElement { coeffs: (0..p.d).map(|_| rng.gen_range(0..p.q)).collect(), q: p.q })
                .collect()
        })
        .collect()
}

impl PublicKey {
    pub fn a_matrix(&self) -> &[Vec<RingElement>] {
        &self.a_rows
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        Header::new(ObjectKind::PublicKey, self.params.d, self.params.q).write(&mut out);
        out.extend_from_slice(&self.key_id.to_le_bytes());
        out.extend_from_slice(&self.seed);
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        for bi in &self.b {
            write_poly(&mut out, bi);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], preset: &Preset) -> Result<Self> {
        let params = preset.ring(0)?;
        let mut r = Reader::new(bytes);
        let h = Header::read(&mut r)?;
        if h.kind != ObjectKind::PublicKey || h.d as usize != params.d || h.q != params.q {
            return Err(Error::ParamMismatch("public key header does not match preset".into()));
        }
        let key_id = r.u64()?;
        let seed: [u8; 32] = r.take(32)?.try_into().unwrap();
        let k = r.u32()? as usize;
        let b = (0..k).map(|_| r.poly(params.d, params.q)).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let a_rows = expand_a(&seed, k, &params);
        Ok(Self { key_id, seed, k, params, b, a_rows })
    }
}

/// Key generation. `zero_error` is a test hook forcing e = 0.
pub fn keygen_with(preset: &Preset, rng: &mut SeededGenerator, zero_error: bool) -> (SecretKey, PublicKey) {
    let sk = SecretKey::generate(preset, rng);
    let params = preset.ring(0).expect("preset level 0");
    let seed = rng.seed_bytes();
    let a_rows = expand_a(&seed, preset.k, &params);
    let b = a_rows
        .iter()
        .map(|row| {
            let as_ = sk.inner(row, 0);
            if zero_error {
                as_
            } else {
                as_.add(&sample_gaussian(&params, rng))
            }
        })
        .collect();
    let pk = PublicKey { key_id: sk.id, seed, k: preset.k, params, b, a_rows };
    (sk, pk)
}

pub fn keygen(preset: &Preset, rng: &mut SeededGenerator) -> (SecretKey, PublicKey) {
    keygen_with(preset, rng, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::inf_norm_of;

    #[test]
    fn pk_consistent_with_sk() {
        let preset = Preset::toy();
        let (sk, pk) = keygen(&preset, &mut SeededGenerator::from_u64(1));
        for (row, bi) in pk.a_rows.iter().zip(&pk.b) {
            assert!(inf_norm_of(&bi.sub(&sk.inner(row, 0))) <= 18);
        }
        let (sk0, pk0) = keygen_with(&preset, &mut SeededGenerator::from_u64(1), true);
        for (row, bi) in pk0.a_rows.iter().zip(&pk0.b) {
            assert_eq!(*bi, sk0.inner(row, 0));
        }
    }

    #[test]
    fn seed_expansion_deterministic_and_serializable() {
        let preset = Preset::wide();
        let (sk, pk) = keygen(&preset, &mut SeededGenerator::from_u64(2));
        let p = preset.ring(0).unwrap();
        assert_eq!(expand_a(&pk.seed, pk.k, &p), expand_a(&pk.seed, pk.k, &p));
        let back = PublicKey::from_bytes(&pk.to_bytes(), &preset).unwrap();
        assert_eq!(back.b, pk.b);
        assert_eq!(back.a_rows, pk.a_rows);
        let sk2 = SecretKey::from_bytes(&sk.to_bytes(), &preset).unwrap();
        assert_eq!(sk2.s, sk.s);
        assert_eq!(sk2.id, sk.id);
        assert_eq!(sk.to_bytes().len(), 16 + 8 + 4 + (2 * 512) / 4);
    }
}
