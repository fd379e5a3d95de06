use crate::error::{Error, Result};
use crate::params::Preset;
use crate::ring::codec::{write_poly, Header, ObjectKind, Reader};
use crate::ring::{ntt, sample_gaussian, sample_ternary, sample_uniform, Modulus, RingElement, RingParams};
use crate::rng::SeededGenerator;

use super::keys::{PublicKey, SecretKey};

/// Regev-form ciphertext (a, c = ⟨a, s⟩ + e + round(m·2^scale)).
///
/// `noise_bound` is a sound bound on the real-valued error
/// `c − ⟨a, s⟩ − m·2^scale` (encoding rounding included); `noise_var` is a
/// central-limit estimate of its per-coefficient variance, used only for
/// tolerances.
#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    pub a: Vec<RingElement>,
    pub c: RingElement,
    pub scale_log2: f64,
    pub noise_bound: u64,
    pub noise_var: f64,
    pub modulus_index: usize,
    pub key_id: u64,
}

/// Anything that can produce fresh ciphertexts: the secret key (client side)
/// or the public key.
pub trait Encryptor {
    fn key_id(&self) -> u64;
    fn encrypt_at(&self, m: f64, scale_log2: f64, rng: &mut SeededGenerator) -> Result<Ciphertext>;
}

fn encode(m: f64, scale_log2: f64, q: u64) -> Result<i128> {
    let v = m * scale_log2.exp2();
    if !v.is_finite() || v.abs() >= q as f64 / 4.0 {
        return Err(Error::PlaintextOverflow(v));
    }
    Ok(v.round() as i128)
}

fn sk_fresh_bound(sigma: u32) -> u64 {
    6 * sigma as u64 + 1
}

impl Encryptor for SecretKey {
    fn key_id(&self) -> u64 {
        self.id
    }

    fn encrypt_at(&self, m: f64, scale_log2: f64, rng: &mut SeededGenerator) -> Result<Ciphertext> {
        encrypt_sk_level(self, m, scale_log2, 0, rng)
    }
}

/// Secret-key encryption at an arbitrary chain level.
pub fn encrypt_sk_level(
    sk: &SecretKey,
    m: f64,
    scale_log2: f64,
    level: usize,
    rng: &mut SeededGenerator,
) -> Result<Ciphertext> {
    let q = sk.chain[level];
    let mut ct = encrypt_poly_sk(sk, &RingElement::zero(sk.d, q), level, rng);
    let v = encode(m, scale_log2, q)?;
    ct.c.coeffs[0] = Modulus::new(q).add(ct.c.coeffs[0], Modulus::new(q).from_i128(v));
    ct.scale_log2 = scale_log2;
    ct.noise_var += 1.0 / 12.0;
    Ok(ct)
}

/// Encryption of a whole polynomial message μ (no scaling): (a, ⟨a,s⟩ + e + μ).
pub(crate) fn encrypt_poly_sk(sk: &SecretKey, mu: &RingElement, level: usize, rng: &mut SeededGenerator) -> Ciphertext {
    let p = RingParams { d: sk.d, q: sk.chain[level], sigma: sk.sigma, preset_name: String::new() };
    let a: Vec<RingElement> = (0..sk.k).map(|_| sample_uniform(&p, rng)).collect();
    let e = sample_gaussian(&p, rng);
    let c = sk.inner(&a, level).add(&e).add(mu);
    Ciphertext {
        a,
        c,
        scale_log2: 0.0,
        noise_bound: sk_fresh_bound(sk.sigma),
        noise_var: (sk.sigma as f64).powi(2),
        modulus_index: level,
        key_id: sk.id,
    }
}

impl Encryptor for PublicKey {
    fn key_id(&self) -> u64 {
        self.key_id
    }

    /// Σ r_i·(A_i, b_i) + (0, e' + Δm) with ternary r_i.
    fn encrypt_at(&self, m: f64, scale_log2: f64, rng: &mut SeededGenerator) -> Result<Ciphertext> {
        let p = &self.params;
        let q = p.q;
        let v = encode(m, scale_log2, q)?;
        let t = ntt::table(p.d, q);
        let r: Vec<Vec<u64>> = (0..self.k).map(|_| sample_ternary(p, rng).to_ntt()).collect();
        let mut a_acc = vec![vec![0u64; p.d]; self.k];
        let mut c_acc = vec![0u64; p.d];
        for (i, ri) in r.iter().enumerate() {
            for (j, acc) in a_acc.iter_mut().enumerate() {
                let f = self.a_rows[i][j].to_ntt();
                for (x, (y, z)) in acc.iter_mut().zip(f.iter().zip(ri)) {
                    *x = t.m.add(*x, t.m.mul(*y, *z));
                }
            }
            let fb = self.b[i].to_ntt();
            for (x, (y, z)) in c_acc.iter_mut().zip(fb.iter().zip(ri)) {
                *x = t.m.add(*x, t.m.mul(*y, *z));
            }
        }
        let a = a_acc.into_iter().map(|v| RingElement::from_ntt(v, q)).collect();
        let mut c = RingElement::from_ntt(c_acc, q).add(&sample_gaussian(p, rng));
        c.coeffs[0] = t.m.add(c.coeffs[0], t.m.from_i128(v));
        let sigma = p.sigma as u64;
        let kd = (self.k * p.d) as u64;
        Ok(Ciphertext {
            a,
            c,
            scale_log2,
            noise_bound: kd * 6 * sigma + 6 * sigma + 1,
            noise_var: (kd as f64 * 2.0 / 3.0 + 1.0) * (sigma as f64).powi(2) + 1.0 / 12.0,
            modulus_index: 0,
            key_id: self.key_id,
        })
    }
}

/// Encrypts m at the preset's scalar scale 2^(F + guard); decryption rounds to F bits.
pub fn encrypt(key: &impl Encryptor, m: f64, preset: &Preset, rng: &mut SeededGenerator) -> Result<Ciphertext> {
    key.encrypt_at(m, preset.scalar_scale(), rng)
}

impl Ciphertext {
    pub fn q(&self) -> u64 {
        self.c.q
    }

    pub fn d(&self) -> usize {
        self.c.coeffs.len()
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    /// The all-zero ciphertext: decrypts to 0 with no noise under any key.
    pub fn trivial_zero(like: &Ciphertext) -> Self {
        let z = RingElement::zero(like.d(), like.q());
        Self {
            a: vec![z.clone(); like.k()],
            c: z,
            scale_log2: like.scale_log2,
            noise_bound: 0,
            noise_var: 0.0,
            modulus_index: like.modulus_index,
            key_id: like.key_id,
        }
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.key_id != other.key_id {
            return Err(Error::KeyMismatch(self.key_id, other.key_id));
        }
        if self.modulus_index != other.modulus_index || self.q() != other.q() {
            return Err(Error::ModulusMismatch(self.modulus_index, other.modulus_index));
        }
        if self.scale_log2 != other.scale_log2 {
            return Err(Error::ScaleMismatch(self.scale_log2, other.scale_log2));
        }
        Ok(())
    }

    fn map_polys(&self, f: impl Fn(&RingElement) -> RingElement) -> (Vec<RingElement>, RingElement) {
        (self.a.iter().map(&f).collect(), f(&self.c))
    }

    /// Raw phase c − ⟨a, s⟩.
    pub fn phase(&self, sk: &SecretKey) -> Result<RingElement> {
        if sk.id != self.key_id {
            return Err(Error::KeyMismatch(sk.id, self.key_id));
        }
        Ok(self.c.sub(&sk.inner(&self.a, self.modulus_index)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(60 + 8 * self.d() * (self.k() + 1));
        self.write(&mut out);
        out
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        Header::new(ObjectKind::Ciphertext, self.d(), self.q()).write(out);
        out.extend_from_slice(&(self.modulus_index as u32).to_le_bytes());
        out.extend_from_slice(&self.scale_log2.to_bits().to_le_bytes());
        out.extend_from_slice(&self.noise_bound.to_le_bytes());
        out.extend_from_slice(&self.noise_var.to_bits().to_le_bytes());
        out.extend_from_slice(&self.key_id.to_le_bytes());
        out.extend_from_slice(&(self.k() as u32).to_le_bytes());
        for ai in &self.a {
            write_poly(out, ai);
        }
        write_poly(out, &self.c);
    }

    pub fn read(r: &mut Reader<'_>, preset: &Preset) -> Result<Self> {
        let h = Header::read(r)?;
        if h.kind != ObjectKind::Ciphertext || h.d as usize != preset.d {
            return Err(Error::ParamMismatch("ciphertext header does not match preset".into()));
        }
        let modulus_index = r.u32()? as usize;
        if preset.chain.get(modulus_index) != Some(&h.q) {
            return Err(Error::NotInChain(modulus_index));
        }
        let scale_log2 = r.f64()?;
        let noise_bound = r.u64()?;
        let noise_var = r.f64()?;
        let key_id = r.u64()?;
        let k = r.u32()? as usize;
        if k > 3 {
            return Err(Error::Decode(format!("rank {k}")));
        }
        let a = (0..k).map(|_| r.poly(preset.d, h.q)).collect::<Result<Vec<_>>>()?;
        let c = r.poly(preset.d, h.q)?;
        Ok(Self { a, c, scale_log2, noise_bound, noise_var, modulus_index, key_id })
    }

    pub fn from_bytes(bytes: &[u8], preset: &Preset) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let ct = Self::read(&mut r, preset)?;
        r.finish()?;
        Ok(ct)
    }
}

/// Decrypts and rounds to `frac_bits` fractional bits.
pub fn decrypt_with(sk: &SecretKey, ct: &Ciphertext, frac_bits: u32) -> Result<f64> {
    let v = decrypt_raw(sk, ct)?;
    let s = (frac_bits as f64).exp2();
    Ok((v * s).round() / s)
}

pub fn decrypt(sk: &SecretKey, ct: &Ciphertext, preset: &Preset) -> Result<f64> {
    decrypt_with(sk, ct, preset.frac_bits)
}

/// Unrounded phase of the constant coefficient over 2^scale.
pub fn decrypt_raw(sk: &SecretKey, ct: &Ciphertext) -> Result<f64> {
    let phase = ct.phase(sk)?;
    let m = Modulus::new(ct.q());
    Ok(m.center(phase.coeffs[0]) as f64 / ct.scale_log2.exp2())
}

pub fn he_add(x: &Ciphertext, y: &Ciphertext) -> Result<Ciphertext> {
    x.check_same_space(y)?;
    let a = x.a.iter().zip(&y.a).map(|(p, q)| p.add(q)).collect();
    Ok(Ciphertext {
        a,
        c: x.c.add(&y.c),
        noise_bound: x.noise_bound.saturating_add(y.noise_bound),
        noise_var: x.noise_var + y.noise_var,
        ..x.clone()
    })
}

pub fn he_sub(x: &Ciphertext, y: &Ciphertext) -> Result<Ciphertext> {
    x.check_same_space(y)?;
    let a = x.a.iter().zip(&y.a).map(|(p, q)| p.sub(q)).collect();
    Ok(Ciphertext {
        a,
        c: x.c.sub(&y.c),
        noise_bound: x.noise_bound.saturating_add(y.noise_bound),
        noise_var: x.noise_var + y.noise_var,
        ..x.clone()
    })
}

pub fn he_neg(x: &Ciphertext) -> Ciphertext {
    let (a, c) = x.map_polys(|p| p.neg());
    Ciphertext { a, c, ..x.clone() }
}

/// Multiplication by an integer constant.
pub fn he_const_mul(x: &Ciphertext, alpha: i64, cap: i64) -> Result<Ciphertext> {
    if alpha.unsigned_abs() > cap.unsigned_abs() {
        return Err(Error::ConstantCap(alpha, cap));
    }
    let (a, c) = x.map_polys(|p| p.mul_scalar(alpha));
    Ok(Ciphertext {
        a,
        c,
        noise_bound: x.noise_bound.saturating_mul(alpha.unsigned_abs()),
        noise_var: x.noise_var * (alpha as f64).powi(2),
        ..x.clone()
    })
}

/// Multiplies by 2^bits, raising the scale by the same amount (plaintext unchanged).
pub fn raise_scale(x: &Ciphertext, bits: u32) -> Ciphertext {
    if bits == 0 {
        return x.clone();
    }
    let f = 1i64 << bits;
    let (a, c) = x.map_polys(|p| p.mul_scalar(f));
    Ciphertext {
        a,
        c,
        scale_log2: x.scale_log2 + bits as f64,
        noise_bound: x.noise_bound.saturating_mul(f as u64),
        noise_var: x.noise_var * (f as f64).powi(2),
        ..x.clone()
    }
}

/// A complex plaintext as a (real, imaginary) ciphertext pair.
#[derive(Clone, Debug, PartialEq)]
pub struct CtPair {
    pub re: Ciphertext,
    pub im: Ciphertext,
}

impl CtPair {
    pub fn encrypt(key: &impl Encryptor, re: f64, im: f64, scale_log2: f64, rng: &mut SeededGenerator) -> Result<Self> {
        Ok(Self { re: key.encrypt_at(re, scale_log2, rng)?, im: key.encrypt_at(im, scale_log2, rng)? })
    }

    pub fn zero_like(like: &Ciphertext) -> Self {
        Self { re: Ciphertext::trivial_zero(like), im: Ciphertext::trivial_zero(like) }
    }

    pub fn decrypt(&self, sk: &SecretKey, frac_bits: u32) -> Result<(f64, f64)> {
        Ok((decrypt_with(sk, &self.re, frac_bits)?, decrypt_with(sk, &self.im, frac_bits)?))
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        Ok(Self { re: he_add(&self.re, &o.re)?, im: he_add(&self.im, &o.im)? })
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        Ok(Self { re: he_sub(&self.re, &o.re)?, im: he_sub(&self.im, &o.im)? })
    }

    /// Gaussian-integer multiply (a + bi)(re + i·im) by the 2×2 rotation rule.
    /// The bound grows by |a| + |b|: max(|a|, |b|) would undercount when both
    /// parts are non-zero.
    pub fn const_mul(&self, a: i64, b: i64, cap: i64) -> Result<Self> {
        if a.unsigned_abs().max(b.unsigned_abs()) > cap.unsigned_abs() {
            return Err(Error::ConstantCap(a.abs().max(b.abs()), cap));
        }
        let lin = |x: &Ciphertext, cx: i64, y: &Ciphertext, cy: i64| -> Result<Ciphertext> {
            match (cx, cy) {
                (0, 0) => Ok(Ciphertext::trivial_zero(x)),
                (_, 0) => he_const_mul(x, cx, cap),
                (0, _) => he_const_mul(y, cy, cap),
                _ => he_add(&he_const_mul(x, cx, cap)?, &he_const_mul(y, cy, cap)?),
            }
        };
        Ok(Self { re: lin(&self.re, a, &self.im, -b)?, im: lin(&self.im, a, &self.re, b)? })
    }

    pub fn scale_log2(&self) -> f64 {
        self.re.scale_log2
    }

    pub fn noise_bound(&self) -> u64 {
        self.re.noise_bound.max(self.im.noise_bound)
    }

    pub fn noise_var(&self) -> f64 {
        self.re.noise_var.max(self.im.noise_var)
    }

    pub fn map(&self, f: impl Fn(&Ciphertext) -> Result<Ciphertext>) -> Result<Self> {
        Ok(Self { re: f(&self.re)?, im: f(&self.im)? })
    }
}

/// ∥c − ⟨a,s⟩ − round(reference·2^scale)∥∞. Test oracle; needs the secret key.
pub fn noise_actual(sk: &SecretKey, ct: &Ciphertext, reference: f64) -> Result<u64> {
    let phase = ct.phase(sk)?;
    let m = Modulus::new(ct.q());
    let enc = (reference * ct.scale_log2.exp2()).round() as i128;
    let mut worst = 0u64;
    for (i, &c) in phase.coeffs.iter().enumerate() {
        let mut v = m.center(c) as i128;
        if i == 0 {
            v -= enc;
        }
        worst = worst.max(v.unsigned_abs() as u64);
    }
    Ok(worst)
}
