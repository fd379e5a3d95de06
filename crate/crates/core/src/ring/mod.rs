//! Arithmetic in R_q = Z_q[x]/(x^d + 1).

pub mod arith;
pub mod codec;
pub mod ntt;
mod sample;

use serde::{Deserialize, Serialize};

pub use arith::{is_prime, next_ntt_prime, Modulus};
pub use codec::{Header, ObjectKind, HEADER_LEN, MAGIC};
pub use ntt::NttTable;
pub use sample::{sample_gaussian, sample_ternary, sample_uniform};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingParams {
    pub d: usize,
    pub q: u64,
    pub sigma: u32,
    pub preset_name: String,
}

impl RingParams {
    /// Validated constructor. Degrees outside the preset set are allowed for
    /// small-parameter tests; they only need to be powers of two.
    pub fn new(d: usize, q: u64, sigma: u32, preset_name: &str) -> Result<Self> {
        if !d.is_power_of_two() || d < 2 {
            return Err(Error::InvalidParams(format!("degree {d} is not a power of two")));
        }
        if q >= 1 << 62 || !is_prime(q) {
            return Err(Error::InvalidParams(format!("modulus {q} is not a prime below 2^62")));
        }
        if q % (2 * d as u64) != 1 {
            return Err(Error::InvalidParams(format!("modulus {q} is not 1 mod {}", 2 * d)));
        }
        if sigma < 1 {
            return Err(Error::InvalidParams("sigma must be at least 1".into()));
        }
        Ok(Self { d, q, sigma, preset_name: preset_name.to_string() })
    }

    pub fn modulus(&self) -> Modulus {
        Modulus::new(self.q)
    }

    pub fn ntt(&self) -> std::sync::Arc<NttTable> {
        ntt::table(self.d, self.q)
    }

    /// Same degree and σ at another modulus of the chain.
    pub fn at_modulus(&self, q: u64) -> Self {
        Self { q, ..self.clone() }
    }
}

/// A polynomial with coefficients in [0, q); carries its modulus so mixed
/// operations are caught.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RingElement {
    pub coeffs: Vec<u64>,
    pub q: u64,
}

impl RingElement {
    pub fn zero(d: usize, q: u64) -> Self {
        Self { coeffs: vec![0; d], q }
    }

    pub fn from_coeffs(coeffs: Vec<u64>, p: &RingParams) -> Result<Self> {
        if coeffs.len() != p.d {
            return Err(Error::ParamMismatch(format!("length {} != d {}", coeffs.len(), p.d)));
        }
        if let Some(c) = coeffs.iter().find(|&&c| c >= p.q) {
            return Err(Error::ParamMismatch(format!("coefficient {c} not reduced mod {}", p.q)));
        }
        Ok(Self { coeffs, q: p.q })
    }

    pub fn from_signed(vals: &[i64], q: u64) -> Self {
        let m = Modulus::new(q);
        Self { coeffs: vals.iter().map(|&v| m.from_i64(v)).collect(), q }
    }

    /// The constant polynomial v.
    pub fn constant(v: i64, d: usize, q: u64) -> Self {
        let mut e = Self::zero(d, q);
        e.coeffs[0] = Modulus::new(q).from_i64(v);
        e
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.q != other.q || self.coeffs.len() != other.coeffs.len() {
            return Err(Error::ParamMismatch(format!(
                "(d={}, q={}) vs (d={}, q={})",
                self.coeffs.len(),
                self.q,
                other.coeffs.len(),
                other.q
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&Modulus, u64, u64) -> u64) -> Self {
        let m = Modulus::new(self.q);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f(&m, a, b)).collect();
        Self { coeffs, q: self.q }
    }

    /// Panics on mismatched parameters; callers check compatibility at API boundaries.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.q, other.q, "ring modulus mismatch");
        self.zip_with(other, |m, a, b| m.add(a, b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.q, other.q, "ring modulus mismatch");
        self.zip_with(other, |m, a, b| m.sub(a, b))
    }

    pub fn neg(&self) -> Self {
        let m = Modulus::new(self.q);
        Self { coeffs: self.coeffs.iter().map(|&a| m.neg(a)).collect(), q: self.q }
    }

    pub fn mul_scalar(&self, s: i64) -> Self {
        let m = Modulus::new(self.q);
        let s = m.from_i64(s);
        Self { coeffs: self.coeffs.iter().map(|&a| m.mul(a, s)).collect(), q: self.q }
    }

    pub fn centered(&self) -> Vec<i64> {
        let m = Modulus::new(self.q);
        self.coeffs.iter().map(|&c| m.center(c)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// Coefficients in the NTT domain.
    pub fn to_ntt(&self) -> Vec<u64> {
        let mut v = self.coeffs.clone();
        ntt::table(self.coeffs.len(), self.q).forward(&mut v);
        v
    }

    pub fn from_ntt(mut v: Vec<u64>, q: u64) -> Self {
        ntt::table(v.len(), q).inverse(&mut v);
        Self { coeffs: v, q }
    }
}

/// a·b mod (x^d + 1, q) through the NTT.
pub fn poly_mul(a: &RingElement, b: &RingElement, p: &RingParams) -> Result<RingElement> {
    for x in [a, b] {
        if x.q != p.q || x.coeffs.len() != p.d {
            return Err(Error::ParamMismatch(format!(
                "operand (d={}, q={}) under params (d={}, q={})",
                x.coeffs.len(),
                x.q,
                p.d,
                p.q
            )));
        }
    }
    let t = p.ntt();
    let mut fa = a.coeffs.clone();
    let mut fb = b.coeffs.clone();
    t.forward(&mut fa);
    t.forward(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = t.m.mul(*x, *y);
    }
    t.inverse(&mut fa);
    Ok(RingElement { coeffs: fa, q: p.q })
}

/// max |c| over centered coefficients.
pub fn inf_norm(a: &RingElement, _p: &RingParams) -> u64 {
    inf_norm_of(a)
}

pub fn inf_norm_of(a: &RingElement) -> u64 {
    let m = Modulus::new(a.q);
    a.coeffs.iter().map(|&c| m.center(c).unsigned_abs()).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededGenerator;
    use proptest::prelude::*;

    fn schoolbook(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
        let d = a.len();
        let mut out = vec![0i128; d];
        for i in 0..d {
            for j in 0..d {
                let prod = a[i] as i128 * b[j] as i128;
                if i + j < d {
                    out[i + j] += prod;
                } else {
                    out[i + j - d] -= prod;
                }
            }
        }
        out.iter().map(|v| v.rem_euclid(q as i128) as u64).collect()
    }

    #[test]
    fn identity_and_wraparound() {
        let p = RingParams::new(64, 1_073_741_953, 3, "toy").unwrap();
        let mut rng = SeededGenerator::from_u64(1);
        let b = sample_uniform(&p, &mut rng);
        let one = RingElement::constant(1, p.d, p.q);
        assert_eq!(poly_mul(&one, &b, &p).unwrap(), b);

        let mut top = RingElement::zero(p.d, p.q);
        top.coeffs[p.d - 1] = 1;
        let mut x = RingElement::zero(p.d, p.q);
        x.coeffs[1] = 1;
        let prod = poly_mul(&top, &x, &p).unwrap();
        assert_eq!(prod.coeffs[0], p.q - 1);
        assert!(prod.coeffs[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn small_ring_matches_schoolbook() {
        let p = RingParams::new(8, 257, 1, "t").unwrap();
        let mut rng = SeededGenerator::from_u64(2);
        for _ in 0..200 {
            let a = sample_uniform(&p, &mut rng);
            let b = sample_uniform(&p, &mut rng);
            assert_eq!(poly_mul(&a, &b, &p).unwrap().coeffs, schoolbook(&a.coeffs, &b.coeffs, p.q));
        }
    }

    #[test]
    fn mismatch_rejected() {
        let p = RingParams::new(8, 257, 1, "t").unwrap();
        let a = RingElement::zero(8, 257);
        let b = RingElement::zero(16, 257);
        assert!(poly_mul(&a, &b, &p).is_err());
        assert!(RingElement::from_coeffs(vec![257; 8], &p).is_err());
    }

    #[test]
    fn norms() {
        let q = 257;
        assert_eq!(inf_norm_of(&RingElement::zero(8, q)), 0);
        assert_eq!(inf_norm_of(&RingElement::from_signed(&[-1, 0, 0, 0], q)), 1);
        assert_eq!(inf_norm_of(&RingElement::from_signed(&[3, -5, 2, 0], q)), 5);
    }

    #[test]
    fn invalid_params() {
        assert!(RingParams::new(64, 1 << 30, 3, "x").is_err());
        assert!(RingParams::new(48, 257, 3, "x").is_err());
        assert!(RingParams::new(256, 257, 3, "x").is_err());
    }

    proptest! {
        #[test]
        fn ntt_roundtrip(seed in any::<u64>(), preset in 0usize..3) {
            let ps = [(64usize, 1_073_741_953u64), (256, 1_125_899_906_844_161), (512, 1_125_899_906_856_961)];
            let (d, q) = ps[preset];
            let p = RingParams::new(d, q, 3, "x").unwrap();
            let a = sample_uniform(&p, &mut SeededGenerator::from_u64(seed));
            let back = RingElement::from_ntt(a.to_ntt(), q);
            prop_assert_eq!(back, a);
        }

        #[test]
        fn ring_laws(seed in any::<u64>()) {
            let p = RingParams::new(64, 1_073_741_953, 3, "toy").unwrap();
            let mut rng = SeededGenerator::from_u64(seed);
            let a = sample_uniform(&p, &mut rng);
            let b = sample_uniform(&p, &mut rng);
            let c = sample_uniform(&p, &mut rng);
            let ab_c = poly_mul(&poly_mul(&a, &b, &p).unwrap(), &c, &p).unwrap();
            let a_bc = poly_mul(&a, &poly_mul(&b, &c, &p).unwrap(), &p).unwrap();
            prop_assert_eq!(ab_c, a_bc);
            let left = poly_mul(&a, &b.add(&c), &p).unwrap();
            let right = poly_mul(&a, &b, &p).unwrap().add(&poly_mul(&a, &c, &p).unwrap());
            prop_assert_eq!(left, right);
        }

        #[test]
        fn sixteen_matches_schoolbook(seed in any::<u64>()) {
            let p = RingParams::new(16, 257, 1, "t").unwrap();
            let mut rng = SeededGenerator::from_u64(seed);
            let a = sample_uniform(&p, &mut rng);
            let b = sample_uniform(&p, &mut rng);
            prop_assert_eq!(poly_mul(&a, &b, &p).unwrap().coeffs, schoolbook(&a.coeffs, &b.coeffs, p.q));
        }
    }
}
