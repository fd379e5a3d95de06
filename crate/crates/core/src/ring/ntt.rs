//! Negacyclic number-theoretic transform over Z_q[x]/(x^d+1).
//!
//! Forward is Cooley-Tukey with bit-reversed powers of a primitive 2d-th root ψ,
//! inverse is Gentleman-Sande; the output of `forward` is in bit-reversed order,
//! which only matters for pointwise products (both sides agree).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::arith::Modulus;

#[derive(Debug)]
pub struct NttTable {
    pub d: usize,
    pub m: Modulus,
    psi_rev: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    d_inv: u64,
}

fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

/// Smallest ψ (by search order 2, 3, ...) with ψ^d = −1, i.e. of order exactly 2d.
pub fn primitive_root_2d(d: usize, m: &Modulus) -> u64 {
    let q = m.value();
    let two_d = 2 * d as u64;
    assert_eq!((q - 1) % two_d, 0, "q is not 1 mod 2d");
    for x in 2..q {
        let psi = m.pow(x, (q - 1) / two_d);
        if m.pow(psi, d as u64) == q - 1 {
            return psi;
        }
    }
    unreachable!("prime field always has a 2d-th root when 2d | q-1")
}

impl NttTable {
    pub fn new(d: usize, q: u64) -> Self {
        assert!(d.is_power_of_two() && d >= 2);
        let m = Modulus::new(q);
        let psi = primitive_root_2d(d, &m);
        let psi_inv = m.inv(psi);
        let bits = d.trailing_zeros();
        let mut psi_rev = vec![0u64; d];
        let mut psi_inv_rev = vec![0u64; d];
        let mut p = 1u64;
        let mut pi = 1u64;
        let mut pows = vec![0u64; d];
        let mut pows_inv = vec![0u64; d];
        for i in 0..d {
            pows[i] = p;
            pows_inv[i] = pi;
            p = m.mul(p, psi);
            pi = m.mul(pi, psi_inv);
        }
        for i in 0..d {
            psi_rev[i] = pows[bit_reverse(i, bits)];
            psi_inv_rev[i] = pows_inv[bit_reverse(i, bits)];
        }
        Self { d, m, psi_rev, psi_inv_rev, d_inv: m.inv(d as u64) }
    }

    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.d);
        let m = &self.m;
        let n = self.d;
        let mut t = n;
        let mut len = 1;
        while len < n {
            t >>= 1;
            for i in 0..len {
                let j1 = 2 * i * t;
                let s = self.psi_rev[len + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = m.mul(a[j + t], s);
                    a[j] = m.add(u, v);
                    a[j + t] = m.sub(u, v);
                }
            }
            len <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.d);
        let m = &self.m;
        let n = self.d;
        let mut t = 1;
        let mut len = n;
        while len > 1 {
            let h = len >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let s = self.psi_inv_rev[h + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = m.add(u, v);
                    a[j + t] = m.mul(m.sub(u, v), s);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            len = h;
        }
        for x in a.iter_mut() {
            *x = m.mul(*x, self.d_inv);
        }
    }
}

/// Shared, lazily built tables keyed by (d, q).
pub fn table(d: usize, q: u64) -> Arc<NttTable> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<NttTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("ntt cache poisoned");
    guard.entry((d, q)).or_insert_with(|| Arc::new(NttTable::new(d, q))).clone()
}
