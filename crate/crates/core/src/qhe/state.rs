use num_complex::Complex64;
use rayon::prelude::*;

use super::keys::{ClientKeys, EvalKeys};
use crate::error::{Error, Result};
use crate::mlwe::noise::step;
use crate::mlwe::{
    decrypt_with, external_product, he_add, key_switch, mod_switch, raise_scale, Ciphertext, CtPair,
    Encryptor, GswCiphertext, TraceOp,
};
use crate::params::Preset;
use crate::qsim::density::hermitize;
use crate::qsim::{depolarize, CMatrix, DensityMatrix, GateSuperop, GaussInt, MaskSpec};
use crate::rng::SeededGenerator;

/// Entries of two public offsets closer than this count as equal.
const OFFSET_EQ_TOL: f64 = 1e-12;

/// The encrypted pair (ρ, Ψ(ρ)), entrywise, row-major, each complex entry a
/// (re, im) ciphertext pair under one key, level and scale.
#[derive(Clone, Debug)]
pub struct EncryptedState {
    pub n_qubits: usize,
    pub primary: Vec<CtPair>,
    pub mask: Vec<CtPair>,
    pub mask_spec: MaskSpec,
    /// Public M with mask = p·primary + M. `None` once M depends on an
    /// encrypted bit or encrypted channel.
    pub mask_offset: Option<CMatrix>,
    /// Tr M, kept as long as it is public.
    pub mask_offset_trace: Option<f64>,
    /// Analytic η∞ (the σ-unit ledger).
    pub tracker: f64,
    pub op_trace: Vec<TraceOp>,
    /// Sum of entry noise variances (largest over component and part). Only
    /// capsule chains keep it: they route each input entry to at most one
    /// output entry, so the sum grows additively.
    pub routed_var: Option<f64>,
}

fn zero_pair(like: &Ciphertext) -> CtPair {
    CtPair::zero_like(like)
}

fn add_pair(a: &CtPair, b: &CtPair) -> Result<CtPair> {
    a.add(b)
}

/// Position of the bit that carries `wire` in an n-qubit index.
fn wire_shift(n: usize, wire: usize) -> usize {
    n - 1 - wire
}

/// Inserts bit b at the position of `wire` into an (n−1)-qubit index.
pub(crate) fn insert_bit(idx: usize, n: usize, wire: usize, b: usize) -> usize {
    let pos = wire_shift(n, wire);
    let low = idx & ((1 << pos) - 1);
    let high = idx >> pos;
    (high << (pos + 1)) | (b << pos) | low
}

impl EncryptedState {
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn level(&self) -> usize {
        self.primary[0].re.modulus_index
    }

    pub fn q(&self) -> u64 {
        self.primary[0].re.q()
    }

    pub fn key_id(&self) -> u64 {
        self.primary[0].re.key_id
    }

    pub fn scale_log2(&self) -> f64 {
        self.primary[0].scale_log2()
    }

    pub fn p(&self) -> f64 {
        self.mask_spec.depolarizing_p().expect("encrypted states carry depolarizing masks")
    }

    pub fn ciphertexts(&self) -> impl Iterator<Item = &Ciphertext> {
        self.primary.iter().chain(&self.mask).flat_map(|z| [&z.re, &z.im])
    }

    /// Largest sound per-ciphertext noise bound.
    pub fn noise_bound(&self) -> u64 {
        self.ciphertexts().map(|c| c.noise_bound).max().unwrap_or(0)
    }

    pub fn noise_var(&self) -> f64 {
        self.ciphertexts().map(|c| c.noise_var).fold(0.0, f64::max)
    }

    /// Canonical ciphertext bytes (primary then mask, re before im).
    pub fn ciphertext_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for c in self.ciphertexts() {
            c.write(&mut out);
        }
        out
    }

    /// Pushes a ledger op and checks the result against q/4.
    pub(crate) fn charge(&mut self, op: TraceOp, sigma: u32) -> Result<()> {
        let first = self.op_trace.is_empty();
        let next = step(self.tracker, &op, sigma as f64, first);
        if next > self.q() as f64 / 4.0 {
            return Err(Error::RefreshNeeded(format!("{} (tracker {next} above q/4)", op.label())));
        }
        self.tracker = next;
        self.op_trace.push(op);
        self.routed_var = None;
        Ok(())
    }

    /// Refuses states whose encoded entries plus noise could reach q/4.
    /// Entries of a (sub-normalized) density matrix are bounded by 1.
    pub(crate) fn check_headroom(&self, label: &str) -> Result<()> {
        let cap = self.q() as f64 / 4.0;
        if self.scale_log2().exp2() + self.noise_bound() as f64 >= cap {
            return Err(Error::RefreshNeeded(format!(
                "{label} (scale 2^{:.1} plus noise {} reaches q/4)",
                self.scale_log2(),
                self.noise_bound()
            )));
        }
        Ok(())
    }

    fn update_offset(&mut self, f: impl Fn(&CMatrix) -> Result<CMatrix>) -> Result<()> {
        if let Some(m) = &self.mask_offset {
            let next = f(m)?;
            self.mask_offset_trace = Some(next.trace().re);
            self.mask_offset = Some(next);
        }
        Ok(())
    }
}

/// Encrypts ρ and Ψ(ρ) entrywise at the state scale. Only depolarizing
/// masks are supported for encrypted states.
pub fn enc_state(
    key: &impl Encryptor,
    rho: &DensityMatrix,
    mask: MaskSpec,
    preset: &Preset,
    rng: &mut SeededGenerator,
) -> Result<EncryptedState> {
    enc_state_labeled(key, rho, mask, preset, "ENC", rng)
}

pub fn enc_state_labeled(
    key: &impl Encryptor,
    rho: &DensityMatrix,
    mask: MaskSpec,
    preset: &Preset,
    label: &str,
    rng: &mut SeededGenerator,
) -> Result<EncryptedState> {
    let p = mask
        .depolarizing_p()
        .ok_or_else(|| Error::Unsupported("encrypted states need a depolarizing mask".into()))?;
    let masked = depolarize(p, rho)?;
    let scale = preset.state_scale();
    let mut enc = |m: &DensityMatrix| -> Result<Vec<CtPair>> {
        m.row_major().map(|z| CtPair::encrypt(key, z.re, z.im, scale, rng)).collect()
    };
    let primary = enc(rho)?;
    let mask_cts = enc(&masked)?;
    let dim = rho.dim();
    let offset = CMatrix::identity(dim, dim).scale((1.0 - p) * rho.trace() / dim as f64);
    let mut es = EncryptedState {
        n_qubits: rho.n_qubits(),
        primary,
        mask: mask_cts,
        mask_spec: mask,
        mask_offset_trace: Some(offset.trace().re),
        mask_offset: Some(offset),
        tracker: preset.sigma as f64,
        op_trace: Vec::new(),
        routed_var: None,
    };
    es.charge(TraceOp::fresh(label), preset.sigma)?;
    Ok(es)
}

fn decrypt_matrix(keys: &ClientKeys, entries: &[CtPair], dim: usize) -> Result<CMatrix> {
    let sk = keys.key_for(entries[0].re.key_id)?;
    let f = keys.preset.frac_bits;
    let vals = entries
        .iter()
        .map(|z| z.decrypt(sk, f).map(|(re, im)| Complex64::new(re, im)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CMatrix::from_row_slice(dim, dim, &vals))
}

/// Client-side decryption of both components; the flag reports whether the
/// mask component still matches p·ρ′ + M (entrywise while M is public,
/// through the trace otherwise).
pub fn dec_state(keys: &ClientKeys, es: &EncryptedState) -> Result<(DensityMatrix, bool)> {
    let dim = es.dim();
    let rho = hermitize(&decrypt_matrix(keys, &es.primary, dim)?);
    let mask = decrypt_matrix(keys, &es.mask, dim)?;
    let p = es.p();
    let noise_sd = es.noise_var().sqrt() / es.scale_log2().exp2();
    let tol = 4.0 * (-(keys.preset.frac_bits as f64)).exp2() + 8.0 * noise_sd;
    let consistent = match (&es.mask_offset, es.mask_offset_trace) {
        (Some(m), _) => {
            let expected = rho.scale(p) + m;
            (&mask - expected).iter().all(|z| z.norm() <= tol)
        }
        (None, Some(t)) => (mask.trace().re - p * rho.trace().re - t).abs() <= tol * dim as f64,
        (None, None) => true,
    };
    Ok((DensityMatrix::from_matrix_unchecked(rho)?, consistent))
}

/// Σ numerator·entry per sparse row; the output scale rises by t.
pub(crate) fn lin_rows(entries: &[CtPair], rows: &[Vec<(usize, GaussInt)>], t: u32, cap: i64) -> Result<Vec<CtPair>> {
    rows.par_iter()
        .map(|row| {
            let mut acc: Option<CtPair> = None;
            for &(k, n) in row {
                let term = entries[k].const_mul(n.re, n.im, cap)?;
                acc = Some(match acc {
                    None => term,
                    Some(a) => add_pair(&a, &term)?,
                });
            }
            let mut out = acc.unwrap_or_else(|| zero_pair(&entries[0].re));
            out.re.scale_log2 += t as f64;
            out.im.scale_log2 += t as f64;
            Ok(out)
        })
        .collect()
}

/// Applies a plaintext-constant superoperator to both components.
pub fn apply_superop(es: &EncryptedState, g: &GateSuperop, keys: &EvalKeys, op: TraceOp) -> Result<EncryptedState> {
    if g.n_qubits != es.n_qubits {
        return Err(Error::Shape(format!("{} acts on {} qubits, state has {}", g.label, g.n_qubits, es.n_qubits)));
    }
    let mut out = es.clone();
    out.charge(op, keys.preset.sigma)?;
    let rows = g.sparse_rows();
    let cap = keys.preset.const_cap;
    out.primary = lin_rows(&es.primary, &rows, g.denom_log2, cap)?;
    out.mask = lin_rows(&es.mask, &rows, g.denom_log2, cap)?;
    out.check_headroom(&g.label.to_string())?;
    out.update_offset(|m| Ok(g.apply_plain(&DensityMatrix::from_matrix_unchecked(m.clone())?)?.into_matrix()))?;
    Ok(out)
}

/// Lifted gate: same superoperator on both components, tracker += ∥τ∥max·σ.
pub fn apply_gate(es: &EncryptedState, g: &GateSuperop, keys: &EvalKeys) -> Result<EncryptedState> {
    apply_superop(es, g, keys, TraceOp::increment(&g.label.to_string(), g.tau_max as f64))
}

/// Appends a |0⟩ wire as the new last wire (a public, noiseless operation).
pub fn append_zero_qubit(es: &EncryptedState) -> Result<EncryptedState> {
    let dim = es.dim();
    crate::qsim::density::check_dim(dim * 2)?;
    let grow = |entries: &[CtPair]| -> Vec<CtPair> {
        let nd = 2 * dim;
        (0..nd * nd)
            .map(|idx| {
                let (i, j) = (idx / nd, idx % nd);
                if i % 2 == 0 && j % 2 == 0 {
                    entries[(i / 2) * dim + j / 2].clone()
                } else {
                    zero_pair(&entries[0].re)
                }
            })
            .collect()
    };
    let mut out = es.clone();
    out.n_qubits += 1;
    out.primary = grow(&es.primary);
    out.mask = grow(&es.mask);
    out.update_offset(|m| {
        let mut z = CMatrix::zeros(2, 2);
        z[(0, 0)] = Complex64::new(1.0, 0.0);
        Ok(m.kronecker(&z))
    })?;
    Ok(out)
}

/// Block of entries with `wire` fixed to b, as an (n−1)-qubit matrix.
fn block(entries: &[CtPair], n: usize, wire: usize, b: usize) -> Vec<CtPair> {
    let dim = 1 << n;
    let rd = dim / 2;
    (0..rd * rd)
        .map(|idx| {
            let (i, j) = (idx / rd, idx % rd);
            entries[insert_bit(i, n, wire, b) * dim + insert_bit(j, n, wire, b)].clone()
        })
        .collect()
}

fn offset_block(m: &CMatrix, n: usize, wire: usize, b: usize) -> CMatrix {
    let rd = 1 << (n - 1);
    CMatrix::from_fn(rd, rd, |i, j| m[(insert_bit(i, n, wire, b), insert_bit(j, n, wire, b))])
}

pub(crate) fn offsets_agree(cands: &[CMatrix]) -> bool {
    cands.windows(2).all(|w| (&w[0] - &w[1]).iter().all(|z| z.norm() <= OFFSET_EQ_TOL))
}

/// Traces out one wire (public; adds ciphertexts).
pub fn trace_out(es: &EncryptedState, wire: usize) -> Result<EncryptedState> {
    if wire >= es.n_qubits || es.n_qubits == 1 {
        return Err(Error::Shape(format!("cannot trace out wire {wire} of {}", es.n_qubits)));
    }
    let n = es.n_qubits;
    let sum = |entries: &[CtPair]| -> Result<Vec<CtPair>> {
        let (b0, b1) = (block(entries, n, wire, 0), block(entries, n, wire, 1));
        b0.iter().zip(&b1).map(|(x, y)| x.add(y)).collect()
    };
    let mut out = es.clone();
    out.n_qubits -= 1;
    out.primary = sum(&es.primary)?;
    out.mask = sum(&es.mask)?;
    out.update_offset(|m| Ok(offset_block(m, n, wire, 0) + offset_block(m, n, wire, 1)))?;
    Ok(out)
}

/// base + b ⊠ (alt − base), entrywise.
pub(crate) fn blend(base: &[CtPair], alt: &[CtPair], bit: &GswCiphertext) -> Result<Vec<CtPair>> {
    base.par_iter()
        .zip(alt.par_iter())
        .map(|(x, y)| {
            let diff = y.sub(x)?;
            let chosen = diff.map(|c| external_product(c, bit))?;
            x.add(&chosen)
        })
        .collect()
}

/// Keeps the branch of `wire` selected by an encrypted bit and drops the wire.
/// The result is the unnormalized post-measurement block.
pub fn select_branch(es: &EncryptedState, wire: usize, bit: &GswCiphertext) -> Result<EncryptedState> {
    if wire >= es.n_qubits || es.n_qubits == 1 {
        return Err(Error::Shape(format!("cannot select on wire {wire} of {}", es.n_qubits)));
    }
    let n = es.n_qubits;
    let pick = |entries: &[CtPair]| blend(&block(entries, n, wire, 0), &block(entries, n, wire, 1), bit);
    let mut out = es.clone();
    out.n_qubits -= 1;
    out.primary = pick(&es.primary)?;
    out.mask = pick(&es.mask)?;
    if let Some(m) = &es.mask_offset {
        let cands = [offset_block(m, n, wire, 0), offset_block(m, n, wire, 1)];
        let traces: Vec<f64> = cands.iter().map(|c| c.trace().re).collect();
        out.mask_offset_trace = ((traces[0] - traces[1]).abs() <= OFFSET_EQ_TOL).then_some(traces[0]);
        out.mask_offset = offsets_agree(&cands).then(|| cands[0].clone());
    } else {
        out.mask_offset_trace = None;
    }
    out.routed_var = None;
    out.check_headroom("select")?;
    Ok(out)
}

/// Refresh: key-switch to the next level's key at the current level, lift the
/// scale if the switch would drop it below the state scale, then
/// modulus-switch one step down the chain.
pub fn refresh(es: &EncryptedState, keys: &EvalKeys) -> Result<EncryptedState> {
    let level = es.level();
    let chain = &keys.preset.chain;
    if level + 1 >= chain.len() {
        return Err(Error::NotInChain(level + 1));
    }
    let hint = keys.hints.get(level).ok_or(Error::NotInChain(level))?;
    let ratio = chain[level + 1] as f64 / chain[level] as f64;
    let target = keys.preset.state_scale();
    let lift = (target - es.scale_log2() - ratio.log2()).ceil().max(0.0) as u32;
    let switch = |entries: &[CtPair]| -> Result<Vec<CtPair>> {
        entries
            .par_iter()
            .map(|z| z.map(|c| mod_switch(&raise_scale(&key_switch(c, hint)?, lift), level + 1, chain)))
            .collect()
    };
    let mut out = es.clone();
    out.primary = switch(&es.primary)?;
    out.mask = switch(&es.mask)?;
    let first = out.op_trace.is_empty();
    let op = TraceOp::Refresh { ratio };
    out.tracker = step(out.tracker, &op, keys.preset.sigma as f64, first);
    out.op_trace.push(op);
    out.routed_var = None;
    Ok(out)
}

/// Decrypts each primary entry against a reference and returns the largest
/// measured error, in units of the fresh state scale. Test oracle.
pub fn measured_noise(keys: &ClientKeys, es: &EncryptedState, reference: &DensityMatrix) -> Result<f64> {
    let sk = keys.key_for(es.key_id())?;
    let shift = (es.scale_log2() - keys.preset.state_scale()).exp2();
    let mut worst = 0u64;
    for (z, r) in es.primary.iter().zip(reference.row_major()) {
        worst = worst.max(crate::mlwe::noise_actual(sk, &z.re, r.re)?);
        worst = worst.max(crate::mlwe::noise_actual(sk, &z.im, r.im)?);
    }
    Ok(worst as f64 / shift)
}

pub(crate) fn sub_pairs(a: &[CtPair], b: &[CtPair]) -> Result<Vec<CtPair>> {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

pub(crate) fn add_pairs(a: &[CtPair], b: &[CtPair]) -> Result<Vec<CtPair>> {
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

pub(crate) fn ext_pairs(a: &[CtPair], bit: &GswCiphertext) -> Result<Vec<CtPair>> {
    a.par_iter().map(|z| z.map(|c| external_product(c, bit))).collect()
}

pub(crate) fn raise_pairs(a: &[CtPair], bits: u32) -> Vec<CtPair> {
    a.iter().map(|z| CtPair { re: raise_scale(&z.re, bits), im: raise_scale(&z.im, bits) }).collect()
}

pub(crate) fn decrypt_scalar(keys: &ClientKeys, ct: &Ciphertext) -> Result<f64> {
    decrypt_with(keys.key_for(ct.key_id)?, ct, keys.preset.frac_bits)
}

pub(crate) fn sum_cts(cts: &[&Ciphertext]) -> Result<Ciphertext> {
    let mut acc = cts[0].clone();
    for c in &cts[1..] {
        acc = he_add(&acc, c)?;
    }
    Ok(acc)
}
