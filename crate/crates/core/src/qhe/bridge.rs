//! Quantum→classical measurement modes, encrypted classical control and the
//! teleportation correction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::keys::{ClientKeys, EvalKeys};
use super::state::{
    add_pairs, append_zero_qubit, apply_superop, decrypt_scalar, ext_pairs, lin_rows, offsets_agree,
    raise_pairs, select_branch, sub_pairs, sum_cts, EncryptedState,
};
use crate::error::{Error, Result};
use crate::mlwe::{gsw_encrypt_level, Ciphertext, CtPair, GswCiphertext, TraceOp};
use crate::qsim::{sample_index, CMatrix, DensityMatrix, GateLabel, GateSuperop};
use crate::rng::SeededGenerator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasMode {
    /// Coherent copy into fresh pointer wires (deferred measurement).
    Defer,
    /// Block-diagonal branch register holding every unnormalized branch.
    Weak,
    /// Client round trip: sampled outcome returned as encrypted bits.
    Feedback,
    /// Deferred measurement with the pointer discarded: the dephasing channel.
    Dephase,
}

impl MeasMode {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "defer" => MeasMode::Defer,
            "weak" => MeasMode::Weak,
            "feedback" => MeasMode::Feedback,
            "dephase" => MeasMode::Dephase,
            other => return Err(Error::Unsupported(format!("measurement mode {other}"))),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MeasMode::Defer => "defer",
            MeasMode::Weak => "weak",
            MeasMode::Feedback => "feedback",
            MeasMode::Dephase => "dephase",
        }
    }
}

/// An encrypted classical bit and the measurement that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct CBit {
    pub value_ct: GswCiphertext,
    pub provenance: usize,
}

/// The client half of a feedback measurement.
pub trait ClientOracle {
    /// Decrypts the 2^n_bits branch weights, samples an outcome and returns
    /// it as GSW bits (first measured wire first) at the weights' level.
    fn sample_outcome(&mut self, weights: &[Ciphertext], n_bits: usize) -> Result<Vec<GswCiphertext>>;
}

/// Secret-key holder answering feedback requests.
pub struct Client {
    pub keys: ClientKeys,
    pub rng: SeededGenerator,
    /// Sampled outcomes, in request order.
    pub outcomes: Vec<usize>,
}

impl Client {
    pub fn new(keys: ClientKeys, rng: SeededGenerator) -> Self {
        Self { keys, rng, outcomes: Vec::new() }
    }

    /// A fresh GSW bit under the key and level of `like`.
    pub fn encrypt_bit(&mut self, bit: i64, like: &Ciphertext) -> Result<GswCiphertext> {
        let sk = self.keys.key_for(like.key_id)?;
        gsw_encrypt_level(sk, bit, self.keys.preset.gadget_log2, like.modulus_index, &mut self.rng)
    }
}

impl ClientOracle for Client {
    fn sample_outcome(&mut self, weights: &[Ciphertext], n_bits: usize) -> Result<Vec<GswCiphertext>> {
        let w = weights.iter().map(|c| decrypt_scalar(&self.keys, c)).collect::<Result<Vec<_>>>()?;
        let outcome = sample_index(&w, &mut self.rng)?;
        self.outcomes.push(outcome);
        (0..n_bits)
            .map(|i| self.encrypt_bit(((outcome >> (n_bits - 1 - i)) & 1) as i64, &weights[0]))
            .collect()
    }
}

/// Local operators on (measured wires ++ pointer wires) for the coherent modes.
pub(crate) fn copy_kraus(k: usize, mode: MeasMode) -> Vec<CMatrix> {
    let dk = 1usize << k;
    let d = dk * dk;
    let one = Complex64::new(1.0, 0.0);
    match mode {
        MeasMode::Defer => {
            // |m⟩|p⟩ → |m⟩|p ⊕ m⟩.
            let mut u = CMatrix::zeros(d, d);
            for m in 0..dk {
                for p in 0..dk {
                    u[(m * dk + (p ^ m), m * dk + p)] = one;
                }
            }
            vec![u]
        }
        _ => (0..dk)
            .map(|m| {
                let mut op = CMatrix::zeros(d, d);
                op[(m * dk + m, m * dk)] = one;
                op
            })
            .collect(),
    }
}

pub(crate) fn dephase_kraus(k: usize) -> Vec<CMatrix> {
    let dk = 1usize << k;
    (0..dk)
        .map(|m| {
            let mut op = CMatrix::zeros(dk, dk);
            op[(m, m)] = Complex64::new(1.0, 0.0);
            op
        })
        .collect()
}

/// Measures `wires` as one instrument (+σ). Defer and weak append one
/// pointer wire per measured wire at the end of the register; dephase keeps
/// the register shape; feedback removes the measured wires and returns one
/// encrypted bit per wire.
pub fn q2c(
    es: &EncryptedState,
    wires: &[usize],
    mode: MeasMode,
    keys: &EvalKeys,
    client: Option<&mut (dyn ClientOracle + '_)>,
    measurement_id: usize,
) -> Result<(EncryptedState, Vec<CBit>)> {
    let n = es.n_qubits;
    if wires.is_empty() || wires.iter().enumerate().any(|(i, &w)| w >= n || wires[..i].contains(&w)) {
        return Err(Error::Shape(format!("bad measurement wires {wires:?} for {n} qubits")));
    }
    let k = wires.len();
    let label = format!("MEAS[{}]", mode.as_str());
    let op = TraceOp::increment("MEAS", 1.0);
    let f = keys.preset.frac_bits;
    match mode {
        MeasMode::Defer | MeasMode::Weak => {
            let mut grown = es.clone();
            for _ in 0..k {
                grown = append_zero_qubit(&grown)?;
            }
            let mut on: Vec<usize> = wires.to_vec();
            on.extend(n..n + k);
            let g = GateSuperop::from_kraus(GateLabel::Custom(label), &copy_kraus(k, mode), &on, n + k, f, Some(1))?;
            Ok((apply_superop(&grown, &g, keys, op)?, Vec::new()))
        }
        MeasMode::Dephase => {
            let g = GateSuperop::from_kraus(GateLabel::Custom(label), &dephase_kraus(k), wires, n, f, Some(1))?;
            Ok((apply_superop(es, &g, keys, op)?, Vec::new()))
        }
        MeasMode::Feedback => {
            let client = client.ok_or_else(|| Error::Unsupported("feedback measurement needs a client".into()))?;
            let weights = branch_weights(es, wires)?;
            let bits = client.sample_outcome(&weights, k)?;
            if bits.len() != k {
                return Err(Error::Shape("client returned the wrong number of bits".into()));
            }
            let mut out = es.clone();
            out.charge(op, keys.preset.sigma)?;
            // Highest wire first so the remaining indices stay valid.
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by_key(|&i| std::cmp::Reverse(wires[i]));
            for i in order {
                out = select_branch(&out, wires[i], &bits[i])?;
            }
            let cbits = bits.into_iter().map(|value_ct| CBit { value_ct, provenance: measurement_id }).collect();
            Ok((out, cbits))
        }
    }
}

/// Encrypted Tr(Π_m ρ) for every outcome m of the measured wires.
pub fn branch_weights(es: &EncryptedState, wires: &[usize]) -> Result<Vec<Ciphertext>> {
    let n = es.n_qubits;
    let dim = es.dim();
    let k = wires.len();
    (0..1usize << k)
        .map(|m| {
            let diag: Vec<&Ciphertext> = (0..dim)
                .filter(|&i| wires.iter().enumerate().all(|(b, &w)| (i >> (n - 1 - w)) & 1 == (m >> (k - 1 - b)) & 1))
                .map(|i| &es.primary[i * dim + i].re)
                .collect();
            sum_cts(&diag)
        })
        .collect()
}

/// U^b ρ U^{b†} as U(b⊠ρ) + (1−b)⊠ρ: two external products and one lifted
/// gate, tracker += 3σ.
pub fn he_control(g: &GateSuperop, es: &EncryptedState, b: &CBit, keys: &EvalKeys) -> Result<EncryptedState> {
    if g.n_qubits != es.n_qubits {
        return Err(Error::Shape("controlled gate does not match the register".into()));
    }
    let not_b = b.value_ct.complement();
    let rows = g.sparse_rows();
    let cap = keys.preset.const_cap;
    let t = g.denom_log2;
    let branch = |entries: &[CtPair]| -> Result<Vec<CtPair>> {
        let on = lin_rows(&ext_pairs(entries, &b.value_ct)?, &rows, t, cap)?;
        let off = raise_pairs(&ext_pairs(entries, &not_b)?, t);
        add_pairs(&on, &off)
    };
    let mut out = es.clone();
    out.charge(TraceOp::increment(&format!("CTRL-{}", g.label), 3.0), keys.preset.sigma)?;
    out.primary = branch(&es.primary)?;
    out.mask = branch(&es.mask)?;
    if let Some(m) = &es.mask_offset {
        let moved = g.apply_plain(&DensityMatrix::from_matrix_unchecked(m.clone())?)?.into_matrix();
        let keep = offsets_agree(&[m.clone(), moved.clone()]);
        out.mask_offset_trace = ((m.trace().re - moved.trace().re).abs() <= 1e-12).then_some(m.trace().re);
        out.mask_offset = keep.then(|| m.clone());
    }
    out.check_headroom("controlled gate")?;
    Ok(out)
}

/// X^{m₂} Z^{m₁} on `target`, evaluated as
/// A = ρ + m₁⊠(ZρZ − ρ), out = A + m₂⊠(XAX − A), which expands to the
/// four-branch polynomial in (m₁, m₂). Tracker += σ.
pub fn teleport_correct(
    es: &EncryptedState,
    target: usize,
    m1: &CBit,
    m2: &CBit,
    keys: &EvalKeys,
) -> Result<EncryptedState> {
    let n = es.n_qubits;
    let f = keys.preset.frac_bits;
    let z = GateSuperop::gate(GateLabel::Z, &[target], n, f)?;
    let x = GateSuperop::gate(GateLabel::X, &[target], n, f)?;
    let cap = keys.preset.const_cap;
    let step = |entries: &[CtPair], g: &GateSuperop, bit: &CBit| -> Result<Vec<CtPair>> {
        let moved = lin_rows(entries, &g.sparse_rows(), g.denom_log2, cap)?;
        let base = raise_pairs(entries, g.denom_log2);
        add_pairs(&base, &ext_pairs(&sub_pairs(&moved, &base)?, &bit.value_ct)?)
    };
    let mut out = es.clone();
    out.charge(TraceOp::increment("CORR", 1.0), keys.preset.sigma)?;
    out.primary = step(&step(&es.primary, &z, m1)?, &x, m2)?;
    out.mask = step(&step(&es.mask, &z, m1)?, &x, m2)?;
    if let Some(m) = &es.mask_offset {
        let paulis = [GateLabel::Z, GateLabel::X];
        let mut cands = vec![m.clone()];
        for l in &paulis {
            let g = GateSuperop::gate(l.clone(), &[target], n, f)?;
            let prev = cands.clone();
            for c in prev {
                cands.push(g.apply_plain(&DensityMatrix::from_matrix_unchecked(c)?)?.into_matrix());
            }
        }
        out.mask_offset = offsets_agree(&cands).then(|| m.clone());
    }
    out.check_headroom("CORR")?;
    Ok(out)
}

/// CNOT(x_from, target)·CZ(z_from, target) as one coherent correction (+σ).
pub fn coherent_correction(z_from: usize, x_from: usize, target: usize, n_qubits: usize, frac_bits: u32) -> Result<GateSuperop> {
    let one = Complex64::new(1.0, 0.0);
    // Local wires (z, x, t).
    let mut u = CMatrix::zeros(8, 8);
    for zb in 0..2 {
        for xb in 0..2 {
            for tb in 0..2 {
                let sign = if zb == 1 && tb == 1 { -one } else { one };
                let out_t = tb ^ xb;
                u[(zb * 4 + xb * 2 + out_t, zb * 4 + xb * 2 + tb)] = sign;
            }
        }
    }
    GateSuperop::from_kraus(GateLabel::Custom("CORR".into()), &[u], &[z_from, x_from, target], n_qubits, frac_bits, Some(1))
}
