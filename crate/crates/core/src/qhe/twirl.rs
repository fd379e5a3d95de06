//! Pauli twirling of circuits and split rotation angles.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use super::program::Instruction;
use crate::error::{Error, Result};
use crate::mlwe::{gsw_encrypt_level, Ciphertext, Encryptor, GswCiphertext, SecretKey};
use crate::params::Preset;
use crate::qsim::{embed, pauli_matrices, CMatrix, GateLabel, GateSuperop};
use crate::rng::SeededGenerator;

/// Mask alphabet: index i is sign (−1)^(i mod 2) times Pauli i/2 (X, Y, Z).
pub const MASK_NAMES: [&str; 6] = ["+X", "-X", "+Y", "-Y", "+Z", "-Z"];

pub fn mask_unitary(idx: usize) -> CMatrix {
    let sign = if idx.is_multiple_of(2) { 1.0 } else { -1.0 };
    pauli_matrices()[idx / 2].scale(sign)
}

/// One gate of a compiled circuit with its explicit local unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct TwirledGate {
    pub label: String,
    pub wires: Vec<usize>,
    pub unitary: CMatrix,
}

impl TwirledGate {
    fn named(label: GateLabel, wires: &[usize]) -> Result<Self> {
        let unitary = label.unitary().ok_or_else(|| Error::Unsupported(format!("gate {label}")))?;
        Ok(Self { label: label.to_string(), wires: wires.to_vec(), unitary })
    }

    pub fn superop(&self, n_qubits: usize, frac_bits: u32) -> Result<GateSuperop> {
        let tau = self.wires.len() as u32;
        GateSuperop::from_kraus(GateLabel::Custom(self.label.clone()), std::slice::from_ref(&self.unitary), &self.wires, n_qubits, frac_bits, Some(tau))
    }
}

/// Secret side of a twirl: per-gate, per-wire masks as three GSW bits each,
/// and encrypted rotation offsets.
#[derive(Clone, Debug)]
pub struct TwirlPlan {
    pub masks: Vec<Vec<[GswCiphertext; 3]>>,
    pub offsets: Vec<Ciphertext>,
}

impl TwirlPlan {
    pub fn decrypt_masks(&self, sk: &SecretKey) -> Result<Vec<Vec<usize>>> {
        self.masks
            .iter()
            .map(|gate| {
                gate.iter()
                    .map(|bits| {
                        bits.iter().try_fold(0usize, |acc, b| Ok::<_, crate::Error>((acc << 1) | b.decrypt_bit(sk)? as usize))
                    })
                    .collect()
            })
            .collect()
    }
}

/// A rotation split into a published angle and a compensating rotation.
#[derive(Clone, Debug)]
pub struct AngleSplit {
    /// (φ + 2πr) mod 2π.
    pub published: f64,
    /// −2πr, applied in the clear right after the published rotation.
    pub compensation: f64,
    /// Enc(−r), r in turns.
    pub offset_ct: Ciphertext,
    pub grid_index: u64,
}

/// r = k/2^F with k uniform on the grid.
pub fn angle_split(
    phi: f64,
    key: &impl Encryptor,
    preset: &Preset,
    rng: &mut SeededGenerator,
) -> Result<AngleSplit> {
    let k = rng.gen_range(0..1u64 << preset.frac_bits);
    angle_split_at(phi, k, key, preset, rng)
}

pub fn angle_split_at(
    phi: f64,
    k: u64,
    key: &impl Encryptor,
    preset: &Preset,
    rng: &mut SeededGenerator,
) -> Result<AngleSplit> {
    let r = k as f64 / (preset.frac_bits as f64).exp2();
    Ok(AngleSplit {
        published: (phi + TAU * r).rem_euclid(TAU),
        compensation: -TAU * r,
        offset_ct: key.encrypt_at(-r, preset.scalar_scale(), rng)?,
        grid_index: k,
    })
}

/// Replaces every gate G by [R, R G R†, R†] with R a tensor of per-wire
/// masks; R† R G R† R = G. Rotations are split first.
pub fn twirl_compile(
    prog: &[Instruction],
    sk: &SecretKey,
    preset: &Preset,
    rng: &mut SeededGenerator,
) -> Result<(Vec<TwirledGate>, TwirlPlan)> {
    let mut out = Vec::new();
    let mut plan = TwirlPlan { masks: Vec::new(), offsets: Vec::new() };
    let mut gates = Vec::new();
    for ins in prog {
        match ins {
            Instruction::Gate { label: GateLabel::Rz(phi), wires } => {
                let split = angle_split(*phi, sk, preset, rng)?;
                gates.push(TwirledGate::named(GateLabel::Rz(split.published), wires)?);
                gates.push(TwirledGate::named(GateLabel::Rz(split.compensation), wires)?);
                plan.offsets.push(split.offset_ct);
            }
            Instruction::Gate { label, wires } => gates.push(TwirledGate::named(label.clone(), wires)?),
            other => return Err(Error::Unsupported(format!("cannot twirl {other}"))),
        }
    }
    for g in gates {
        let a = g.wires.len();
        let local: Vec<usize> = (0..a).collect();
        let idx: Vec<usize> = (0..a).map(|_| rng.gen_range(0..6)).collect();
        let mut r = CMatrix::identity(1, 1);
        for &i in &idx {
            r = r.kronecker(&mask_unitary(i));
        }
        let r = embed(&r, &local, a)?;
        let conj = &r * &g.unitary * r.adjoint();
        let names: Vec<&str> = idx.iter().map(|&i| MASK_NAMES[i]).collect();
        out.push(TwirledGate { label: format!("R[{}]", names.join(",")), wires: g.wires.clone(), unitary: r.clone() });
        out.push(TwirledGate { label: format!("~{}", g.label), wires: g.wires.clone(), unitary: conj });
        out.push(TwirledGate { label: format!("R†[{}]", names.join(",")), wires: g.wires.clone(), unitary: r.adjoint() });
        let bits = idx
            .iter()
            .map(|&i| {
                let enc = |b: usize, rng: &mut SeededGenerator| gsw_encrypt_level(sk, ((i >> b) & 1) as i64, preset.gadget_log2, 0, rng);
                Ok([enc(2, rng)?, enc(1, rng)?, enc(0, rng)?])
            })
            .collect::<Result<Vec<_>>>()?;
        plan.masks.push(bits);
    }
    Ok((out, plan))
}

/// Product of the circuit's unitaries on n qubits (later gates on the left).
pub fn circuit_unitary(gates: &[TwirledGate], n_qubits: usize) -> Result<CMatrix> {
    let dim = 1 << n_qubits;
    let mut u = CMatrix::identity(dim, dim);
    for g in gates {
        u = embed(&g.unitary, &g.wires, n_qubits)? * u;
    }
    Ok(u)
}

/// True when a and b agree up to a global phase.
pub fn equal_up_to_phase(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    let Some((i, z)) = b.iter().enumerate().max_by(|x, y| x.1.norm().total_cmp(&y.1.norm())) else {
        return true;
    };
    if z.norm() < tol {
        return a.iter().all(|w| w.norm() < tol);
    }
    let phase: Complex64 = a[i] / z;
    a.iter().zip(b.iter()).all(|(x, y)| (x - y * phase).norm() < tol)
}
