//! Axiom capsules: Kraus packs encrypted bit by bit.
//!
//! Every capsule has the same shape whatever the axiom: four 4×4 Kraus
//! operators on a wire pair, each entry a GSW bit. Facts are padded to the
//! pair with an identity factor and to four operators with zeros.

use num_complex::Complex64;
use rayon::prelude::*;

use super::logic::{fact_kraus, mp_kraus, Axiom, AxiomKind, PropLayout};
use crate::error::{Error, Result};
use crate::mlwe::{gsw_encrypt_level, Ciphertext, CtPair, Encryptor, GswCiphertext, SecretKey, TraceOp};
use crate::params::Preset;
use crate::qhe::{EncryptedState, EvalKeys};
use crate::qsim::superop::WireLayout;
use crate::qsim::CMatrix;
use crate::rng::SeededGenerator;

pub const CAPSULE_KRAUS: usize = 4;
const LOCAL: usize = 4;

#[derive(Clone, Debug)]
pub struct Capsule {
    /// Enc(axiom id); only the owner can read it.
    pub id_ct: Ciphertext,
    pub wires: [usize; 2],
    /// `kraus[j][r * 4 + c]` encrypts entry (r, c) of K_j.
    pub kraus: Vec<Vec<GswCiphertext>>,
}

impl Capsule {
    /// Bytes the server sees: the same for every axiom.
    pub fn byte_len(&self) -> usize {
        self.id_ct.to_bytes().len() + self.kraus.iter().flatten().map(|g| g.to_bytes().len()).sum::<usize>()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.id_ct.to_bytes();
        for g in self.kraus.iter().flatten() {
            out.extend(g.to_bytes());
        }
        out
    }
}

/// The padded local Kraus pack of an axiom on its wire pair.
pub fn padded_kraus(a: &Axiom) -> Vec<CMatrix> {
    let mut ops = match &a.kind {
        AxiomKind::Fact(_) => fact_kraus().iter().map(|k| k.kronecker(&CMatrix::identity(2, 2))).collect(),
        AxiomKind::Implies { .. } => mp_kraus(),
    };
    ops.resize(CAPSULE_KRAUS, CMatrix::zeros(LOCAL, LOCAL));
    ops
}

pub fn identity_kraus() -> Vec<CMatrix> {
    let mut ops = vec![CMatrix::identity(LOCAL, LOCAL)];
    ops.resize(CAPSULE_KRAUS, CMatrix::zeros(LOCAL, LOCAL));
    ops
}

/// Wire pair for an axiom: an implication's (premise, conclusion), or a
/// fact's wire and its neighbour.
pub fn capsule_wires(a: &Axiom, layout: &PropLayout) -> Result<[usize; 2]> {
    let n = layout.n_qubits();
    if n < 2 {
        return Err(Error::Shape("capsules need a register of at least two wires".into()));
    }
    let w = layout.wires_of(a).ok_or_else(|| Error::Shape(format!("axiom {a} is not in the register")))?;
    Ok(match w.as_slice() {
        [x] => [*x, (x + 1) % n],
        [x, y] => [*x, *y],
        _ => unreachable!("axioms touch one or two wires"),
    })
}

pub fn capsule_from_kraus(
    sk: &SecretKey,
    id: usize,
    wires: [usize; 2],
    kraus: &[CMatrix],
    preset: &Preset,
    rng: &mut SeededGenerator,
) -> Result<Capsule> {
    if kraus.len() != CAPSULE_KRAUS || kraus.iter().any(|k| k.shape() != (LOCAL, LOCAL)) {
        return Err(Error::Shape("capsules carry four 4×4 Kraus operators".into()));
    }
    let mut enc = Vec::with_capacity(CAPSULE_KRAUS);
    for k in kraus {
        let bits = (0..LOCAL * LOCAL)
            .map(|i| k[(i / LOCAL, i % LOCAL)])
            .map(|z| {
                let b = z.re.round() as i64;
                if (z - Complex64::new(b as f64, 0.0)).norm() > 1e-12 || !(0..=1).contains(&b) {
                    return Err(Error::NotABit(b));
                }
                gsw_encrypt_level(sk, b, preset.gadget_log2, 0, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        enc.push(bits);
    }
    Ok(Capsule { id_ct: sk.encrypt_at(id as f64 / 1024.0, preset.scalar_scale(), rng)?, wires, kraus: enc })
}

/// Owner side: encrypts an axiom's padded Kraus pack under `sk`.
pub fn capsule_make(
    sk: &SecretKey,
    axiom: &Axiom,
    layout: &PropLayout,
    preset: &Preset,
    rng: &mut SeededGenerator,
) -> Result<Capsule> {
    capsule_from_kraus(sk, axiom.id, capsule_wires(axiom, layout)?, &padded_kraus(axiom), preset, rng)
}

/// Owner side: decrypts the Kraus pack.
pub fn capsule_open(sk: &SecretKey, c: &Capsule) -> Result<Vec<CMatrix>> {
    c.kraus
        .iter()
        .map(|bits| {
            let vals = bits.iter().map(|b| b.decrypt_bit(sk).map(|v| Complex64::new(v as f64, 0.0))).collect::<Result<Vec<_>>>()?;
            Ok(CMatrix::from_row_slice(LOCAL, LOCAL, &vals))
        })
        .collect()
}

fn ext(z: &CtPair, b: &GswCiphertext) -> Result<CtPair> {
    z.map(|c| crate::mlwe::external_product(c, b))
}

/// Σ_j K_j ρ K_j† with encrypted 0/1 entries: K_j ρ then (K_j ρ) K_j†,
/// one external product per factor. Tracker += 2σ.
fn apply_pack(entries: &[CtPair], c: &Capsule, n: usize) -> Result<Vec<CtPair>> {
    let dim = 1usize << n;
    let lay = WireLayout::new(&c.wires, n);
    let zero = CtPair::zero_like(&entries[0].re);
    let mut total: Vec<CtPair> = vec![zero.clone(); dim * dim];
    for k in &c.kraus {
        // Left factor: T[i][col] = Σ_a K[loc(i), a] ⊠ ρ[(a, rest(i)), col].
        let left: Vec<CtPair> = (0..dim * dim)
            .into_par_iter()
            .map(|idx| {
                let (i, col) = (idx / dim, idx % dim);
                let (li, ri) = (lay.local(i), lay.rest(i));
                let mut acc = zero.clone();
                for a in 0..LOCAL {
                    acc = acc.add(&ext(&entries[(ri | lay.place(a)) * dim + col], &k[li * LOCAL + a])?)?;
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        // Right factor: out[row][j] += Σ_b T[row][(b, rest(j))] ⊠ K[loc(j), b].
        let right: Vec<CtPair> = (0..dim * dim)
            .into_par_iter()
            .map(|idx| {
                let (row, j) = (idx / dim, idx % dim);
                let (lj, rj) = (lay.local(j), lay.rest(j));
                let mut acc = zero.clone();
                for b in 0..LOCAL {
                    acc = acc.add(&ext(&left[row * dim + (rj | lay.place(b))], &k[lj * LOCAL + b])?)?;
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        total = total.iter().zip(&right).map(|(x, y)| x.add(y)).collect::<Result<_>>()?;
    }
    Ok(total)
}

/// Server side: applies a capsule to both components. The channel is
/// secret, so the public mask offset is dropped; its trace survives
/// because the channel is trace preserving.
pub fn capsule_apply(es: &EncryptedState, c: &Capsule, keys: &EvalKeys) -> Result<EncryptedState> {
    let gsw = &c.kraus[0][0];
    if gsw.key_id != es.key_id() {
        return Err(Error::KeyMismatch(es.key_id(), gsw.key_id));
    }
    if gsw.modulus_index != es.level() {
        return Err(Error::ModulusMismatch(es.level(), gsw.modulus_index));
    }
    if c.wires.iter().any(|&w| w >= es.n_qubits) || c.wires[0] == c.wires[1] {
        return Err(Error::Shape(format!("capsule wires {:?} on {} qubits", c.wires, es.n_qubits)));
    }
    let mut out = es.clone();
    out.charge(TraceOp::increment("CAPSULE", 2.0), keys.preset.sigma)?;
    out.primary = apply_pack(&es.primary, c, es.n_qubits)?;
    out.mask = apply_pack(&es.mask, c, es.n_qubits)?;
    out.mask_offset = None;
    route_variance(es, &mut out, gsw.product_var());
    let spread = 7.0 * out.noise_var().sqrt();
    if out.scale_log2().exp2() + spread >= out.q() as f64 / 4.0 {
        return Err(Error::RefreshNeeded(format!("capsule (7σ noise {spread:.0} reaches q/4)")));
    }
    Ok(out)
}

/// Variance bookkeeping for a 0/1 CPTP pack. Each K_j has at most one 1
/// per row and each input column is hit once across j, so an output entry
/// sums at most four disjoint input entries and every input entry lands in
/// at most one output entry. Each output also picks up 32 external-product
/// terms (4 Kraus × (4 left + 4 right)).
fn route_variance(es: &EncryptedState, out: &mut EncryptedState, product_var: f64) {
    let part_sums = |entries: &[CtPair]| {
        let re: f64 = entries.iter().map(|z| z.re.noise_var).sum();
        let im: f64 = entries.iter().map(|z| z.im.noise_var).sum();
        re.max(im)
    };
    let mass_in = es.routed_var.unwrap_or_else(|| part_sums(&es.primary).max(part_sums(&es.mask)));
    let fresh = 2.0 * (CAPSULE_KRAUS * LOCAL) as f64 * product_var;
    let entry = (4.0 * es.noise_var()).min(mass_in) + fresh;
    for z in out.primary.iter_mut().chain(out.mask.iter_mut()) {
        z.re.noise_var = z.re.noise_var.min(entry);
        z.im.noise_var = z.im.noise_var.min(entry);
    }
    out.routed_var = Some(mass_in + (es.dim() * es.dim()) as f64 * fresh);
}
