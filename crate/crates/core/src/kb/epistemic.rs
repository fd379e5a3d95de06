//! K_B evaluation: "B knows P" as an encrypted truth qubit.

use serde::{Deserialize, Serialize};

use super::capsule::{capsule_apply, capsule_from_kraus, capsule_make, capsule_wires, identity_kraus, Capsule};
use super::logic::{kb_mask, Axiom, AxiomKind, KBMask, Prop, PropLayout};
use crate::error::{Error, Result};
use crate::mlwe::{Encryptor, SecretKey, TraceOp};
use crate::params::Preset;
use crate::qhe::{apply_superop, enc_state_labeled, trace_out, EncryptedState, EvalKeys};
use crate::qsim::{DensityMatrix, GateLabel, GateSuperop, MaskSpec};
use crate::rng::SeededGenerator;

/// Predicate name of the filler wire that keeps registers at two wires.
pub const PAD_PREDICATE: &str = "_pad";

#[derive(Clone, Debug)]
pub enum Knowledge {
    Public(KBMask),
    Secret(Vec<Capsule>),
}

#[derive(Clone, Debug)]
pub struct EpistemicWorld {
    pub owner: String,
    pub layout: PropLayout,
    pub knowledge: Knowledge,
}

fn layout_for(axioms: &[Axiom], subject: &str, extra: &[&str]) -> PropLayout {
    let mut layout = PropLayout::for_subject(axioms, subject, extra);
    if layout.n_qubits() < 2 {
        layout.props.push(Prop::new(PAD_PREDICATE, subject));
    }
    layout
}

impl EpistemicWorld {
    /// A world whose mask channels are public.
    pub fn public(owner: &str, axioms: &[Axiom], subject: &str, extra: &[&str]) -> Result<Self> {
        Ok(Self {
            owner: owner.to_string(),
            layout: layout_for(axioms, subject, extra),
            knowledge: Knowledge::Public(kb_mask(axioms, 1.0)?),
        })
    }

    /// A world held as capsules under the owner's key. Axioms about other
    /// subjects become identity capsules, so the count still matches.
    pub fn secret(
        owner: &str,
        axioms: &[Axiom],
        subject: &str,
        extra: &[&str],
        sk: &SecretKey,
        preset: &Preset,
        rng: &mut SeededGenerator,
    ) -> Result<Self> {
        let layout = layout_for(axioms, subject, extra);
        let capsules = axioms
            .iter()
            .map(|a| match layout.wires_of(a) {
                Some(_) => capsule_make(sk, a, &layout, preset, rng),
                None => capsule_from_kraus(sk, a.id, [0, 1], &identity_kraus(), preset, rng),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { owner: owner.to_string(), layout, knowledge: Knowledge::Secret(capsules) })
    }

    pub fn n_qubits(&self) -> usize {
        self.layout.n_qubits()
    }
}

/// Applies a world's knowledge to wires offset..offset+n of the register.
fn run_world(es: &EncryptedState, world: &EpistemicWorld, offset: usize, keys: &EvalKeys) -> Result<EncryptedState> {
    let n = es.n_qubits;
    let f = keys.preset.frac_bits;
    let rounds = world.n_qubits();
    let mut es = es.clone();
    match &world.knowledge {
        Knowledge::Public(mask) => {
            let shifted = |a: &Axiom| world.layout.wires_of(a).map(|w| w.iter().map(|x| x + offset).collect::<Vec<_>>());
            let apply = |es: &EncryptedState, a: &Axiom, ch: &crate::qsim::Channel| -> Result<EncryptedState> {
                let Some(w) = shifted(a) else { return Ok(es.clone()) };
                let g = GateSuperop::from_kraus(GateLabel::Custom(a.to_string()), &ch.kraus, &w, n, f, None)?;
                apply_superop(es, &g, keys, TraceOp::increment(&a.to_string(), g.tau_max as f64))
            };
            for (a, ch) in mask.axioms.iter().zip(&mask.channels) {
                if matches!(a.kind, AxiomKind::Fact(_)) {
                    es = apply(&es, a, ch)?;
                }
            }
            for _ in 0..rounds {
                for (a, ch) in mask.axioms.iter().zip(&mask.channels) {
                    if matches!(a.kind, AxiomKind::Implies { .. }) {
                        es = apply(&es, a, ch)?;
                    }
                }
            }
        }
        Knowledge::Secret(capsules) => {
            // The server cannot tell facts from rules, so every round runs
            // every capsule.
            for _ in 0..rounds {
                for c in capsules {
                    let mut moved = c.clone();
                    moved.wires = [c.wires[0] + offset, c.wires[1] + offset];
                    es = capsule_apply(&es, &moved, keys)?;
                }
            }
        }
    }
    Ok(es)
}

/// Traces out every wire except `keep` (in order).
fn keep_only(es: &EncryptedState, keep: &[usize]) -> Result<EncryptedState> {
    let mut es = es.clone();
    for w in (0..es.n_qubits).rev() {
        if !keep.contains(&w) {
            es = trace_out(&es, w)?;
        }
    }
    Ok(es)
}

fn blank(n: usize, key: &impl Encryptor, preset: &Preset, p: f64, rng: &mut SeededGenerator) -> Result<EncryptedState> {
    enc_state_labeled(key, &DensityMatrix::basis(n, 0)?, MaskSpec::depolarizing(p)?, preset, "KB", rng)
}

/// ⟦K_B P⟧ as a one-qubit encrypted state: |1⟩⟨1| when the world derives P.
/// Atoms outside the world's register are not derivable and give |0⟩⟨0|.
pub fn knows_eval(
    world: &EpistemicWorld,
    prop: &Prop,
    keys: &EvalKeys,
    key: &impl Encryptor,
    p: f64,
    rng: &mut SeededGenerator,
) -> Result<EncryptedState> {
    let Some(w) = world.layout.wire(prop) else {
        return blank(1, key, &keys.preset, p, rng);
    };
    let es = blank(world.n_qubits(), key, &keys.preset, p, rng)?;
    keep_only(&run_world(&es, world, 0, keys)?, &[w])
}

/// Ψ^{A∪B}: two worlds side by side on one register.
#[derive(Clone, Debug)]
pub struct CombinedWorld {
    pub a: EpistemicWorld,
    pub b: EpistemicWorld,
}

pub fn mask_combine(a: &EpistemicWorld, b: &EpistemicWorld) -> Result<CombinedWorld> {
    if a.n_qubits() + b.n_qubits() > 6 {
        return Err(Error::DimensionGuard(1 << (a.n_qubits() + b.n_qubits())));
    }
    Ok(CombinedWorld { a: a.clone(), b: b.clone() })
}

/// (K_A P, K_B P) as a two-qubit encrypted state, A on wire 0.
pub fn knows_pair(
    cw: &CombinedWorld,
    prop: &Prop,
    keys: &EvalKeys,
    key: &impl Encryptor,
    p: f64,
    rng: &mut SeededGenerator,
) -> Result<EncryptedState> {
    let na = cw.a.n_qubits();
    let wa = cw.a.layout.wire(prop).ok_or_else(|| Error::Shape(format!("{prop} is not in {}'s register", cw.a.owner)))?;
    let wb = cw.b.layout.wire(prop).ok_or_else(|| Error::Shape(format!("{prop} is not in {}'s register", cw.b.owner)))?;
    let es = blank(na + cw.b.n_qubits(), key, &keys.preset, p, rng)?;
    let es = run_world(&es, &cw.a, 0, keys)?;
    let es = run_world(&es, &cw.b, na, keys)?;
    keep_only(&es, &[wa, na + wb])
}

/// Reading of a decrypted (K_A P, K_B P) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    BothKnow,
    OnlyFirst,
    OnlySecond,
    Unknown,
}

impl Verdict {
    pub fn from_bits(a: bool, b: bool) -> Self {
        match (a, b) {
            (true, true) => Verdict::BothKnow,
            (true, false) => Verdict::OnlyFirst,
            (false, true) => Verdict::OnlySecond,
            (false, false) => Verdict::Unknown,
        }
    }

    /// Three-valued reading: true, disputed or unknown.
    pub fn three_valued(&self) -> &'static str {
        match self {
            Verdict::BothKnow => "true",
            Verdict::OnlyFirst | Verdict::OnlySecond => "disputed",
            Verdict::Unknown => "unknown",
        }
    }
}

/// Most likely basis state of a decrypted register, as bits (wire 0 first).
pub fn read_bits(rho: &DensityMatrix) -> Vec<bool> {
    let n = rho.n_qubits();
    let best = (0..rho.dim()).max_by(|&i, &j| rho.matrix()[(i, i)].re.total_cmp(&rho.matrix()[(j, j)].re)).unwrap_or(0);
    (0..n).map(|w| (best >> (n - 1 - w)) & 1 == 1).collect()
}

/// Capsule wire pairs, exposed for size checks.
pub fn wires_for(a: &Axiom, layout: &PropLayout) -> Result<[usize; 2]> {
    capsule_wires(a, layout)
}
