//! Axioms, one-qubit-per-proposition proof states and the public KB mask.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{apply_channel, depolarize, embed, Channel, CMatrix, DensityMatrix};

/// A ground atom such as `P(a)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Prop {
    pub predicate: String,
    pub subject: String,
}

impl Prop {
    pub fn new(predicate: &str, subject: &str) -> Self {
        Self { predicate: predicate.to_string(), subject: subject.to_string() }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse { line: 1, msg: format!("expected Pred(subject), got {s:?}") };
        let (pred, rest) = s.split_once('(').ok_or_else(bad)?;
        let subj = rest.strip_suffix(')').ok_or_else(bad)?;
        let ident = |t: &str| !t.is_empty() && t.chars().all(|c| c.is_alphanumeric() || c == '_');
        if !ident(pred.trim()) || !ident(subj.trim()) {
            return Err(bad());
        }
        Ok(Self::new(pred.trim(), subj.trim()))
    }
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.subject)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomKind {
    Fact(Prop),
    /// ∀x. from(x) ⇒ to(x)
    Implies { from: String, to: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axiom {
    pub id: usize,
    pub kind: AxiomKind,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            AxiomKind::Fact(p) => write!(f, "{p}"),
            AxiomKind::Implies { from, to } => write!(f, "{from}⇒{to}"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AxiomJson {
    Fact { fact: String },
    Implies { implies: (String, String) },
}

/// `[{"fact": "P(a)"}, {"implies": ["P", "Q"]}]`. Implications must name
/// predicates that some axiom already declared.
pub fn parse_kb(json: &str) -> Result<Vec<Axiom>> {
    let raw: Vec<AxiomJson> = serde_json::from_str(json)?;
    let mut declared = BTreeSet::new();
    let mut out = Vec::new();
    for (id, a) in raw.into_iter().enumerate() {
        let kind = match a {
            AxiomJson::Fact { fact } => {
                let p = Prop::parse(&fact)?;
                declared.insert(p.predicate.clone());
                AxiomKind::Fact(p)
            }
            AxiomJson::Implies { implies: (from, to) } => {
                if !declared.contains(&from) {
                    return Err(Error::Parse { line: id + 1, msg: format!("implication uses undeclared predicate {from}") });
                }
                declared.insert(to.clone());
                AxiomKind::Implies { from, to }
            }
        };
        out.push(Axiom { id, kind });
    }
    Ok(out)
}

pub fn fact(id: usize, p: &str, s: &str) -> Axiom {
    Axiom { id, kind: AxiomKind::Fact(Prop::new(p, s)) }
}

pub fn implies(id: usize, from: &str, to: &str) -> Axiom {
    Axiom { id, kind: AxiomKind::Implies { from: from.to_string(), to: to.to_string() } }
}

/// Plaintext forward chaining: every atom derivable by facts and modus ponens.
pub fn forward_chain(axioms: &[Axiom]) -> BTreeSet<Prop> {
    let mut known: BTreeSet<Prop> = axioms
        .iter()
        .filter_map(|a| match &a.kind {
            AxiomKind::Fact(p) => Some(p.clone()),
            _ => None,
        })
        .collect();
    loop {
        let mut added = false;
        for a in axioms {
            if let AxiomKind::Implies { from, to } = &a.kind {
                let new: Vec<Prop> = known
                    .iter()
                    .filter(|p| &p.predicate == from)
                    .map(|p| Prop::new(to, &p.subject))
                    .filter(|p| !known.contains(p))
                    .collect();
                added |= !new.is_empty();
                known.extend(new);
            }
        }
        if !added {
            return known;
        }
    }
}

fn ket_bra(dim: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(i, j)] = Complex64::new(1.0, 0.0);
    m
}

/// Collapses a proposition qubit to the canonical proof |1⟩⟨1|.
pub fn fact_kraus() -> Vec<CMatrix> {
    vec![ket_bra(2, 1, 0), ket_bra(2, 1, 1)]
}

/// Modus ponens on (premise, conclusion): a proved premise proves the
/// conclusion; otherwise nothing changes.
pub fn mp_kraus() -> Vec<CMatrix> {
    vec![ket_bra(4, 3, 2), ket_bra(4, 3, 3), ket_bra(4, 0, 0), ket_bra(4, 1, 1)]
}

/// Which register wire holds which proposition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropLayout {
    pub props: Vec<Prop>,
}

impl PropLayout {
    /// All predicates the axioms mention, for one subject, plus the extras.
    pub fn for_subject(axioms: &[Axiom], subject: &str, extra: &[&str]) -> Self {
        let mut preds = BTreeSet::new();
        for a in axioms {
            match &a.kind {
                AxiomKind::Fact(p) => {
                    preds.insert(p.predicate.clone());
                }
                AxiomKind::Implies { from, to } => {
                    preds.insert(from.clone());
                    preds.insert(to.clone());
                }
            }
        }
        preds.extend(extra.iter().map(|s| s.to_string()));
        Self { props: preds.into_iter().map(|p| Prop::new(&p, subject)).collect() }
    }

    pub fn wire(&self, p: &Prop) -> Option<usize> {
        self.props.iter().position(|q| q == p)
    }

    pub fn n_qubits(&self) -> usize {
        self.props.len()
    }

    /// Local wires an axiom acts on in this register, if any. A fact uses
    /// one wire; an implication uses (premise, conclusion).
    pub fn wires_of(&self, a: &Axiom) -> Option<Vec<usize>> {
        match &a.kind {
            AxiomKind::Fact(p) => self.wire(p).map(|w| vec![w]),
            AxiomKind::Implies { from, to } => {
                let subj = &self.props.first()?.subject;
                let f = self.wire(&Prop::new(from, subj))?;
                let t = self.wire(&Prop::new(to, subj))?;
                (f != t).then(|| vec![f, t])
            }
        }
    }
}

/// Ψ^KB: one channel per axiom, plus a depolarizing pad.
#[derive(Clone, Debug)]
pub struct KBMask {
    pub axioms: Vec<Axiom>,
    pub channels: Vec<Channel>,
    pub p_pad: f64,
    pub combined: bool,
}

impl KBMask {
    /// Diamond bound of the composite mask: every Φᵢ and the pad are CPTP.
    pub const DIAMOND_BOUND: f64 = 1.0;

    pub fn axiom_channel(a: &Axiom) -> Result<Channel> {
        match &a.kind {
            AxiomKind::Fact(_) => Channel::cptp(&a.to_string(), fact_kraus()),
            AxiomKind::Implies { .. } => Channel::cptp(&a.to_string(), mp_kraus()),
        }
    }

    /// Facts first, then the chaining passes; enough passes to close any
    /// implication chain in the register.
    pub fn apply(&self, rho: &DensityMatrix, layout: &PropLayout) -> Result<DensityMatrix> {
        let n = layout.n_qubits();
        if rho.n_qubits() != n {
            return Err(Error::Shape(format!("mask register has {n} wires, state {}", rho.n_qubits())));
        }
        let mut out = rho.clone();
        let facts = self.axioms.iter().zip(&self.channels).filter(|(a, _)| matches!(a.kind, AxiomKind::Fact(_)));
        for (a, ch) in facts {
            out = apply_local(ch, &out, layout.wires_of(a), n)?;
        }
        for _ in 0..n.max(1) {
            let rules = self.axioms.iter().zip(&self.channels).filter(|(a, _)| matches!(a.kind, AxiomKind::Implies { .. }));
            for (a, ch) in rules {
                out = apply_local(ch, &out, layout.wires_of(a), n)?;
            }
        }
        depolarize(self.p_pad, &out)
    }
}

fn apply_local(ch: &Channel, rho: &DensityMatrix, wires: Option<Vec<usize>>, n: usize) -> Result<DensityMatrix> {
    let Some(w) = wires else { return Ok(rho.clone()) };
    let kraus = ch.kraus.iter().map(|k| embed(k, &w, n)).collect::<Result<Vec<_>>>()?;
    apply_channel(&Channel::from_kraus(&ch.label, kraus)?, rho)
}

/// Direct-sum mask. `p_pad` = 1 leaves proved atoms exactly at |1⟩⟨1|.
pub fn kb_mask(axioms: &[Axiom], p_pad: f64) -> Result<KBMask> {
    let channels = axioms.iter().map(KBMask::axiom_channel).collect::<Result<Vec<_>>>()?;
    Ok(KBMask { axioms: axioms.to_vec(), channels, p_pad, combined: false })
}
