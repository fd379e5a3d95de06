use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::density::{check_dim, hermitize, random_unitary, CMatrix, DensityMatrix};
use crate::error::{Error, Result};
use crate::rng::SeededGenerator;

const TP_TOL: f64 = 1e-9;

/// How Σ Kᵢ†Kᵢ compares with the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Σ Kᵢ†Kᵢ = I.
    TracePreserving,
    /// Σ Kᵢ†Kᵢ ≼ I, strictly somewhere.
    SubNormalized,
    /// Σ Kᵢ†Kᵢ has an eigenvalue above 1: the operators can increase trace.
    Excess,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub kraus: Vec<CMatrix>,
    pub label: String,
    pub normalization: Normalization,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl Channel {
    /// Accepts any Kraus list with consistent shapes and records its
    /// normalization class.
    pub fn from_kraus(label: &str, kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::Shape("empty Kraus list".into()))?;
        let (dout, din) = first.shape();
        if kraus.iter().any(|k| k.shape() != (dout, din)) {
            return Err(Error::Shape("Kraus operators differ in shape".into()));
        }
        check_dim(dout)?;
        check_dim(din)?;
        let normalization = classify(&completeness(&kraus));
        Ok(Self { kraus, label: label.to_string(), normalization })
    }

    /// A CPTP channel; rejects anything that is not trace preserving.
    pub fn cptp(label: &str, kraus: Vec<CMatrix>) -> Result<Self> {
        let ch = Self::from_kraus(label, kraus)?;
        if ch.normalization != Normalization::TracePreserving {
            return Err(Error::Shape(format!("{label} is not trace preserving")));
        }
        Ok(ch)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::cptp("I", vec![CMatrix::identity(dim, dim)])
    }

    pub fn unitary(label: &str, u: CMatrix) -> Result<Self> {
        Self::cptp(label, vec![u])
    }

    /// Projective computational-basis measurement of every wire.
    pub fn z_measurement(n_qubits: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        let kraus = (0..dim)
            .map(|i| {
                let mut k = CMatrix::zeros(dim, dim);
                k[(i, i)] = c(1.0);
                k
            })
            .collect();
        Self::cptp("MEAS_Z", kraus)
    }

    /// A random CPTP map with `n_kraus` operators from a Haar isometry.
    pub fn random(dim: usize, n_kraus: usize, rng: &mut SeededGenerator) -> Result<Self> {
        let big = random_unitary(dim * n_kraus, rng);
        let kraus = (0..n_kraus).map(|i| big.view((i * dim, 0), (dim, dim)).into_owned()).collect();
        Self::cptp("random", kraus)
    }

    pub fn dim_in(&self) -> usize {
        self.kraus[0].ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.kraus[0].nrows()
    }

    /// Kᵢ ρ Kᵢ† for one branch.
    pub fn branch(&self, i: usize, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let k = self.kraus.get(i).ok_or_else(|| Error::Shape(format!("no branch {i}")))?;
        if k.ncols() != rho.dim() {
            return Err(Error::Shape("channel input dimension mismatch".into()));
        }
        DensityMatrix::from_matrix_unchecked(hermitize(&(k * rho.matrix() * k.adjoint())))
    }
}

pub fn completeness(kraus: &[CMatrix]) -> CMatrix {
    let din = kraus[0].ncols();
    kraus.iter().fold(CMatrix::zeros(din, din), |acc, k| acc + k.adjoint() * k)
}

fn classify(sum: &CMatrix) -> Normalization {
    let dim = sum.nrows();
    if (sum - CMatrix::identity(dim, dim)).iter().all(|z| z.norm() <= TP_TOL) {
        return Normalization::TracePreserving;
    }
    let top = hermitize(sum).symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top <= 1.0 + TP_TOL {
        Normalization::SubNormalized
    } else {
        Normalization::Excess
    }
}

/// Σ Kᵢ ρ Kᵢ†.
pub fn apply_channel(ch: &Channel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if ch.dim_in() != rho.dim() {
        return Err(Error::Shape(format!("channel expects dim {}, state has {}", ch.dim_in(), rho.dim())));
    }
    let dout = ch.dim_out();
    let mut acc = CMatrix::zeros(dout, dout);
    for k in &ch.kraus {
        acc += k * rho.matrix() * k.adjoint();
    }
    DensityMatrix::from_matrix_unchecked(hermitize(&acc))
}

/// pρ + (1−p)·Tr(ρ)·I/dim. The trace factor keeps the map linear on
/// unnormalized branches; on states it is the usual formula.
pub fn depolarize(p: f64, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParams(format!("depolarizing p = {p} outside [0, 1]")));
    }
    let dim = rho.dim();
    let pad = CMatrix::identity(dim, dim).scale((1.0 - p) * rho.trace() / dim as f64);
    DensityMatrix::from_matrix_unchecked(rho.matrix().scale(p) + pad)
}

/// The weak-measurement pair K₀ = diag(√θ, 1), K₁ = diag(0, √(1−θ)) exactly as
/// printed. Σ Kᵢ†Kᵢ = diag(θ, 2−θ), so the result is flagged `Excess`.
pub fn weak_kraus(theta: f64) -> Result<Channel> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParams(format!("weak strength θ = {theta} outside (0, 1)")));
    }
    let k0 = DMatrix::from_diagonal(&nalgebra::dvector![c(theta.sqrt()), c(1.0)]);
    let k1 = DMatrix::from_diagonal(&nalgebra::dvector![c(0.0), c((1.0 - theta).sqrt())]);
    Channel::from_kraus(&format!("weak({theta})"), vec![k0, k1])
}

/// Samples branch i with probability Tr(KᵢρKᵢ†)/Σⱼ Tr(KⱼρKⱼ†); returns the
/// unnormalized branch.
pub fn born_sample(instrument: &Channel, rho: &DensityMatrix, rng: &mut SeededGenerator) -> Result<(usize, DensityMatrix)> {
    if instrument.kraus.len() < 2 {
        return Err(Error::Shape("an instrument needs at least two branches".into()));
    }
    let branches = (0..instrument.kraus.len()).map(|i| instrument.branch(i, rho)).collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = branches.iter().map(|b| b.trace().max(0.0)).collect();
    let i = sample_index(&weights, rng)?;
    Ok((i, branches.into_iter().nth(i).expect("index in range")))
}

/// Index drawn proportionally to non-negative weights.
pub fn sample_index(weights: &[f64], rng: &mut SeededGenerator) -> Result<usize> {
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::Shape("all branch weights are zero".into()));
    }
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w.max(0.0);
        if u < 0.0 {
            return Ok(i);
        }
    }
    Ok(weights.iter().rposition(|w| *w > 0.0).expect("some weight positive"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskSpec {
    /// Ψ(ρ) = pρ + (1−p)I/dim.
    Depolarizing { p: f64 },
    /// Independent amplitude damping of rate γ on every qubit.
    AmplitudeDamping { gamma: f64 },
    /// Each qubit keeps ρ with probability p, otherwise a uniform X/Y/Z.
    PauliTwirl { p: f64 },
}

impl MaskSpec {
    pub fn depolarizing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParams(format!("depolarizing p = {p} outside [0, 1]")));
        }
        Ok(MaskSpec::Depolarizing { p })
    }

    /// Analytic contraction bound λ of the family (no SDP is solved). For the
    /// per-qubit families this is the single-qubit Bloch contraction.
    pub fn diamond_bound(&self) -> f64 {
        match *self {
            MaskSpec::Depolarizing { p } => p,
            MaskSpec::AmplitudeDamping { gamma } => (1.0 - gamma).sqrt(),
            MaskSpec::PauliTwirl { p } => (4.0 * p - 1.0).abs() / 3.0,
        }
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        match *self {
            MaskSpec::Depolarizing { p } => depolarize(p, rho),
            MaskSpec::AmplitudeDamping { gamma } => per_qubit(rho, &amplitude_damping_kraus(gamma)),
            MaskSpec::PauliTwirl { p } => {
                let paulis = super::superop::pauli_matrices();
                let mut k = vec![CMatrix::identity(2, 2).scale(p.sqrt())];
                k.extend(paulis.into_iter().map(|m| m * c(((1.0 - p) / 3.0).sqrt())));
                per_qubit(rho, &k)
            }
        }
    }

    /// Sequential composition; depolarizing masks compose to parameter products.
    pub fn compose(&self, other: &Self) -> Option<Self> {
        match (self, other) {
            (MaskSpec::Depolarizing { p }, MaskSpec::Depolarizing { p: r }) => Some(MaskSpec::Depolarizing { p: p * r }),
            _ => None,
        }
    }

    /// Convex combination w·self + (1−w)·other.
    pub fn mix(&self, other: &Self, w: f64) -> Option<Self> {
        match (self, other) {
            (MaskSpec::Depolarizing { p }, MaskSpec::Depolarizing { p: r }) => {
                Some(MaskSpec::Depolarizing { p: w * p + (1.0 - w) * r })
            }
            _ => None,
        }
    }

    pub fn depolarizing_p(&self) -> Option<f64> {
        match *self {
            MaskSpec::Depolarizing { p } => Some(p),
            _ => None,
        }
    }
}

fn amplitude_damping_kraus(gamma: f64) -> Vec<CMatrix> {
    vec![
        CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c((1.0 - gamma).sqrt())]),
        CMatrix::from_row_slice(2, 2, &[c(0.0), c(gamma.sqrt()), c(0.0), c(0.0)]),
    ]
}

fn per_qubit(rho: &DensityMatrix, local: &[CMatrix]) -> Result<DensityMatrix> {
    let n = rho.n_qubits();
    let mut out = rho.clone();
    for w in 0..n {
        let kraus = local.iter().map(|k| super::superop::embed(k, &[w], n)).collect::<Result<Vec<_>>>()?;
        out = apply_channel(&Channel::from_kraus("local", kraus)?, &out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::density::trace_distance;

    #[test]
    fn depolarize_examples() {
        let z0 = DensityMatrix::basis(1, 0).unwrap();
        let out = depolarize(0.75, &z0).unwrap();
        assert!((out.matrix()[(0, 0)].re - 0.875).abs() < 1e-15);
        assert!((out.matrix()[(1, 1)].re - 0.125).abs() < 1e-15);
        assert!(trace_distance(&depolarize(1.0, &z0).unwrap(), &z0).unwrap() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(trace_distance(&depolarize(0.0, &z0).unwrap(), &mixed).unwrap() < 1e-15);
        assert!(depolarize(1.5, &z0).is_err());
    }

    #[test]
    fn weak_pair_is_verbatim_and_flagged() {
        let ch = weak_kraus(0.1).unwrap();
        assert_eq!(ch.normalization, Normalization::Excess);
        let sum = completeness(&ch.kraus);
        assert!((sum[(0, 0)].re - 0.1).abs() < 1e-12 && (sum[(1, 1)].re - 1.9).abs() < 1e-12);
        let half = DensityMatrix::maximally_mixed(1).unwrap();
        assert!((ch.branch(1, &half).unwrap().trace() - 0.45).abs() < 1e-12);
        // θ → 1: K₀ acts as the identity on the |0⟩ component.
        let near = weak_kraus(1.0 - 1e-12).unwrap();
        assert!((near.kraus[0][(0, 0)].re - 1.0).abs() < 1e-6);
        assert!(weak_kraus(0.0).is_err() && weak_kraus(1.0).is_err());
    }

    #[test]
    fn apply_channel_examples() {
        let mut rng = SeededGenerator::from_u64(8);
        let rho = DensityMatrix::random(2, &mut rng).unwrap();
        let id = Channel::identity(4).unwrap();
        assert!(trace_distance(&apply_channel(&id, &rho).unwrap(), &rho).unwrap() < 1e-14);
        let x = Channel::unitary("X", super::super::superop::pauli_matrices()[0].clone()).unwrap();
        let out = apply_channel(&x, &DensityMatrix::basis(1, 0).unwrap()).unwrap();
        assert!(trace_distance(&out, &DensityMatrix::basis(1, 1).unwrap()).unwrap() < 1e-15);
        let ch = Channel::random(4, 3, &mut rng).unwrap();
        assert!((apply_channel(&ch, &rho).unwrap().trace() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn born_sampling() {
        let mut rng = SeededGenerator::from_u64(9);
        let meas = Channel::z_measurement(1).unwrap();
        let z0 = DensityMatrix::basis(1, 0).unwrap();
        for _ in 0..100 {
            assert_eq!(born_sample(&meas, &z0, &mut rng).unwrap().0, 0);
        }
        let plus = DensityMatrix::from_pure(&[c(1.0), c(1.0)]).unwrap();
        let shots = 10_000;
        let ones = (0..shots).filter(|_| born_sample(&meas, &plus, &mut rng).unwrap().0 == 1).count();
        let sd = (shots as f64 * 0.25).sqrt();
        assert!((ones as f64 - 5000.0).abs() < 3.0 * sd, "{ones}");
        let (i, branch) = born_sample(&meas, &plus, &mut rng).unwrap();
        assert!((branch.trace() - 0.5).abs() < 1e-12 && i < 2);
        assert!(born_sample(&Channel::identity(2).unwrap(), &z0, &mut rng).is_err());
    }

    #[test]
    fn mask_families() {
        let mut rng = SeededGenerator::from_u64(10);
        let rho = DensityMatrix::random(2, &mut rng).unwrap();
        for m in [MaskSpec::AmplitudeDamping { gamma: 0.3 }, MaskSpec::PauliTwirl { p: 0.6 }] {
            let out = m.apply(&rho).unwrap();
            out.validate().unwrap();
            assert!((out.trace() - 1.0).abs() < 1e-9);
        }
        assert_eq!(MaskSpec::depolarizing(0.75).unwrap().diamond_bound(), 0.75);
    }
}
