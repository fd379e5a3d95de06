use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SeededGenerator;

/// Largest dense dimension the simulator accepts (6 qubits).
pub const MAX_DIM: usize = 64;

pub type CMatrix = DMatrix<Complex64>;

/// A density matrix on n qubits. Wire 0 is the most significant bit of the
/// basis index.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    m: CMatrix,
}

pub(crate) fn check_dim(dim: usize) -> Result<usize> {
    if dim > MAX_DIM {
        return Err(Error::DimensionGuard(dim));
    }
    if !dim.is_power_of_two() {
        return Err(Error::Shape(format!("dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// (M + M†)/2, clearing the rounding asymmetry left by products.
pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

impl DensityMatrix {
    /// Validates Hermiticity, trace in (0, 1] and eigenvalues ≥ −1e-6.
    pub fn new(m: CMatrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(m)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Shape check only. Used for unnormalized branches and for decrypted
    /// matrices that still have to be inspected.
    pub fn from_matrix_unchecked(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        let n_qubits = check_dim(m.nrows())?;
        Ok(Self { n_qubits, m })
    }

    pub fn validate(&self) -> Result<()> {
        let herm_err = (&self.m - self.m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > 1e-9 {
            return Err(Error::Shape(format!("not Hermitian (deviation {herm_err:e})")));
        }
        let tr = self.trace();
        if !(tr > 0.0 && tr <= 1.0 + 1e-9) {
            return Err(Error::Shape(format!("trace {tr} outside (0, 1]")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-6 {
            return Err(Error::Shape(format!("eigenvalue {min} below -1e-6")));
        }
        Ok(())
    }

    pub fn from_pure(amps: &[Complex64]) -> Result<Self> {
        let dim = amps.len();
        check_dim(dim)?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Shape("zero vector".into()));
        }
        let v = nalgebra::DVector::from_iterator(dim, amps.iter().map(|a| a / norm));
        Self::from_matrix_unchecked(&v * v.adjoint())
    }

    /// |idx⟩⟨idx| on n qubits.
    pub fn basis(n_qubits: usize, idx: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        check_dim(dim)?;
        if idx >= dim {
            return Err(Error::Shape(format!("basis index {idx} >= {dim}")));
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(idx, idx)] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, m })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        check_dim(dim)?;
        Ok(Self { n_qubits, m: CMatrix::identity(dim, dim).scale(1.0 / dim as f64) })
    }

    /// A random full-rank state G·G†/Tr from a complex Ginibre matrix.
    pub fn random(n_qubits: usize, rng: &mut SeededGenerator) -> Result<Self> {
        let dim = 1usize << n_qubits;
        check_dim(dim)?;
        let g = random_ginibre(dim, rng);
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        Ok(Self { n_qubits, m: hermitize(&m.scale(1.0 / tr)) })
    }

    pub fn random_pure(n_qubits: usize, rng: &mut SeededGenerator) -> Result<Self> {
        let dim = 1usize << n_qubits;
        check_dim(dim)?;
        let amps: Vec<Complex64> = (0..dim).map(|_| gaussian_c(rng)).collect();
        Self::from_pure(&amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn is_normalized(&self) -> bool {
        (self.trace() - 1.0).abs() <= 1e-9
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitize(&self.m).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// ρ / Tr ρ.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(Error::Shape(format!("cannot normalize trace {tr}")));
        }
        Ok(Self { n_qubits: self.n_qubits, m: self.m.scale(1.0 / tr) })
    }

    /// U ρ U†.
    pub fn conjugate(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::Shape("unitary dimension mismatch".into()));
        }
        Ok(Self { n_qubits: self.n_qubits, m: hermitize(&(u * &self.m * u.adjoint())) })
    }

    /// ρ ⊗ σ; `self` occupies the leading wires.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let m = self.m.kronecker(&other.m);
        Self::from_matrix_unchecked(m)
    }

    /// Traces out the given wires.
    pub fn partial_trace(&self, wires: &[usize]) -> Result<Self> {
        let n = self.n_qubits;
        if wires.iter().any(|&w| w >= n) {
            return Err(Error::Shape("wire out of range".into()));
        }
        let keep: Vec<usize> = (0..n).filter(|w| !wires.contains(w)).collect();
        let out_dim = 1usize << keep.len();
        let mut out = CMatrix::zeros(out_dim, out_dim);
        let bit = |idx: usize, w: usize| (idx >> (n - 1 - w)) & 1;
        let project = |idx: usize| keep.iter().fold(0usize, |acc, &w| (acc << 1) | bit(idx, w));
        let traced = |idx: usize| wires.iter().fold(0usize, |acc, &w| (acc << 1) | bit(idx, w));
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if traced(i) == traced(j) {
                    out[(project(i), project(j))] += self.m[(i, j)];
                }
            }
        }
        Self::from_matrix_unchecked(out)
    }

    /// Row-major list of [re, im] pairs.
    pub fn to_json(&self) -> String {
        let flat: Vec<[f64; 2]> = self.row_major().map(|z| [z.re, z.im]).collect();
        serde_json::to_string(&flat).expect("plain floats serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let flat: Vec<[f64; 2]> = serde_json::from_str(s)?;
        let dim = (flat.len() as f64).sqrt().round() as usize;
        if dim * dim != flat.len() {
            return Err(Error::Shape(format!("{} entries is not a square", flat.len())));
        }
        check_dim(dim)?;
        let m = CMatrix::from_row_iterator(dim, dim, flat.iter().map(|[re, im]| Complex64::new(*re, *im)));
        Self::new(m)
    }

    /// Entries in row-major order, the vectorization used by superoperators.
    pub fn row_major(&self) -> impl Iterator<Item = Complex64> + '_ {
        let d = self.dim();
        (0..d * d).map(move |k| self.m[(k / d, k % d)])
    }

    pub fn from_row_major(dim: usize, v: &[Complex64]) -> Result<Self> {
        if v.len() != dim * dim {
            return Err(Error::Shape("vectorized length mismatch".into()));
        }
        Self::from_matrix_unchecked(CMatrix::from_row_slice(dim, dim, v))
    }
}

pub(crate) fn gaussian_c(rng: &mut SeededGenerator) -> Complex64 {
    // Box-Muller; one complex normal per call.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    Complex64::new(r * t.cos(), r * t.sin()) / std::f64::consts::SQRT_2
}

pub(crate) fn random_ginibre(dim: usize, rng: &mut SeededGenerator) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| gaussian_c(rng))
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of R's
/// diagonal folded back into Q.
pub fn random_unitary(dim: usize, rng: &mut SeededGenerator) -> CMatrix {
    let qr = random_ginibre(dim, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..dim {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..dim {
            u[(i, j)] *= ph;
        }
    }
    u
}

/// ½∥ρ − σ∥₁ from the eigenvalues of the (Hermitian) difference.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Shape("dimension mismatch".into()));
    }
    let diff = hermitize(&(rho.matrix() - sigma.matrix()));
    Ok(0.5 * diff.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_distance_basics() {
        let z0 = DensityMatrix::basis(1, 0).unwrap();
        let z1 = DensityMatrix::basis(1, 1).unwrap();
        assert!(trace_distance(&z0, &z0).unwrap().abs() < 1e-12);
        assert!((trace_distance(&z0, &z1).unwrap() - 1.0).abs() < 1e-12);
        let mut rng = SeededGenerator::from_u64(4);
        let a = DensityMatrix::random(2, &mut rng).unwrap();
        let b = DensityMatrix::random(2, &mut rng).unwrap();
        assert!((trace_distance(&a, &b).unwrap() - trace_distance(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = SeededGenerator::from_u64(5);
        for n in 1..=3 {
            DensityMatrix::random(n, &mut rng).unwrap().validate().unwrap();
            DensityMatrix::random_pure(n, &mut rng).unwrap().validate().unwrap();
        }
        let u = random_unitary(4, &mut rng);
        assert!((&u * u.adjoint() - CMatrix::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn dimension_guard() {
        assert!(matches!(DensityMatrix::basis(7, 0), Err(Error::DimensionGuard(128))));
        assert!(DensityMatrix::basis(6, 0).is_ok());
    }

    #[test]
    fn json_roundtrip() {
        let mut rng = SeededGenerator::from_u64(6);
        let rho = DensityMatrix::random(2, &mut rng).unwrap();
        let back = DensityMatrix::from_json(&rho.to_json()).unwrap();
        assert!(trace_distance(&rho, &back).unwrap() < 1e-15);
        assert!(DensityMatrix::from_json("[[1,0],[0,0],[0,0]]").is_err());
    }

    #[test]
    fn partial_trace_of_product() {
        let a = DensityMatrix::basis(1, 1).unwrap();
        let b = DensityMatrix::maximally_mixed(1).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert!(trace_distance(&ab.partial_trace(&[1]).unwrap(), &a).unwrap() < 1e-12);
        assert!(trace_distance(&ab.partial_trace(&[0]).unwrap(), &b).unwrap() < 1e-12);
    }
}
