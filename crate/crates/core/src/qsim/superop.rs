use std::fmt;

use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};

use super::density::{check_dim, CMatrix, DensityMatrix};
use crate::error::{Error, Result};

pub type GaussInt = Complex<i64>;

/// Largest denominator exponent tried when looking for an exact dyadic form.
const MAX_EXACT_T: u32 = 8;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// X, Y, Z.
pub fn pauli_matrices() -> [CMatrix; 3] {
    [
        CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
        CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]),
        CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GateLabel {
    H,
    S,
    X,
    Y,
    Z,
    Cnot,
    Cz,
    Rz(f64),
    Custom(String),
}

impl fmt::Display for GateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateLabel::H => write!(f, "H"),
            GateLabel::S => write!(f, "S"),
            GateLabel::X => write!(f, "X"),
            GateLabel::Y => write!(f, "Y"),
            GateLabel::Z => write!(f, "Z"),
            GateLabel::Cnot => write!(f, "CNOT"),
            GateLabel::Cz => write!(f, "CZ"),
            GateLabel::Rz(phi) => write!(f, "RZ({phi})"),
            GateLabel::Custom(s) => write!(f, "{s}"),
        }
    }
}

impl GateLabel {
    pub fn parse(name: &str, angle: Option<f64>) -> Result<Self> {
        Ok(match (name.to_ascii_uppercase().as_str(), angle) {
            ("H", None) => GateLabel::H,
            ("S", None) => GateLabel::S,
            ("X", None) => GateLabel::X,
            ("Y", None) => GateLabel::Y,
            ("Z", None) => GateLabel::Z,
            ("CNOT" | "CX", None) => GateLabel::Cnot,
            ("CZ", None) => GateLabel::Cz,
            ("RZ", Some(phi)) => GateLabel::Rz(phi),
            _ => return Err(Error::Unsupported(format!("gate {name}"))),
        })
    }

    pub fn arity(&self) -> Option<usize> {
        match self {
            GateLabel::Cnot | GateLabel::Cz => Some(2),
            GateLabel::Custom(_) => None,
            _ => Some(1),
        }
    }

    /// Local unitary on the gate's own wires (first wire most significant).
    pub fn unitary(&self) -> Option<CMatrix> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let [x, y, z] = pauli_matrices();
        Some(match self {
            GateLabel::H => CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]),
            GateLabel::S => CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)]),
            GateLabel::X => x,
            GateLabel::Y => y,
            GateLabel::Z => z,
            GateLabel::Cnot => {
                let mut u = CMatrix::zeros(4, 4);
                for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
                    u[(i, j)] = c(1.0, 0.0);
                }
                u
            }
            GateLabel::Cz => {
                CMatrix::from_diagonal(&nalgebra::dvector![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)])
            }
            GateLabel::Rz(phi) => CMatrix::from_diagonal(&nalgebra::dvector![
                Complex64::from_polar(1.0, -phi / 2.0),
                Complex64::from_polar(1.0, phi / 2.0)
            ]),
            GateLabel::Custom(_) => return None,
        })
    }

    /// ∥τ_g∥max as tabulated for the teleportation gates: one unit per wire
    /// touched.
    pub fn table_tau(&self) -> Option<u32> {
        self.arity().map(|a| a as u32)
    }
}

/// Lifts a local operator on `wires` to the full n-qubit register.
pub fn embed(local: &CMatrix, wires: &[usize], n_qubits: usize) -> Result<CMatrix> {
    let a = wires.len();
    if local.nrows() != 1 << a || local.ncols() != 1 << a {
        return Err(Error::Shape(format!("local operator is not 2^{a} square")));
    }
    check_wires(wires, n_qubits)?;
    let dim = 1usize << n_qubits;
    check_dim(dim)?;
    let lay = WireLayout::new(wires, n_qubits);
    let mut out = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            if lay.rest(i) == lay.rest(j) {
                out[(i, j)] = local[(lay.local(i), lay.local(j))];
            }
        }
    }
    Ok(out)
}

fn check_wires(wires: &[usize], n_qubits: usize) -> Result<()> {
    for (k, &w) in wires.iter().enumerate() {
        if w >= n_qubits || wires[..k].contains(&w) {
            return Err(Error::Shape(format!("bad wire list {wires:?} for {n_qubits} qubits")));
        }
    }
    Ok(())
}

/// Bit bookkeeping between full-register and local indices.
#[derive(Clone, Debug)]
pub(crate) struct WireLayout {
    shifts: Vec<usize>,
    mask: usize,
}

impl WireLayout {
    pub(crate) fn new(wires: &[usize], n_qubits: usize) -> Self {
        let shifts: Vec<usize> = wires.iter().map(|&w| n_qubits - 1 - w).collect();
        let mask = shifts.iter().fold(0, |m, s| m | (1 << s));
        Self { shifts, mask }
    }

    pub(crate) fn local(&self, idx: usize) -> usize {
        self.shifts.iter().fold(0, |acc, s| (acc << 1) | ((idx >> s) & 1))
    }

    pub(crate) fn rest(&self, idx: usize) -> usize {
        idx & !self.mask
    }

    pub(crate) fn place(&self, local: usize) -> usize {
        let a = self.shifts.len();
        self.shifts.iter().enumerate().fold(0, |acc, (m, s)| acc | (((local >> (a - 1 - m)) & 1) << s))
    }
}

/// A gate or channel as a linear map on row-major vec(ρ): vec(ρ') = (N/2^t)·vec(ρ),
/// with N a matrix of Gaussian integers. Stored on the gate's own wires.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSuperop {
    pub label: GateLabel,
    pub wires: Vec<usize>,
    pub n_qubits: usize,
    /// (4^a)×(4^a) numerators, row-major.
    pub numerators: Vec<GaussInt>,
    pub denom_log2: u32,
    pub tau_max: u32,
    /// False when the entries were rounded to the fixed-point grid.
    pub exact: bool,
}

/// Σ_K K ⊗ conj(K), the row-major superoperator of a Kraus list.
pub fn local_superop(kraus: &[CMatrix]) -> CMatrix {
    let d = kraus[0].nrows();
    let din = kraus[0].ncols();
    let mut s = CMatrix::zeros(d * d, din * din);
    for k in kraus {
        s += k.kronecker(&k.map(|z| z.conj()));
    }
    s
}

fn dyadic(s: &CMatrix, frac_bits: u32) -> (Vec<GaussInt>, u32, bool) {
    let round = |t: u32| -> (Vec<GaussInt>, f64) {
        let f = (t as f64).exp2();
        let mut err = 0.0f64;
        let (r, cdim) = s.shape();
        let mut out = Vec::with_capacity(r * cdim);
        for i in 0..r {
            for j in 0..cdim {
                let z = s[(i, j)] * f;
                let n = GaussInt::new(z.re.round() as i64, z.im.round() as i64);
                err = err.max((z.re - n.re as f64).abs()).max((z.im - n.im as f64).abs());
                out.push(n);
            }
        }
        (out, err)
    };
    for t in 0..=MAX_EXACT_T.min(frac_bits) {
        let (n, err) = round(t);
        if err < 1e-9 {
            return (n, t, true);
        }
    }
    let (n, _) = round(frac_bits);
    (n, frac_bits, false)
}

impl GateSuperop {
    /// Superoperator of a named gate; Rz is rounded to `frac_bits` bits.
    pub fn gate(label: GateLabel, wires: &[usize], n_qubits: usize, frac_bits: u32) -> Result<Self> {
        let arity = label.arity().ok_or_else(|| Error::Unsupported("custom gates need an explicit matrix".into()))?;
        if wires.len() != arity {
            return Err(Error::Shape(format!("{label} acts on {arity} wires, got {}", wires.len())));
        }
        let u = label.unitary().expect("named gates have a matrix");
        let tau = label.table_tau().expect("named gates are tabulated");
        Self::from_kraus(label, &[u], wires, n_qubits, frac_bits, Some(tau))
    }

    /// From local Kraus operators. `tau` overrides the default bookkeeping
    /// weight arity·max(1, ⌈max |entry|⌉).
    pub fn from_kraus(
        label: GateLabel,
        kraus: &[CMatrix],
        wires: &[usize],
        n_qubits: usize,
        frac_bits: u32,
        tau: Option<u32>,
    ) -> Result<Self> {
        check_wires(wires, n_qubits)?;
        check_dim(1 << n_qubits)?;
        let da = 1usize << wires.len();
        if kraus.is_empty() || kraus.iter().any(|k| k.shape() != (da, da)) {
            return Err(Error::Shape(format!("Kraus operators must be {da}x{da}")));
        }
        let s = local_superop(kraus);
        let (numerators, denom_log2, exact) = dyadic(&s, frac_bits);
        let max_entry = s.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
        let tau_max = tau.unwrap_or(wires.len() as u32 * (max_entry.ceil() as u32).max(1));
        Ok(Self { label, wires: wires.to_vec(), n_qubits, numerators, denom_log2, tau_max, exact })
    }

    pub fn arity(&self) -> usize {
        self.wires.len()
    }

    fn local_dim2(&self) -> usize {
        1 << (2 * self.wires.len())
    }

    pub fn numerator(&self, row: usize, col: usize) -> GaussInt {
        self.numerators[row * self.local_dim2() + col]
    }

    /// Largest |Re| or |Im| over the numerators.
    pub fn max_numerator(&self) -> i64 {
        self.numerators.iter().map(|z| z.re.abs().max(z.im.abs())).max().unwrap_or(0)
    }

    /// Largest Σ (|Re| + |Im|) over a row of numerators: the worst-case
    /// multiplier on a single entry's noise.
    pub fn row_weight(&self) -> u64 {
        let n = self.local_dim2();
        (0..n)
            .map(|r| self.numerators[r * n..(r + 1) * n].iter().map(|z| z.re.unsigned_abs() + z.im.unsigned_abs()).sum())
            .max()
            .unwrap_or(0)
    }

    /// Full-register sparse rows: for each output index of vec(ρ'), the
    /// input indices and numerators that feed it.
    pub fn sparse_rows(&self) -> Vec<Vec<(usize, GaussInt)>> {
        let dim = 1usize << self.n_qubits;
        let da = 1usize << self.wires.len();
        let lay = WireLayout::new(&self.wires, self.n_qubits);
        let mut rows = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let lr = lay.local(i) * da + lay.local(j);
                let (ri, rj) = (lay.rest(i), lay.rest(j));
                let mut row = Vec::new();
                for lk in 0..da {
                    for ll in 0..da {
                        let n = self.numerator(lr, lk * da + ll);
                        if n != GaussInt::new(0, 0) {
                            let k = ri | lay.place(lk);
                            let l = rj | lay.place(ll);
                            row.push((k * dim + l, n));
                        }
                    }
                }
                rows.push(row);
            }
        }
        rows
    }

    /// Plaintext action with the quantized coefficients.
    pub fn apply_plain(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n_qubits() != self.n_qubits {
            return Err(Error::Shape(format!("gate on {} qubits, state has {}", self.n_qubits, rho.n_qubits())));
        }
        let v: Vec<Complex64> = rho.row_major().collect();
        let scale = (-(self.denom_log2 as f64)).exp2();
        let out: Vec<Complex64> = self
            .sparse_rows()
            .iter()
            .map(|row| row.iter().map(|&(k, n)| c(n.re as f64, n.im as f64) * v[k]).sum::<Complex64>() * scale)
            .collect();
        DensityMatrix::from_row_major(rho.dim(), &out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::density::trace_distance;
    use crate::rng::SeededGenerator;

    const F: u32 = 20;

    fn dense_check(label: GateLabel, wires: &[usize], n: usize, tol: f64) {
        let mut rng = SeededGenerator::from_u64(11);
        let g = GateSuperop::gate(label.clone(), wires, n, F).unwrap();
        let u = embed(&label.unitary().unwrap(), wires, n).unwrap();
        for _ in 0..5 {
            let rho = DensityMatrix::random(n, &mut rng).unwrap();
            let want = rho.conjugate(&u).unwrap();
            let got = g.apply_plain(&rho).unwrap();
            let err = (got.matrix() - want.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err <= tol, "{label}: {err:e}");
        }
    }

    #[test]
    fn cliffords_are_exact() {
        for label in [GateLabel::H, GateLabel::S, GateLabel::X, GateLabel::Y, GateLabel::Z] {
            for w in 0..3 {
                dense_check(label.clone(), &[w], 3, 1e-14);
            }
            assert!(GateSuperop::gate(label, &[0], 1, F).unwrap().exact);
        }
        for wires in [[0, 1], [1, 0], [0, 2], [2, 1]] {
            dense_check(GateLabel::Cnot, &wires, 3, 1e-14);
            dense_check(GateLabel::Cz, &wires, 3, 1e-14);
        }
    }

    #[test]
    fn rz_within_grid() {
        let tol = (-(F as f64) + 3.0).exp2();
        for phi in [0.1, std::f64::consts::FRAC_PI_4, 2.5, -1.3] {
            dense_check(GateLabel::Rz(phi), &[1], 2, tol);
            let g = GateSuperop::gate(GateLabel::Rz(phi), &[0], 1, F).unwrap();
            assert_eq!(g.denom_log2, F);
            assert!(!g.exact);
        }
    }

    #[test]
    fn table_values() {
        let h = GateSuperop::gate(GateLabel::H, &[0], 1, F).unwrap();
        assert_eq!(h.denom_log2, 1);
        assert_eq!(h.max_numerator(), 1);
        assert_eq!(GateSuperop::gate(GateLabel::Cnot, &[0, 1], 2, F).unwrap().tau_max, 2);
        let x = GateSuperop::gate(GateLabel::X, &[0], 1, F).unwrap();
        assert_eq!(x.denom_log2, 0);
        for r in 0..4 {
            assert_eq!((0..4).filter(|&c| x.numerator(r, c) != GaussInt::new(0, 0)).count(), 1);
        }
    }

    #[test]
    fn h_twice_is_identity() {
        let mut rng = SeededGenerator::from_u64(12);
        let h = GateSuperop::gate(GateLabel::H, &[0], 1, F).unwrap();
        let rho = DensityMatrix::random(1, &mut rng).unwrap();
        let back = h.apply_plain(&h.apply_plain(&rho).unwrap()).unwrap();
        assert!(trace_distance(&back, &rho).unwrap() < 1e-14);
    }

    #[test]
    fn wire_layout_roundtrip() {
        let lay = WireLayout::new(&[2, 0], 3);
        for local in 0..4 {
            assert_eq!(lay.local(lay.place(local)), local);
        }
        assert!(GateSuperop::gate(GateLabel::Cnot, &[1, 1], 2, F).is_err());
        assert!(GateSuperop::gate(GateLabel::H, &[0, 1], 2, F).is_err());
    }
}
