//! Target and lab-state construction: named state families, Haar-random
//! states, density matrices, and the noise maps used by the simulated
//! experiment.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DfeError, Result};
use crate::pauli::PauliOp;
use crate::stabilizer::StabilizerTableau;

/// Hard memory guard for statevectors (2^n amplitudes).
pub const MAX_PURE_QUBITS: usize = 20;
/// Hard memory guard for density matrices (4^n entries).
pub const MAX_DENSITY_QUBITS: usize = 10;

const NORM_TOL: f64 = 1e-9;

/// A normalized pure state of n qubits.
#[derive(Debug, Clone)]
pub struct PureState {
    n: usize,
    amps: Vec<Complex64>,
}

impl PureState {
    pub fn new(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n == 0 || n > MAX_PURE_QUBITS {
            return Err(DfeError::QubitCountUnsupported {
                n,
                max: MAX_PURE_QUBITS,
            });
        }
        if amps.len() != 1 << n {
            return Err(DfeError::InvalidState(format!(
                "expected {} amplitudes, got {}",
                1 << n,
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(DfeError::InvalidState(format!(
                "state norm {norm} not within {NORM_TOL} of 1"
            )));
        }
        Ok(Self { n, amps })
    }

    pub fn basis_state(n: usize, index: usize) -> Result<Self> {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        if index >= amps.len() {
            return Err(DfeError::InvalidParameter(format!(
                "basis index {index} out of range"
            )));
        }
        amps[index] = Complex64::new(1.0, 0.0);
        Self::new(n, amps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn inner_product(&self, other: &Self) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// A density matrix: Hermitian, unit trace; PSD can be verified at small n
/// via [`DensityMatrix::check_positive`].
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    n: usize,
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(n: usize, mat: DMatrix<Complex64>) -> Result<Self> {
        if n == 0 || n > MAX_DENSITY_QUBITS {
            return Err(DfeError::QubitCountUnsupported {
                n,
                max: MAX_DENSITY_QUBITS,
            });
        }
        let d = 1usize << n;
        if mat.nrows() != d || mat.ncols() != d {
            return Err(DfeError::InvalidState(format!(
                "expected {d}x{d} matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let herm_defect = (&mat - mat.adjoint()).norm();
        if herm_defect > NORM_TOL {
            return Err(DfeError::InvalidState(format!(
                "not Hermitian (defect {herm_defect:.2e})"
            )));
        }
        let trace = mat.trace();
        if (trace.re - 1.0).abs() > NORM_TOL || trace.im.abs() > NORM_TOL {
            return Err(DfeError::InvalidState(format!("trace {trace} is not 1")));
        }
        Ok(Self { n, mat })
    }

    pub fn from_pure(psi: &PureState) -> Result<Self> {
        let d = 1usize << psi.n;
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let mat = DMatrix::from_fn(d, d, |r, c| v[r] * v[c].conj());
        Self::new(psi.n, mat)
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let d = 1usize << n;
        let mat = DMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0);
        Self::new(n, mat)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// Tr(rho^2).
    pub fn purity(&self) -> f64 {
        self.mat
            .iter()
            .zip(self.mat.adjoint().iter())
            .map(|(a, b)| (a * b).re)
            .sum()
    }

    /// Verify eigenvalues >= -tol; intended for small-n checks.
    pub fn check_positive(&self, tol: f64) -> Result<()> {
        let eig = self.mat.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(DfeError::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }
}

/// A state in whichever representation the caller has: statevector, density
/// matrix, or stabilizer tableau.
#[derive(Debug, Clone)]
pub enum StateModel {
    Pure(PureState),
    Density(DensityMatrix),
    Stabilizer(StabilizerTableau),
}

impl StateModel {
    pub fn n(&self) -> usize {
        match self {
            StateModel::Pure(s) => s.n(),
            StateModel::Density(s) => s.n(),
            StateModel::Stabilizer(s) => s.n(),
        }
    }

    pub fn dimension(&self) -> usize {
        1 << self.n()
    }

    /// Dense density matrix; subject to the density-size guard.
    pub fn to_density(&self) -> Result<DensityMatrix> {
        match self {
            StateModel::Pure(s) => DensityMatrix::from_pure(s),
            StateModel::Density(s) => Ok(s.clone()),
            StateModel::Stabilizer(t) => {
                let amps = t.to_statevector()?;
                DensityMatrix::from_pure(&PureState::new(t.n(), amps)?)
            }
        }
    }
}

impl From<PureState> for StateModel {
    fn from(s: PureState) -> Self {
        StateModel::Pure(s)
    }
}

impl From<DensityMatrix> for StateModel {
    fn from(s: DensityMatrix) -> Self {
        StateModel::Density(s)
    }
}

impl From<StabilizerTableau> for StateModel {
    fn from(s: StabilizerTableau) -> Self {
        StateModel::Stabilizer(s)
    }
}

/// Tr(rho sigma) via dense matrices: the fidelity oracle used to score
/// simulated runs. Only the entries needed for the trace are touched.
pub fn overlap(a: &StateModel, b: &StateModel) -> Result<f64> {
    if a.n() != b.n() {
        return Err(DfeError::DimensionMismatch {
            op_qubits: a.n(),
            state_qubits: b.n(),
        });
    }
    // Pure x anything avoids forming one of the dense matrices.
    match (a, b) {
        (StateModel::Pure(p), StateModel::Pure(q)) => Ok(p.inner_product(q).norm_sqr()),
        (StateModel::Pure(p), other) | (other, StateModel::Pure(p)) => {
            let rho = other.to_density()?;
            let v = nalgebra::DVector::from_column_slice(p.amplitudes());
            let val = (v.adjoint() * rho.matrix() * &v)[(0, 0)];
            Ok(val.re)
        }
        _ => {
            let x = a.to_density()?;
            let y = b.to_density()?;
            let tr: Complex64 = (x.matrix() * y.matrix()).trace();
            Ok(tr.re)
        }
    }
}

/// GHZ state (|0...0> + |1...1>)/sqrt(2) as a stabilizer tableau:
/// generators X...X and Z_i Z_{i+1}.
pub fn make_ghz(n: usize) -> Result<StabilizerTableau> {
    if n == 0 || n > crate::pauli::MAX_QUBITS {
        return Err(DfeError::QubitCountUnsupported {
            n,
            max: crate::pauli::MAX_QUBITS,
        });
    }
    let mut gens = Vec::with_capacity(n);
    gens.push(PauliOp::new(n, crate::pauli::bit_mask(n), 0)?);
    for q in 0..n - 1 {
        gens.push(PauliOp::new(n, 0, 0b11u64 << q)?);
    }
    StabilizerTableau::new(gens)
}

/// Dicke state: uniform superposition of all weight-k basis states.
pub fn make_dicke(n: usize, excitations: usize) -> Result<PureState> {
    if excitations > n {
        return Err(DfeError::InvalidParameter(format!(
            "{excitations} excitations on {n} qubits"
        )));
    }
    let d = 1usize << n;
    let count = (0..d).filter(|b| b.count_ones() as usize == excitations).count();
    let amp = Complex64::new(1.0 / (count as f64).sqrt(), 0.0);
    let amps = (0..d)
        .map(|b| {
            if b.count_ones() as usize == excitations {
                amp
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    PureState::new(n, amps)
}

/// W state: the single-excitation Dicke state.
pub fn make_w(n: usize) -> Result<PureState> {
    make_dicke(n, 1)
}

/// Haar-random pure state: normalized vector of i.i.d. complex Gaussians.
pub fn make_haar_random(n: usize, seed: u64) -> Result<PureState> {
    if n == 0 || n > MAX_PURE_QUBITS {
        return Err(DfeError::QubitCountUnsupported {
            n,
            max: MAX_PURE_QUBITS,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let d = 1usize << n;
    let mut amps: Vec<Complex64> = (0..d)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    PureState::new(n, amps)
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(DfeError::InvalidParameter(format!(
            "noise strength {p} outside [0, 1]"
        )));
    }
    Ok(())
}

/// sigma' = A sigma A for a Hermitian Pauli A; O(d^2).
pub(crate) fn conjugate_density(mat: &DMatrix<Complex64>, op: &PauliOp) -> DMatrix<Complex64> {
    op.conjugate_matrix(mat)
}

pub(crate) fn single_qubit_op(n: usize, q: usize, which: char) -> PauliOp {
    let (x, z) = match which {
        'X' => (1u64 << q, 0),
        'Y' => (1u64 << q, 1u64 << q),
        _ => (0, 1u64 << q),
    };
    PauliOp::new(n, x, z).expect("in-range qubit")
}

/// Global depolarizing: sigma = (1-p) rho + p I/d.
pub fn depolarize(state: &StateModel, p: f64) -> Result<DensityMatrix> {
    check_probability(p)?;
    let rho = state.to_density()?;
    let d = 1usize << rho.n();
    let mat = rho.matrix() * Complex64::new(1.0 - p, 0.0)
        + DMatrix::<Complex64>::identity(d, d) * Complex64::new(p / d as f64, 0.0);
    DensityMatrix::new(rho.n(), mat)
}

/// Independent per-qubit depolarizing: on each qubit,
/// rho -> (1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z).
pub fn depolarize_local(state: &StateModel, p: f64) -> Result<DensityMatrix> {
    check_probability(p)?;
    let rho = state.to_density()?;
    let n = rho.n();
    let mut mat = rho.matrix().clone();
    for q in 0..n {
        let mut next = &mat * Complex64::new(1.0 - p, 0.0);
        for which in ['X', 'Y', 'Z'] {
            let op = single_qubit_op(n, q, which);
            next += conjugate_density(&mat, &op) * Complex64::new(p / 3.0, 0.0);
        }
        mat = next;
    }
    DensityMatrix::new(n, mat)
}

/// Independent per-qubit phase flips: on each qubit,
/// rho -> (1 - p/2) rho + (p/2) Z rho Z.
pub fn dephase(state: &StateModel, p: f64) -> Result<DensityMatrix> {
    check_probability(p)?;
    let rho = state.to_density()?;
    let n = rho.n();
    let mut mat = rho.matrix().clone();
    for q in 0..n {
        let z = single_qubit_op(n, q, 'Z');
        mat = &mat * Complex64::new(1.0 - p / 2.0, 0.0)
            + conjugate_density(&mat, &z) * Complex64::new(p / 2.0, 0.0);
    }
    DensityMatrix::new(n, mat)
}

#[derive(Serialize, Deserialize)]
struct PureStateJson {
    n: usize,
    amplitudes: Vec<[f64; 2]>,
}

/// JSON fixture format: `{"n": .., "amplitudes": [[re, im], ..]}`.
pub fn pure_state_to_json(state: &PureState) -> serde_json::Value {
    let body = PureStateJson {
        n: state.n(),
        amplitudes: state.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
    };
    serde_json::to_value(body).expect("plain struct serializes")
}

pub fn pure_state_from_json(value: &serde_json::Value) -> Result<PureState> {
    let body: PureStateJson = serde_json::from_value(value.clone())?;
    let amps = body
        .amplitudes
        .iter()
        .map(|[re, im]| Complex64::new(*re, *im))
        .collect();
    PureState::new(body.n, amps)
}
