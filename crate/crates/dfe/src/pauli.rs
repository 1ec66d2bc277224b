//! n-qubit Pauli operators in the binary symplectic representation, with
//! characteristic functions of states.
//!
//! An operator is stored as two bit strings (X part, Z part) plus a sign.
//! The operator for per-qubit bits (x, z) is the Hermitian Pauli
//! I (0,0), X (1,0), Y (1,1) or Z (0,1); the i^{x·z} phase is absorbed so
//! every stored operator is Hermitian with ±1 eigenvalues. Qubit 0 acts on
//! the least significant bit of computational basis indices.
//!
//! The flat index of an operator is the base-4 integer with per-qubit digits
//! 0 = I, 1 = X, 2 = Y, 3 = Z, qubit 0 least significant.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{DfeError, Result};
use crate::states::StateModel;
use crate::Caps;

/// Largest supported register; bit strings are packed into a single `u64`.
pub const MAX_QUBITS: usize = 64;

const PHASES: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

// Quarter-phase exponent of W_a W_b = i^g W_{a+b}, indexed by the
// per-qubit codes 0=I, 1=X, 2=Y, 3=Z.
const MUL_PHASE: [[u8; 4]; 4] = [
    [0, 0, 0, 0],
    [0, 0, 1, 3],
    [0, 3, 0, 1],
    [0, 1, 3, 0],
];

/// Single-qubit factor of a Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingleQubitPauli {
    I,
    X,
    Y,
    Z,
}

impl SingleQubitPauli {
    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Self::I,
            (true, false) => Self::X,
            (true, true) => Self::Y,
            (false, true) => Self::Z,
        }
    }

    fn code(self) -> u128 {
        match self {
            Self::I => 0,
            Self::X => 1,
            Self::Y => 2,
            Self::Z => 3,
        }
    }

    fn symbol(self) -> char {
        match self {
            Self::I => 'I',
            Self::X => 'X',
            Self::Y => 'Y',
            Self::Z => 'Z',
        }
    }
}

/// An n-qubit Pauli operator: X/Z bit strings plus a sign in {+1, -1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliOp {
    n: usize,
    x_bits: u64,
    z_bits: u64,
    sign: i8,
}

impl PauliOp {
    pub fn new(n: usize, x_bits: u64, z_bits: u64) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(DfeError::QubitCountUnsupported { n, max: MAX_QUBITS });
        }
        let mask = bit_mask(n);
        if x_bits & !mask != 0 || z_bits & !mask != 0 {
            return Err(DfeError::InvalidParameter(format!(
                "bit strings exceed {n} qubits"
            )));
        }
        Ok(Self {
            n,
            x_bits,
            z_bits,
            sign: 1,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, 0, 0)
    }

    /// Operator for the flat base-4 index `k` in `[0, 4^n)`.
    pub fn from_index(n: usize, k: u128) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(DfeError::QubitCountUnsupported { n, max: MAX_QUBITS });
        }
        if n < MAX_QUBITS / 2 && k >= 1u128 << (2 * n) {
            return Err(DfeError::IndexOutOfRange { k, n });
        }
        let mut x_bits = 0u64;
        let mut z_bits = 0u64;
        for q in 0..n {
            let code = ((k >> (2 * q)) & 3) as u8;
            let (x, z) = match code {
                0 => (0, 0),
                1 => (1, 0),
                2 => (1, 1),
                _ => (0, 1),
            };
            x_bits |= (x as u64) << q;
            z_bits |= (z as u64) << q;
        }
        Self::new(n, x_bits, z_bits)
    }

    /// Flat index, inverse of [`PauliOp::from_index`]. Ignores the sign.
    pub fn index(&self) -> u128 {
        let mut k = 0u128;
        for q in 0..self.n {
            k |= self.factor(q).code() << (2 * q);
        }
        k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_bits(&self) -> u64 {
        self.x_bits
    }

    pub fn z_bits(&self) -> u64 {
        self.z_bits
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn with_sign(mut self, sign: i8) -> Self {
        debug_assert!(sign == 1 || sign == -1);
        self.sign = sign;
        self
    }

    /// Same operator with sign forced to +1.
    pub fn unsigned(mut self) -> Self {
        self.sign = 1;
        self
    }

    pub fn negate(mut self) -> Self {
        self.sign = -self.sign;
        self
    }

    pub fn is_identity(&self) -> bool {
        self.x_bits == 0 && self.z_bits == 0
    }

    pub fn factor(&self, q: usize) -> SingleQubitPauli {
        SingleQubitPauli::from_bits(self.x_bits >> q & 1 == 1, self.z_bits >> q & 1 == 1)
    }

    /// Number of non-identity tensor factors.
    pub fn weight(&self) -> u32 {
        (self.x_bits | self.z_bits).count_ones()
    }

    pub fn x_weight(&self) -> u32 {
        self.x_bits.count_ones()
    }

    pub fn y_weight(&self) -> u32 {
        (self.x_bits & self.z_bits).count_ones()
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        let cross = (self.x_bits & other.z_bits).count_ones()
            + (self.z_bits & other.x_bits).count_ones();
        cross.is_multiple_of(2)
    }

    /// Operator product. Errors when the operands anticommute, since the
    /// result would carry an imaginary phase and leave the Hermitian set.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(DfeError::DimensionMismatch {
                op_qubits: self.n,
                state_qubits: other.n,
            });
        }
        let mut phase = 0u8;
        let support = (self.x_bits | self.z_bits) & (other.x_bits | other.z_bits);
        let mut rest = support;
        while rest != 0 {
            let q = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            phase =
                (phase + MUL_PHASE[self.factor(q).code() as usize][other.factor(q).code() as usize]) & 3;
        }
        if phase & 1 != 0 {
            return Err(DfeError::ImaginaryPhase);
        }
        let mut sign = self.sign * other.sign;
        if phase == 2 {
            sign = -sign;
        }
        Ok(Self {
            n: self.n,
            x_bits: self.x_bits ^ other.x_bits,
            z_bits: self.z_bits ^ other.z_bits,
            sign,
        })
    }

    /// `"XIZY"`-style label, qubit 0 first. A leading `-` marks sign -1.
    pub fn label(&self) -> String {
        let mut s = String::with_capacity(self.n + 1);
        if self.sign < 0 {
            s.push('-');
        }
        for q in 0..self.n {
            s.push(self.factor(q).symbol());
        }
        s
    }

    pub fn from_label(label: &str) -> Result<Self> {
        let (sign, body) = match label.strip_prefix('-') {
            Some(rest) => (-1, rest),
            None => (1, label.strip_prefix('+').unwrap_or(label)),
        };
        let n = body.chars().count();
        if n == 0 || n > MAX_QUBITS {
            return Err(DfeError::Parse(format!("bad pauli label {label:?}")));
        }
        let mut x_bits = 0u64;
        let mut z_bits = 0u64;
        for (q, c) in body.chars().enumerate() {
            let (x, z) = match c {
                'I' | 'i' => (0u64, 0u64),
                'X' | 'x' => (1, 0),
                'Y' | 'y' => (1, 1),
                'Z' | 'z' => (0, 1),
                _ => return Err(DfeError::Parse(format!("bad pauli symbol {c:?}"))),
            };
            x_bits |= x << q;
            z_bits |= z << q;
        }
        Ok(Self::new(n, x_bits, z_bits)?.with_sign(sign))
    }

    /// Phase of the column `b`: W |b> = phase(b) |b ^ x_bits>.
    #[inline]
    fn column_phase(&self, b: u64) -> Complex64 {
        let quarter = (self.y_weight() as u64 + 2 * (b & self.z_bits).count_ones() as u64) & 3;
        let mut p = PHASES[quarter as usize];
        if self.sign < 0 {
            p = -p;
        }
        p
    }

    /// Dense 2^n x 2^n matrix. Usable only while 2^n fits in memory.
    pub fn dense(&self) -> DMatrix<Complex64> {
        let d = 1usize << self.n;
        let mut m = DMatrix::zeros(d, d);
        for b in 0..d as u64 {
            m[((b ^ self.x_bits) as usize, b as usize)] = self.column_phase(b);
        }
        m
    }

    /// <psi| W |psi> for a statevector, in O(d).
    pub fn expectation_statevector(&self, amps: &[Complex64]) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..amps.len() as u64 {
            let target = (b ^ self.x_bits) as usize;
            acc += amps[target].conj() * self.column_phase(b) * amps[b as usize];
        }
        debug_assert!(acc.im.abs() < 1e-9);
        acc.re
    }

    /// Tr(sigma W) for a density matrix, touching only d entries.
    pub fn expectation_density(&self, mat: &DMatrix<Complex64>) -> f64 {
        let d = mat.nrows() as u64;
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..d {
            acc += mat[(b as usize, (b ^ self.x_bits) as usize)] * self.column_phase(b);
        }
        debug_assert!(acc.im.abs() < 1e-9);
        acc.re
    }

    /// W M W for this Hermitian Pauli: a permutation with phases, O(d^2).
    pub fn conjugate_matrix(&self, mat: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = mat.nrows() as u64;
        DMatrix::from_fn(d as usize, d as usize, |r, c| {
            let r = r as u64;
            let c = c as u64;
            self.column_phase(r ^ self.x_bits)
                * mat[((r ^ self.x_bits) as usize, (c ^ self.x_bits) as usize)]
                * self.column_phase(c)
        })
    }
}

impl std::fmt::Display for PauliOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

pub(crate) fn bit_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// A characteristic-function entry: chi(k) = Tr(rho W_k) / sqrt(d).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CharValue {
    pub k: u128,
    pub chi: f64,
}

/// Tr(state W_p), dispatched over the state representation.
pub fn pauli_expectation(state: &StateModel, p: &PauliOp) -> Result<f64> {
    if state.n() != p.n() {
        return Err(DfeError::DimensionMismatch {
            op_qubits: p.n(),
            state_qubits: state.n(),
        });
    }
    Ok(match state {
        StateModel::Pure(psi) => p.expectation_statevector(psi.amplitudes()),
        StateModel::Density(rho) => p.expectation_density(rho.matrix()),
        StateModel::Stabilizer(tab) => tab.expectation(p),
    })
}

/// chi_state(k) = Tr(state W_k) / sqrt(d).
pub fn char_fn(state: &StateModel, k: u128) -> Result<CharValue> {
    let op = PauliOp::from_index(state.n(), k)?;
    let sqrt_d = ((1u128 << state.n()) as f64).sqrt();
    Ok(CharValue {
        k,
        chi: pauli_expectation(state, &op)? / sqrt_d,
    })
}

/// All 4^n characteristic values, subject to the enumeration cap.
pub fn char_fn_full(state: &StateModel, caps: &Caps) -> Result<Vec<CharValue>> {
    let n = state.n();
    caps.check_enumeration(n)?;
    let sqrt_d = ((1u128 << n) as f64).sqrt();
    let count = 1u128 << (2 * n);
    let mut out = Vec::with_capacity(count as usize);
    for k in 0..count {
        let op = PauliOp::from_index(n, k)?;
        out.push(CharValue {
            k,
            chi: pauli_expectation(state, &op)? / sqrt_d,
        });
    }
    Ok(out)
}
