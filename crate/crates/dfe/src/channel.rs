//! Entanglement-fidelity estimation for unitary target channels.
//!
//! The channel characteristic function chi_E(k,k') = Tr(W_k E(W_k')) / d is
//! sampled over pairs with Pr(k,k') = chi_U(k,k')^2 / d^2. Each use prepares
//! a product eigenstate of the input Pauli, applies the channel, and
//! measures the output Pauli. Clifford targets never touch a dense
//! representation; generic unitaries are capped at 4 qubits.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::CliffordCircuit;
use crate::engine::{settings_count, DfeConfig, Regime};
use crate::error::{DfeError, Result};
use crate::measurement::copies_for_channel_setting;
use crate::pauli::{bit_mask, PauliOp, SingleQubitPauli};
use crate::sampler::{AliasTable, CHI_ZERO_TOL};
use crate::states::{conjugate_density, single_qubit_op, DensityMatrix};
use crate::Caps;

/// Dense (generic unitary) channels are capped here; Clifford channels
/// scale to the full 64-qubit register.
pub const MAX_DENSE_CHANNEL_QUBITS: usize = 4;

/// Noise composed after the ideal evolution. All three are mixtures of
/// unitaries, so single uses can be simulated without density matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelNoise {
    /// rho -> (1-p) rho + p I/d.
    DepolarizeGlobal { p: f64 },
    /// Per qubit: rho -> (1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z).
    DepolarizeLocal { p: f64 },
    /// Per qubit: rho -> (1-p/2) rho + (p/2) Z rho Z.
    DephaseLocal { p: f64 },
}

impl ChannelNoise {
    fn probability(&self) -> f64 {
        match self {
            ChannelNoise::DepolarizeGlobal { p }
            | ChannelNoise::DepolarizeLocal { p }
            | ChannelNoise::DephaseLocal { p } => *p,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ChannelNoise::DepolarizeGlobal { p } => format!("depolarize-global({p})"),
            ChannelNoise::DepolarizeLocal { p } => format!("depolarize({p})"),
            ChannelNoise::DephaseLocal { p } => format!("dephase({p})"),
        }
    }

    /// Multiplier applied to chi_U(k, .) by the noise: Pauli channels act
    /// diagonally on the Pauli basis.
    fn chi_factor(&self, output: &PauliOp) -> f64 {
        match self {
            ChannelNoise::DepolarizeGlobal { p } => {
                if output.is_identity() {
                    1.0
                } else {
                    1.0 - p
                }
            }
            ChannelNoise::DepolarizeLocal { p } => {
                (1.0 - 4.0 * p / 3.0).powi(output.weight() as i32)
            }
            ChannelNoise::DephaseLocal { p } => (1.0 - p).powi(output.x_weight() as i32),
        }
    }

    fn apply_operator(&self, n: usize, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = 1usize << n;
        match self {
            ChannelNoise::DepolarizeGlobal { p } => {
                let tr = m.trace();
                m * Complex64::new(1.0 - p, 0.0)
                    + DMatrix::<Complex64>::identity(d, d) * (tr * p / d as f64)
            }
            ChannelNoise::DepolarizeLocal { p } => {
                let mut out = m.clone();
                for q in 0..n {
                    let mut next = &out * Complex64::new(1.0 - p, 0.0);
                    for which in ['X', 'Y', 'Z'] {
                        next += conjugate_density(&out, &single_qubit_op(n, q, which))
                            * Complex64::new(p / 3.0, 0.0);
                    }
                    out = next;
                }
                out
            }
            ChannelNoise::DephaseLocal { p } => {
                let mut out = m.clone();
                for q in 0..n {
                    out = &out * Complex64::new(1.0 - p / 2.0, 0.0)
                        + conjugate_density(&out, &single_qubit_op(n, q, 'Z'))
                            * Complex64::new(p / 2.0, 0.0);
                }
                out
            }
        }
    }

    /// Draw one Pauli error (identity for the no-error event); only the
    /// local noises are sampled this way.
    fn sample_error<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> PauliOp {
        let mut x = 0u64;
        let mut z = 0u64;
        match self {
            ChannelNoise::DepolarizeGlobal { .. } => unreachable!("handled via the mixing coin"),
            ChannelNoise::DepolarizeLocal { p } => {
                for q in 0..n {
                    let u: f64 = rng.gen();
                    if u < *p {
                        match (u * 3.0 / p) as u32 {
                            0 => x |= 1 << q,
                            1 => {
                                x |= 1 << q;
                                z |= 1 << q;
                            }
                            _ => z |= 1 << q,
                        }
                    }
                }
            }
            ChannelNoise::DephaseLocal { p } => {
                for q in 0..n {
                    if rng.gen::<f64>() < p / 2.0 {
                        z |= 1 << q;
                    }
                }
            }
        }
        PauliOp::new(n, x, z).expect("error bits in range")
    }
}

#[derive(Debug, Clone)]
pub enum ChannelKind {
    /// Dense unitary matrix; capped at [`MAX_DENSE_CHANNEL_QUBITS`].
    Unitary(DMatrix<Complex64>),
    /// Symplectic gate list; any register size.
    Clifford(CliffordCircuit),
}

/// A simulated channel: an ideal unitary (dense or Clifford) optionally
/// composed with a noise map applied at the output.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    n: usize,
    kind: ChannelKind,
    noise: Option<ChannelNoise>,
}

impl ChannelModel {
    pub fn unitary(n: usize, mat: DMatrix<Complex64>) -> Result<Self> {
        if n == 0 || n > MAX_DENSE_CHANNEL_QUBITS {
            return Err(DfeError::QubitCountUnsupported {
                n,
                max: MAX_DENSE_CHANNEL_QUBITS,
            });
        }
        let d = 1usize << n;
        if mat.nrows() != d || mat.ncols() != d {
            return Err(DfeError::InvalidParameter(format!(
                "expected {d}x{d} unitary, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let defect = (mat.adjoint() * &mat - DMatrix::<Complex64>::identity(d, d)).norm();
        if defect > 1e-9 {
            return Err(DfeError::NonUnitaryTarget);
        }
        Ok(Self {
            n,
            kind: ChannelKind::Unitary(mat),
            noise: None,
        })
    }

    pub fn clifford(circuit: CliffordCircuit) -> Self {
        Self {
            n: circuit.n(),
            kind: ChannelKind::Clifford(circuit),
            noise: None,
        }
    }

    pub fn identity(n: usize) -> Result<Self> {
        Ok(Self::clifford(CliffordCircuit::new(n, Vec::new())?))
    }

    pub fn with_noise(mut self, noise: ChannelNoise) -> Result<Self> {
        let p = noise.probability();
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(DfeError::InvalidParameter(format!(
                "noise strength {p} outside [0, 1]"
            )));
        }
        self.noise = Some(noise);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> f64 {
        (1u128 << self.n) as f64
    }

    pub fn kind(&self) -> &ChannelKind {
        &self.kind
    }

    pub fn noise(&self) -> Option<ChannelNoise> {
        self.noise
    }

    pub fn is_ideal_unitary(&self) -> bool {
        self.noise.is_none()
    }

    pub fn describe(&self) -> String {
        let base = match &self.kind {
            ChannelKind::Unitary(_) => format!("unitary(n={})", self.n),
            ChannelKind::Clifford(c) => {
                format!("clifford(n={}, gates={})", self.n, c.gates().len())
            }
        };
        match &self.noise {
            Some(noise) => format!("{} + {}", base, noise.describe()),
            None => base,
        }
    }

    /// The channel's linear action on an operator (dense path).
    pub fn apply_operator(&self, m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let ideal = match &self.kind {
            ChannelKind::Unitary(u) => u * m * u.adjoint(),
            ChannelKind::Clifford(c) => {
                if self.n > MAX_DENSE_CHANNEL_QUBITS {
                    return Err(DfeError::QubitCountUnsupported {
                        n: self.n,
                        max: MAX_DENSE_CHANNEL_QUBITS,
                    });
                }
                let u = dense_circuit_unitary(c);
                &u * m * u.adjoint()
            }
        };
        Ok(match &self.noise {
            Some(noise) => noise.apply_operator(self.n, &ideal),
            None => ideal,
        })
    }

    /// Density-matrix action; same dense path with validation of the output.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n() != self.n {
            return Err(DfeError::DimensionMismatch {
                op_qubits: self.n,
                state_qubits: rho.n(),
            });
        }
        DensityMatrix::new(self.n, self.apply_operator(rho.matrix())?)
    }

    /// chi_E(k, k') = Tr(W_k E(W_k')) / d.
    pub fn char_fn(&self, k_out: u128, k_in: u128) -> Result<f64> {
        let out_op = PauliOp::from_index(self.n, k_out)?;
        let in_op = PauliOp::from_index(self.n, k_in)?;
        let base = match &self.kind {
            ChannelKind::Clifford(c) => {
                let image = c.propagate(&in_op);
                if image.unsigned() == out_op.unsigned() {
                    image.sign() as f64
                } else {
                    0.0
                }
            }
            ChannelKind::Unitary(u) => {
                let image = u * in_op.dense() * u.adjoint();
                out_op.expectation_density(&image) / self.dimension()
            }
        };
        Ok(match &self.noise {
            Some(ChannelNoise::DepolarizeGlobal { p }) => {
                if out_op.is_identity() && in_op.is_identity() {
                    (1.0 - p) * base + p
                } else {
                    (1.0 - p) * base
                }
            }
            Some(noise) => noise.chi_factor(&out_op) * base,
            None => base,
        })
    }
}

/// chi_E(k, k') for any channel model.
pub fn char_fn_channel(channel: &ChannelModel, k_out: u128, k_in: u128) -> Result<f64> {
    channel.char_fn(k_out, k_in)
}

/// Dense matrix of a Clifford circuit, for the small-n operator path.
fn dense_circuit_unitary(circuit: &CliffordCircuit) -> DMatrix<Complex64> {
    use crate::clifford::Gate;
    let n = circuit.n();
    let d = 1usize << n;
    let mut u = DMatrix::<Complex64>::identity(d, d);
    let inv_sqrt2 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for g in circuit.gates() {
        let mut next = DMatrix::<Complex64>::zeros(d, d);
        match *g {
            Gate::H(q) => {
                let bit = 1usize << q;
                for col in 0..d {
                    for row in 0..d {
                        let v = u[(row, col)];
                        if v != Complex64::default() {
                            let sign = Complex64::new(if row & bit != 0 { -1.0 } else { 1.0 }, 0.0);
                            next[(row & !bit, col)] += v * inv_sqrt2;
                            next[(row | bit, col)] += v * inv_sqrt2 * sign;
                        }
                    }
                }
            }
            Gate::S(q) => {
                let bit = 1usize << q;
                for col in 0..d {
                    for row in 0..d {
                        let phase = if row & bit != 0 {
                            Complex64::new(0.0, 1.0)
                        } else {
                            Complex64::new(1.0, 0.0)
                        };
                        next[(row, col)] = u[(row, col)] * phase;
                    }
                }
            }
            Gate::Cnot(c, t) => {
                let cb = 1usize << c;
                let tb = 1usize << t;
                for col in 0..d {
                    for row in 0..d {
                        let target = if row & cb != 0 { row ^ tb } else { row };
                        next[(target, col)] += u[(row, col)];
                    }
                }
            }
        }
        u = next;
    }
    u
}

/// One sampled channel setting: output index k, input index k', and the
/// signed chi_U(k,k') the estimator divides by.
#[derive(Debug, Clone, Copy)]
pub struct ChannelPair {
    pub k_out: u128,
    pub k_in: u128,
    pub chi_u: f64,
}

#[derive(Debug, Clone)]
enum PairBackend {
    Table {
        entries: Vec<ChannelPair>,
        alias: AliasTable,
    },
    Clifford(CliffordCircuit),
}

/// Sampler over (k, k') pairs with Pr = chi_U^2 / d^2. Clifford targets draw
/// a uniform input Pauli and propagate it; dense targets enumerate all
/// d^2 x d^2 pairs once.
#[derive(Debug, Clone)]
pub struct ChannelPairSampler {
    n: usize,
    backend: PairBackend,
}

impl ChannelPairSampler {
    pub fn new(target: &ChannelModel, caps: &Caps) -> Result<Self> {
        if !target.is_ideal_unitary() {
            return Err(DfeError::NonUnitaryTarget);
        }
        let n = target.n();
        match &target.kind {
            ChannelKind::Clifford(c) => Ok(Self {
                n,
                backend: PairBackend::Clifford(c.clone()),
            }),
            ChannelKind::Unitary(u) => {
                caps.check_enumeration(n)?;
                let d = 1usize << n;
                let count = 1u128 << (2 * n);
                let mut entries = Vec::new();
                for k_in in 0..count {
                    let in_op = PauliOp::from_index(n, k_in)?;
                    let image = u * in_op.dense() * u.adjoint();
                    for k_out in 0..count {
                        let out_op = PauliOp::from_index(n, k_out)?;
                        let chi = out_op.expectation_density(&image) / d as f64;
                        if chi.abs() >= CHI_ZERO_TOL {
                            entries.push(ChannelPair {
                                k_out,
                                k_in,
                                chi_u: chi,
                            });
                        }
                    }
                }
                let weights: Vec<f64> = entries.iter().map(|e| e.chi_u * e.chi_u).collect();
                let alias = AliasTable::new(&weights);
                Ok(Self {
                    n,
                    backend: PairBackend::Table { entries, alias },
                })
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelPair {
        match &self.backend {
            PairBackend::Table { entries, alias } => entries[alias.sample(rng)],
            PairBackend::Clifford(c) => {
                let mask = bit_mask(self.n);
                let x = rng.gen::<u64>() & mask;
                let z = rng.gen::<u64>() & mask;
                let in_op = PauliOp::new(self.n, x, z).expect("bits in range");
                let image = c.propagate(&in_op);
                ChannelPair {
                    k_out: image.index(),
                    k_in: in_op.index(),
                    chi_u: image.sign() as f64,
                }
            }
        }
    }

    /// Enumerated support (dense targets only), for tests and dumps.
    pub fn entries(&self) -> Option<&[ChannelPair]> {
        match &self.backend {
            PairBackend::Table { entries, .. } => Some(entries),
            PairBackend::Clifford(_) => None,
        }
    }
}

/// A product eigenstate of a Pauli observable: per-qubit single-qubit Pauli
/// eigenstates selected by the bits of `a`; identity factors use the
/// computational basis and contribute +1 to the eigenvalue.
#[derive(Debug, Clone, Copy)]
pub struct EigenstatePrep {
    op: PauliOp,
    selector: u64,
}

impl EigenstatePrep {
    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn selector(&self) -> u64 {
        self.selector
    }

    /// Eigenvalue of `op` on this state: product of per-qubit signs over
    /// non-identity factors.
    pub fn lambda(&self) -> i8 {
        let support = self.op.x_bits() | self.op.z_bits();
        if (self.selector & support).count_ones().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// Exact expectation of a Pauli on this product state: a product of
    /// per-qubit factors in {-1, 0, +1}.
    pub fn expect_pauli(&self, q: &PauliOp) -> f64 {
        debug_assert_eq!(q.n(), self.n());
        let mut value = q.sign() as f64;
        for qubit in 0..self.n() {
            let factor = q.factor(qubit);
            if factor == SingleQubitPauli::I {
                continue;
            }
            let prepared = match self.op.factor(qubit) {
                SingleQubitPauli::I => SingleQubitPauli::Z,
                other => other,
            };
            if factor != prepared {
                return 0.0;
            }
            if self.selector >> qubit & 1 == 1 {
                value = -value;
            }
        }
        value
    }

    /// Dense statevector of the product state.
    pub fn statevector(&self) -> Vec<Complex64> {
        let n = self.n();
        let d = 1usize << n;
        let frac = std::f64::consts::FRAC_1_SQRT_2;
        let locals: Vec<[Complex64; 2]> = (0..n)
            .map(|q| {
                let bit = self.selector >> q & 1 == 1;
                match self.op.factor(q) {
                    SingleQubitPauli::I | SingleQubitPauli::Z => {
                        if bit {
                            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
                        } else {
                            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
                        }
                    }
                    SingleQubitPauli::X => {
                        let s = if bit { -frac } else { frac };
                        [Complex64::new(frac, 0.0), Complex64::new(s, 0.0)]
                    }
                    SingleQubitPauli::Y => {
                        let s = if bit { -frac } else { frac };
                        [Complex64::new(frac, 0.0), Complex64::new(0.0, s)]
                    }
                }
            })
            .collect();
        (0..d as u64)
            .map(|b| {
                (0..n).fold(Complex64::new(1.0, 0.0), |acc, q| {
                    acc * locals[q][(b >> q & 1) as usize]
                })
            })
            .collect()
    }
}

/// The a-th joint eigenstate of W_p as a tensor product of single-qubit
/// Pauli eigenstates, with its eigenvalue.
pub fn eigenbasis_product_state(p: &PauliOp, a: u64) -> Result<(EigenstatePrep, i8)> {
    if p.n() < 64 && a >= 1u64 << p.n() {
        return Err(DfeError::InvalidParameter(format!(
            "eigenstate index {a} out of range for {} qubits",
            p.n()
        )));
    }
    let prep = EigenstatePrep {
        op: p.unsigned(),
        selector: a,
    };
    let lambda = prep.lambda();
    Ok((prep, lambda))
}

/// Simulate one use of the channel: prepare, apply, measure `measure`.
/// `back` may carry the precomputed inverse propagation of `measure`
/// through the actual circuit (Clifford kinds).
pub fn simulate_channel_use<R: Rng + ?Sized>(
    actual: &ChannelModel,
    prep: &EigenstatePrep,
    measure: &PauliOp,
    back: Option<&PauliOp>,
    rng: &mut R,
) -> Result<i8> {
    // The global-depolarizing branch replaces the state by I/d.
    if let Some(ChannelNoise::DepolarizeGlobal { p }) = actual.noise {
        if rng.gen::<f64>() < p {
            if measure.is_identity() {
                return Ok(1);
            }
            return Ok(if rng.gen::<bool>() { 1 } else { -1 });
        }
    }
    // Local Pauli noises commute into a sign on the measured observable.
    let mut flip = false;
    match actual.noise {
        Some(noise @ ChannelNoise::DepolarizeLocal { .. })
        | Some(noise @ ChannelNoise::DephaseLocal { .. }) => {
            let error = noise.sample_error(actual.n, rng);
            flip = !error.commutes_with(measure);
        }
        _ => {}
    }
    let mut expectation = match &actual.kind {
        ChannelKind::Clifford(c) => {
            let owned;
            let back_op = match back {
                Some(b) => b,
                None => {
                    owned = c.propagate_inverse(measure);
                    &owned
                }
            };
            prep.expect_pauli(back_op)
        }
        ChannelKind::Unitary(u) => {
            let psi = nalgebra::DVector::from_vec(prep.statevector());
            let out = u * psi;
            measure.expectation_statevector(out.as_slice())
        }
    };
    if flip {
        expectation = -expectation;
    }
    let p_plus = ((1.0 + expectation) / 2.0).clamp(0.0, 1.0);
    Ok(if rng.gen::<f64>() < p_plus { 1 } else { -1 })
}

mod u128_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-pair protocol record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub setting: usize,
    #[serde(with = "u128_string")]
    pub k_out: u128,
    #[serde(with = "u128_string")]
    pub k_in: u128,
    pub pauli_out: String,
    pub pauli_in: String,
    pub chi_u: f64,
    pub copies: u64,
    pub x_tilde: f64,
    /// Eigenstate selectors a_ij of the prepared input states.
    pub prepared: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelRunMetadata {
    pub regime: String,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub target: String,
    pub actual: String,
}

/// Full outcome record of a channel certification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelDfeResult {
    pub n: usize,
    /// Entanglement-fidelity estimate.
    pub f_e: f64,
    /// (d F_e + 1) / (d + 1), the Haar-average fidelity.
    pub f_avg: f64,
    pub ell: u64,
    pub m_total: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub uses_bound: f64,
    pub uses_bound_kind: String,
    pub metadata: ChannelRunMetadata,
    pub pairs: Vec<PairRecord>,
}

/// F_avg = (d F_e + 1) / (d + 1).
pub fn avg_fidelity_from_entanglement(f_e: f64, d: f64) -> Result<f64> {
    if !(-1e-9..=1.0 + 1e-9).contains(&f_e) {
        return Err(DfeError::InvalidParameter(format!(
            "entanglement fidelity {f_e} outside [0, 1]"
        )));
    }
    Ok((d * f_e + 1.0) / (d + 1.0))
}

fn uses_bound_for(regime: &Regime, ell: u64, epsilon: f64, delta: f64, d: f64) -> (f64, &'static str) {
    let eps2 = epsilon * epsilon;
    let log4d = (4.0 / delta).ln();
    match regime {
        Regime::Generic => (
            1.0 + 1.0 / (eps2 * delta) + 4.0 * d * d * log4d / eps2,
            "expectation",
        ),
        Regime::ShrinkingNoise { .. } => (ell as f64 + 4.0 * d * d * log4d / eps2, "expectation"),
        Regime::WellConditioned { alpha } => (
            ell as f64 * (1.0 + 4.0 * log4d / (alpha * alpha * ell as f64 * eps2)),
            "certainty",
        ),
        Regime::Truncated { .. } => unreachable!("rejected before scheduling"),
    }
}

/// Estimate the entanglement fidelity of `actual` against the ideal unitary
/// `target`. Per pair i, m_i uses each prepare a uniformly chosen eigenstate
/// of the input Pauli, apply `actual`, measure the output Pauli, and fold
/// the eigenvalue into the outcome. Deterministic under `config.seed`.
pub fn estimate_entanglement_fidelity(
    target: &ChannelModel,
    actual: &ChannelModel,
    config: &DfeConfig,
) -> Result<ChannelDfeResult> {
    if target.n() != actual.n() {
        return Err(DfeError::DimensionMismatch {
            op_qubits: target.n(),
            state_qubits: actual.n(),
        });
    }
    if matches!(config.regime, Regime::Truncated { .. }) {
        return Err(DfeError::InvalidParameter(
            "truncated regime is not defined for channel targets".into(),
        ));
    }
    let ell = settings_count(config)?;
    let sampler = ChannelPairSampler::new(target, &config.caps)?;
    let n = target.n();
    let d = target.dimension();

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    rng.set_stream(0);
    let draws: Vec<ChannelPair> = (0..ell).map(|_| sampler.draw(&mut rng)).collect();

    let pairs: Vec<PairRecord> = draws
        .par_iter()
        .enumerate()
        .map(|(i, pair)| -> Result<PairRecord> {
            let m = copies_for_channel_setting(pair.chi_u, ell, config.epsilon, config.delta)?;
            let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
            rng.set_stream(1 + i as u64);
            let out_op = PauliOp::from_index(n, pair.k_out)?;
            let in_op = PauliOp::from_index(n, pair.k_in)?;
            let back = match &actual.kind {
                ChannelKind::Clifford(c) => Some(c.propagate_inverse(&out_op)),
                ChannelKind::Unitary(_) => None,
            };
            let mut prepared = Vec::with_capacity(m as usize);
            let mut b_sum = 0i64;
            let mask = bit_mask(n);
            for _ in 0..m {
                let a = rng.gen::<u64>() & mask;
                prepared.push(a);
                let (prep, lambda) = eigenbasis_product_state(&in_op, a)?;
                let outcome =
                    simulate_channel_use(actual, &prep, &out_op, back.as_ref(), &mut rng)?;
                b_sum += (lambda * outcome) as i64;
            }
            Ok(PairRecord {
                setting: i,
                k_out: pair.k_out,
                k_in: pair.k_in,
                pauli_out: out_op.label(),
                pauli_in: in_op.label(),
                chi_u: pair.chi_u,
                copies: m,
                x_tilde: b_sum as f64 / (pair.chi_u * m as f64),
                prepared,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let m_total = pairs.iter().map(|p| p.copies).sum();
    let f_e = pairs.iter().map(|p| p.x_tilde).sum::<f64>() / ell as f64;
    let f_avg = (d * f_e + 1.0) / (d + 1.0);
    let (uses_bound, bound_kind) = uses_bound_for(&config.regime, ell, config.epsilon, config.delta, d);
    Ok(ChannelDfeResult {
        n,
        f_e,
        f_avg,
        ell,
        m_total,
        ci_low: f_e - 2.0 * config.epsilon,
        ci_high: f_e + 2.0 * config.epsilon,
        uses_bound,
        uses_bound_kind: bound_kind.to_string(),
        metadata: ChannelRunMetadata {
            regime: config.regime.describe(),
            epsilon: config.epsilon,
            delta: config.delta,
            seed: config.seed,
            target: target.describe(),
            actual: actual.describe(),
        },
        pairs,
    })
}
