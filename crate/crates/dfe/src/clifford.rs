//! Clifford circuits over {CNOT, H, S} with exact sign-tracked Pauli
//! conjugation, plus the line-oriented text format used by the CLI:
//! one gate per line (`H q`, `S q`, `CNOT c t`), `#` comments, and an
//! optional `qubits N` header.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{DfeError, Result};
use crate::pauli::{PauliOp, MAX_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    H(usize),
    S(usize),
    Cnot(usize, usize),
}

impl std::fmt::Display for Gate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Gate::H(q) => write!(f, "H {q}"),
            Gate::S(q) => write!(f, "S {q}"),
            Gate::Cnot(c, t) => write!(f, "CNOT {c} {t}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliffordCircuit {
    n: usize,
    gates: Vec<Gate>,
}

impl CliffordCircuit {
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(DfeError::QubitCountUnsupported { n, max: MAX_QUBITS });
        }
        for g in &gates {
            let ok = match *g {
                Gate::H(q) | Gate::S(q) => q < n,
                Gate::Cnot(c, t) => c < n && t < n && c != t,
            };
            if !ok {
                return Err(DfeError::InvalidParameter(format!(
                    "gate {g} invalid on {n} qubits"
                )));
            }
        }
        Ok(Self { n, gates })
    }

    /// Random circuit: each gate uniformly H, S, or CNOT on random wires.
    pub fn random(n: usize, gate_count: usize, seed: u64) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(DfeError::QubitCountUnsupported { n, max: MAX_QUBITS });
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let gates = (0..gate_count)
            .map(|_| {
                if n == 1 {
                    return match rng.gen_range(0..2) {
                        0 => Gate::H(0),
                        _ => Gate::S(0),
                    };
                }
                match rng.gen_range(0..3) {
                    0 => Gate::H(rng.gen_range(0..n)),
                    1 => Gate::S(rng.gen_range(0..n)),
                    _ => {
                        let c = rng.gen_range(0..n);
                        let mut t = rng.gen_range(0..n - 1);
                        if t >= c {
                            t += 1;
                        }
                        Gate::Cnot(c, t)
                    }
                }
            })
            .collect();
        Self::new(n, gates)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Parse the text format. The register size comes from a `qubits N`
    /// header when present, otherwise from the largest index used.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut declared: Option<usize> = None;
        let mut gates = Vec::new();
        let mut max_index = 0usize;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap_or("");
            let index = |parts: &mut std::str::SplitWhitespace| -> Result<usize> {
                parts
                    .next()
                    .ok_or_else(|| {
                        DfeError::Parse(format!("line {}: missing qubit index", lineno + 1))
                    })?
                    .parse()
                    .map_err(|_| DfeError::Parse(format!("line {}: bad qubit index", lineno + 1)))
            };
            match head.to_ascii_uppercase().as_str() {
                "QUBITS" => declared = Some(index(&mut parts)?),
                "H" => {
                    let q = index(&mut parts)?;
                    max_index = max_index.max(q);
                    gates.push(Gate::H(q));
                }
                "S" => {
                    let q = index(&mut parts)?;
                    max_index = max_index.max(q);
                    gates.push(Gate::S(q));
                }
                "CNOT" | "CX" => {
                    let c = index(&mut parts)?;
                    let t = index(&mut parts)?;
                    max_index = max_index.max(c).max(t);
                    gates.push(Gate::Cnot(c, t));
                }
                other => {
                    return Err(DfeError::Parse(format!(
                        "line {}: unknown gate {other:?}",
                        lineno + 1
                    )))
                }
            }
            if parts.next().is_some() {
                return Err(DfeError::Parse(format!(
                    "line {}: trailing tokens",
                    lineno + 1
                )));
            }
        }
        let n = declared.unwrap_or(max_index + 1);
        if n <= max_index {
            return Err(DfeError::Parse(format!(
                "declared qubits {n} but a gate uses index {max_index}"
            )));
        }
        Self::new(n, gates)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.n);
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }

    /// Conjugation U P U^dagger with exact sign tracking; O(gates).
    pub fn propagate(&self, p: &PauliOp) -> PauliOp {
        debug_assert_eq!(p.n(), self.n);
        let mut x = p.x_bits();
        let mut z = p.z_bits();
        let mut sign = p.sign();
        for g in &self.gates {
            apply_gate(*g, &mut x, &mut z, &mut sign, false);
        }
        PauliOp::new(self.n, x, z)
            .expect("bits stay in range")
            .with_sign(sign)
    }

    /// Inverse conjugation U^dagger P U.
    pub fn propagate_inverse(&self, p: &PauliOp) -> PauliOp {
        debug_assert_eq!(p.n(), self.n);
        let mut x = p.x_bits();
        let mut z = p.z_bits();
        let mut sign = p.sign();
        for g in self.gates.iter().rev() {
            apply_gate(*g, &mut x, &mut z, &mut sign, true);
        }
        PauliOp::new(self.n, x, z)
            .expect("bits stay in range")
            .with_sign(sign)
    }
}

fn apply_gate(g: Gate, x: &mut u64, z: &mut u64, sign: &mut i8, inverse: bool) {
    match g {
        Gate::H(q) => {
            let bit = 1u64 << q;
            // X <-> Z; Y -> -Y.
            if *x & bit != 0 && *z & bit != 0 {
                *sign = -*sign;
            }
            let xq = *x & bit;
            let zq = *z & bit;
            *x = (*x & !bit) | zq;
            *z = (*z & !bit) | xq;
        }
        Gate::S(q) => {
            let bit = 1u64 << q;
            if *x & bit != 0 {
                // Forward: X -> Y, Y -> -X. Inverse: X -> -Y, Y -> X.
                let had_z = *z & bit != 0;
                if had_z != inverse {
                    *sign = -*sign;
                }
                *z ^= bit;
            }
        }
        Gate::Cnot(c, t) => {
            let cb = 1u64 << c;
            let tb = 1u64 << t;
            let xc = *x & cb != 0;
            let zc = *z & cb != 0;
            let xt = *x & tb != 0;
            let zt = *z & tb != 0;
            if xc && zt && (xt == zc) {
                *sign = -*sign;
            }
            if xc {
                *x ^= tb;
            }
            if zt {
                *z ^= cb;
            }
        }
    }
}
