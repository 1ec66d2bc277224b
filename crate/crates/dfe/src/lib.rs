//! Direct fidelity estimation from importance-sampled Pauli measurements.
//!
//! The library certifies a pure target state (or a unitary target channel)
//! against an arbitrary lab state by measuring a randomly chosen set of
//! Pauli observables, weighted by the target's characteristic function.
//! A simulated single-shot measurement backend makes every statistical
//! guarantee checkable numerically at desk scale.
//!
//! Modules:
//! - [`pauli`]: Pauli operators, expectations, characteristic functions
//! - [`states`]: state families, Haar sampling, noise maps
//! - [`stabilizer`]: stabilizer tableaus with O(n^2) expectation queries
//! - [`sampler`]: importance distributions over Pauli indices
//! - [`measurement`]: simulated shots and repetition schedules
//! - [`engine`]: the state-certification protocol
//! - [`clifford`] / [`channel`]: Clifford propagation and channel
//!   certification
//! - [`harness`] / [`cli`]: reproducible experiment runner

#[doc = include_str!("../../../README.md")]
#[cfg(doctest)]
pub struct ReadmeDoctests;

pub mod channel;
pub mod cli;
pub mod clifford;
pub mod engine;
pub mod error;
pub mod harness;
pub mod measurement;
pub mod pauli;
pub mod sampler;
pub mod stabilizer;
pub mod states;

pub use error::{DfeError, Result};
pub use pauli::{char_fn, char_fn_full, pauli_expectation, CharValue, PauliOp};
pub use stabilizer::StabilizerTableau;
pub use states::{DensityMatrix, PureState, StateModel};

/// Work caps for paths that enumerate all 4^n Pauli operators.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Caps {
    /// Exhaustive 4^n enumeration is allowed for n up to this bound.
    pub max_enumeration_qubits: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_enumeration_qubits: 8,
        }
    }
}

impl Caps {
    pub fn check_enumeration(&self, n: usize) -> Result<()> {
        if n > self.max_enumeration_qubits {
            return Err(DfeError::EnumerationCapExceeded {
                n,
                cap: self.max_enumeration_qubits,
            });
        }
        Ok(())
    }
}
