//! Simulated single-shot Pauli measurements and per-setting repetition
//! schedules. Shots are i.i.d.: +1 with probability (1 + Tr(sigma W))/2.
//! All logarithms are natural.

use rand::Rng;

use crate::error::{DfeError, Result};
use crate::pauli::{pauli_expectation, PauliOp};
use crate::states::StateModel;

/// Outcomes of repeatedly measuring one Pauli setting.
#[derive(Debug, Clone)]
pub struct ShotRecord {
    /// Position of the setting in the run.
    pub setting: usize,
    /// Flat index of the measured observable.
    pub k: u128,
    /// The +/-1 outcomes, one per copy consumed.
    pub outcomes: Vec<i8>,
}

impl ShotRecord {
    pub fn copies(&self) -> u64 {
        self.outcomes.len() as u64
    }

    pub fn outcome_sum(&self) -> i64 {
        self.outcomes.iter().map(|o| *o as i64).sum()
    }
}

fn bernoulli_pm<R: Rng + ?Sized>(expectation: f64, rng: &mut R) -> i8 {
    let p_plus = ((1.0 + expectation) / 2.0).clamp(0.0, 1.0);
    if rng.gen::<f64>() < p_plus {
        1
    } else {
        -1
    }
}

/// One projective measurement of `p` on `true_state`.
pub fn simulate_shot<R: Rng + ?Sized>(
    true_state: &StateModel,
    p: &PauliOp,
    rng: &mut R,
) -> Result<i8> {
    let e = pauli_expectation(true_state, p)?;
    Ok(bernoulli_pm(e, rng))
}

/// `m` measurements of the same setting; the expectation value is computed
/// once and each shot is an independent coin.
pub fn simulate_shots<R: Rng + ?Sized>(
    true_state: &StateModel,
    p: &PauliOp,
    m: u64,
    rng: &mut R,
) -> Result<Vec<i8>> {
    let e = pauli_expectation(true_state, p)?;
    Ok((0..m).map(|_| bernoulli_pm(e, rng)).collect())
}

/// Consume `m >= 1` copies measuring one setting and record the outcomes.
pub fn measure_setting<R: Rng + ?Sized>(
    true_state: &StateModel,
    p: &PauliOp,
    setting: usize,
    m: u64,
    rng: &mut R,
) -> Result<ShotRecord> {
    if m == 0 {
        return Err(DfeError::InvalidParameter("m must be >= 1".into()));
    }
    Ok(ShotRecord {
        setting,
        k: p.index(),
        outcomes: simulate_shots(true_state, p, m, rng)?,
    })
}

fn check_protocol_params(ell: u64, epsilon: f64, delta: f64) -> Result<()> {
    if ell == 0 {
        return Err(DfeError::InvalidParameter("ell must be >= 1".into()));
    }
    for (name, v) in [("epsilon", epsilon), ("delta", delta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(DfeError::InvalidParameter(format!(
                "{name} = {v} outside (0, 1)"
            )));
        }
    }
    Ok(())
}

/// Copies of sigma for one state setting:
/// m_i = ceil( 2 ln(2/delta) / (d chi^2 ell eps^2) ).
pub fn copies_for_state_setting(
    chi: f64,
    d: f64,
    ell: u64,
    epsilon: f64,
    delta: f64,
) -> Result<u64> {
    check_protocol_params(ell, epsilon, delta)?;
    if chi == 0.0 || !chi.is_finite() {
        return Err(DfeError::ZeroCharValue { k: 0 });
    }
    let raw = 2.0 * (2.0 / delta).ln() / (d * chi * chi * ell as f64 * epsilon * epsilon);
    Ok(raw.ceil().max(1.0) as u64)
}

/// Channel uses for one pair setting:
/// m_i = ceil( 4 ln(4/delta) / (chi_U^2 ell eps^2) ).
pub fn copies_for_channel_setting(
    chi_u: f64,
    ell: u64,
    epsilon: f64,
    delta: f64,
) -> Result<u64> {
    check_protocol_params(ell, epsilon, delta)?;
    if chi_u == 0.0 || !chi_u.is_finite() {
        return Err(DfeError::ZeroCharValue { k: 0 });
    }
    let raw = 4.0 * (4.0 / delta).ln() / (chi_u * chi_u * ell as f64 * epsilon * epsilon);
    Ok(raw.ceil().max(1.0) as u64)
}
