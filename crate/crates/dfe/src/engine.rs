//! The state-certification protocol: choose the number of measurement
//! settings for the requested regime, draw Pauli settings by importance,
//! schedule repetitions per setting, and assemble the fidelity estimate
//! with its confidence interval and copy accounting.
//!
//! Per-setting RNG streams are derived from the config seed, so parallel
//! and sequential execution produce bitwise-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DfeError, Result};
use crate::measurement::{copies_for_state_setting, measure_setting};
use crate::pauli::char_fn;
use crate::sampler::{DrawnSetting, ImportanceDistribution, SamplerMode, CHI_ZERO_TOL};
use crate::states::StateModel;
use crate::Caps;

/// Which setting-count rule (and copy bound) the run uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    /// Chebyshev-based: ell = ceil(1/(eps^2 delta)); works for any target.
    Generic,
    /// Hoeffding-based for targets whose nonzero Pauli expectations all
    /// have magnitude >= alpha: ell = ceil(2 ln(2/delta) / (alpha^2 eps^2)).
    WellConditioned { alpha: f64 },
    /// For noise that only shrinks the characteristic function:
    /// ell = ceil(2 ln(2/delta) / eps^2) from the two-sided tail bound, or
    /// the bare rate ceil(ln(1/delta)/eps^2) with `minimal_constant` set.
    ShrinkingNoise { minimal_constant: bool },
    /// Generic ell over a truncated target; copies get a certainty bound.
    Truncated { beta: f64 },
}

impl Regime {
    pub fn describe(&self) -> String {
        match self {
            Regime::Generic => "generic".into(),
            Regime::WellConditioned { alpha } => format!("well_conditioned(alpha={alpha})"),
            Regime::ShrinkingNoise { minimal_constant } => {
                if *minimal_constant {
                    "shrinking_noise(ln(1/delta)/eps^2)".into()
                } else {
                    "shrinking_noise(2 ln(2/delta)/eps^2)".into()
                }
            }
            Regime::Truncated { beta } => format!("truncated(beta={beta})"),
        }
    }

    fn ell_formula(&self) -> &'static str {
        match self {
            Regime::Generic | Regime::Truncated { .. } => "ceil(1/(eps^2 delta))",
            Regime::WellConditioned { .. } => "ceil(2 ln(2/delta)/(alpha^2 eps^2))",
            Regime::ShrinkingNoise {
                minimal_constant: false,
            } => "ceil(2 ln(2/delta)/eps^2)",
            Regime::ShrinkingNoise {
                minimal_constant: true,
            } => "ceil(ln(1/delta)/eps^2)",
        }
    }
}

/// Protocol parameters: accuracy eps, failure probability delta, regime,
/// seed, and enumeration caps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DfeConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub regime: Regime,
    pub seed: u64,
    #[serde(default)]
    pub caps: Caps,
}

impl DfeConfig {
    pub fn new(epsilon: f64, delta: f64, regime: Regime, seed: u64) -> Self {
        Self {
            epsilon,
            delta,
            regime,
            seed,
            caps: Caps::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(DfeError::InvalidParameter(format!(
                    "{name} = {v} outside (0, 1)"
                )));
            }
        }
        match self.regime {
            Regime::WellConditioned { alpha } if !(alpha > 0.0 && alpha <= 1.0) => Err(
                DfeError::InvalidParameter(format!("alpha = {alpha} outside (0, 1]")),
            ),
            Regime::Truncated { beta } if !(beta > 0.0 && beta < 1.0) => Err(
                DfeError::InvalidParameter(format!("beta = {beta} outside (0, 1)")),
            ),
            _ => Ok(()),
        }
    }
}

/// Number of measurement settings for the configured regime.
pub fn settings_count(config: &DfeConfig) -> Result<u64> {
    config.validate()?;
    let eps2 = config.epsilon * config.epsilon;
    let raw = match config.regime {
        Regime::Generic | Regime::Truncated { .. } => 1.0 / (eps2 * config.delta),
        Regime::WellConditioned { alpha } => {
            2.0 * (2.0 / config.delta).ln() / (alpha * alpha * eps2)
        }
        Regime::ShrinkingNoise {
            minimal_constant: false,
        } => 2.0 * (2.0 / config.delta).ln() / eps2,
        Regime::ShrinkingNoise {
            minimal_constant: true,
        } => (1.0 / config.delta).ln() / eps2,
    };
    Ok(raw.ceil().max(1.0) as u64)
}

/// Upper bound on the expected total number of copies for the generic
/// regime: 1 + 1/(eps^2 delta) + (2d/eps^2) ln(2/delta).
pub fn expected_copies_bound(epsilon: f64, delta: f64, d: f64) -> f64 {
    1.0 + 1.0 / (epsilon * epsilon * delta) + (2.0 * d / (epsilon * epsilon)) * (2.0 / delta).ln()
}

/// Copy bound attached to a run, with its interpretation.
fn copies_bound_for(regime: &Regime, ell: u64, epsilon: f64, delta: f64, d: f64) -> (f64, &'static str) {
    let eps2 = epsilon * epsilon;
    let log2d = (2.0 / delta).ln();
    match regime {
        Regime::Generic => (expected_copies_bound(epsilon, delta, d), "expectation"),
        Regime::ShrinkingNoise { .. } => (ell as f64 + 2.0 * d * log2d / eps2, "expectation"),
        Regime::WellConditioned { alpha } => (
            ell as f64 * (1.0 + 2.0 * log2d / (alpha * alpha * ell as f64 * eps2)),
            "certainty",
        ),
        Regime::Truncated { beta } => (
            ell as f64 * (1.0 + 2.0 * d * log2d / (beta * beta * ell as f64 * eps2)),
            "certainty",
        ),
    }
}

/// The ideal estimator X = chi_sigma(k) / chi_rho(k); needs exact access to
/// the true state, so this is the analysis/testing path.
pub fn ideal_estimator_x(
    k: u128,
    target: &ImportanceDistribution,
    true_state: &StateModel,
) -> Result<f64> {
    let (_, chi_rho) = target.lookup(k)?;
    if chi_rho.abs() < CHI_ZERO_TOL {
        return Err(DfeError::ZeroCharValue { k });
    }
    let chi_sigma = char_fn(true_state, k)?.chi;
    Ok(chi_sigma / chi_rho)
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

/// Everything recorded about one measurement setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SettingRecord {
    pub setting: usize,
    /// Flat Pauli index, serialized as a decimal string.
    #[serde(with = "u128_string")]
    pub k: u128,
    pub pauli: String,
    /// chi_rho(k_i), signed.
    pub chi_target: f64,
    /// m_i: copies consumed for this setting.
    pub copies: u64,
    /// X~_i = sum_j A_ij / (m_i sqrt(d) chi_rho(k_i)).
    pub x_tilde: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub regime: String,
    pub ell_formula: String,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub sampler: SamplerMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<String>,
    /// Exact ||rho2 - rho||_2 when estimating against a truncated target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_bias_bound: Option<f64>,
    /// Exact Tr(rho sigma) when the harness can compute it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_overlap: Option<f64>,
}

/// Full outcome record of one protocol run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DfeResult {
    pub n: usize,
    /// The fidelity estimate Y~.
    pub y_tilde: f64,
    pub ell: u64,
    pub m_total: u64,
    /// With probability >= 1 - 2 delta the fidelity lies in
    /// [y_tilde - 2 eps, y_tilde + 2 eps].
    pub ci_low: f64,
    pub ci_high: f64,
    pub copies_bound: f64,
    /// "expectation" (bound on E[m]) or "certainty" (holds for every run).
    pub copies_bound_kind: String,
    pub metadata: RunMetadata,
    pub settings: Vec<SettingRecord>,
}

impl DfeResult {
    /// The Hoeffding constant sum_i 4/(ell^2 m_i d chi_i^2) from the
    /// per-setting records; at most 2 eps^2 / ln(2/delta) by construction.
    pub fn hoeffding_constant(&self) -> f64 {
        let d = (1u128 << self.n) as f64;
        let ell = self.ell as f64;
        self.settings
            .iter()
            .map(|s| 4.0 / (ell * ell * s.copies as f64 * d * s.chi_target * s.chi_target))
            .sum()
    }

    /// Y recomputed from the recorded settings with exact chi_sigma values;
    /// isolates sampling error from shot noise.
    pub fn ideal_y_against(&self, true_state: &StateModel) -> Result<f64> {
        let sqrt_d = ((1u128 << self.n) as f64).sqrt();
        let mut sum = 0.0;
        for rec in &self.settings {
            let op = crate::pauli::PauliOp::from_index(self.n, rec.k)?;
            let e = crate::pauli::pauli_expectation(true_state, &op)?;
            sum += e / sqrt_d / rec.chi_target;
        }
        Ok(sum / self.settings.len() as f64)
    }
}

/// The infinite-precision run: the same importance draws, with X computed
/// from exact expectations instead of finite shot statistics.
#[derive(Debug, Clone)]
pub struct IdealRun {
    pub y: f64,
    pub draws: Vec<DrawnSetting>,
}

fn draw_settings(
    dist: &ImportanceDistribution,
    ell: u64,
    seed: u64,
) -> Vec<DrawnSetting> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(0);
    (0..ell).map(|_| dist.draw(&mut rng)).collect()
}

fn check_dimensions(dist: &ImportanceDistribution, true_state: &StateModel) -> Result<()> {
    if dist.n() != true_state.n() {
        return Err(DfeError::DimensionMismatch {
            op_qubits: dist.n(),
            state_qubits: true_state.n(),
        });
    }
    Ok(())
}

/// Run only the sampling stage, scoring each setting with the exact
/// estimator X = chi_sigma / chi_rho. Uses the same draw stream as
/// [`estimate_fidelity`], so both stages see identical settings for a seed.
pub fn ideal_estimate(
    dist: &ImportanceDistribution,
    true_state: &StateModel,
    config: &DfeConfig,
) -> Result<IdealRun> {
    check_dimensions(dist, true_state)?;
    let ell = settings_count(config)?;
    let draws = draw_settings(dist, ell, config.seed);
    let sqrt_d = dist.dimension().sqrt();
    let mut sum = 0.0;
    for drawn in &draws {
        let e = crate::pauli::pauli_expectation(true_state, &drawn.op)?;
        sum += e / sqrt_d / drawn.chi;
    }
    Ok(IdealRun {
        y: sum / ell as f64,
        draws,
    })
}

/// Execute the full protocol: ell importance draws, m_i simulated shots per
/// setting, and the assembled estimate with its interval. Deterministic
/// under `config.seed`; settings run in parallel on independent streams.
pub fn estimate_fidelity(
    dist: &ImportanceDistribution,
    true_state: &StateModel,
    config: &DfeConfig,
) -> Result<DfeResult> {
    check_dimensions(dist, true_state)?;
    if matches!(config.regime, Regime::Truncated { .. })
        && dist.mode() != SamplerMode::Truncated
    {
        return Err(DfeError::InvalidParameter(
            "truncated regime requires a truncated sampler".into(),
        ));
    }
    let ell = settings_count(config)?;
    let d = dist.dimension();
    let sqrt_d = d.sqrt();
    let draws = draw_settings(dist, ell, config.seed);

    let settings: Vec<SettingRecord> = draws
        .par_iter()
        .enumerate()
        .map(|(i, drawn)| -> Result<SettingRecord> {
            let m = copies_for_state_setting(drawn.chi, d, ell, config.epsilon, config.delta)?;
            let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
            rng.set_stream(1 + i as u64);
            let shots = measure_setting(true_state, &drawn.op, i, m, &mut rng)?;
            Ok(SettingRecord {
                setting: i,
                k: shots.k,
                pauli: drawn.op.label(),
                chi_target: drawn.chi,
                copies: shots.copies(),
                x_tilde: shots.outcome_sum() as f64 / (m as f64 * sqrt_d * drawn.chi),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let m_total: u64 = settings.iter().map(|s| s.copies).sum();
    let y_tilde = settings.iter().map(|s| s.x_tilde).sum::<f64>() / ell as f64;
    let (copies_bound, bound_kind) =
        copies_bound_for(&config.regime, ell, config.epsilon, config.delta, d);
    let trunc = dist.truncation_info();
    Ok(DfeResult {
        n: dist.n(),
        y_tilde,
        ell,
        m_total,
        ci_low: y_tilde - 2.0 * config.epsilon,
        ci_high: y_tilde + 2.0 * config.epsilon,
        copies_bound,
        copies_bound_kind: bound_kind.to_string(),
        metadata: RunMetadata {
            regime: config.regime.describe(),
            ell_formula: config.regime.ell_formula().to_string(),
            epsilon: config.epsilon,
            delta: config.delta,
            seed: config.seed,
            sampler: dist.mode(),
            noise: None,
            truncation_bias_bound: trunc.map(|t| t.bias_bound),
            truth_overlap: None,
        },
        settings,
    })
}

/// The well-conditioning parameter: the smallest nonzero |Tr(rho W_k)|.
/// Stabilizer tableaus short-circuit to 1; dense representations enumerate
/// all 4^n values under the cap and require a pure input.
pub fn alpha_of(state: &StateModel, caps: &Caps) -> Result<f64> {
    if let StateModel::Stabilizer(_) = state {
        return Ok(1.0);
    }
    if let StateModel::Density(rho) = state {
        if (rho.purity() - 1.0).abs() > 1e-9 {
            return Err(DfeError::InvalidState(format!(
                "alpha is defined for pure targets; purity = {}",
                rho.purity()
            )));
        }
    }
    let sqrt_d = (state.dimension() as f64).sqrt();
    let full = crate::pauli::char_fn_full(state, caps)?;
    let min = full
        .iter()
        .map(|cv| (cv.chi * sqrt_d).abs())
        .filter(|t| *t >= CHI_ZERO_TOL * sqrt_d)
        .fold(f64::INFINITY, f64::min);
    if min.is_infinite() {
        return Err(DfeError::InvalidState(
            "state has no nonzero Pauli expectations".into(),
        ));
    }
    Ok(min)
}
