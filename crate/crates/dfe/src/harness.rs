//! Reproducible experiment runner behind the CLI: target/noise parsing,
//! the Haar-random residual study, guarantee calibration, distribution
//! dumps, and machine-readable CSV/JSON output. Identical specs and seeds
//! produce byte-identical output.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, ChannelNoise, ChannelPairSampler};
use crate::clifford::CliffordCircuit;
use crate::engine::{
    estimate_fidelity, expected_copies_bound, settings_count, DfeConfig, DfeResult, Regime,
};
use crate::error::{DfeError, Result};
use crate::pauli::PauliOp;
use crate::sampler::{truncate, ImportanceDistribution};
use crate::states::{
    depolarize, depolarize_local, dephase, make_dicke, make_ghz, make_haar_random, make_w,
    overlap, pure_state_from_json, PureState, StateModel,
};
use crate::Caps;

/// A fully described experiment; the CLI builds one from flags or loads it
/// from a JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// "state" | "channel" | "fig1" | "sample-dist" | "calibrate"
    pub kind: String,
    #[serde(default)]
    pub target: Option<String>,
    /// Defaults to "none" everywhere except fig1, which uses
    /// "depolarize:0.1" when unset.
    #[serde(default)]
    pub noise: Option<String>,
    #[serde(default = "default_accuracy")]
    pub epsilon: f64,
    #[serde(default = "default_accuracy")]
    pub delta: f64,
    #[serde(default)]
    pub regime: Option<String>,
    /// Register size for the Haar-random residual study.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Override for the 4^n enumeration cap.
    #[serde(default)]
    pub max_enumeration_qubits: Option<usize>,
}

fn default_accuracy() -> f64 {
    0.05
}

impl ExperimentSpec {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.into(),
            target: None,
            noise: None,
            epsilon: default_accuracy(),
            delta: default_accuracy(),
            regime: None,
            n: None,
            trials: None,
            seed: 0,
            out: None,
            max_enumeration_qubits: None,
        }
    }

    pub fn caps(&self) -> Caps {
        Caps {
            max_enumeration_qubits: self
                .max_enumeration_qubits
                .unwrap_or(Caps::default().max_enumeration_qubits),
        }
    }

    fn trials_or(&self, default: u64) -> Result<u64> {
        let t = self.trials.unwrap_or(default);
        if t == 0 {
            return Err(DfeError::InvalidParameter("trials must be >= 1".into()));
        }
        Ok(t)
    }
}

/// Stable per-index seed derivation (splitmix64 of master ^ index tag).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateTargetSpec {
    Ghz(usize),
    W(usize),
    Dicke(usize, usize),
    Haar(usize, u64),
    File(PathBuf),
}

pub fn parse_state_target(s: &str) -> Result<StateTargetSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let usage = || DfeError::Parse(format!("bad state target {s:?}"));
    let num = |p: &str| p.parse::<usize>().map_err(|_| usage());
    match parts.as_slice() {
        ["ghz", n] => Ok(StateTargetSpec::Ghz(num(n)?)),
        ["w", n] => Ok(StateTargetSpec::W(num(n)?)),
        ["dicke", n, k] => Ok(StateTargetSpec::Dicke(num(n)?, num(k)?)),
        ["haar", n] => Ok(StateTargetSpec::Haar(num(n)?, 0)),
        ["haar", n, seed] => Ok(StateTargetSpec::Haar(
            num(n)?,
            seed.parse().map_err(|_| usage())?,
        )),
        ["file", path] => Ok(StateTargetSpec::File(PathBuf::from(path))),
        _ => Err(usage()),
    }
}

/// A resolved target: the model used for truth/measurement plus everything
/// needed to build its sampler.
pub struct StateTarget {
    pub spec: StateTargetSpec,
    pub model: StateModel,
    pub desc: String,
}

pub fn build_state_target(spec: &StateTargetSpec) -> Result<StateTarget> {
    let (model, desc) = match spec {
        StateTargetSpec::Ghz(n) => (StateModel::Stabilizer(make_ghz(*n)?), format!("ghz:{n}")),
        StateTargetSpec::W(n) => (StateModel::Pure(make_w(*n)?), format!("w:{n}")),
        StateTargetSpec::Dicke(n, k) => (
            StateModel::Pure(make_dicke(*n, *k)?),
            format!("dicke:{n}:{k}"),
        ),
        StateTargetSpec::Haar(n, seed) => (
            StateModel::Pure(make_haar_random(*n, *seed)?),
            format!("haar:{n}:{seed}"),
        ),
        StateTargetSpec::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let state = pure_state_from_json(&value)?;
            (
                StateModel::Pure(state),
                format!("file:{}", path.display()),
            )
        }
    };
    Ok(StateTarget {
        spec: spec.clone(),
        model,
        desc,
    })
}

/// Smallest nonzero |Tr(rho W)| for a resolved target, using the analytic
/// shortcuts where they exist.
pub fn target_alpha(target: &StateTarget, caps: &Caps) -> Result<f64> {
    match (&target.spec, &target.model) {
        (_, StateModel::Stabilizer(_)) => Ok(1.0),
        (StateTargetSpec::W(n), _) => Ok(w_state_alpha(*n)),
        _ => crate::engine::alpha_of(&target.model, caps),
    }
}

/// Analytic minimum nonzero |Tr(rho W)| of the W state: 1/n for odd n,
/// 2/n for even n (the diagonal branch reaches |n-2w| = 1 only when n is
/// odd; the two-flip branch sits at 2/n).
pub fn w_state_alpha(n: usize) -> f64 {
    if n % 2 == 1 {
        1.0 / n as f64
    } else {
        2.0 / n as f64
    }
}

pub fn parse_regime(s: Option<&str>, alpha: impl FnOnce() -> Result<f64>) -> Result<Regime> {
    let Some(s) = s else {
        return Ok(Regime::Generic);
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["generic"] => Ok(Regime::Generic),
        ["well-conditioned"] => Ok(Regime::WellConditioned { alpha: alpha()? }),
        ["well-conditioned", a] => {
            let alpha: f64 = a
                .parse()
                .map_err(|_| DfeError::Parse(format!("bad alpha in {s:?}")))?;
            Ok(Regime::WellConditioned { alpha })
        }
        ["shrinking"] => Ok(Regime::ShrinkingNoise {
            minimal_constant: false,
        }),
        ["shrinking-minimal"] => Ok(Regime::ShrinkingNoise {
            minimal_constant: true,
        }),
        ["truncated", b] => {
            let beta: f64 = b
                .parse()
                .map_err(|_| DfeError::Parse(format!("bad beta in {s:?}")))?;
            Ok(Regime::Truncated { beta })
        }
        _ => Err(DfeError::Parse(format!("unknown regime {s:?}"))),
    }
}

/// Importance sampler for a resolved target under the requested regime.
pub fn build_state_sampler(
    target: &StateTarget,
    regime: &Regime,
    caps: &Caps,
) -> Result<ImportanceDistribution> {
    if let Regime::Truncated { beta } = regime {
        let pure = target_pure_form(target)?;
        let truncated = truncate(&pure, *beta, caps)?;
        return ImportanceDistribution::from_truncated(&truncated);
    }
    match (&target.spec, &target.model) {
        (StateTargetSpec::W(n), _) => ImportanceDistribution::w_state(*n),
        (_, StateModel::Stabilizer(tab)) => Ok(ImportanceDistribution::from_stabilizer(tab)),
        (_, StateModel::Pure(p)) => ImportanceDistribution::build_exhaustive(p, caps),
        (_, StateModel::Density(_)) => Err(DfeError::InvalidState(
            "target must be pure or stabilizer".into(),
        )),
    }
}

fn target_pure_form(target: &StateTarget) -> Result<PureState> {
    match &target.model {
        StateModel::Pure(p) => Ok(p.clone()),
        StateModel::Stabilizer(t) => PureState::new(t.n(), t.to_statevector()?),
        StateModel::Density(_) => Err(DfeError::InvalidState(
            "target must be pure or stabilizer".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateNoise {
    None,
    /// Independent per-qubit depolarizing with per-qubit strength p.
    DepolarizeLocal(f64),
    /// Global white-noise mixing.
    DepolarizeGlobal(f64),
    /// Independent per-qubit phase flips.
    Dephase(f64),
}

pub fn parse_state_noise(s: &str) -> Result<StateNoise> {
    let parts: Vec<&str> = s.split(':').collect();
    let usage = || DfeError::Parse(format!("bad noise {s:?}"));
    let strength = |p: &str| p.parse::<f64>().map_err(|_| usage());
    match parts.as_slice() {
        ["none"] => Ok(StateNoise::None),
        ["depolarize", p] => Ok(StateNoise::DepolarizeLocal(strength(p)?)),
        ["depolarize-global", p] => Ok(StateNoise::DepolarizeGlobal(strength(p)?)),
        ["dephase", p] => Ok(StateNoise::Dephase(strength(p)?)),
        _ => Err(usage()),
    }
}

/// The lab state: the target degraded by the requested noise.
pub fn apply_state_noise(target: &StateModel, noise: StateNoise) -> Result<StateModel> {
    Ok(match noise {
        StateNoise::None => target.clone(),
        StateNoise::DepolarizeLocal(p) => StateModel::Density(depolarize_local(target, p)?),
        StateNoise::DepolarizeGlobal(p) => StateModel::Density(depolarize(target, p)?),
        StateNoise::Dephase(p) => StateModel::Density(dephase(target, p)?),
    })
}

pub fn noise_desc(noise: StateNoise) -> String {
    match noise {
        StateNoise::None => "none".into(),
        StateNoise::DepolarizeLocal(p) => format!(
            "depolarize:{p} (per-qubit, (1-p)rho + (p/3)(XrhoX+YrhoY+ZrhoZ) on each qubit)"
        ),
        StateNoise::DepolarizeGlobal(p) => format!("depolarize-global:{p} ((1-p)rho + p I/d)"),
        StateNoise::Dephase(p) => format!("dephase:{p} (per-qubit, (1-p/2)rho + (p/2)ZrhoZ)"),
    }
}

pub fn parse_channel_noise(s: &str) -> Result<Option<ChannelNoise>> {
    let parts: Vec<&str> = s.split(':').collect();
    let usage = || DfeError::Parse(format!("bad noise {s:?}"));
    let strength = |p: &str| p.parse::<f64>().map_err(|_| usage());
    match parts.as_slice() {
        ["none"] => Ok(None),
        ["depolarize", p] => Ok(Some(ChannelNoise::DepolarizeLocal { p: strength(p)? })),
        ["depolarize-global", p] => Ok(Some(ChannelNoise::DepolarizeGlobal { p: strength(p)? })),
        ["dephase", p] => Ok(Some(ChannelNoise::DephaseLocal { p: strength(p)? })),
        _ => Err(usage()),
    }
}

pub fn parse_channel_target(s: &str) -> Result<ChannelModel> {
    let parts: Vec<&str> = s.split(':').collect();
    let usage = || DfeError::Parse(format!("bad channel target {s:?}"));
    match parts.as_slice() {
        ["identity", n] => ChannelModel::identity(n.parse().map_err(|_| usage())?),
        ["clifford", path] => {
            let text = std::fs::read_to_string(path)?;
            Ok(ChannelModel::clifford(CliffordCircuit::from_text(&text)?))
        }
        ["random-clifford", n, gates] => Ok(ChannelModel::clifford(CliffordCircuit::random(
            n.parse().map_err(|_| usage())?,
            gates.parse().map_err(|_| usage())?,
            0,
        )?)),
        ["random-clifford", n, gates, seed] => {
            Ok(ChannelModel::clifford(CliffordCircuit::random(
                n.parse().map_err(|_| usage())?,
                gates.parse().map_err(|_| usage())?,
                seed.parse().map_err(|_| usage())?,
            )?))
        }
        _ => Err(usage()),
    }
}

fn require_target(spec: &ExperimentSpec) -> Result<&str> {
    spec.target
        .as_deref()
        .ok_or_else(|| DfeError::InvalidParameter("--target is required".into()))
}

/// Run one state-certification experiment and return the result as pretty
/// JSON (the truth overlap rides along in the metadata).
pub fn run_state(spec: &ExperimentSpec) -> Result<String> {
    let result = state_result(spec)?;
    Ok(serde_json::to_string_pretty(&result)?)
}

fn state_truth(target: &StateModel, sigma: &StateModel, noise: StateNoise) -> Option<f64> {
    if matches!(noise, StateNoise::None) {
        return Some(1.0);
    }
    overlap(target, sigma).ok()
}

/// Single state-run result as a struct; `run_state` serializes this.
pub fn state_result(spec: &ExperimentSpec) -> Result<DfeResult> {
    let caps = spec.caps();
    let target = build_state_target(&parse_state_target(require_target(spec)?)?)?;
    let noise = parse_state_noise(spec.noise.as_deref().unwrap_or("none"))?;
    let sigma = apply_state_noise(&target.model, noise)?;
    let regime = parse_regime(spec.regime.as_deref(), || target_alpha(&target, &caps))?;
    let dist = build_state_sampler(&target, &regime, &caps)?;
    let mut config = DfeConfig::new(spec.epsilon, spec.delta, regime, spec.seed);
    config.caps = caps;
    let mut result = estimate_fidelity(&dist, &sigma, &config)?;
    result.metadata.noise = Some(noise_desc(noise));
    result.metadata.truth_overlap = state_truth(&target.model, &sigma, noise);
    Ok(result)
}

/// Run one channel-certification experiment (entanglement fidelity of the
/// noisy channel against the ideal target) and return pretty JSON.
pub fn run_channel(spec: &ExperimentSpec) -> Result<String> {
    let caps = spec.caps();
    let target = parse_channel_target(require_target(spec)?)?;
    let actual = match parse_channel_noise(spec.noise.as_deref().unwrap_or("none"))? {
        Some(noise) => target.clone().with_noise(noise)?,
        None => target.clone(),
    };
    let regime = parse_regime(spec.regime.as_deref(), || Ok(1.0))?;
    let mut config = DfeConfig::new(spec.epsilon, spec.delta, regime, spec.seed);
    config.caps = caps;
    let result = crate::channel::estimate_entanglement_fidelity(&target, &actual, &config)?;
    let truth = channel_truth_f_e(&target, &actual, &caps);
    let mut value = serde_json::to_value(&result)?;
    if let Some(t) = truth {
        value["metadata"]["truth_f_e"] = serde_json::json!(t);
    }
    Ok(serde_json::to_string_pretty(&value)?)
}

/// Exact entanglement fidelity Tr(U^dag E)/d^2 when cheaply computable.
/// Under the enumeration cap the sum over pairs is exact for any pair of
/// channels; beyond it, only the global-depolarizing closed form is
/// available, which requires `actual` to be `target` composed with the
/// noise (how the harness builds it).
pub fn channel_truth_f_e(
    target: &ChannelModel,
    actual: &ChannelModel,
    caps: &Caps,
) -> Option<f64> {
    let d = target.dimension();
    if caps.check_enumeration(target.n()).is_err() {
        if let Some(ChannelNoise::DepolarizeGlobal { p }) = actual.noise() {
            return Some(1.0 - p + p / (d * d));
        }
        return None;
    }
    let count = 1u128 << (2 * target.n());
    let sampler = ChannelPairSampler::new(target, caps).ok()?;
    let mut total = 0.0;
    match sampler.entries() {
        Some(entries) => {
            for e in entries {
                total += e.chi_u * actual.char_fn(e.k_out, e.k_in).ok()?;
            }
        }
        None => {
            // Clifford target: chi_U is supported on one output per input.
            for k_in in 0..count {
                let in_op = PauliOp::from_index(target.n(), k_in).ok()?;
                let image = match target.kind() {
                    crate::channel::ChannelKind::Clifford(c) => c.propagate(&in_op),
                    crate::channel::ChannelKind::Unitary(_) => unreachable!(),
                };
                total += image.sign() as f64 * actual.char_fn(image.index(), k_in).ok()?;
            }
        }
    }
    Some(total / (d * d))
}

/// Dump the (k, Pr(k)) table of a target's importance distribution as CSV.
pub fn run_sample_dist(spec: &ExperimentSpec) -> Result<String> {
    let caps = spec.caps();
    let target = build_state_target(&parse_state_target(require_target(spec)?)?)?;
    let regime = parse_regime(spec.regime.as_deref(), || target_alpha(&target, &caps))?;
    let dist = build_state_sampler(&target, &regime, &caps)?;
    let support = dist.enumerate_support(&caps)?;
    let n = dist.n();
    let mut out = String::from("k,pauli,chi,prob\n");
    for cv in support {
        let op = PauliOp::from_index(n, cv.k)?;
        out.push_str(&format!(
            "{},{},{},{}\n",
            cv.k,
            op.label(),
            cv.chi,
            cv.chi * cv.chi
        ));
    }
    Ok(out)
}

/// Fixed-width histogram; values outside the range land in the edge bins.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn build(lo: f64, hi: f64, bins: usize, values: &[f64]) -> Self {
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for v in values {
            let idx = ((v - lo) / width).floor();
            let idx = (idx.max(0.0) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Self {
            lo,
            hi,
            bins,
            counts,
        }
    }

    /// `bin_lo,bin_hi,count` rows with explicit edges.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        let width = (self.hi - self.lo) / self.bins as f64;
        for (i, c) in self.counts.iter().enumerate() {
            let lo = self.lo + i as f64 * width;
            let hi = self.lo + (i + 1) as f64 * width;
            out.push_str(&format!("{lo},{hi},{c}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Config {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub ell: u64,
    pub trials: u64,
    pub seed: u64,
    pub noise: String,
    pub regime: String,
    pub sampler: String,
    pub residual_bins: (f64, f64, usize),
    pub copies_bins: (f64, f64, usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Summary {
    pub config: Fig1Config,
    pub expected_copies_bound: f64,
    pub residual_mean: f64,
    pub residual_std: f64,
    pub fidelity_mean: f64,
    pub copies_mean: f64,
    pub copies_max: u64,
    pub frac_copies_gt_4x_bound: f64,
}

pub struct Fig1Artifacts {
    pub residual_csv: String,
    pub copies_csv: String,
    pub summary_json: String,
}

/// The Haar-random residual study: per trial, draw a random n-qubit target,
/// degrade it with the configured noise, run the full protocol at the
/// generic setting count, and histogram the residual (estimate minus exact
/// overlap) and the copies consumed.
pub fn run_fig1(spec: &ExperimentSpec) -> Result<Fig1Artifacts> {
    let caps = spec.caps();
    let n = spec.n.unwrap_or(8);
    let trials = spec.trials_or(200)?;
    let noise = parse_state_noise(spec.noise.as_deref().unwrap_or("depolarize:0.1"))?;
    let base_config = DfeConfig::new(spec.epsilon, spec.delta, Regime::Generic, 0);
    let ell = settings_count(&base_config)?;
    let d = (1u128 << n) as f64;
    let bound = expected_copies_bound(spec.epsilon, spec.delta, d);

    #[derive(Clone, Copy)]
    struct TrialOutcome {
        residual: f64,
        truth: f64,
        copies: u64,
    }

    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<TrialOutcome> {
            let psi = make_haar_random(n, derive_seed(spec.seed, 2 * t))?;
            let target = StateModel::Pure(psi.clone());
            let sigma = apply_state_noise(&target, noise)?;
            let dist = ImportanceDistribution::build_exhaustive(&psi, &caps)?;
            let mut config = DfeConfig::new(
                spec.epsilon,
                spec.delta,
                Regime::Generic,
                derive_seed(spec.seed, 2 * t + 1),
            );
            config.caps = caps;
            let result = estimate_fidelity(&dist, &sigma, &config)?;
            let truth = overlap(&target, &sigma)?;
            Ok(TrialOutcome {
                residual: result.y_tilde - truth,
                truth,
                copies: result.m_total,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let residuals: Vec<f64> = outcomes.iter().map(|o| o.residual).collect();
    let copies: Vec<f64> = outcomes.iter().map(|o| o.copies as f64).collect();
    let mean = residuals.iter().sum::<f64>() / trials as f64;
    let var = residuals
        .iter()
        .map(|r| (r - mean) * (r - mean))
        .sum::<f64>()
        / (trials.max(2) - 1) as f64;
    let over = outcomes
        .iter()
        .filter(|o| o.copies as f64 > 4.0 * bound)
        .count();

    let residual_range = 4.0 * spec.epsilon;
    let residual_hist = Histogram::build(-residual_range, residual_range, 80, &residuals);
    let copies_hist = Histogram::build(0.0, 4.0 * bound, 80, &copies);

    let summary = Fig1Summary {
        config: Fig1Config {
            n,
            epsilon: spec.epsilon,
            delta: spec.delta,
            ell,
            trials,
            seed: spec.seed,
            noise: noise_desc(noise),
            regime: "generic".into(),
            sampler: "exhaustive".into(),
            residual_bins: (-residual_range, residual_range, 80),
            copies_bins: (0.0, 4.0 * bound, 80),
        },
        expected_copies_bound: bound,
        residual_mean: mean,
        residual_std: var.sqrt(),
        fidelity_mean: outcomes.iter().map(|o| o.truth).sum::<f64>() / trials as f64,
        copies_mean: copies.iter().sum::<f64>() / trials as f64,
        copies_max: outcomes.iter().map(|o| o.copies).max().unwrap_or(0),
        frac_copies_gt_4x_bound: over as f64 / trials as f64,
    };

    let artifacts = Fig1Artifacts {
        residual_csv: residual_hist.to_csv(),
        copies_csv: copies_hist.to_csv(),
        summary_json: serde_json::to_string_pretty(&summary)?,
    };
    if let Some(dir) = &spec.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("residual_hist.csv"), &artifacts.residual_csv)?;
        std::fs::write(dir.join("copies_hist.csv"), &artifacts.copies_csv)?;
        std::fs::write(dir.join("summary.json"), &artifacts.summary_json)?;
    }
    Ok(artifacts)
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub target: String,
    pub noise: String,
    pub epsilon: f64,
    pub delta: f64,
    pub regime: String,
    pub ell: u64,
    pub trials: u64,
    pub seed: u64,
    pub truth_overlap: f64,
    /// Failures of |Y - Tr(rho sigma)| < eps over the exact-X path.
    pub sampling_failures: u64,
    pub sampling_failure_rate: f64,
    /// Failures of |Y~ - Y| < eps with Y recomputed on the same settings.
    pub shot_failures: u64,
    pub shot_failure_rate: f64,
    /// delta + 3 sqrt(delta(1-delta)/trials).
    pub rate_threshold: f64,
    pub pass: bool,
}

/// Empirical check of both failure-probability guarantees: the sampling
/// stage (exact estimator against the true overlap) and the shot stage
/// (finite-copy estimate against the exact estimator on the same settings).
pub fn run_calibration(spec: &ExperimentSpec) -> Result<String> {
    let report = calibration_report(spec)?;
    Ok(serde_json::to_string_pretty(&report)?)
}

pub fn calibration_report(spec: &ExperimentSpec) -> Result<CalibrationReport> {
    let caps = spec.caps();
    let trials = spec.trials_or(1000)?;
    let target = build_state_target(&parse_state_target(require_target(spec)?)?)?;
    let noise = parse_state_noise(spec.noise.as_deref().unwrap_or("none"))?;
    let sigma = apply_state_noise(&target.model, noise)?;
    let regime = parse_regime(spec.regime.as_deref(), || target_alpha(&target, &caps))?;
    let dist = build_state_sampler(&target, &regime, &caps)?;
    let truth = match noise {
        StateNoise::None => 1.0,
        _ => overlap(&target.model, &sigma)?,
    };
    let mut config = DfeConfig::new(spec.epsilon, spec.delta, regime, 0);
    config.caps = caps;
    let ell = settings_count(&config)?;

    let fails: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool)> {
            let mut cfg = config.clone();
            cfg.seed = derive_seed(spec.seed, t);
            let result = estimate_fidelity(&dist, &sigma, &cfg)?;
            let y = result.ideal_y_against(&sigma)?;
            Ok((
                (y - truth).abs() >= spec.epsilon,
                (result.y_tilde - y).abs() >= spec.epsilon,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let sampling_failures = fails.iter().filter(|f| f.0).count() as u64;
    let shot_failures = fails.iter().filter(|f| f.1).count() as u64;
    let rate1 = sampling_failures as f64 / trials as f64;
    let rate2 = shot_failures as f64 / trials as f64;
    let threshold = spec.delta + 3.0 * (spec.delta * (1.0 - spec.delta) / trials as f64).sqrt();
    Ok(CalibrationReport {
        target: target.desc.clone(),
        noise: noise_desc(noise),
        epsilon: spec.epsilon,
        delta: spec.delta,
        regime: config.regime.describe(),
        ell,
        trials,
        seed: spec.seed,
        truth_overlap: truth,
        sampling_failures,
        sampling_failure_rate: rate1,
        shot_failures,
        shot_failure_rate: rate2,
        rate_threshold: threshold,
        pass: rate1 <= threshold && rate2 <= threshold,
    })
}
