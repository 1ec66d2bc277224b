//! Importance sampling of Pauli indices with Pr(k) = chi_rho(k)^2.
//!
//! Four interchangeable backends: exhaustive alias tables built from the
//! full characteristic vector, uniform stabilizer-group draws, a closed-form
//! O(n) sampler for the W state, and truncated targets that zero small
//! characteristic values in exchange for a certainty bound on copies.

use num_integer::binomial;
use num_rational::Ratio;
use num_traits::Zero;
use rand::Rng;

use crate::error::{DfeError, Result};
use crate::pauli::{bit_mask, char_fn_full, CharValue, PauliOp};
use crate::stabilizer::StabilizerTableau;
use crate::states::{PureState, StateModel};
use crate::Caps;

/// Characteristic values with |chi| below this are treated as exactly zero
/// when building samplers, so floating-point noise cannot create outcomes
/// with enormous 1/chi weights.
pub const CHI_ZERO_TOL: f64 = 1e-12;

/// One sampled measurement setting: the observable to measure and the
/// target's (signed) characteristic value at it.
#[derive(Debug, Clone, Copy)]
pub struct DrawnSetting {
    pub op: PauliOp,
    pub chi: f64,
}

/// Walker/Vose alias table: O(n) setup, O(1) draws.
#[derive(Debug, Clone)]
pub(crate) struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    pub(crate) fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        assert!(n > 0, "alias table needs at least one weight");
        let total: f64 = weights.iter().sum();
        assert!(total > 0.0, "alias table needs positive total weight");
        let mut prob: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small: Vec<usize> = Vec::new();
        let mut large: Vec<usize> = Vec::new();
        for (i, p) in prob.iter().enumerate() {
            if *p < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(s), Some(l)) = (small.pop(), large.pop()) {
            alias[s] = l;
            prob[l] = (prob[l] + prob[s]) - 1.0;
            if prob[l] < 1.0 {
                small.push(l);
            } else {
                large.push(l);
            }
        }
        // Leftovers are 1.0 up to rounding.
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
        }
        Self { prob, alias }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    Exhaustive,
    Stabilizer,
    WState,
    Truncated,
}

impl std::fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SamplerMode::Exhaustive => "exhaustive",
            SamplerMode::Stabilizer => "stabilizer",
            SamplerMode::WState => "w_state",
            SamplerMode::Truncated => "truncated",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Table {
        entries: Vec<CharValue>,
        alias: AliasTable,
    },
    Stabilizer(StabilizerTableau),
    WState {
        // Cumulative distribution of the Hamming weight w in the j = 0
        // branch, q(w) = C(n,w)(n-2w)^2 / (n 2^n).
        weight_cdf: Vec<f64>,
    },
}

/// Reporting details carried by samplers built from a truncated target.
#[derive(Debug, Clone, Copy)]
pub struct TruncationInfo {
    pub beta: f64,
    pub norm1: f64,
    pub bias_bound: f64,
}

/// A sampler over Pauli indices with Pr(k) = chi_rho(k)^2, paired with the
/// signed chi values the estimator divides by.
#[derive(Debug, Clone)]
pub struct ImportanceDistribution {
    n: usize,
    mode: SamplerMode,
    backend: Backend,
    truncation: Option<TruncationInfo>,
}

impl ImportanceDistribution {
    /// Full-enumeration sampler for an arbitrary pure target state.
    pub fn build_exhaustive(state: &PureState, caps: &Caps) -> Result<Self> {
        let full = char_fn_full(&StateModel::Pure(state.clone()), caps)?;
        Self::from_char_values(state.n(), full, SamplerMode::Exhaustive)
    }

    /// Sampler over the characteristic support of a truncated target.
    pub fn from_truncated(target: &TruncatedTarget) -> Result<Self> {
        let mut dist =
            Self::from_char_values(target.n, target.chi2.clone(), SamplerMode::Truncated)?;
        dist.truncation = Some(TruncationInfo {
            beta: target.beta,
            norm1: target.norm1,
            bias_bound: target.bias_bound,
        });
        Ok(dist)
    }

    fn from_char_values(n: usize, values: Vec<CharValue>, mode: SamplerMode) -> Result<Self> {
        let mut entries: Vec<CharValue> = values
            .into_iter()
            .filter(|cv| cv.chi.abs() >= CHI_ZERO_TOL)
            .collect();
        if entries.is_empty() {
            return Err(DfeError::InvalidState(
                "characteristic function has empty support".into(),
            ));
        }
        entries.sort_by_key(|a| a.k);
        let weights: Vec<f64> = entries.iter().map(|cv| cv.chi * cv.chi).collect();
        let alias = AliasTable::new(&weights);
        Ok(Self {
            n,
            mode,
            backend: Backend::Table { entries, alias },
            truncation: None,
        })
    }

    /// Uniform sampler over the 2^n stabilizer-group elements; O(n^2) per
    /// draw and never enumerates 4^n operators.
    pub fn from_stabilizer(tableau: &StabilizerTableau) -> Self {
        Self {
            n: tableau.n(),
            mode: SamplerMode::Stabilizer,
            backend: Backend::Stabilizer(tableau.clone()),
            truncation: None,
        }
    }

    /// Closed-form sampler for the W state; O(n) per draw.
    pub fn w_state(n: usize) -> Result<Self> {
        if !(2..=crate::pauli::MAX_QUBITS).contains(&n) {
            return Err(DfeError::InvalidParameter(format!(
                "w-state sampler needs 2 <= n <= 64, got {n}"
            )));
        }
        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = Ratio::<i128>::zero();
        for w in 0..=n {
            acc += w_weight_prob(n, w);
            cdf.push(ratio_to_f64(acc));
        }
        Ok(Self {
            n,
            mode: SamplerMode::WState,
            backend: Backend::WState { weight_cdf: cdf },
            truncation: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> SamplerMode {
        self.mode
    }

    pub fn truncation_info(&self) -> Option<TruncationInfo> {
        self.truncation
    }

    pub fn dimension(&self) -> f64 {
        (1u128 << self.n) as f64
    }

    /// Draw a measurement setting; Pr(op) = chi^2 for every reachable op,
    /// and chi is never zero.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DrawnSetting {
        match &self.backend {
            Backend::Table { entries, alias } => {
                let cv = entries[alias.sample(rng)];
                DrawnSetting {
                    op: PauliOp::from_index(self.n, cv.k).expect("table holds valid indices"),
                    chi: cv.chi,
                }
            }
            Backend::Stabilizer(tab) => {
                let g = tab.sample_group_element(rng);
                let chi = g.sign() as f64 / self.dimension().sqrt();
                DrawnSetting {
                    op: g.unsigned(),
                    chi,
                }
            }
            Backend::WState { weight_cdf } => {
                let (j, k) = sample_w_state_with_cdf(self.n, weight_cdf, rng);
                let op = PauliOp::new(self.n, j, k).expect("bits in range");
                DrawnSetting {
                    op,
                    chi: w_state_char(self.n, j, k),
                }
            }
        }
    }

    /// (Pr(k), chi(k)) for a flat index; Pr is zero off the support.
    pub fn lookup(&self, k: u128) -> Result<(f64, f64)> {
        let op = PauliOp::from_index(self.n, k)?;
        Ok(match &self.backend {
            Backend::Table { entries, .. } => match entries.binary_search_by(|cv| cv.k.cmp(&k)) {
                Ok(i) => {
                    let chi = entries[i].chi;
                    (chi * chi, chi)
                }
                Err(_) => (0.0, 0.0),
            },
            Backend::Stabilizer(tab) => {
                let e = tab.expectation(&op);
                let chi = e / self.dimension().sqrt();
                (chi * chi, chi)
            }
            Backend::WState { .. } => {
                let chi = w_state_char(self.n, op.x_bits(), op.z_bits());
                (chi * chi, chi)
            }
        })
    }

    /// Number of support points, when cheaply computable.
    pub fn support_size(&self) -> u128 {
        match &self.backend {
            Backend::Table { entries, .. } => entries.len() as u128,
            Backend::Stabilizer(_) => 1u128 << self.n,
            Backend::WState { .. } => {
                let n = self.n as u128;
                let zeros = if self.n.is_multiple_of(2) {
                    binomial(n, n / 2)
                } else {
                    0
                };
                let z_branch = (1u128 << self.n) - zeros;
                let x_branch = n * (n - 1) / 2 * (1u128 << (self.n - 1));
                z_branch + x_branch
            }
        }
    }

    /// Materialize the whole support as (k, chi) pairs, subject to an
    /// enumeration guard. Entries are sorted by k.
    pub fn enumerate_support(&self, caps: &Caps) -> Result<Vec<CharValue>> {
        match &self.backend {
            Backend::Table { entries, .. } => Ok(entries.clone()),
            Backend::Stabilizer(tab) => {
                if self.n > 2 * caps.max_enumeration_qubits {
                    return Err(DfeError::EnumerationCapExceeded {
                        n: self.n,
                        cap: 2 * caps.max_enumeration_qubits,
                    });
                }
                let sqrt_d = self.dimension().sqrt();
                let mut out: Vec<CharValue> = (0u64..1 << self.n)
                    .map(|subset| {
                        let g = tab.group_element(subset);
                        CharValue {
                            k: g.index(),
                            chi: g.sign() as f64 / sqrt_d,
                        }
                    })
                    .collect();
                out.sort_by_key(|a| a.k);
                Ok(out)
            }
            Backend::WState { .. } => {
                caps.check_enumeration(self.n)?;
                let mut out = Vec::new();
                for k in 0..1u128 << (2 * self.n) {
                    let op = PauliOp::from_index(self.n, k)?;
                    let chi = w_state_char(self.n, op.x_bits(), op.z_bits());
                    if chi.abs() >= CHI_ZERO_TOL {
                        out.push(CharValue { k, chi });
                    }
                }
                Ok(out)
            }
        }
    }
}

fn ratio_to_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// q(w) = C(n,w) (n-2w)^2 / (n 2^n): the Hamming-weight distribution of the
/// Z string in the diagonal branch of the W-state sampler.
pub fn w_weight_prob(n: usize, w: usize) -> Ratio<i128> {
    assert!((1..=64).contains(&n) && w <= n);
    let diff = n as i128 - 2 * w as i128;
    let numer = binomial(n as i128, w as i128) * diff * diff;
    Ratio::new(numer, n as i128 * (1i128 << n))
}

/// Exact sampling probability of the Pauli with X part `j_bits` and Z part
/// `k_bits` under the W-state target: (n-2|k|)^2 / (n^2 d) when j = 0,
/// 4/(n^2 d) when |j| = 2 and j.k is even, zero otherwise.
pub fn w_state_prob(n: usize, j_bits: u64, k_bits: u64) -> Ratio<i128> {
    assert!((2..=64).contains(&n));
    let mask = bit_mask(n);
    assert_eq!(j_bits & !mask, 0);
    assert_eq!(k_bits & !mask, 0);
    let denom = (n as i128) * (n as i128) * (1i128 << n);
    match j_bits.count_ones() {
        0 => {
            let diff = n as i128 - 2 * k_bits.count_ones() as i128;
            Ratio::new(diff * diff, denom)
        }
        2 if (j_bits & k_bits).count_ones().is_multiple_of(2) => Ratio::new(4, denom),
        _ => Ratio::zero(),
    }
}

/// Signed characteristic value chi(k) matching [`w_state_prob`] = chi^2:
/// (n-2|k|)/(n sqrt(d)) in the diagonal branch, +2/(n sqrt(d)) in the
/// two-flip branch.
pub fn w_state_char(n: usize, j_bits: u64, k_bits: u64) -> f64 {
    let sqrt_d = ((1u128 << n) as f64).sqrt();
    match j_bits.count_ones() {
        0 => (n as f64 - 2.0 * k_bits.count_ones() as f64) / (n as f64 * sqrt_d),
        2 if (j_bits & k_bits).count_ones().is_multiple_of(2) => 2.0 / (n as f64 * sqrt_d),
        _ => 0.0,
    }
}

/// Uniform random n-bit string of Hamming weight w (partial Fisher-Yates).
fn random_bits_with_weight<R: Rng + ?Sized>(n: usize, w: usize, rng: &mut R) -> u64 {
    let mut positions: Vec<usize> = (0..n).collect();
    let mut bits = 0u64;
    for i in 0..w {
        let j = rng.gen_range(i..n);
        positions.swap(i, j);
        bits |= 1u64 << positions[i];
    }
    bits
}

fn sample_w_state_with_cdf<R: Rng + ?Sized>(
    n: usize,
    weight_cdf: &[f64],
    rng: &mut R,
) -> (u64, u64) {
    if rng.gen::<f64>() < 1.0 / n as f64 {
        // Diagonal branch: j = 0, |k| drawn from q(w), then a uniform
        // string of that weight.
        let u: f64 = rng.gen();
        let w = weight_cdf.partition_point(|c| *c <= u).min(n);
        (0, random_bits_with_weight(n, w, rng))
    } else {
        // Two-flip branch: uniform weight-2 j, then k from n-1 random bits
        // with the first bit copied to both supported sites (forcing
        // j.k = 0) and the rest filled lowest index first.
        let p = rng.gen_range(0..n);
        let q = {
            let q = rng.gen_range(0..n - 1);
            if q >= p {
                q + 1
            } else {
                q
            }
        };
        let j = (1u64 << p) | (1u64 << q);
        let shared = rng.gen::<bool>();
        let mut k = if shared { j } else { 0 };
        for pos in 0..n {
            if j >> pos & 1 == 0 {
                k |= (rng.gen::<bool>() as u64) << pos;
            }
        }
        (j, k)
    }
}

/// Draw (X bits, Z bits) from the W-state importance distribution in O(n).
pub fn sample_w_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<(u64, u64)> {
    if !(2..=64).contains(&n) {
        return Err(DfeError::InvalidParameter(format!(
            "w-state sampler needs 2 <= n <= 64, got {n}"
        )));
    }
    let mut acc = Ratio::<i128>::zero();
    let mut cdf = Vec::with_capacity(n + 1);
    for w in 0..=n {
        acc += w_weight_prob(n, w);
        cdf.push(ratio_to_f64(acc));
    }
    Ok(sample_w_state_with_cdf(n, &cdf, rng))
}

/// A pure target with small characteristic values zeroed: chi1 keeps
/// |chi| >= beta/d, rho2 = rho1 / ||rho1||_2, and the exact estimation bias
/// ||rho2 - rho||_2 is computed alongside the 2*beta worst-case cap.
#[derive(Debug, Clone)]
pub struct TruncatedTarget {
    n: usize,
    beta: f64,
    chi1: Vec<CharValue>,
    norm1: f64,
    chi2: Vec<CharValue>,
    bias_bound: f64,
}

impl TruncatedTarget {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Surviving characteristic values of the unnormalized rho1.
    pub fn chi1(&self) -> &[CharValue] {
        &self.chi1
    }

    /// ||rho1||_2.
    pub fn norm1(&self) -> f64 {
        self.norm1
    }

    /// Renormalized characteristic values of rho2.
    pub fn chi2(&self) -> &[CharValue] {
        &self.chi2
    }

    /// Exactly computed ||rho2 - rho||_2; at most 2*beta.
    pub fn bias_bound(&self) -> f64 {
        self.bias_bound
    }
}

/// Truncate a pure target's characteristic function at |chi| >= beta/d.
pub fn truncate(state: &PureState, beta: f64, caps: &Caps) -> Result<TruncatedTarget> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(DfeError::InvalidParameter(format!(
            "beta {beta} outside (0, 1)"
        )));
    }
    let n = state.n();
    let full = char_fn_full(&StateModel::Pure(state.clone()), caps)?;
    let threshold = beta / (1u128 << n) as f64;
    let chi1: Vec<CharValue> = full
        .iter()
        .filter(|cv| cv.chi.abs() >= threshold)
        .copied()
        .collect();
    if chi1.is_empty() {
        return Err(DfeError::EmptySupport { beta });
    }
    let norm1 = chi1.iter().map(|cv| cv.chi * cv.chi).sum::<f64>().sqrt();
    let chi2: Vec<CharValue> = chi1
        .iter()
        .map(|cv| CharValue {
            k: cv.k,
            chi: cv.chi / norm1,
        })
        .collect();
    // ||rho2 - rho||_2^2 over the full index set: kept entries differ by
    // the renormalization, dropped entries contribute chi^2.
    let mut kept = chi2.iter();
    let mut bias_sq = 0.0;
    let mut next_kept = kept.next();
    for cv in &full {
        match next_kept {
            Some(k2) if k2.k == cv.k => {
                let diff = k2.chi - cv.chi;
                bias_sq += diff * diff;
                next_kept = kept.next();
            }
            _ => bias_sq += cv.chi * cv.chi,
        }
    }
    Ok(TruncatedTarget {
        n,
        beta,
        chi1,
        norm1,
        chi2,
        bias_bound: bias_sq.sqrt(),
    })
}
