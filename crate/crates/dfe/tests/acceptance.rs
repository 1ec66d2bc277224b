//! Acceptance gate: one test per shipped claim, each printing a PASS line
//! with the measured numbers (visible under `--nocapture`).
//!
//! Run with: cargo test --test acceptance -- --nocapture

mod common;

use std::collections::HashMap;
use std::time::Instant;

use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use dfe::channel::{
    eigenbasis_product_state, estimate_entanglement_fidelity, ChannelModel, ChannelNoise,
    ChannelPairSampler,
};
use dfe::clifford::CliffordCircuit;
use dfe::engine::{
    estimate_fidelity, ideal_estimator_x, settings_count, DfeConfig, Regime,
};
use dfe::harness::{calibration_report, derive_seed, run_fig1, ExperimentSpec};
use dfe::measurement::copies_for_state_setting;
use dfe::pauli::{char_fn_full, PauliOp};
use dfe::sampler::{sample_w_state, truncate, w_state_prob, ImportanceDistribution};
use dfe::states::{dephase, make_ghz, make_haar_random, overlap, PureState, StateModel};
use dfe::Caps;

#[test]
fn criterion_1_haar_random_residual_spread() {
    let start = Instant::now();
    let mut spec = ExperimentSpec::new("fig1");
    spec.n = Some(8);
    spec.trials = Some(200);
    spec.seed = 20110429;
    spec.epsilon = 0.05;
    spec.delta = 0.05;
    // Default noise: independent per-qubit depolarizing at p = 0.1.
    let artifacts = run_fig1(&spec).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&artifacts.summary_json).unwrap();
    let ell = summary["config"]["ell"].as_u64().unwrap();
    let std = summary["residual_std"].as_f64().unwrap();
    let overflow = summary["frac_copies_gt_4x_bound"].as_f64().unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(ell, 8000);
    assert!(
        (0.013..=0.023).contains(&std),
        "residual std {std} outside [1.3%, 2.3%]"
    );
    assert!(
        overflow <= 0.025,
        "fraction of trials above 4x the copies bound: {overflow}"
    );
    assert!(elapsed < 1800.0, "took {elapsed}s, over 30 minutes");
    println!(
        "criterion 1 PASS: n=8, 200 trials, ell={ell}, residual std {:.3}% in [1.3%, 2.3%], \
         {:.1}% of trials above 4x the copies bound, {:.1}s",
        std * 100.0,
        overflow * 100.0,
        elapsed
    );
}

#[test]
fn criterion_2_failure_probability_calibration() {
    let start = Instant::now();
    let cases = [
        ("ghz:3", "depolarize:0.1"),
        ("w:3", "dephase:0.2"),
        ("haar:3:11", "depolarize-global:0.15"),
    ];
    let per_target = 350u64;
    let mut sampling_failures = 0u64;
    let mut shot_failures = 0u64;
    let mut trials = 0u64;
    for (i, (target, noise)) in cases.iter().enumerate() {
        let mut spec = ExperimentSpec::new("calibrate");
        spec.target = Some(target.to_string());
        spec.noise = Some(noise.to_string());
        spec.epsilon = 0.1;
        spec.delta = 0.1;
        spec.trials = Some(per_target);
        spec.seed = 900 + i as u64;
        let report = calibration_report(&spec).unwrap();
        sampling_failures += report.sampling_failures;
        shot_failures += report.shot_failures;
        trials += report.trials;
    }
    assert!(trials >= 1000);
    let delta = 0.1;
    let slack = 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
    let rate1 = sampling_failures as f64 / trials as f64;
    let rate2 = shot_failures as f64 / trials as f64;
    let elapsed = start.elapsed().as_secs_f64();
    assert!(rate1 <= delta + slack, "sampling-stage rate {rate1}");
    assert!(rate2 <= delta + slack, "shot-stage rate {rate2}");
    assert!(elapsed < 300.0, "took {elapsed}s, over 5 minutes");
    println!(
        "criterion 2 PASS: {trials} trials, stage rates {rate1:.4}/{rate2:.4} <= {:.4}, {:.1}s",
        delta + slack,
        elapsed
    );
}

#[test]
fn criterion_3_exact_identity_suite() {
    let caps = Caps::default();
    // (a) Overlap identity at n <= 4 within 1e-9.
    let mut worst_overlap = 0.0f64;
    for n in 2..=4usize {
        let rho = StateModel::Pure(make_haar_random(n, 60 + n as u64).unwrap());
        let sigma = StateModel::Density(
            dephase(
                &StateModel::Pure(make_haar_random(n, 80 + n as u64).unwrap()),
                0.35,
            )
            .unwrap(),
        );
        let want = overlap(&rho, &sigma).unwrap();
        let a = char_fn_full(&rho, &caps).unwrap();
        let b = char_fn_full(&sigma, &caps).unwrap();
        let got: f64 = a.iter().zip(&b).map(|(x, y)| x.chi * y.chi).sum();
        worst_overlap = worst_overlap.max((got - want).abs());
    }
    assert!(worst_overlap < 1e-9, "overlap identity defect {worst_overlap}");

    // (b) Var(X) = Tr(sigma^2) - Tr(rho sigma)^2 within 1e-9 at n <= 4.
    let mut worst_var = 0.0f64;
    for n in 2..=4usize {
        let psi = make_haar_random(n, 200 + n as u64).unwrap();
        let rho = StateModel::Pure(psi.clone());
        let sigma = StateModel::Density(dephase(&rho, 0.25).unwrap());
        let dist = ImportanceDistribution::build_exhaustive(&psi, &caps).unwrap();
        let mut mean = 0.0;
        let mut second = 0.0;
        for cv in dist.enumerate_support(&caps).unwrap() {
            let x = ideal_estimator_x(cv.k, &dist, &sigma).unwrap();
            mean += cv.chi * cv.chi * x;
            second += cv.chi * cv.chi * x * x;
        }
        let var = second - mean * mean;
        let sdense = sigma.to_density().unwrap();
        let want = trace_product(sdense.matrix(), sdense.matrix()).re
            - overlap(&rho, &sigma).unwrap().powi(2);
        worst_var = worst_var.max((var - want).abs());
    }
    assert!(worst_var < 1e-9, "variance identity defect {worst_var}");

    // (c) Channel pair-average equals the superoperator overlap at n = 2
    // within 1e-9.
    let n = 2usize;
    let u_mat = random_unitary_oracle(n, 31);
    let target = ChannelModel::unitary(n, u_mat.clone()).unwrap();
    let circuit = CliffordCircuit::random(n, 14, 6).unwrap();
    let actual = ChannelModel::clifford(circuit.clone())
        .with_noise(ChannelNoise::DepolarizeLocal { p: 0.12 })
        .unwrap();
    let sampler = ChannelPairSampler::new(&target, &caps).unwrap();
    let d2 = 16.0;
    let mut mean = 0.0;
    for e in sampler.entries().unwrap() {
        let x = actual.char_fn(e.k_out, e.k_in).unwrap() / e.chi_u;
        mean += e.chi_u * e.chi_u / d2 * x;
    }
    // Independent route: dense superoperators with explicit Kraus sums.
    let u_super = unitary_superoperator_oracle(&u_mat);
    let v_super = unitary_superoperator_oracle(&circuit_unitary_oracle(&circuit));
    let d = 1usize << n;
    let p = 0.12;
    let mut noise_super = DMatrix::<Complex64>::zeros(d * d, d * d);
    for pattern in 0..4u32.pow(n as u32) {
        let mut prob = 1.0;
        let mut err = DMatrix::<Complex64>::identity(d, d);
        for q in 0..n {
            let code = (pattern / 4u32.pow(q as u32)) % 4;
            let (factor, m) = match code {
                0 => (1.0 - p, None),
                1 => (p / 3.0, Some(pauli_x())),
                2 => (p / 3.0, Some(pauli_y())),
                _ => (p / 3.0, Some(pauli_z())),
            };
            prob *= factor;
            if let Some(m) = m {
                err = embed(n, q, &m) * err;
            }
        }
        noise_super += unitary_superoperator_oracle(&err) * c(prob, 0.0);
    }
    let want = (u_super.adjoint() * noise_super * v_super).trace().re / d2;
    let channel_defect = (mean - want).abs();
    assert!(channel_defect < 1e-9, "channel mean defect {channel_defect}");

    // (d) Eigenbasis reconstruction within 1e-10 at n <= 3.
    let mut worst_recon = 0.0f64;
    for n in 1..=3usize {
        let d = 1usize << n;
        for k in 0..1u128 << (2 * n) {
            let op = PauliOp::from_index(n, k).unwrap();
            let mut acc = DMatrix::<Complex64>::zeros(d, d);
            for a in 0..d as u64 {
                let (prep, lambda) = eigenbasis_product_state(&op, a).unwrap();
                let v = nalgebra::DVector::from_vec(prep.statevector());
                acc += DMatrix::from_fn(d, d, |r, c2| v[r] * v[c2].conj())
                    * c(lambda as f64, 0.0);
            }
            let defect = (acc - pauli_matrix_oracle(n, k))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            worst_recon = worst_recon.max(defect);
        }
    }
    assert!(worst_recon < 1e-10, "reconstruction defect {worst_recon}");

    println!(
        "criterion 3 PASS: overlap {worst_overlap:.2e}, variance {worst_var:.2e}, \
         channel mean {channel_defect:.2e}, reconstruction {worst_recon:.2e}"
    );
}

#[test]
fn criterion_4_w_state_sampler() {
    // (a) Goodness of fit at 10^6 draws for n in {2,3,4}.
    let mut p_values = Vec::new();
    for (n, seed) in [(2usize, 301u64), (3, 302), (4, 303)] {
        let draws = 1_000_000u64;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut counts: HashMap<(u64, u64), u64> = HashMap::new();
        for _ in 0..draws {
            let jk = sample_w_state(n, &mut rng).unwrap();
            *counts.entry(jk).or_default() += 1;
        }
        let mut observed = Vec::new();
        let mut expected = Vec::new();
        for k in 0..1u128 << (2 * n) {
            let op = PauliOp::from_index(n, k).unwrap();
            let p = w_state_prob(n, op.x_bits(), op.z_bits());
            if p.is_zero() {
                assert!(!counts.contains_key(&(op.x_bits(), op.z_bits())));
                continue;
            }
            observed.push(counts.get(&(op.x_bits(), op.z_bits())).copied().unwrap_or(0));
            expected.push(p.to_f64().unwrap() * draws as f64);
        }
        let p_value = chi_square_p_value(&observed, &expected);
        assert!(p_value > 0.001, "n={n}: p={p_value}");
        p_values.push(p_value);
    }

    // (b) Closed-form probabilities equal dense chi^2 within 1e-10, n <= 4.
    let mut worst = 0.0f64;
    for n in 2..=4usize {
        let w = StateModel::Pure(dfe::states::make_w(n).unwrap());
        for k in 0..1u128 << (2 * n) {
            let op = PauliOp::from_index(n, k).unwrap();
            let dense_chi = dfe::pauli::char_fn(&w, k).unwrap().chi;
            let p = w_state_prob(n, op.x_bits(), op.z_bits()).to_f64().unwrap();
            worst = worst.max((dense_chi * dense_chi - p).abs());
        }
    }
    assert!(worst < 1e-10, "probability vs dense defect {worst}");

    // (c) Exact rational normalization for n <= 8.
    for n in 2..=8usize {
        let mut total = Ratio::<i128>::zero();
        for k in 0..1u128 << (2 * n) {
            let op = PauliOp::from_index(n, k).unwrap();
            total += w_state_prob(n, op.x_bits(), op.z_bits());
        }
        assert!(total.is_one(), "n={n}: sum {total}");
    }

    println!(
        "criterion 4 PASS: GOF p-values {:?} all > 0.001, dense defect {worst:.2e}, \
         exact normalization n<=8",
        p_values
    );
}

#[test]
fn criterion_5_stabilizer_and_clifford_scale_independence() {
    let (eps, delta) = (0.05f64, 0.05f64);
    // GHZ targets at n in {4, 8, 12}: certainty bound with alpha = 1.
    let config = DfeConfig::new(eps, delta, Regime::WellConditioned { alpha: 1.0 }, 7);
    let ell = settings_count(&config).unwrap();
    let state_cap = ell as f64 * (1.0 + 2.0 * (2.0 / delta).ln() / (ell as f64 * eps * eps));
    let mut state_totals = Vec::new();
    for n in [4usize, 8, 12] {
        let tab = make_ghz(n).unwrap();
        let dist = ImportanceDistribution::from_stabilizer(&tab);
        let sigma = StateModel::Stabilizer(tab.clone());
        let result = estimate_fidelity(&dist, &sigma, &config).unwrap();
        assert!(
            (result.m_total as f64) <= state_cap,
            "n={n}: m_total {} > cap {state_cap}",
            result.m_total
        );
        state_totals.push(result.m_total);
    }
    assert!(
        state_totals.windows(2).all(|w| w[0] == w[1]),
        "m_total varies with n: {state_totals:?}"
    );

    // Clifford circuit targets (50 gates) at n in {4, 8, 12}: the channel
    // analogue of the certainty bound, m_i <= 1 + 4 ln(4/delta)/(ell eps^2).
    let channel_cap = ell as f64 * (1.0 + 4.0 * (4.0 / delta).ln() / (ell as f64 * eps * eps));
    let mut channel_totals = Vec::new();
    for n in [4usize, 8, 12] {
        let circuit = CliffordCircuit::random(n, 50, 77).unwrap();
        let target = ChannelModel::clifford(circuit.clone());
        let actual = ChannelModel::clifford(circuit);
        let result = estimate_entanglement_fidelity(&target, &actual, &config).unwrap();
        assert!(
            (result.m_total as f64) <= channel_cap,
            "n={n}: m_total {} > cap {channel_cap}",
            result.m_total
        );
        channel_totals.push(result.m_total);
    }
    assert!(
        channel_totals.windows(2).all(|w| w[0] == w[1]),
        "channel m_total varies with n: {channel_totals:?}"
    );

    // Draw cost at n = 50 stays under a millisecond for both samplers.
    let tab = make_ghz(50).unwrap();
    let dist = ImportanceDistribution::from_stabilizer(&tab);
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let reps = 10_000;
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(dist.draw(&mut rng));
    }
    let stab_cost = start.elapsed().as_secs_f64() / reps as f64;
    assert!(stab_cost < 1e-3, "stabilizer draw {stab_cost:.2e}s");

    let circuit = CliffordCircuit::random(50, 50, 5).unwrap();
    let sampler = ChannelPairSampler::new(&ChannelModel::clifford(circuit), &Caps::default())
        .unwrap();
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(sampler.draw(&mut rng));
    }
    let pair_cost = start.elapsed().as_secs_f64() / reps as f64;
    assert!(pair_cost < 1e-3, "pair draw {pair_cost:.2e}s");

    println!(
        "criterion 5 PASS: ell={ell}, GHZ m_total={} (cap {state_cap:.0}), clifford \
         m_total={} (cap {channel_cap:.0}), both n-independent; draws {:.1}us/{:.1}us at n=50",
        state_totals[0],
        channel_totals[0],
        stab_cost * 1e6,
        pair_cost * 1e6
    );
}

#[test]
fn criterion_6_clifford_propagation_oracle() {
    let mut checked = 0u64;
    for circuit_seed in 0..100u64 {
        let circuit = CliffordCircuit::random(3, 20, 5000 + circuit_seed).unwrap();
        let u = circuit_unitary_oracle(&circuit);
        for k in 0..64u128 {
            let p = PauliOp::from_index(3, k).unwrap();
            let got = circuit.propagate(&p);
            let conj = &u * pauli_matrix_oracle(3, k) * u.adjoint();
            let sign = Complex64::new(got.sign() as f64, 0.0);
            let want = pauli_matrix_oracle(3, got.index()) * sign;
            let defect = (&conj - &want).norm();
            assert!(
                defect < 1e-9,
                "circuit {circuit_seed}, k={k}: defect {defect}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 6400);
    println!("criterion 6 PASS: 100 circuits x 64 Paulis match dense conjugation with signs");
}

#[test]
fn criterion_7_truncation_bounds() {
    let caps = Caps::default();
    let d = 8.0f64;
    let (eps, delta) = (0.05f64, 0.05f64);
    let config = DfeConfig::new(eps, delta, Regime::Generic, 0);
    let ell = settings_count(&config).unwrap();
    let mut worst_bias_margin = f64::INFINITY;
    for seed in 0..50u64 {
        let psi = make_haar_random(3, 7000 + seed).unwrap();
        for beta in [0.1f64, 0.3, 0.5] {
            let t = truncate(&psi, beta, &caps).unwrap();
            assert!(
                t.bias_bound() <= 2.0 * beta,
                "seed={seed} beta={beta}: bias {} > {}",
                t.bias_bound(),
                2.0 * beta
            );
            worst_bias_margin = worst_bias_margin.min(2.0 * beta - t.bias_bound());
            let m_cap = 1.0 + 2.0 * d * (2.0 / delta).ln() / (beta * beta * ell as f64 * eps * eps);
            for cv in t.chi2() {
                assert!(
                    cv.chi.abs() >= beta / d,
                    "seed={seed} beta={beta}: retained chi {} below {}",
                    cv.chi,
                    beta / d
                );
                let m = copies_for_state_setting(cv.chi, d, ell, eps, delta).unwrap();
                assert!(
                    (m as f64) <= m_cap,
                    "seed={seed} beta={beta}: m={m} cap={m_cap}"
                );
            }
        }
    }
    println!(
        "criterion 7 PASS: 50 states x beta in {{0.1,0.3,0.5}}; bias, keep rule, and \
         per-setting cap all hold (tightest bias margin {worst_bias_margin:.3})"
    );
}

#[test]
fn criterion_8_channel_end_to_end() {
    let (eps, delta) = (0.05f64, 0.05f64);
    let n = 10usize;
    let d = (1u64 << n) as f64;
    let p = 0.1;
    let circuit = CliffordCircuit::random(n, 50, 424242).unwrap();
    let target = ChannelModel::clifford(circuit.clone());
    let actual = ChannelModel::clifford(circuit)
        .with_noise(ChannelNoise::DepolarizeGlobal { p })
        .unwrap();
    let truth = 1.0 - p + p / (d * d);
    let runs = 100u64;
    let mut hits = 0u64;
    let mut worst_affine = 0.0f64;
    for seed in 0..runs {
        let config = DfeConfig::new(
            eps,
            delta,
            Regime::WellConditioned { alpha: 1.0 },
            derive_seed(88, seed),
        );
        let r = estimate_entanglement_fidelity(&target, &actual, &config).unwrap();
        if (r.f_e - truth).abs() <= 2.0 * eps {
            hits += 1;
        }
        worst_affine = worst_affine.max((r.f_avg - (d * r.f_e + 1.0) / (d + 1.0)).abs());
    }
    let needed = ((1.0 - 2.0 * delta) * runs as f64).ceil() as u64;
    assert!(hits >= needed, "hits {hits}/{runs}, needed {needed}");
    assert!(worst_affine <= 1e-12, "affine map defect {worst_affine}");
    println!(
        "criterion 8 PASS: 10-qubit clifford + global depolarizing 0.1; {hits}/{runs} runs \
         within 2eps of {truth:.7}, affine defect {worst_affine:.1e}"
    );
}

/// Noiseless sanity anchor next to the acceptance gate: a pure-target run
/// with sigma = rho is centered at fidelity 1.
#[test]
fn noiseless_runs_center_at_unit_fidelity() {
    let caps = Caps::default();
    let psi = make_haar_random(4, 9).unwrap();
    let dist = ImportanceDistribution::build_exhaustive(&psi, &caps).unwrap();
    let sigma = StateModel::Pure(psi.clone());
    let mut total = 0.0;
    let runs = 30;
    for seed in 0..runs {
        let config = DfeConfig::new(0.05, 0.05, Regime::Generic, derive_seed(31, seed));
        total += estimate_fidelity(&dist, &sigma, &config).unwrap().y_tilde;
    }
    let mean = total / runs as f64;
    assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    let _ = PureState::basis_state(1, 0).unwrap();
}
