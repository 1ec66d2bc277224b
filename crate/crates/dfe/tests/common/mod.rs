//! Shared dense oracles for the integration suites. Everything here is
//! built from explicit 2x2 matrices and Kronecker products, independent of
//! the library's bit-level implementation paths.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use dfe::clifford::{CliffordCircuit, Gate};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn mat2(entries: [[Complex64; 2]; 2]) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[entries[0][0], entries[0][1], entries[1][0], entries[1][1]])
}

pub fn pauli_i() -> DMatrix<Complex64> {
    mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]])
}

pub fn pauli_x() -> DMatrix<Complex64> {
    mat2([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]])
}

pub fn pauli_y() -> DMatrix<Complex64> {
    mat2([[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]])
}

pub fn pauli_z() -> DMatrix<Complex64> {
    mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]])
}

fn single(code: u8) -> DMatrix<Complex64> {
    match code {
        0 => pauli_i(),
        1 => pauli_x(),
        2 => pauli_y(),
        _ => pauli_z(),
    }
}

/// Dense matrix of the Pauli with flat index k: per-qubit base-4 digits
/// 0=I, 1=X, 2=Y, 3=Z, built as W_{n-1} (x) ... (x) W_0 so qubit 0 acts on
/// the least significant basis-index bit.
pub fn pauli_matrix_oracle(n: usize, k: u128) -> DMatrix<Complex64> {
    let mut acc = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for q in (0..n).rev() {
        let code = ((k >> (2 * q)) & 3) as u8;
        acc = acc.kronecker(&single(code));
    }
    acc
}

/// Tr(A B) by full matrix multiplication.
pub fn trace_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    (a * b).trace()
}

/// Embed a single-qubit operator on wire q of an n-qubit register.
pub fn embed(n: usize, q: usize, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut acc = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for wire in (0..n).rev() {
        let factor = if wire == q { m.clone() } else { pauli_i() };
        acc = acc.kronecker(&factor);
    }
    acc
}

/// Dense matrix of one gate, built from projectors and embeddings.
pub fn gate_matrix_oracle(n: usize, g: Gate) -> DMatrix<Complex64> {
    let f = std::f64::consts::FRAC_1_SQRT_2;
    match g {
        Gate::H(q) => embed(
            n,
            q,
            &mat2([[c(f, 0.0), c(f, 0.0)], [c(f, 0.0), c(-f, 0.0)]]),
        ),
        Gate::S(q) => embed(
            n,
            q,
            &mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]]),
        ),
        Gate::Cnot(ctrl, tgt) => {
            let p0 = mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
            let p1 = mat2([[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
            embed(n, ctrl, &p0) + embed(n, ctrl, &p1) * embed(n, tgt, &pauli_x())
        }
    }
}

/// Dense unitary of a whole circuit: gates applied in list order.
pub fn circuit_unitary_oracle(circuit: &CliffordCircuit) -> DMatrix<Complex64> {
    let n = circuit.n();
    let d = 1usize << n;
    let mut u = DMatrix::<Complex64>::identity(d, d);
    for g in circuit.gates() {
        u = gate_matrix_oracle(n, *g) * u;
    }
    u
}

/// Random density matrix: normalized G G^dagger for a complex Gaussian G.
pub fn random_density_oracle(n: usize, seed: u64) -> DMatrix<Complex64> {
    let d = 1usize << n;
    let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
    let mut gauss = || {
        // Box-Muller over a splitmix64 stream.
        let mut next = || {
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64
        };
        let u1: f64 = next().max(1e-12);
        let u2: f64 = next();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let g = DMatrix::from_fn(d, d, |_, _| c(gauss(), gauss()));
    let h = &g * g.adjoint();
    let tr = h.trace().re;
    h / c(tr, 0.0)
}

/// Random pure statevector from the same Gaussian stream.
pub fn random_statevector_oracle(n: usize, seed: u64) -> Vec<Complex64> {
    let d = 1usize << n;
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(12345);
    let mut next = || {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut gauss = || {
        let u1: f64 = next().max(1e-12);
        let u2: f64 = next();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut v: Vec<Complex64> = (0..d).map(|_| c(gauss(), gauss())).collect();
    let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut v {
        *a /= norm;
    }
    v
}

/// Haar-ish random unitary: QR of a complex Gaussian matrix with the R
/// diagonal phases folded in.
pub fn random_unitary_oracle(n: usize, seed: u64) -> DMatrix<Complex64> {
    let d = 1usize << n;
    let mut state = seed.wrapping_mul(0xD1342543DE82EF95).wrapping_add(99);
    let mut next = || {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut gauss = || {
        let u1: f64 = next().max(1e-12);
        let u2: f64 = next();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let g = DMatrix::from_fn(d, d, |_, _| c(gauss(), gauss()));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // Fix the phase convention so columns are deterministic.
    let mut u = q;
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = rjj / c(rjj.norm().max(1e-300), 0.0);
        for i in 0..d {
            u[(i, j)] *= phase;
        }
    }
    u
}

/// The superoperator of M -> U M U^dagger in the flattened |i><j| basis.
pub fn unitary_superoperator_oracle(u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let d = u.nrows();
    let mut s = DMatrix::<Complex64>::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            for i in 0..d {
                for j in 0..d {
                    s[(a * d + b, i * d + j)] = u[(a, i)] * u[(b, j)].conj();
                }
            }
        }
    }
    s
}

/// p-value of Pearson's chi-square statistic against expected counts.
pub fn chi_square_p_value(observed: &[u64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| {
            let diff = *o as f64 - e;
            diff * diff / e
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}
