//! Stabilizer states as tableaus of n signed, commuting, independent Pauli
//! generators. Expectation queries run in O(n^2) against a row-reduced form
//! precomputed at construction; they never touch a dense representation.

use rand::Rng;

use crate::error::{DfeError, Result};
use crate::pauli::{bit_mask, PauliOp};

#[derive(Debug, Clone)]
pub struct StabilizerTableau {
    n: usize,
    generators: Vec<PauliOp>,
    // Row-reduced group elements with their unique pivot column, pivot
    // columns 0..n are X bits, n..2n are Z bits.
    reduced: Vec<(usize, PauliOp)>,
}

impl StabilizerTableau {
    /// Build from n signed generators; validates commutation and
    /// independence over GF(2).
    pub fn new(generators: Vec<PauliOp>) -> Result<Self> {
        let n = match generators.first() {
            Some(g) => g.n(),
            None => return Err(DfeError::InvalidTableau("no generators".into())),
        };
        if generators.len() != n {
            return Err(DfeError::InvalidTableau(format!(
                "{} generators for {n} qubits",
                generators.len()
            )));
        }
        for g in &generators {
            if g.n() != n {
                return Err(DfeError::InvalidTableau("mixed qubit counts".into()));
            }
        }
        for (i, a) in generators.iter().enumerate() {
            for b in generators.iter().skip(i + 1) {
                if !a.commutes_with(b) {
                    return Err(DfeError::InvalidTableau(format!(
                        "generators {} and {} anticommute",
                        a.label(),
                        b.label()
                    )));
                }
            }
        }
        let reduced = row_reduce(n, &generators)?;
        Ok(Self {
            n,
            generators,
            reduced,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[PauliOp] {
        &self.generators
    }

    /// Product of the generators selected by `subset` (bit i picks
    /// generator i), with the accumulated sign.
    pub fn group_element(&self, subset: u64) -> PauliOp {
        let mut acc = PauliOp::identity(self.n).expect("valid n");
        let mut rest = subset & bit_mask(self.n);
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            acc = acc
                .mul(&self.generators[i])
                .expect("stabilizer generators commute");
        }
        acc
    }

    /// Uniform draw over the 2^n group elements.
    pub fn sample_group_element<R: Rng + ?Sized>(&self, rng: &mut R) -> PauliOp {
        let subset: u64 = rng.gen::<u64>() & bit_mask(self.n);
        self.group_element(subset)
    }

    /// Tr(rho P) for this stabilizer state: the group sign when +/-P is in
    /// the group, zero otherwise.
    pub fn expectation(&self, p: &PauliOp) -> f64 {
        debug_assert_eq!(p.n(), self.n);
        for g in &self.generators {
            if !g.commutes_with(p) {
                return 0.0;
            }
        }
        let mut acc = PauliOp::identity(self.n).expect("valid n");
        let mut rx = p.x_bits();
        let mut rz = p.z_bits();
        for (col, row) in &self.reduced {
            let hit = if *col < self.n {
                rx >> col & 1 == 1
            } else {
                rz >> (col - self.n) & 1 == 1
            };
            if hit {
                acc = acc.mul(row).expect("group elements commute");
                rx ^= row.x_bits();
                rz ^= row.z_bits();
            }
        }
        if rx != 0 || rz != 0 {
            // Outside the group's span; unreachable for a full-rank tableau.
            return 0.0;
        }
        (acc.sign() * p.sign()) as f64
    }

    /// Dense statevector (up to global phase) for cross-checks at small n.
    pub fn to_statevector(&self) -> Result<Vec<num_complex::Complex64>> {
        use num_complex::Complex64;
        if self.n > 12 {
            return Err(DfeError::QubitCountUnsupported {
                n: self.n,
                max: 12,
            });
        }
        let d = 1usize << self.n;
        // rho = prod_i (I + g_i)/2 is the rank-1 projector onto the state.
        let mut rho = nalgebra::DMatrix::<Complex64>::identity(d, d);
        for g in &self.generators {
            let m = (nalgebra::DMatrix::<Complex64>::identity(d, d) + g.dense()) * Complex64::new(0.5, 0.0);
            rho = m * rho;
        }
        let (col, norm) = (0..d)
            .map(|j| (j, rho.column(j).norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if norm < 1e-12 {
            return Err(DfeError::InvalidTableau("projector has rank 0".into()));
        }
        let v = rho.column(col) / Complex64::new(norm, 0.0);
        Ok(v.iter().copied().collect())
    }
}

fn row_reduce(n: usize, generators: &[PauliOp]) -> Result<Vec<(usize, PauliOp)>> {
    let col_bit = |p: &PauliOp, col: usize| -> bool {
        if col < n {
            p.x_bits() >> col & 1 == 1
        } else {
            p.z_bits() >> (col - n) & 1 == 1
        }
    };
    let mut rows: Vec<PauliOp> = generators.to_vec();
    let mut reduced: Vec<(usize, PauliOp)> = Vec::with_capacity(n);
    for col in 0..2 * n {
        let Some(idx) = rows.iter().position(|r| col_bit(r, col)) else {
            continue;
        };
        let pivot = rows.swap_remove(idx);
        for r in rows.iter_mut() {
            if col_bit(r, col) {
                *r = r.mul(&pivot).expect("commuting rows");
            }
        }
        for (_, r) in reduced.iter_mut() {
            if col_bit(r, col) {
                *r = r.mul(&pivot).expect("commuting rows");
            }
        }
        reduced.push((col, pivot));
    }
    if !rows.is_empty() {
        return Err(DfeError::InvalidTableau(
            "generators are not independent over GF(2)".into(),
        ));
    }
    Ok(reduced)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell() -> StabilizerTableau {
        StabilizerTableau::new(vec![
            PauliOp::from_label("XX").unwrap(),
            PauliOp::from_label("ZZ").unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn rejects_anticommuting_generators() {
        let r = StabilizerTableau::new(vec![
            PauliOp::from_label("XI").unwrap(),
            PauliOp::from_label("ZI").unwrap(),
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn rejects_dependent_generators() {
        let r = StabilizerTableau::new(vec![
            PauliOp::from_label("XX").unwrap(),
            PauliOp::from_label("XX").unwrap(),
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn group_element_identity_subset() {
        let t = bell();
        let e = t.group_element(0);
        assert!(e.is_identity());
        assert_eq!(e.sign(), 1);
    }

    #[test]
    fn bell_expectations() {
        let t = bell();
        assert_eq!(t.expectation(&PauliOp::from_label("XX").unwrap()), 1.0);
        assert_eq!(t.expectation(&PauliOp::from_label("ZZ").unwrap()), 1.0);
        // XX * ZZ = -YY
        assert_eq!(t.expectation(&PauliOp::from_label("YY").unwrap()), -1.0);
        assert_eq!(t.expectation(&PauliOp::from_label("ZI").unwrap()), 0.0);
        assert_eq!(
            t.expectation(&PauliOp::from_label("-XX").unwrap()),
            -1.0
        );
    }

    #[test]
    fn negative_sign_generator_flips_expectation() {
        let t = StabilizerTableau::new(vec![PauliOp::from_label("-Z").unwrap()]).unwrap();
        assert_eq!(t.expectation(&PauliOp::from_label("Z").unwrap()), -1.0);
        let psi = t.to_statevector().unwrap();
        assert!((psi[1].norm() - 1.0).abs() < 1e-12);
    }
}
