//! Exact subset enumeration for small instances; the ground-truth oracle
//! for the relaxed designs.

use crate::error::{Error, Result};
use crate::fisher::{weighted_crlb_sum, FimBank};

/// Guard on the number of enumerated subsets.
pub const ENUMERATION_GUARD: u128 = 1_000_000;

/// Enumerates every `M`-subset of the candidates and returns the subset
/// minimizing `Σ_p ψ_p · CRLB_p`, together with its objective. Subsets with
/// a singular aggregate FIM are skipped; ties keep the first subset in
/// lexicographic enumeration order.
pub fn exhaustive_design(bank: &FimBank, m: usize, psi: &[f64]) -> Result<(Vec<usize>, f64)> {
    let n = bank.len();
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!(
            "subset size {m} out of range for {n} candidates"
        )));
    }
    if psi.len() != bank.dim() {
        return Err(Error::DimensionMismatch {
            what: "psi weights",
            expected: bank.dim(),
            got: psi.len(),
        });
    }
    let combos = binomial(n as u128, m as u128);
    if combos > ENUMERATION_GUARD {
        return Err(Error::TooLarge {
            subsets: combos,
            guard: ENUMERATION_GUARD,
        });
    }

    let mut indices: Vec<usize> = (0..m).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let fim = bank.subset_fim(&indices)?;
        if let Ok(obj) = weighted_crlb_sum(&fim, psi, 0.0) {
            if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                best = Some((indices.clone(), obj));
            }
        }
        if !next_combination(&mut indices, n) {
            break;
        }
    }
    best.ok_or(Error::AllSingular)
}

/// Advances `indices` to the next lexicographic `M`-combination of `0..n`.
fn next_combination(indices: &mut [usize], n: usize) -> bool {
    let m = indices.len();
    let mut i = m;
    while i > 0 {
        i -= 1;
        if indices[i] != i + n - m {
            indices[i] += 1;
            for j in (i + 1)..m {
                indices[j] = indices[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn combination_iterator_covers_all() {
        let mut idx = vec![0usize, 1, 2];
        let mut count = 1usize;
        while next_combination(&mut idx, 6) {
            count += 1;
        }
        assert_eq!(count, 20); // C(6,3)
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(8, 3), 56);
        assert_eq!(binomial(50, 2), 1225);
        assert_eq!(binomial(4, 0), 1);
    }

    #[test]
    fn full_set_when_m_equals_n() {
        let fims: Vec<DMatrix<f64>> = (1..=3)
            .map(|i| DMatrix::from_diagonal(&DVector::from_vec(vec![i as f64, 1.0])))
            .collect();
        let bank = FimBank::from_matrices(fims).unwrap();
        let (sel, _) = exhaustive_design(&bank, 3, &[1.0, 1.0]).unwrap();
        assert_eq!(sel, vec![0, 1, 2]);
    }

    #[test]
    fn scalar_constant_model_ties_break_first() {
        // Identical scalar FIMs: every subset is optimal, the first
        // enumerated wins.
        let fims = vec![DMatrix::from_element(1, 1, 2.0); 5];
        let bank = FimBank::from_matrices(fims).unwrap();
        let (sel, obj) = exhaustive_design(&bank, 2, &[1.0]).unwrap();
        assert_eq!(sel, vec![0, 1]);
        assert!((obj - 1.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn guard_rejects_large_enumerations() {
        let fims = vec![DMatrix::from_element(1, 1, 1.0); 64];
        let bank = FimBank::from_matrices(fims).unwrap();
        assert!(matches!(
            exhaustive_design(&bank, 20, &[1.0]),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn all_singular_reported() {
        let fims = vec![DMatrix::zeros(2, 2); 4];
        let bank = FimBank::from_matrices(fims).unwrap();
        assert!(matches!(
            exhaustive_design(&bank, 2, &[1.0, 1.0]),
            Err(Error::AllSingular)
        ));
    }
}
