//! Fisher information aggregation and Cramér-Rao bound evaluation.
//!
//! A [`FimBank`] holds the per-candidate information matrices for one
//! `(model, θ, grid, noise)` tuple. Selection weights `w ∈ [0,1]^N`
//! aggregate them linearly; the diagonal of the inverse aggregate is the
//! vector of CRLBs for the model parameters.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{self, CandidateGrid, NoiseSpec, ParamVector};

/// Relative eigenvalue floor below which an aggregate FIM is treated as
/// singular: positive definite means `λ_min > PD_FLOOR · trace`.
pub const PD_FLOOR: f64 = 1e-10;

/// Per-candidate Fisher information matrices for a fixed parameter vector.
///
/// Matrices are stored both in full form and as low-rank factors
/// `F_n = U_n U_nᵀ` (rank 2 for model-built banks); solvers work on the
/// factors.
#[derive(Debug, Clone)]
pub struct FimBank {
    dim: usize,
    fims: Vec<DMatrix<f64>>,
    factors: Vec<DMatrix<f64>>,
    theta: Option<ParamVector>,
}

impl FimBank {
    /// Builds the bank for every candidate point of `grid`.
    pub fn build(
        theta: &ParamVector,
        grid: &CandidateGrid,
        noise: &NoiseSpec,
    ) -> Result<Self> {
        let p = theta.model().param_count();
        let mut fims = Vec::with_capacity(grid.len());
        let mut factors = Vec::with_capacity(grid.len());
        for n in 0..grid.len() {
            let (u, w) = models::per_sample_fim_factors(theta, grid.point(n), noise)?;
            let mut fac = DMatrix::zeros(p, 2);
            fac.column_mut(0).copy_from(&u);
            fac.column_mut(1).copy_from(&w);
            let mut fim = DMatrix::zeros(p, p);
            fim.ger(1.0, &u, &u, 1.0);
            fim.ger(1.0, &w, &w, 1.0);
            fims.push(fim);
            factors.push(fac);
        }
        Ok(Self {
            dim: p,
            fims,
            factors,
            theta: Some(theta.clone()),
        })
    }

    /// Builds a bank from explicit symmetric PSD matrices. Factors are
    /// recovered by eigendecomposition; eigenvalues below `-1e-10·trace`
    /// are rejected, smaller negatives are clipped to zero.
    pub fn from_matrices(fims: Vec<DMatrix<f64>>) -> Result<Self> {
        if fims.is_empty() {
            return Err(Error::InvalidInput("bank must be nonempty".into()));
        }
        let dim = fims[0].nrows();
        let mut factors = Vec::with_capacity(fims.len());
        for (n, f) in fims.iter().enumerate() {
            if f.nrows() != dim || f.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    what: "per-sample FIM",
                    expected: dim,
                    got: f.nrows().max(f.ncols()),
                });
            }
            if (f - f.transpose()).norm() > 1e-9 * (1.0 + f.norm()) {
                return Err(Error::InvalidInput(format!("FIM {n} is not symmetric")));
            }
            let eig = f.clone().symmetric_eigen();
            let floor = -1e-10 * f.trace().abs().max(1e-300);
            let mut cols = Vec::new();
            for (i, &ev) in eig.eigenvalues.iter().enumerate() {
                if ev < floor {
                    return Err(Error::InvalidInput(format!(
                        "FIM {n} has negative eigenvalue {ev:.3e}"
                    )));
                }
                if ev > 0.0 {
                    cols.push(eig.eigenvectors.column(i) * ev.sqrt());
                }
            }
            let mut fac = DMatrix::zeros(dim, cols.len().max(1));
            for (j, c) in cols.iter().enumerate() {
                fac.column_mut(j).copy_from(c);
            }
            factors.push(fac);
        }
        Ok(Self {
            dim,
            fims,
            factors,
            theta: None,
        })
    }

    /// Number of candidates `N`.
    pub fn len(&self) -> usize {
        self.fims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fims.is_empty()
    }

    /// Parameter dimension `P`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fims(&self) -> &[DMatrix<f64>] {
        &self.fims
    }

    pub fn fim(&self, n: usize) -> &DMatrix<f64> {
        &self.fims[n]
    }

    /// Low-rank factor of candidate `n` (`F_n = U_n U_nᵀ`).
    pub fn factor(&self, n: usize) -> &DMatrix<f64> {
        &self.factors[n]
    }

    /// The parameter vector that generated this bank, when model-built.
    pub fn theta(&self) -> Option<&ParamVector> {
        self.theta.as_ref()
    }

    /// Aggregate information of an index subset at unit weights.
    pub fn subset_fim(&self, indices: &[usize]) -> Result<DMatrix<f64>> {
        let mut acc = DMatrix::zeros(self.dim, self.dim);
        for &n in indices {
            if n >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: n,
                    size: self.len(),
                });
            }
            acc += &self.fims[n];
        }
        Ok(acc)
    }
}

/// Linear reparametrization `θ̃ = A θ`; transforms information as `A F Aᵀ`.
#[derive(Debug, Clone)]
pub struct ParamTransform {
    matrix: DMatrix<f64>,
}

impl ParamTransform {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                what: "parameter transform",
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// A finite set `Θ` of candidate parameter vectors expressing prior
/// uncertainty. Worst-case designs optimize over all members.
#[derive(Debug, Clone)]
pub struct ParamGrid {
    thetas: Vec<ParamVector>,
}

impl ParamGrid {
    pub fn new(thetas: Vec<ParamVector>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidInput("parameter grid must be nonempty".into()));
        }
        let p = thetas[0].len();
        for t in &thetas {
            if t.len() != p {
                return Err(Error::DimensionMismatch {
                    what: "parameter grid member",
                    expected: p,
                    got: t.len(),
                });
            }
        }
        Ok(Self { thetas })
    }

    pub fn singleton(theta: ParamVector) -> Self {
        Self {
            thetas: vec![theta],
        }
    }

    /// Grid over one parameter: member `ℓ ∈ 1..=count` takes the value
    /// `lower + (ℓ-1)·delta/count`, all other parameters fixed at `base`.
    ///
    /// The covered interval is `[lower, lower + (count-1)·delta/count]`.
    pub fn sweep(base: &ParamVector, param: usize, lower: f64, delta: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidInput("grid count must be positive".into()));
        }
        let mut thetas = Vec::with_capacity(count);
        for l in 1..=count {
            let value = lower + (l - 1) as f64 * delta / count as f64;
            thetas.push(base.with_value(param, value)?);
        }
        Ok(Self { thetas })
    }

    /// Closed interval covered by [`ParamGrid::sweep`] for the given spec.
    pub fn sweep_interval(lower: f64, delta: f64, count: usize) -> (f64, f64) {
        (lower, lower + (count - 1) as f64 * delta / count as f64)
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[ParamVector] {
        &self.thetas
    }
}

/// Weighted aggregate `Σ_n w_n F_n`; exactly linear in `w`.
pub fn aggregate_fim(weights: &[f64], bank: &FimBank) -> Result<DMatrix<f64>> {
    if weights.len() != bank.len() {
        return Err(Error::DimensionMismatch {
            what: "weight vector",
            expected: bank.len(),
            got: weights.len(),
        });
    }
    let mut acc = DMatrix::zeros(bank.dim(), bank.dim());
    for (w, f) in weights.iter().zip(bank.fims()) {
        if *w != 0.0 {
            acc.as_mut_slice()
                .iter_mut()
                .zip(f.as_slice())
                .for_each(|(a, b)| *a += w * b);
        }
    }
    Ok(acc)
}

/// Diagonal of `(fim + ridge·I)⁻¹`.
///
/// With `ridge = 0` the matrix must be positive definite in the
/// scale-invariant sense `λ_min > 1e-10·trace`; otherwise
/// [`Error::SingularFim`] is returned.
pub fn crlb_diag(fim: &DMatrix<f64>, ridge: f64) -> Result<DVector<f64>> {
    if fim.nrows() != fim.ncols() {
        return Err(Error::DimensionMismatch {
            what: "FIM",
            expected: fim.nrows(),
            got: fim.ncols(),
        });
    }
    let p = fim.nrows();
    let mut work = fim.clone();
    if ridge > 0.0 {
        for i in 0..p {
            work[(i, i)] += ridge;
        }
    } else {
        let eig = work.clone().symmetric_eigen();
        let min = eig.eigenvalues.min();
        if !(min > PD_FLOOR * work.trace()) {
            return Err(Error::SingularFim { theta_index: None });
        }
    }
    let chol = work
        .cholesky()
        .ok_or(Error::SingularFim { theta_index: None })?;
    let inv = chol.inverse();
    Ok(DVector::from_iterator(p, (0..p).map(|i| inv[(i, i)])))
}

/// `Σ_p ψ_p · CRLB_p` for a single aggregate FIM.
pub fn weighted_crlb_sum(fim: &DMatrix<f64>, psi: &[f64], ridge: f64) -> Result<f64> {
    if psi.len() != fim.nrows() {
        return Err(Error::DimensionMismatch {
            what: "psi weights",
            expected: fim.nrows(),
            got: psi.len(),
        });
    }
    if psi.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let crlb = crlb_diag(fim, ridge)?;
    Ok(psi.iter().zip(crlb.iter()).map(|(p, c)| p * c).sum())
}

/// Replaces every matrix in the bank with `A F Aᵀ` (information under the
/// reparametrization `θ̃ = A θ`).
pub fn apply_param_transform(bank: &FimBank, transform: &ParamTransform) -> Result<FimBank> {
    let a = transform.matrix();
    if a.nrows() != bank.dim() {
        return Err(Error::DimensionMismatch {
            what: "parameter transform",
            expected: bank.dim(),
            got: a.nrows(),
        });
    }
    let fims = bank
        .fims()
        .iter()
        .map(|f| a * f * a.transpose())
        .collect();
    let factors = (0..bank.len()).map(|n| a * bank.factor(n)).collect();
    Ok(FimBank {
        dim: bank.dim(),
        fims,
        factors,
        theta: bank.theta.clone(),
    })
}

/// Worst-case CRLB of parameter `p` over a grid of banks:
/// `max_θ e_pᵀ (Σ_n w_n F(t_n; θ))⁻¹ e_p`.
///
/// The maximum is attained at a grid member; the returned value equals one
/// of the per-θ CRLBs exactly.
pub fn worst_case_crlb(weights: &[f64], banks: &[FimBank], param: usize, ridge: f64) -> Result<f64> {
    if banks.is_empty() {
        return Err(Error::InvalidInput("bank list must be nonempty".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    for (l, bank) in banks.iter().enumerate() {
        if param >= bank.dim() {
            return Err(Error::IndexOutOfRange {
                index: param,
                size: bank.dim(),
            });
        }
        let agg = aggregate_fim(weights, bank)?;
        let crlb = crlb_diag(&agg, ridge).map_err(|e| match e {
            Error::SingularFim { .. } => Error::SingularFim {
                theta_index: Some(l),
            },
            other => other,
        })?;
        worst = worst.max(crlb[param]);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SignalModel;

    fn small_bank() -> FimBank {
        let model = SignalModel::damped_1d(1).unwrap();
        let theta = ParamVector::new(model, vec![1.2, 0.2, 0.08, 0.4]).unwrap();
        let grid = CandidateGrid::uniform_1d(12).unwrap();
        FimBank::build(&theta, &grid, &NoiseSpec::new(0.5).unwrap()).unwrap()
    }

    #[test]
    fn aggregate_zero_and_onehot() {
        let bank = small_bank();
        let zeros = vec![0.0; bank.len()];
        assert_eq!(aggregate_fim(&zeros, &bank).unwrap().norm(), 0.0);
        let mut onehot = vec![0.0; bank.len()];
        onehot[3] = 1.0;
        let agg = aggregate_fim(&onehot, &bank).unwrap();
        assert!((agg - bank.fim(3)).norm() < 1e-15);
    }

    #[test]
    fn aggregate_is_homogeneous() {
        let bank = small_bank();
        let w: Vec<f64> = (0..bank.len()).map(|i| 0.1 + 0.07 * i as f64).collect();
        let scaled: Vec<f64> = w.iter().map(|x| 0.37 * x).collect();
        let a = aggregate_fim(&w, &bank).unwrap();
        let b = aggregate_fim(&scaled, &bank).unwrap();
        assert!((b - &a * 0.37).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn aggregate_is_additive() {
        let bank = small_bank();
        let w: Vec<f64> = (0..bank.len()).map(|i| 0.02 * i as f64).collect();
        let v: Vec<f64> = (0..bank.len()).map(|i| 0.5 - 0.03 * i as f64).collect();
        let sum: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a + b).collect();
        let lhs = aggregate_fim(&sum, &bank).unwrap();
        let rhs = aggregate_fim(&w, &bank).unwrap() + aggregate_fim(&v, &bank).unwrap();
        let scale = rhs.norm().max(1.0);
        assert!((lhs - rhs).norm() < 1e-13 * scale);
    }

    #[test]
    fn crlb_diag_of_diagonal() {
        let fim = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.25]));
        let c = crlb_diag(&fim, 0.0).unwrap();
        assert!((c[0] - 0.25).abs() < 1e-15);
        assert!((c[1] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn crlb_diag_of_identity() {
        let fim = DMatrix::<f64>::identity(5, 5);
        let c = crlb_diag(&fim, 0.0).unwrap();
        assert!(c.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn crlb_diag_matches_column_solve_oracle() {
        // Independent oracle: solve fim · x = e_p per basis vector with LU.
        let bank = small_bank();
        let w: Vec<f64> = (0..bank.len()).map(|i| 0.3 + 0.05 * i as f64).collect();
        let fim = aggregate_fim(&w, &bank).unwrap();
        let c = crlb_diag(&fim, 0.0).unwrap();
        let lu = fim.clone().lu();
        for p in 0..fim.nrows() {
            let mut e = DVector::zeros(fim.nrows());
            e[p] = 1.0;
            let x = lu.solve(&e).unwrap();
            assert!((c[p] - x[p]).abs() < 1e-10 * x[p].abs());
        }
    }

    #[test]
    fn crlb_diag_singular_detection() {
        let fim = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 2.0]));
        assert!(matches!(
            crlb_diag(&fim, 0.0),
            Err(Error::SingularFim { theta_index: None })
        ));
        // ridge makes it well-posed
        assert!(crlb_diag(&fim, 1e-6).is_ok());
    }

    #[test]
    fn weighted_sum_trivials() {
        let bank = small_bank();
        let w = vec![0.8; bank.len()];
        let fim = aggregate_fim(&w, &bank).unwrap();
        let ones = vec![1.0; 4];
        let tr_inv = weighted_crlb_sum(&fim, &ones, 0.0).unwrap();
        let inv = fim.clone().cholesky().unwrap().inverse();
        assert!((tr_inv - inv.trace()).abs() < 1e-10 * inv.trace());

        let mut eq = vec![0.0; 4];
        eq[2] = 1.0;
        let single = weighted_crlb_sum(&fim, &eq, 0.0).unwrap();
        assert!((single - crlb_diag(&fim, 0.0).unwrap()[2]).abs() < 1e-14);

        assert_eq!(weighted_crlb_sum(&fim, &[0.0; 4], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn transform_identity_and_scaling() {
        let bank = small_bank();
        let id = ParamTransform::new(DMatrix::identity(4, 4)).unwrap();
        let same = apply_param_transform(&bank, &id).unwrap();
        for n in 0..bank.len() {
            assert!((same.fim(n) - bank.fim(n)).norm() < 1e-15);
        }
        let c = 2.5;
        let scale = ParamTransform::new(DMatrix::identity(4, 4) * c).unwrap();
        let scaled = apply_param_transform(&bank, &scale).unwrap();
        for n in 0..bank.len() {
            assert!((scaled.fim(n) - bank.fim(n) * c * c).norm() < 1e-12 * bank.fim(n).norm());
        }
    }

    #[test]
    fn transform_diagonal_rescales_crlb() {
        // Diagonal FIM, diagonal transform: CRLB_p ↦ CRLB_p / d_p².
        let fim = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0, 0.5]));
        let bank = FimBank::from_matrices(vec![fim.clone()]).unwrap();
        let d = DVector::from_vec(vec![2.0, 3.0, 0.5]);
        let t = ParamTransform::new(DMatrix::from_diagonal(&d)).unwrap();
        let tb = apply_param_transform(&bank, &t).unwrap();
        let base = crlb_diag(&fim, 0.0).unwrap();
        let got = crlb_diag(tb.fim(0), 0.0).unwrap();
        for p in 0..3 {
            // (D F D)⁻¹ = D⁻¹ F⁻¹ D⁻¹, so each diagonal entry divides by d_p².
            let expected = base[p] / (d[p] * d[p]);
            assert!((got[p] - expected).abs() < 1e-12 * expected.abs());
        }
    }

    #[test]
    fn worst_case_enumeration() {
        let mk = |v: Vec<f64>| DMatrix::from_diagonal(&DVector::from_vec(v));
        let b1 = FimBank::from_matrices(vec![mk(vec![1.0, 1.0])]).unwrap();
        let b2 = FimBank::from_matrices(vec![mk(vec![2.0, 2.0])]).unwrap();
        let b3 = FimBank::from_matrices(vec![mk(vec![0.5, 0.5])]).unwrap();
        let banks = vec![b1, b2, b3];
        let w = vec![1.0];
        let wc = worst_case_crlb(&w, &banks, 0, 0.0).unwrap();
        assert!((wc - 2.0).abs() < 1e-15);
        // worst case equals one of the per-θ values exactly
        let per: Vec<f64> = banks
            .iter()
            .map(|b| crlb_diag(&aggregate_fim(&w, b).unwrap(), 0.0).unwrap()[0])
            .collect();
        assert!(per.contains(&wc));
    }

    #[test]
    fn worst_case_singleton_matches_direct() {
        let bank = small_bank();
        let w = vec![0.7; bank.len()];
        let direct = crlb_diag(&aggregate_fim(&w, &bank).unwrap(), 0.0).unwrap();
        for p in 0..4 {
            let wc = worst_case_crlb(&w, std::slice::from_ref(&bank), p, 0.0).unwrap();
            assert_eq!(wc, direct[p]);
        }
    }

    #[test]
    fn worst_case_monotone_in_grid() {
        let bank_a = small_bank();
        let model = SignalModel::damped_1d(1).unwrap();
        let theta_b = ParamVector::new(model, vec![1.2, 0.2, 0.25, 0.4]).unwrap();
        let grid = CandidateGrid::uniform_1d(12).unwrap();
        let bank_b = FimBank::build(&theta_b, &grid, &NoiseSpec::new(0.5).unwrap()).unwrap();
        let w = vec![0.6; bank_a.len()];
        let small = worst_case_crlb(&w, std::slice::from_ref(&bank_a), 2, 0.0).unwrap();
        let big = worst_case_crlb(&w, &[bank_a, bank_b], 2, 0.0).unwrap();
        assert!(big >= small);
    }

    #[test]
    fn worst_case_reports_offending_theta() {
        let good = small_bank();
        let bad = FimBank::from_matrices(vec![DMatrix::zeros(4, 4); good.len()]).unwrap();
        let w = vec![0.5; good.len()];
        match worst_case_crlb(&w, &[good, bad], 1, 0.0) {
            Err(Error::SingularFim { theta_index }) => assert_eq!(theta_index, Some(1)),
            other => panic!("expected SingularFim, got {other:?}"),
        }
    }

    #[test]
    fn loewner_monotonicity_randomized() {
        // Larger weights can only shrink every CRLB entry.
        let bank = small_bank();
        let mut state = 42u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let w: Vec<f64> = (0..bank.len()).map(|_| 0.2 + 0.5 * next()).collect();
            let bump: Vec<f64> = w.iter().map(|x| (x + 0.3 * next()).min(1.0)).collect();
            let c_lo = crlb_diag(&aggregate_fim(&bump, &bank).unwrap(), 0.0).unwrap();
            let c_hi = crlb_diag(&aggregate_fim(&w, &bank).unwrap(), 0.0).unwrap();
            for p in 0..4 {
                assert!(c_lo[p] <= c_hi[p] + 1e-10 * c_hi[p].abs());
            }
        }
    }

    #[test]
    fn beta_sweep_grid() {
        let model = SignalModel::damped_1d(1).unwrap();
        let base = ParamVector::new(model, vec![1.0, 0.25, 0.1, 0.5]).unwrap();
        let grid = ParamGrid::sweep(&base, 2, 0.1, 0.022, 10).unwrap();
        assert_eq!(grid.len(), 10);
        assert!((grid.thetas()[0].values()[2] - 0.1).abs() < 1e-15);
        let last = grid.thetas()[9].values()[2];
        assert!((last - (0.1 + 9.0 * 0.022 / 10.0)).abs() < 1e-15);
        let (lo, hi) = ParamGrid::sweep_interval(0.1, 0.022, 10);
        assert_eq!(lo, 0.1);
        assert!((hi - last).abs() < 1e-15);
    }
}
