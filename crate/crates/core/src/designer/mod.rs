//! Sampling-scheme design: convex relaxation of sample selection.
//!
//! Given per-candidate Fisher information matrices, the designer finds
//! selection weights `w ∈ [0,1]^N` with `1ᵀw ≤ γ` that minimize weighted
//! (optionally worst-case over a parameter grid) Cramér-Rao bounds, then
//! rounds the weights to a concrete index set.
//!
//! Two independent solution routes are provided:
//!
//! * [`solve_relaxed`] minimizes `tr[(Σ w_n F_n)⁻¹]` directly (single θ,
//!   uniform parameter weights);
//! * [`solve_sdp`] minimizes `Σ_p ψ_p μ_p` over `(w, μ)` subject to the
//!   Schur-complement conditions `[Σ w_n F(t_n;θ), e_p; e_pᵀ, μ_p] ⪰ 0`
//!   for every emphasized parameter and every grid member, plus optional
//!   per-parameter caps and group-norm budgets.
//!
//! Both are interior-point methods over the box-and-budget polytope; the
//! bound functions `e_pᵀ(Σ w_n F_n)⁻¹ e_p` have closed-form gradients and
//! Hessians in `w`, so no generic conic solver is needed. For small
//! instances [`exhaustive_design`] enumerates subsets exactly and serves
//! as the ground-truth oracle.

mod barrier;
mod exhaustive;
mod scaling;

pub use exhaustive::exhaustive_design;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fisher::{aggregate_fim, crlb_diag, FimBank};

/// Relative feasibility slack allowed on returned budgets.
pub const BUDGET_TOL: f64 = 1e-6;

/// Group-norm budgets on the reshaped weight matrix `W` (shape `N1×N2`,
/// row-major over a Cartesian candidate grid).
///
/// `gamma1` bounds the sum of row norms (few distinct settings along the
/// first sampling dimension); `gamma2` bounds the sum of column norms.
/// Either side may be `f64::INFINITY` to disable it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupBudgets {
    pub gamma1: f64,
    pub gamma2: f64,
    pub layout: (usize, usize),
}

/// Rounding rule converting relaxed weights to an index set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RoundingRule {
    /// The `M` indices of largest weight, ties broken by lowest index.
    TopM(usize),
    /// All indices with `w_n > xi`.
    Cutoff(f64),
}

/// A complete design problem over one or more parameter-grid members.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    banks: Vec<FimBank>,
    budget: f64,
    psi: Vec<f64>,
    caps: Option<Vec<f64>>,
    groups: Option<GroupBudgets>,
    /// Per-candidate budget scaling `Σ s_n w_n ≤ γ`; all ones except inside
    /// reweighting iterations.
    budget_scale: Vec<f64>,
    budget_vacuous: bool,
}

impl DesignProblem {
    /// Validates and assembles a problem. `psi` must be nonnegative with at
    /// least one strictly positive entry, `budget > 0`. A budget exceeding
    /// `N` is accepted but flagged as vacuous.
    pub fn new(banks: Vec<FimBank>, budget: f64, psi: Vec<f64>) -> Result<Self> {
        if banks.is_empty() {
            return Err(Error::InvalidInput("at least one FIM bank required".into()));
        }
        let n = banks[0].len();
        let p = banks[0].dim();
        for b in &banks {
            if b.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "bank size",
                    expected: n,
                    got: b.len(),
                });
            }
            if b.dim() != p {
                return Err(Error::DimensionMismatch {
                    what: "bank parameter dimension",
                    expected: p,
                    got: b.dim(),
                });
            }
        }
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(Error::InvalidInput(format!(
                "budget must be positive and finite, got {budget}"
            )));
        }
        if psi.len() != p {
            return Err(Error::DimensionMismatch {
                what: "psi weights",
                expected: p,
                got: psi.len(),
            });
        }
        if psi.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidInput("psi weights must be >= 0".into()));
        }
        if psi.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidInput(
                "at least one psi weight must be positive".into(),
            ));
        }
        Ok(Self {
            banks,
            budget,
            psi,
            caps: None,
            groups: None,
            budget_scale: vec![1.0; n],
            budget_vacuous: budget > n as f64,
        })
    }

    /// Adds per-parameter upper bounds on the (worst-case) CRLBs. Entries
    /// may be `f64::INFINITY` for uncapped parameters; finite entries must
    /// be positive.
    pub fn with_caps(mut self, caps: Vec<f64>) -> Result<Self> {
        if caps.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "caps",
                expected: self.dim(),
                got: caps.len(),
            });
        }
        if caps.iter().any(|&c| c <= 0.0 || c.is_nan()) {
            return Err(Error::InvalidInput("caps must be positive".into()));
        }
        if caps.iter().any(|c| c.is_finite()) {
            self.caps = Some(caps);
        }
        Ok(self)
    }

    /// Adds group-norm budgets; the candidate grid must have the given
    /// Cartesian layout.
    pub fn with_group_budgets(mut self, groups: GroupBudgets) -> Result<Self> {
        let (n1, n2) = groups.layout;
        if n1 * n2 != self.candidates() {
            return Err(Error::InvalidInput(format!(
                "group layout {n1}x{n2} does not match {} candidates",
                self.candidates()
            )));
        }
        if !(groups.gamma1 > 0.0) || !(groups.gamma2 > 0.0) {
            return Err(Error::InvalidInput("group budgets must be positive".into()));
        }
        if groups.gamma1.is_finite() || groups.gamma2.is_finite() {
            self.groups = Some(groups);
        }
        Ok(self)
    }

    pub(crate) fn with_budget_scale(mut self, scale: Vec<f64>) -> Result<Self> {
        if scale.len() != self.candidates() {
            return Err(Error::DimensionMismatch {
                what: "budget scale",
                expected: self.candidates(),
                got: scale.len(),
            });
        }
        if scale.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(Error::InvalidInput("budget scale must be positive".into()));
        }
        self.budget_scale = scale;
        Ok(self)
    }

    pub fn banks(&self) -> &[FimBank] {
        &self.banks
    }

    /// Number of candidate points `N`.
    pub fn candidates(&self) -> usize {
        self.banks[0].len()
    }

    /// Parameter dimension `P`.
    pub fn dim(&self) -> usize {
        self.banks[0].dim()
    }

    /// Grid size `L`.
    pub fn grid_len(&self) -> usize {
        self.banks.len()
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn caps(&self) -> Option<&[f64]> {
        self.caps.as_deref()
    }

    pub fn groups(&self) -> Option<GroupBudgets> {
        self.groups
    }

    pub fn budget_scale(&self) -> &[f64] {
        &self.budget_scale
    }

    /// True when `γ > N`, making the budget constraint vacuous.
    pub fn budget_vacuous(&self) -> bool {
        self.budget_vacuous
    }

    /// Parameters participating in the solve: emphasized or capped.
    pub(crate) fn active_params(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&p| {
                self.psi[p] > 0.0
                    || self
                        .caps
                        .as_ref()
                        .is_some_and(|c| c[p].is_finite())
            })
            .collect()
    }

    /// Default rounding target `M = min(floor(γ), N)`.
    pub fn default_rounding(&self) -> RoundingRule {
        RoundingRule::TopM((self.budget.floor() as usize).min(self.candidates()))
    }

    /// Objective `Σ_p ψ_p · max_θ CRLB_p(w)` evaluated directly at a weight
    /// vector (no optimization), used for convexity and feasibility checks.
    pub fn objective_at(&self, weights: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        let mut per_theta: Vec<f64> = Vec::with_capacity(self.dim());
        for p in 0..self.dim() {
            if self.psi[p] == 0.0 {
                continue;
            }
            per_theta.clear();
            for (l, bank) in self.banks.iter().enumerate() {
                let agg = aggregate_fim(weights, bank)?;
                let c = crlb_diag(&agg, 0.0).map_err(|e| match e {
                    Error::SingularFim { .. } => Error::SingularFim {
                        theta_index: Some(l),
                    },
                    other => other,
                })?;
                per_theta.push(c[p]);
            }
            total += self.psi[p] * per_theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        }
        Ok(total)
    }
}

/// Solver termination status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIterations,
}

/// Diagnostics attached to every design result.
#[derive(Debug, Clone)]
pub struct SolverInfo {
    /// Total Newton steps across all barrier stages.
    pub iterations: usize,
    /// Number of barrier (outer) stages.
    pub barrier_rounds: usize,
    /// Relative duality-gap bound at termination.
    pub kkt_residual: f64,
    pub status: SolverStatus,
    /// Populated by [`reweight_iterate`].
    pub reweight_iterations: Option<usize>,
}

/// Result of a design solve.
#[derive(Debug, Clone)]
pub struct DesignResult {
    /// Relaxed selection weights in `[0,1]`.
    pub weights: Vec<f64>,
    /// Per-parameter worst-case CRLB at the relaxed solution. Entries for
    /// parameters outside the solve (ψ_p = 0, no cap) are evaluated
    /// directly rather than optimized.
    pub mu: Vec<f64>,
    /// Selected index set from the default rounding rule.
    pub selected: Vec<usize>,
    /// `Σ_p ψ_p μ_p` at the solution.
    pub objective: f64,
    pub solver_info: SolverInfo,
}

/// Rounds relaxed weights to an index set.
///
/// `TopM` returns the `M` indices of largest weight with ties broken by
/// lowest index; `Cutoff(xi)` returns every index with `w_n > xi`.
pub fn threshold(weights: &[f64], rule: RoundingRule) -> Result<Vec<usize>> {
    if weights.iter().any(|&w| !(-1e-9..=1.0 + 1e-9).contains(&w)) {
        return Err(Error::InvalidInput("weights must lie in [0,1]".into()));
    }
    match rule {
        RoundingRule::TopM(m) => {
            if m > weights.len() {
                return Err(Error::InvalidInput(format!(
                    "cannot select {m} of {} candidates",
                    weights.len()
                )));
            }
            let mut order: Vec<usize> = (0..weights.len()).collect();
            order.sort_by(|&a, &b| {
                weights[b]
                    .partial_cmp(&weights[a])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut sel: Vec<usize> = order.into_iter().take(m).collect();
            sel.sort_unstable();
            Ok(sel)
        }
        RoundingRule::Cutoff(xi) => Ok((0..weights.len()).filter(|&n| weights[n] > xi).collect()),
    }
}

/// Minimizes `tr[(Σ_n w_n F_n)⁻¹]` over the box-and-budget polytope.
///
/// Requires a single-θ problem with all `ψ_p = 1` and no caps or group
/// budgets; this is the direct route kept independent of [`solve_sdp`] so
/// the two can cross-check each other.
pub fn solve_relaxed(problem: &DesignProblem) -> Result<DesignResult> {
    solve_relaxed_with(problem, &SolveOptions::default())
}

/// [`solve_relaxed`] with explicit solver options.
pub fn solve_relaxed_with(problem: &DesignProblem, opts: &SolveOptions) -> Result<DesignResult> {
    if problem.grid_len() != 1 {
        return Err(Error::InvalidInput(
            "solve_relaxed requires a single parameter grid member".into(),
        ));
    }
    if problem.psi().iter().any(|&x| x != 1.0) {
        return Err(Error::InvalidInput(
            "solve_relaxed requires all psi weights equal to one".into(),
        ));
    }
    if problem.caps().is_some() || problem.groups().is_some() {
        return Err(Error::InvalidInput(
            "solve_relaxed does not support caps or group budgets".into(),
        ));
    }
    barrier::solve_trace(problem, opts)
}

/// Minimizes `Σ_p ψ_p μ_p` subject to the per-parameter, per-grid-member
/// Schur-complement bound conditions, the budget and box constraints, and
/// optional caps and group-norm budgets.
pub fn solve_sdp(problem: &DesignProblem) -> Result<DesignResult> {
    solve_sdp_with(problem, &SolveOptions::default())
}

/// [`solve_sdp`] with explicit solver options.
pub fn solve_sdp_with(problem: &DesignProblem, opts: &SolveOptions) -> Result<DesignResult> {
    barrier::solve_epigraph(problem, opts)
}

/// Interior-point controls. Defaults satisfy the crate-wide 1e-6 relative
/// tolerance contract.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Target relative duality gap.
    pub tol_rel: f64,
    /// Hard cap on total Newton steps.
    pub max_newton: usize,
    /// Barrier parameter multiplier per outer stage.
    pub barrier_mult: f64,
    /// Linear-system strategy.
    pub linear_solver: LinearSolver,
}

/// Strategy for the Newton linear systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolver {
    /// Pick dense or low-rank automatically from the problem shape.
    Auto,
    /// Always assemble and factor the dense Hessian.
    Dense,
    /// Always use the diagonal-plus-low-rank inverse.
    LowRank,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_rel: 5e-7,
            max_newton: 20_000,
            barrier_mult: 20.0,
            linear_solver: LinearSolver::Auto,
        }
    }
}

/// Repeats [`solve_sdp`] with the budget rescaled per element by
/// `1/(w_n + ε)` from the previous iterate, until the weight vector moves
/// less than `tol` in the max norm or `max_iter` solves have run.
///
/// The rescaled budget constraint `Σ_n w_n/(w_n^{prev}+ε) ≤ γ` sharpens the
/// relaxation toward binary weights.
pub fn reweight_iterate(
    problem: &DesignProblem,
    max_iter: usize,
    epsilon: f64,
    tol: f64,
) -> Result<DesignResult> {
    reweight_iterate_with(problem, max_iter, epsilon, tol, &SolveOptions::default())
}

/// [`reweight_iterate`] with explicit solver options.
pub fn reweight_iterate_with(
    problem: &DesignProblem,
    max_iter: usize,
    epsilon: f64,
    tol: f64,
    opts: &SolveOptions,
) -> Result<DesignResult> {
    if max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be >= 1".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let annotate = |e: Error, iter: usize| match e {
        Error::InvalidInput(msg) => Error::InvalidInput(format!("reweight iteration {iter}: {msg}")),
        Error::InfeasibleStart(msg) => {
            Error::InfeasibleStart(format!("reweight iteration {iter}: {msg}"))
        }
        other => other,
    };
    let mut result = solve_sdp_with(problem, opts).map_err(|e| annotate(e, 1))?;
    let mut done = 1usize;
    for iter in 2..=max_iter {
        let scale: Vec<f64> = result.weights.iter().map(|&w| 1.0 / (w + epsilon)).collect();
        let scaled = problem.clone().with_budget_scale(scale)?;
        let next = solve_sdp_with(&scaled, opts).map_err(|e| annotate(e, iter))?;
        let delta = next
            .weights
            .iter()
            .zip(&result.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        result = next;
        done = iter;
        if delta < tol {
            break;
        }
    }
    result.solver_info.reweight_iterations = Some(done);
    Ok(result)
}

/// Per-constraint slack report for a design result; all entries are
/// nonnegative for a feasible point (up to the stated relative tolerance).
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub budget_slack: f64,
    pub box_violation: f64,
    pub cap_violation: f64,
    pub group_violation: f64,
    /// `min_p,θ (μ_p − CRLB_p(θ))`, the worst Schur-complement slack.
    pub lmi_slack: f64,
    /// `min_θ λ_min(Σ w F_θ) − δ_θ` against the positive-definiteness floor.
    pub pd_slack: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self, rel_tol: f64) -> bool {
        self.box_violation <= rel_tol
            && self.budget_slack >= -rel_tol
            && self.cap_violation <= rel_tol
            && self.group_violation <= rel_tol
            && self.lmi_slack >= -rel_tol
            && self.pd_slack >= -rel_tol.min(0.0)
    }
}

/// Checks every active constraint of `problem` at `result` by direct
/// evaluation (budget and box arithmetic, group norms, and eigenvalue tests
/// for the bound conditions).
pub fn check_feasibility(problem: &DesignProblem, result: &DesignResult) -> Result<FeasibilityReport> {
    let w = &result.weights;
    let n = problem.candidates();
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            what: "weights",
            expected: n,
            got: w.len(),
        });
    }
    let budget_used: f64 = w
        .iter()
        .zip(problem.budget_scale())
        .map(|(wi, si)| wi * si)
        .sum();
    let budget_slack = (problem.budget() - budget_used) / problem.budget();
    let box_violation = w
        .iter()
        .map(|&wi| (-wi).max(wi - 1.0))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);

    let mut cap_violation: f64 = 0.0;
    if let Some(caps) = problem.caps() {
        for (p, &cap) in caps.iter().enumerate() {
            if cap.is_finite() {
                cap_violation = cap_violation.max((result.mu[p] - cap) / cap);
            }
        }
    }

    let mut group_violation: f64 = 0.0;
    if let Some(g) = problem.groups() {
        let (r1, r2) = group_norms(w, g.layout);
        if g.gamma1.is_finite() {
            group_violation = group_violation.max((r1 - g.gamma1) / g.gamma1);
        }
        if g.gamma2.is_finite() {
            group_violation = group_violation.max((r2 - g.gamma2) / g.gamma2);
        }
    }

    let mut lmi_slack = f64::INFINITY;
    let mut pd_slack = f64::INFINITY;
    for bank in problem.banks() {
        let agg = aggregate_fim(w, bank)?;
        let delta = pd_floor_shift(bank);
        let eig = agg.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        pd_slack = pd_slack.min((min_eig - delta) / delta.max(1e-300));
        let crlb = crlb_diag(&agg, 0.0)?;
        for (p, &psi) in problem.psi().iter().enumerate() {
            let capped = problem.caps().is_some_and(|c| c[p].is_finite());
            if psi > 0.0 || capped {
                let slack = (result.mu[p] - crlb[p]) / crlb[p].abs().max(1e-300);
                lmi_slack = lmi_slack.min(slack);
            }
        }
    }

    Ok(FeasibilityReport {
        budget_slack,
        box_violation,
        cap_violation,
        group_violation,
        lmi_slack,
        pd_slack,
    })
}

/// Sum of row norms and of column norms of `w` reshaped row-major to the
/// given layout.
pub fn group_norms(w: &[f64], layout: (usize, usize)) -> (f64, f64) {
    let (n1, n2) = layout;
    let mut rows = 0.0;
    for i in 0..n1 {
        let s: f64 = (0..n2).map(|j| w[i * n2 + j] * w[i * n2 + j]).sum();
        rows += s.sqrt();
    }
    let mut cols = 0.0;
    for j in 0..n2 {
        let s: f64 = (0..n1).map(|i| w[i * n2 + j] * w[i * n2 + j]).sum();
        cols += s.sqrt();
    }
    (rows, cols)
}

/// Positive-definiteness floor `δ = 1e-9 · (mean per-sample trace)` used in
/// place of the strict inequality `Σ w_n F_n ≻ 0`.
pub(crate) fn pd_floor_shift(bank: &FimBank) -> f64 {
    let mean_trace: f64 =
        bank.fims().iter().map(DMatrix::trace).sum::<f64>() / bank.len() as f64;
    1e-9 * mean_trace
}
