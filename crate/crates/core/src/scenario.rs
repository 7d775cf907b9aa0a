//! End-to-end study scenarios: design, round, evaluate bounds, compare
//! against baselines, and measure estimator error by Monte Carlo.
//!
//! A [`Scenario`] bundles a model, a candidate grid, noise, design
//! settings, and evaluation settings. [`run_scenario`] executes the
//! design/threshold/evaluate pipeline per budget and optionally adds
//! random-subset and uniform-decimation baselines;
//! [`crlb_rmse_curve`] produces bound-versus-error curves, either
//! weighted-vs-unweighted or over a parameter uncertainty grid. Reports
//! serialize to RFC-4180 CSV with a stable column set so identical inputs
//! and seeds yield byte-identical files.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::designer::{
    reweight_iterate_with, solve_sdp_with, threshold, DesignProblem, DesignResult, GroupBudgets,
    RoundingRule, SolveOptions,
};
use crate::error::{Error, Result};
use crate::estimation::{self, nls_estimate, simulate, EstimationGrid};
use crate::fisher::{crlb_diag, FimBank, ParamGrid};
use crate::models::{CandidateGrid, NoiseSpec, ParamVector, SignalModel};

pub use crate::designer::RoundingRule as Rounding;

/// Uncertainty grid over a single parameter: member `ℓ ∈ 1..=count` takes
/// `lower + (ℓ-1)·delta/count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaGridSpec {
    pub param: usize,
    pub lower: f64,
    pub delta: f64,
    pub count: usize,
}

impl ThetaGridSpec {
    /// Closed interval covered by the grid.
    pub fn interval(&self) -> (f64, f64) {
        ParamGrid::sweep_interval(self.lower, self.delta, self.count)
    }
}

/// Reweighting controls for [`run_scenario`] designs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReweightSpec {
    pub max_iter: usize,
    pub epsilon: f64,
    pub tol: f64,
}

impl Default for ReweightSpec {
    fn default() -> Self {
        Self {
            max_iter: 10,
            epsilon: 1e-6,
            tol: 1e-3,
        }
    }
}

/// Monte Carlo estimation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSpec {
    pub trials: usize,
    /// Points per nonlinear grid axis.
    pub points_per_dim: usize,
    /// Search half-width in multiples of the root-CRLB.
    pub width_mult: f64,
    pub polish: bool,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            trials: 500,
            points_per_dim: 15,
            width_mult: 3.0,
            polish: true,
        }
    }
}

/// Random-baseline settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineSpec {
    pub trials: usize,
    /// Also evaluate an evenly spaced (uniform decimation) subset.
    pub uniform: bool,
}

/// A complete, reproducible study description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub theta: ParamVector,
    pub theta_grid: Option<ThetaGridSpec>,
    pub grid: CandidateGrid,
    pub noise: NoiseSpec,
    /// Budget sweep (γ values); the rounding target is `floor(γ)`.
    pub budgets: Vec<f64>,
    pub psi: Vec<f64>,
    pub caps: Option<Vec<f64>>,
    pub group_budgets: Option<GroupBudgets>,
    pub reweight: Option<ReweightSpec>,
    /// `None` selects the default `TopM(floor γ)` rule.
    pub rounding: Option<RoundingRule>,
    pub eval: Option<EvalSpec>,
    pub baseline: Option<BaselineSpec>,
    pub seed: u64,
    /// Free-form provenance notes surfaced in summaries.
    pub notes: Vec<String>,
}

impl Scenario {
    pub fn model(&self) -> SignalModel {
        self.theta.model()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.model().param_count();
        if self.grid.dim() != self.model().sampling_dim() {
            return Err(Error::DimensionMismatch {
                what: "candidate grid dimension",
                expected: self.model().sampling_dim(),
                got: self.grid.dim(),
            });
        }
        if self.budgets.is_empty() {
            return Err(Error::InvalidInput("budget sweep must be nonempty".into()));
        }
        if self.budgets.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::InvalidInput("budgets must be positive".into()));
        }
        if self.psi.len() != p {
            return Err(Error::DimensionMismatch {
                what: "psi weights",
                expected: p,
                got: self.psi.len(),
            });
        }
        if let Some(tg) = &self.theta_grid {
            if tg.param >= p {
                return Err(Error::IndexOutOfRange {
                    index: tg.param,
                    size: p,
                });
            }
            if tg.count == 0 {
                return Err(Error::InvalidInput("theta grid count must be >= 1".into()));
            }
        }
        if let Some(e) = &self.eval {
            if e.trials == 0 || e.points_per_dim == 0 {
                return Err(Error::InvalidInput(
                    "evaluation trials and grid points must be positive".into(),
                ));
            }
        }
        if let Some(b) = &self.baseline {
            if b.trials == 0 {
                return Err(Error::InvalidInput("baseline trials must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// The parameter uncertainty set Θ.
    pub fn param_grid(&self) -> Result<ParamGrid> {
        match &self.theta_grid {
            None => Ok(ParamGrid::singleton(self.theta.clone())),
            Some(tg) => ParamGrid::sweep(&self.theta, tg.param, tg.lower, tg.delta, tg.count),
        }
    }

    /// Per-θ Fisher information banks over the candidate grid.
    pub fn banks(&self) -> Result<Vec<FimBank>> {
        self.param_grid()?
            .thetas()
            .iter()
            .map(|t| FimBank::build(t, &self.grid, &self.noise))
            .collect()
    }

    fn design_problem(
        &self,
        banks: Vec<FimBank>,
        gamma: f64,
        psi: Vec<f64>,
    ) -> Result<DesignProblem> {
        let mut problem = DesignProblem::new(banks, gamma, psi)?;
        if let Some(caps) = &self.caps {
            problem = problem.with_caps(caps.clone())?;
        }
        if let Some(g) = self.group_budgets {
            problem = problem.with_group_budgets(g)?;
        }
        Ok(problem)
    }

    fn solve(&self, problem: &DesignProblem) -> Result<DesignResult> {
        let opts = SolveOptions::default();
        match &self.reweight {
            Some(rw) => reweight_iterate_with(problem, rw.max_iter, rw.epsilon, rw.tol, &opts),
            None => solve_sdp_with(problem, &opts),
        }
    }

    fn rounding_for(&self, gamma: f64) -> RoundingRule {
        self.rounding
            .unwrap_or(RoundingRule::TopM((gamma.floor() as usize).min(self.grid.len())))
    }
}

/// Named parameter-subset statistics at one selected sampling set.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetStat {
    pub name: String,
    /// Root of the summed CRLBs, best (smallest) over Θ.
    pub root_crlb_best: f64,
    /// Root of the summed CRLBs, worst over Θ.
    pub root_crlb_worst: f64,
    pub rmse: Option<f64>,
}

/// One report row: a method at one budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub budget: f64,
    pub m: usize,
    /// `Σ_p ψ_p · (worst-case CRLB_p)` at the selected set.
    pub objective: f64,
    pub selected: Vec<usize>,
    pub crlb_best: Vec<f64>,
    pub crlb_worst: Vec<f64>,
    pub subsets: Vec<SubsetStat>,
    /// Wall-clock time spent producing this row, excluded from the CSV so
    /// reports stay byte-deterministic.
    pub timing_ms: f64,
}

/// Tabular result of a scenario run.
#[derive(Debug, Clone)]
pub struct Report {
    pub scenario: String,
    pub param_names: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

impl Report {
    fn subset_names(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut names = Vec::new();
        for row in &self.rows {
            for s in &row.subsets {
                if seen.insert(s.name.clone()) {
                    names.push(s.name.clone());
                }
            }
        }
        names
    }

    /// Serializes the data columns as RFC-4180 CSV. Identical scenarios and
    /// seeds produce byte-identical output.
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
        let subset_names = self.subset_names();
        let mut header: Vec<String> = ["method", "budget", "m", "objective", "selected"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for p in &self.param_names {
            header.push(format!("crlb_best_{p}"));
        }
        for p in &self.param_names {
            header.push(format!("crlb_worst_{p}"));
        }
        for s in &subset_names {
            header.push(format!("{s}_root_crlb_best"));
            header.push(format!("{s}_root_crlb_worst"));
            header.push(format!("{s}_rmse"));
        }
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = vec![
                row.method.clone(),
                fmt(row.budget),
                row.m.to_string(),
                fmt(row.objective),
                row.selected
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(";"),
            ];
            for v in &row.crlb_best {
                rec.push(fmt(*v));
            }
            for v in &row.crlb_worst {
                rec.push(fmt(*v));
            }
            for name in &subset_names {
                match row.subsets.iter().find(|s| &s.name == name) {
                    Some(s) => {
                        rec.push(fmt(s.root_crlb_best));
                        rec.push(fmt(s.root_crlb_worst));
                        rec.push(s.rmse.map(fmt).unwrap_or_default());
                    }
                    None => {
                        rec.extend([String::new(), String::new(), String::new()]);
                    }
                }
            }
            wtr.write_record(&rec)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_csv()?.as_bytes())?;
        Ok(())
    }

    /// Human-readable summary (includes timings; not byte-deterministic).
    pub fn summary(&self) -> String {
        let mut out = format!("scenario {}\n", self.scenario);
        for note in &self.notes {
            out.push_str(&format!("  note: {note}\n"));
        }
        for row in &self.rows {
            out.push_str(&format!(
                "  {:<18} gamma={:<6} M={:<4} objective={:.6e}  [{} pts, {:.0} ms]\n",
                row.method,
                row.budget,
                row.m,
                row.objective,
                row.selected.len(),
                row.timing_ms
            ));
            for s in &row.subsets {
                out.push_str(&format!(
                    "      {:<10} root-CRLB [{:.4e}, {:.4e}]{}\n",
                    s.name,
                    s.root_crlb_best,
                    s.root_crlb_worst,
                    match s.rmse {
                        Some(r) => format!("  rmse {r:.4e}"),
                        None => String::new(),
                    }
                ));
            }
        }
        out
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Per-parameter CRLBs of an index subset, (best, worst) over Θ.
fn subset_crlb_envelope(banks: &[FimBank], selected: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = banks[0].dim();
    let mut best = vec![f64::INFINITY; p];
    let mut worst = vec![f64::NEG_INFINITY; p];
    for (l, bank) in banks.iter().enumerate() {
        let fim = bank.subset_fim(selected)?;
        let crlb = crlb_diag(&fim, 0.0).map_err(|e| match e {
            Error::SingularFim { .. } => Error::SingularFim {
                theta_index: Some(l),
            },
            other => other,
        })?;
        for i in 0..p {
            best[i] = best[i].min(crlb[i]);
            worst[i] = worst[i].max(crlb[i]);
        }
    }
    Ok((best, worst))
}

fn weighted_worst_objective(psi: &[f64], worst: &[f64]) -> f64 {
    psi.iter().zip(worst).map(|(a, b)| a * b).sum()
}

fn root_subset(values: &[f64], subset: &[usize]) -> f64 {
    subset.iter().map(|&p| values[p]).sum::<f64>().sqrt()
}

/// Standard named subsets of a model's parameters.
fn standard_subsets(model: &SignalModel) -> Vec<(String, Vec<usize>)> {
    let mut subs = Vec::new();
    let f = model.frequency_indices();
    if !f.is_empty() {
        subs.push(("frequency".to_string(), f));
    }
    let d = model.damping_indices();
    if !d.is_empty() {
        subs.push(("damping".to_string(), d));
    }
    subs.push(("amplitude".to_string(), model.amplitude_indices()));
    subs
}

fn subset_stats(
    subsets: &[(String, Vec<usize>)],
    best: &[f64],
    worst: &[f64],
) -> Vec<SubsetStat> {
    subsets
        .iter()
        .map(|(name, idx)| SubsetStat {
            name: name.clone(),
            root_crlb_best: root_subset(best, idx),
            root_crlb_worst: root_subset(worst, idx),
            rmse: None,
        })
        .collect()
}

/// Draws `trials` uniform `m`-subsets, evaluates `Σ ψ_p · worst-case
/// CRLB_p` for each, and returns the best subset with its objective.
/// Subsets with singular information are skipped (and counted toward the
/// trial budget); if every draw is singular, [`Error::AllSingular`].
pub fn random_baseline(
    banks: &[FimBank],
    m: usize,
    trials: usize,
    psi: &[f64],
    seed: u64,
) -> Result<(Vec<usize>, f64)> {
    if banks.is_empty() {
        return Err(Error::InvalidInput("bank list must be nonempty".into()));
    }
    let n = banks[0].len();
    if m > n {
        return Err(Error::InvalidInput(format!(
            "cannot draw {m} of {n} candidates"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("baseline trials must be >= 1".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..trials {
        let mut pick: Vec<usize> = rand::seq::index::sample(&mut rng, n, m).into_vec();
        pick.sort_unstable();
        let mut worst = vec![f64::NEG_INFINITY; banks[0].dim()];
        let mut singular = false;
        for bank in banks {
            let fim = bank.subset_fim(&pick)?;
            match crlb_diag(&fim, 0.0) {
                Ok(c) => {
                    for (w, v) in worst.iter_mut().zip(c.iter()) {
                        *w = w.max(*v);
                    }
                }
                Err(_) => {
                    singular = true;
                    break;
                }
            }
        }
        if singular {
            continue;
        }
        let objective = weighted_worst_objective(psi, &worst);
        if best.as_ref().is_none_or(|(_, b)| objective < *b) {
            best = Some((pick, objective));
        }
    }
    best.ok_or(Error::AllSingular)
}

/// Evenly spaced index subset (uniform decimation). On Cartesian 2-D grids
/// the decimation is applied per dimension with `m1·m2 ≤ m` points.
pub fn uniform_decimation(grid: &CandidateGrid, m: usize) -> Vec<usize> {
    let n = grid.len();
    let m = m.min(n).max(1);
    match grid.layout() {
        None => spread_indices(n, m),
        Some((n1, n2)) => {
            let ratio = n1 as f64 / n2 as f64;
            let m1 = ((m as f64 * ratio).sqrt().round() as usize).clamp(1, n1);
            let m2 = (m / m1).clamp(1, n2);
            let rows = spread_indices(n1, m1);
            let cols = spread_indices(n2, m2);
            let mut out = Vec::with_capacity(rows.len() * cols.len());
            for &i in &rows {
                for &j in &cols {
                    out.push(i * n2 + j);
                }
            }
            out
        }
    }
}

fn spread_indices(n: usize, m: usize) -> Vec<usize> {
    if m >= n {
        return (0..n).collect();
    }
    if m == 1 {
        return vec![0];
    }
    (0..m)
        .map(|j| ((j as f64) * (n - 1) as f64 / (m - 1) as f64).round() as usize)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Runs the design/threshold/evaluate pipeline for every budget of the
/// scenario, optionally adding random and uniform baselines and Monte
/// Carlo RMSE evaluation. Deterministic given the scenario and its seed.
pub fn run_scenario(s: &Scenario) -> Result<Report> {
    s.validate()?;
    let banks = s.banks()?;
    let model = s.model();
    let subsets = standard_subsets(&model);
    let mut rows = Vec::new();
    for &gamma in &s.budgets {
        let t0 = Instant::now();
        let problem = s.design_problem(banks.clone(), gamma, s.psi.clone())?;
        let result = s.solve(&problem).map_err(|e| annotate(e, &s.name, gamma))?;
        let selected = threshold(&result.weights, s.rounding_for(gamma))?;
        let (best, worst) = subset_crlb_envelope(&banks, &selected)?;
        let mut stats = subset_stats(&subsets, &best, &worst);
        if let Some(eval) = &s.eval {
            let rmse = monte_carlo_rmse(s, &selected, eval, &worst)?;
            attach_rmse(&mut stats, &rmse);
        }
        rows.push(ReportRow {
            method: "design".into(),
            budget: gamma,
            m: selected.len(),
            objective: weighted_worst_objective(&s.psi, &worst),
            selected,
            crlb_best: best,
            crlb_worst: worst,
            subsets: stats,
            timing_ms: t0.elapsed().as_secs_f64() * 1e3,
        });

        if let Some(base) = &s.baseline {
            let m = (gamma.floor() as usize).min(s.grid.len());
            let t1 = Instant::now();
            let (pick, objective) = random_baseline(&banks, m, base.trials, &s.psi, s.seed)?;
            let (b_best, b_worst) = subset_crlb_envelope(&banks, &pick)?;
            rows.push(ReportRow {
                method: "random".into(),
                budget: gamma,
                m: pick.len(),
                objective,
                selected: pick,
                subsets: subset_stats(&subsets, &b_best, &b_worst),
                crlb_best: b_best,
                crlb_worst: b_worst,
                timing_ms: t1.elapsed().as_secs_f64() * 1e3,
            });
            if base.uniform {
                let t2 = Instant::now();
                let pick = uniform_decimation(&s.grid, m);
                match subset_crlb_envelope(&banks, &pick) {
                    Ok((u_best, u_worst)) => rows.push(ReportRow {
                        method: "uniform".into(),
                        budget: gamma,
                        m: pick.len(),
                        objective: weighted_worst_objective(&s.psi, &u_worst),
                        selected: pick,
                        subsets: subset_stats(&subsets, &u_best, &u_worst),
                        crlb_best: u_best,
                        crlb_worst: u_worst,
                        timing_ms: t2.elapsed().as_secs_f64() * 1e3,
                    }),
                    // Decimated subsets can be uninformative for some
                    // models; skip the row rather than fail the run.
                    Err(Error::SingularFim { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(Report {
        scenario: s.name.clone(),
        param_names: model.param_names(),
        rows,
        notes: s.notes.clone(),
    })
}

fn annotate(e: Error, name: &str, gamma: f64) -> Error {
    match e {
        Error::InvalidInput(msg) => {
            Error::InvalidInput(format!("scenario {name} (gamma {gamma}): {msg}"))
        }
        other => other,
    }
}

fn attach_rmse(stats: &mut [SubsetStat], rmse: &[(String, f64)]) {
    for stat in stats.iter_mut() {
        if let Some((_, r)) = rmse.iter().find(|(n, _)| n == &stat.name) {
            stat.rmse = Some(*r);
        }
    }
}

/// Monte Carlo NLS error at a fixed selected set. Returns per-subset
/// RMSEs. For gridded scenarios the true parameter is redrawn each trial,
/// uniformly over the covered interval but never exactly on a grid member.
fn monte_carlo_rmse(
    s: &Scenario,
    selected: &[usize],
    eval: &EvalSpec,
    worst_crlb: &[f64],
) -> Result<Vec<(String, f64)>> {
    let model = s.model();
    let root_crlb: Vec<f64> = worst_crlb.iter().map(|&c| c.max(0.0).sqrt()).collect();

    let truths: Vec<ParamVector> = match &s.theta_grid {
        None => vec![s.theta.clone(); eval.trials],
        Some(tg) => {
            let (lo, hi) = tg.interval();
            let members: Vec<f64> = s
                .param_grid()?
                .thetas()
                .iter()
                .map(|t| t.values()[tg.param])
                .collect();
            // Distinct stream from the observation noise.
            let seed = s.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
            let mut truths = Vec::with_capacity(eval.trials);
            for trial in 0..eval.trials {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(trial as u64);
                let value = loop {
                    let u: f64 = rand::Rng::random(&mut rng);
                    let v = lo + u * (hi - lo);
                    if members.iter().all(|&g| (v - g).abs() > 1e-12) {
                        break v;
                    }
                };
                truths.push(s.theta.with_value(tg.param, value)?);
            }
            truths
        }
    };

    let estimates: Vec<ParamVector> = (0..eval.trials)
        .into_par_iter()
        .map(|trial| -> Result<ParamVector> {
            let truth = &truths[trial];
            let obs = simulate(truth, &s.grid, selected, &s.noise, s.seed, trial as u64)?;
            let search = EstimationGrid::centered(
                truth,
                &root_crlb,
                eval.width_mult,
                eval.points_per_dim,
            )?
            .with_polish(eval.polish);
            nls_estimate(&obs, &model, &s.grid, &search)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::new();
    let freq = model.frequency_indices();
    if !freq.is_empty() {
        out.push((
            "frequency".to_string(),
            estimation::rmse_paired(&estimates, &truths, &freq),
        ));
    }
    let damp = model.damping_indices();
    if !damp.is_empty() {
        out.push((
            "damping".to_string(),
            estimation::rmse_paired(&estimates, &truths, &damp),
        ));
    }
    out.push((
        "amplitude".to_string(),
        estimation::rmse_paired(&estimates, &truths, &model.amplitude_indices()),
    ));
    Ok(out)
}

/// Bound-versus-error curves.
///
/// Without a parameter grid this produces, per budget, a weighted design
/// (the scenario's ψ) and an unweighted one (ψ = 1), each with subset
/// root-CRLBs and NLS RMSEs. With a parameter grid it produces the
/// on-grid best/worst root-CRLB envelope plus off-grid RMSE per budget.
/// Requires at least 100 Monte Carlo trials when evaluation is enabled.
pub fn crlb_rmse_curve(s: &Scenario) -> Result<Report> {
    s.validate()?;
    if let Some(eval) = &s.eval {
        if eval.trials < 100 {
            return Err(Error::InvalidInput(format!(
                "bound-vs-error curves need >= 100 trials, got {}",
                eval.trials
            )));
        }
    }
    let banks = s.banks()?;
    let model = s.model();
    let subsets = standard_subsets(&model);
    let mut rows = Vec::new();

    let unweighted = vec![1.0; model.param_count()];
    let variants: Vec<(String, Vec<f64>)> = if s.theta_grid.is_some() || s.psi == unweighted {
        vec![("design".to_string(), s.psi.clone())]
    } else {
        vec![
            ("design_weighted".to_string(), s.psi.clone()),
            ("design_unweighted".to_string(), unweighted),
        ]
    };

    for &gamma in &s.budgets {
        for (label, psi) in &variants {
            let t0 = Instant::now();
            let problem = s.design_problem(banks.clone(), gamma, psi.clone())?;
            let result = s.solve(&problem).map_err(|e| annotate(e, &s.name, gamma))?;
            let selected = threshold(&result.weights, s.rounding_for(gamma))?;
            let (best, worst) = subset_crlb_envelope(&banks, &selected)?;
            let mut stats = subset_stats(&subsets, &best, &worst);
            if let Some(eval) = &s.eval {
                let rmse = monte_carlo_rmse(s, &selected, eval, &worst)?;
                attach_rmse(&mut stats, &rmse);
            }
            rows.push(ReportRow {
                method: label.clone(),
                budget: gamma,
                m: selected.len(),
                objective: weighted_worst_objective(psi, &worst),
                selected,
                crlb_best: best,
                crlb_worst: worst,
                subsets: stats,
                timing_ms: t0.elapsed().as_secs_f64() * 1e3,
            });
        }
    }
    Ok(Report {
        scenario: s.name.clone(),
        param_names: model.param_names(),
        rows,
        notes: s.notes.clone(),
    })
}

/// Built-in study preset names.
pub const PRESET_NAMES: [&str; 7] = [
    "fig1", "fig2", "fig3", "fig4", "fig5_6", "fig7_8", "fig9_12",
];

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<Scenario> {
    match name {
        "fig1" => fig1(0.1),
        "fig2" => fig2(),
        "fig3" => fig3(),
        "fig4" => fig4(),
        "fig5_6" => fig5_6(),
        "fig7_8" => fig7_8(),
        "fig9_12" => fig9_12(),
        other => Err(Error::InvalidInput(format!(
            "unknown preset {other:?}; available: {PRESET_NAMES:?}"
        ))),
    }
}

/// Preset lookup with a damping override for single-component presets.
pub fn preset_with_beta(name: &str, beta: f64) -> Result<Scenario> {
    let mut s = preset(name)?;
    let idx = s
        .model()
        .damping_indices()
        .first()
        .copied()
        .ok_or_else(|| Error::InvalidInput("preset model has no damping parameter".into()))?;
    if s.model().components() != 1 || s.theta_grid.is_some() {
        return Err(Error::InvalidInput(
            "damping override applies to single-component presets without a parameter grid".into(),
        ));
    }
    s.theta = s.theta.with_value(idx, beta)?;
    s.name = format!("{name}_beta{beta}");
    Ok(s)
}

/// Single 1-D damped sinusoid, 13 of 50 samples, all parameters weighted.
pub fn fig1(beta: f64) -> Result<Scenario> {
    let model = SignalModel::damped_1d(1)?;
    Ok(Scenario {
        name: format!("fig1_beta{beta}"),
        theta: ParamVector::new(model, vec![1.0, 0.25, beta, 0.5])?,
        theta_grid: None,
        grid: CandidateGrid::uniform_1d_from(1.0, 50)?,
        noise: NoiseSpec::new(0.1)?,
        budgets: vec![13.0],
        psi: vec![1.0; 4],
        caps: None,
        group_budgets: None,
        reweight: None,
        rounding: None,
        eval: None,
        baseline: None,
        seed: 42,
        notes: vec![
            "amplitude/frequency/phase defaults (1.0, 0.25, 0.5) are placeholders".into(),
        ],
    })
}

/// Two linear chirps, budgets 15/20/25 of 50.
pub fn fig2() -> Result<Scenario> {
    let model = SignalModel::chirp_1d(2)?;
    Ok(Scenario {
        name: "fig2".into(),
        theta: ParamVector::new(
            model,
            vec![
                5.0,
                0.1,
                0.01,
                std::f64::consts::FRAC_PI_2,
                5.0,
                0.5,
                -0.003,
                std::f64::consts::PI / 3.0,
            ],
        )?,
        theta_grid: None,
        grid: CandidateGrid::uniform_1d_from(1.0, 50)?,
        noise: NoiseSpec::new(0.1)?,
        budgets: vec![15.0, 20.0, 25.0],
        psi: vec![1.0; 8],
        caps: None,
        group_budgets: None,
        reweight: None,
        rounding: None,
        eval: None,
        baseline: None,
        seed: 42,
        notes: vec!["noise variance 0.1 is a placeholder".into()],
    })
}

/// 1-D design-versus-random comparison across budgets.
pub fn fig3() -> Result<Scenario> {
    let mut s = fig1(0.1)?;
    s.name = "fig3".into();
    s.budgets = vec![5.0, 8.0, 12.0, 15.0, 18.0, 21.0, 25.0];
    s.baseline = Some(BaselineSpec {
        trials: 10_000,
        uniform: true,
    });
    s.notes
        .push("random baseline reduced to 1e4 trials (desk scale)".into());
    Ok(s)
}

/// Single 2-D damped sinusoid on a 50×50 grid, 50 samples.
pub fn fig4() -> Result<Scenario> {
    let model = SignalModel::damped_2d(1)?;
    Ok(Scenario {
        name: "fig4".into(),
        theta: ParamVector::new(model, vec![1.0, 0.2, 0.5, 1.0 / 20.0, 1.0 / 10.0, 0.5])?,
        theta_grid: None,
        grid: CandidateGrid::uniform_2d_from(1.0, 50, 50)?,
        noise: NoiseSpec::new(0.1)?,
        budgets: vec![50.0],
        psi: vec![1.0; 6],
        caps: None,
        group_budgets: None,
        reweight: None,
        rounding: None,
        eval: None,
        baseline: Some(BaselineSpec {
            trials: 10_000,
            uniform: true,
        }),
        seed: 42,
        notes: vec!["random baseline reduced to 1e4 trials (desk scale)".into()],
    })
}

/// Two 1-D damped sinusoids; frequency/damping-weighted versus unweighted
/// designs with Monte Carlo RMSE.
pub fn fig5_6() -> Result<Scenario> {
    let model = SignalModel::damped_1d(2)?;
    let mut psi = vec![0.0; 8];
    for i in model.frequency_indices() {
        psi[i] = 1.0;
    }
    for i in model.damping_indices() {
        psi[i] = 1.0;
    }
    Ok(Scenario {
        name: "fig5_6".into(),
        theta: ParamVector::new(
            model,
            vec![
                1.0,
                0.2,
                1.0 / 12.0,
                0.5,
                1.0,
                0.65,
                1.0 / 20.0,
                std::f64::consts::PI / 5.0,
            ],
        )?,
        theta_grid: None,
        grid: CandidateGrid::uniform_1d_from(1.0, 50)?,
        noise: NoiseSpec::new(0.01)?,
        budgets: vec![20.0, 30.0, 40.0],
        psi,
        caps: None,
        group_budgets: None,
        reweight: None,
        rounding: None,
        eval: Some(EvalSpec {
            trials: 500,
            ..EvalSpec::default()
        }),
        baseline: None,
        seed: 42,
        notes: vec!["Monte Carlo trials reduced to 500 (desk scale)".into()],
    })
}

/// Damping-uncertainty design: β gridded over [0.1, 0.1198], off-grid
/// evaluation.
pub fn fig7_8() -> Result<Scenario> {
    let model = SignalModel::damped_1d(1)?;
    Ok(Scenario {
        name: "fig7_8".into(),
        theta: ParamVector::new(model, vec![1.0, 0.25, 0.1, 0.5])?,
        theta_grid: Some(ThetaGridSpec {
            param: 2,
            lower: 0.1,
            delta: 0.022,
            count: 10,
        }),
        grid: CandidateGrid::uniform_1d_from(1.0, 50)?,
        noise: NoiseSpec::new(0.1)?,
        budgets: vec![15.0, 25.0, 35.0],
        psi: vec![1.0; 4],
        caps: None,
        group_budgets: None,
        reweight: None,
        rounding: None,
        eval: Some(EvalSpec {
            trials: 500,
            ..EvalSpec::default()
        }),
        baseline: None,
        seed: 42,
        notes: vec![
            "frequency fixed at the placeholder 0.25".into(),
            "Monte Carlo trials reduced to 500 (desk scale)".into(),
        ],
    })
}

/// Two 2-D damped sinusoids, weighted versus unweighted designs.
pub fn fig9_12() -> Result<Scenario> {
    let model = SignalModel::damped_2d(2)?;
    let mut psi = vec![0.0; 12];
    for i in model.frequency_indices() {
        psi[i] = 1.0;
    }
    for i in model.damping_indices() {
        psi[i] = 1.0;
    }
    Ok(Scenario {
        name: "fig9_12".into(),
        theta: ParamVector::new(
            model,
            vec![
                1.0,
                0.1,
                0.1,
                0.1,
                0.1,
                std::f64::consts::PI / 3.0,
                1.3,
                0.2,
                0.2,
                0.1,
                0.1,
                std::f64::consts::PI / 3.0,
            ],
        )?,
        theta_grid: None,
        grid: CandidateGrid::uniform_2d_from(1.0, 50, 50)?,
        noise: NoiseSpec::new(0.01)?,
        budgets: vec![40.0, 60.0, 80.0],
        psi,
        caps: None,
        group_budgets: None,
        reweight: None,
        rounding: None,
        eval: Some(EvalSpec {
            trials: 200,
            points_per_dim: 5,
            ..EvalSpec::default()
        }),
        baseline: None,
        seed: 42,
        notes: vec![
            "both sampling dimensions carry identical component parameters by construction"
                .into(),
            "Monte Carlo trials reduced to 200 with a 5-point search grid (desk scale)".into(),
        ],
    })
}
