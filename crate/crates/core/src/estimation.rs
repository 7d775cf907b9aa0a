//! Simulation and grid-based nonlinear least-squares estimation.
//!
//! Observations are drawn at a selected sampling schedule and the model
//! parameters re-estimated by minimizing `½‖y − g(θ)‖²` over a Cartesian
//! grid of the nonlinear parameters (frequencies, dampings, chirp rates).
//! Complex amplitudes are linear in the model, so for every nonlinear grid
//! point the amplitude/phase of each component is solved in closed form by
//! linear least squares; this leaves the minimized objective unchanged
//! while keeping multi-component searches tractable. An optional
//! coordinate-wise quadratic polish refines the winning grid point to
//! reduce quantization bias.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::models::{self, CandidateGrid, ModelKind, NoiseSpec, ParamVector, SignalModel};

/// Hard cap on the total number of nonlinear grid points.
pub const GRID_POINT_CAP: usize = 1_000_000;

/// Noisy samples at a selected subset of candidates.
#[derive(Debug, Clone)]
pub struct Observation {
    /// Selected candidate indices Ω.
    pub indices: Vec<usize>,
    /// Complex samples, one per selected index.
    pub values: Vec<Complex64>,
    pub noise: NoiseSpec,
    pub seed: u64,
}

/// Simulates `y_n = s(t_n; θ) + ε_n` over the selected indices, with
/// `ε_n` i.i.d. circularly symmetric complex Gaussian (real and imaginary
/// parts of variance `σ²/2` each). The stream index makes trials of one
/// study reproducible and independent: trial `i` uses `(seed, stream=i)`.
pub fn simulate(
    theta: &ParamVector,
    grid: &CandidateGrid,
    selected: &[usize],
    noise: &NoiseSpec,
    seed: u64,
    stream: u64,
) -> Result<Observation> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let sd = (noise.variance() / 2.0).sqrt();
    let mut values = Vec::with_capacity(selected.len());
    for &n in selected {
        if n >= grid.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                size: grid.len(),
            });
        }
        let s = models::mean(theta, grid.point(n))?;
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        values.push(s + Complex64::new(sd * re, sd * im));
    }
    Ok(Observation {
        indices: selected.to_vec(),
        values,
        noise: *noise,
        seed,
    })
}

/// One axis of the nonlinear search grid.
#[derive(Debug, Clone)]
pub struct GridAxis {
    /// Index of the parameter in the model layout.
    pub param: usize,
    pub values: Vec<f64>,
}

/// Cartesian search grid over the nonlinear parameters, with amplitudes and
/// phases solved linearly per grid point.
#[derive(Debug, Clone)]
pub struct EstimationGrid {
    axes: Vec<GridAxis>,
    polish: bool,
    polish_budget: usize,
}

impl EstimationGrid {
    /// `axes` must cover exactly the nonlinear (frequency/damping/chirp)
    /// parameters of `model`, in layout order.
    pub fn new(model: &SignalModel, axes: Vec<GridAxis>) -> Result<Self> {
        let mut expected: Vec<usize> = model.frequency_indices();
        expected.extend(model.damping_indices());
        expected.sort_unstable();
        let mut got: Vec<usize> = axes.iter().map(|a| a.param).collect();
        got.sort_unstable();
        if got != expected {
            return Err(Error::InvalidInput(format!(
                "grid axes {got:?} must cover the nonlinear parameters {expected:?}"
            )));
        }
        if axes.iter().any(|a| a.values.is_empty()) {
            return Err(Error::EmptyGrid);
        }
        let total: usize = axes
            .iter()
            .map(|a| a.values.len())
            .try_fold(1usize, |acc, len| acc.checked_mul(len))
            .ok_or(Error::InvalidInput("grid size overflow".into()))?;
        if total > GRID_POINT_CAP {
            return Err(Error::InvalidInput(format!(
                "estimation grid has {total} points, cap is {GRID_POINT_CAP}"
            )));
        }
        Ok(Self {
            axes,
            polish: false,
            polish_budget: 200,
        })
    }

    /// Grid of `points` values per axis centered on the true nonlinear
    /// parameters, spanning ± `width_mult` × root-CRLB per parameter.
    /// Dampings are clamped at zero from below.
    pub fn centered(
        truth: &ParamVector,
        root_crlb: &[f64],
        width_mult: f64,
        points: usize,
    ) -> Result<Self> {
        if points == 0 {
            return Err(Error::EmptyGrid);
        }
        let model = truth.model();
        if root_crlb.len() != model.param_count() {
            return Err(Error::DimensionMismatch {
                what: "root-CRLB vector",
                expected: model.param_count(),
                got: root_crlb.len(),
            });
        }
        let mut nonlinear: Vec<usize> = model.frequency_indices();
        nonlinear.extend(model.damping_indices());
        nonlinear.sort_unstable();
        let damping = model.damping_indices();
        let mut axes = Vec::with_capacity(nonlinear.len());
        for &p in &nonlinear {
            let center = truth.values()[p];
            let half = width_mult * root_crlb[p];
            let lo = if damping.contains(&p) {
                (center - half).max(0.0)
            } else {
                center - half
            };
            let hi = center + half;
            let values = if points == 1 {
                vec![center]
            } else {
                (0..points)
                    .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
                    .collect()
            };
            axes.push(GridAxis { param: p, values });
        }
        Self::new(&model, axes)
    }

    /// Enables the coordinate-wise quadratic polish (default budget 200
    /// cost evaluations).
    pub fn with_polish(mut self, enabled: bool) -> Self {
        self.polish = enabled;
        self
    }

    pub fn with_polish_budget(mut self, budget: usize) -> Self {
        self.polish_budget = budget;
        self
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn total_points(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }
}

/// Basis column of one component over the observed points: the component
/// mean with unit amplitude and zero phase.
fn component_column(
    model: &SignalModel,
    nonlinear: &[f64],
    component: usize,
    points: &[Vec<f64>],
) -> DVector<Complex64> {
    let per = model.params_per_component();
    let base = component * per;
    DVector::from_iterator(
        points.len(),
        points.iter().map(|t| match model.kind() {
            ModelKind::DampedSinusoid1D => {
                let f = nonlinear[base + 1];
                let b = nonlinear[base + 2];
                Complex64::from_polar((-b * t[0]).exp(), std::f64::consts::TAU * f * t[0])
            }
            ModelKind::LinearChirp1D => {
                let f0 = nonlinear[base + 1];
                let f1 = nonlinear[base + 2];
                Complex64::from_polar(1.0, std::f64::consts::TAU * (f0 + f1 * t[0]) * t[0])
            }
            ModelKind::DampedSinusoid2D => {
                let f1 = nonlinear[base + 1];
                let f2 = nonlinear[base + 2];
                let b1 = nonlinear[base + 3];
                let b2 = nonlinear[base + 4];
                Complex64::from_polar(
                    (-(b1 * t[0] + b2 * t[1])).exp(),
                    std::f64::consts::TAU * (f1 * t[0] + f2 * t[1]),
                )
            }
        }),
    )
}

/// Solves the linear-amplitude subproblem for fixed nonlinear parameters:
/// returns the residual objective `½‖y − M c‖²` and the complex amplitudes.
fn amplitude_solve(
    columns: &[DVector<Complex64>],
    y: &DVector<Complex64>,
) -> Option<(f64, Vec<Complex64>)> {
    let k = columns.len();
    let mut gram = DMatrix::from_element(k, k, Complex64::new(0.0, 0.0));
    let mut rhs = DVector::from_element(k, Complex64::new(0.0, 0.0));
    for i in 0..k {
        for j in 0..k {
            gram[(i, j)] = columns[i].dotc(&columns[j]);
        }
        rhs[i] = columns[i].dotc(y);
    }
    let chol = gram.cholesky()?;
    let c = chol.solve(&rhs);
    // ½‖y‖² − ½ Re(c^H rhs) is the least-squares optimum.
    let yy: f64 = y.iter().map(|z| z.norm_sqr()).sum();
    let fit: f64 = c
        .iter()
        .zip(rhs.iter())
        .map(|(ci, ri)| (ci.conj() * ri).re)
        .sum();
    Some((0.5 * (yy - fit).max(0.0), c.iter().copied().collect()))
}

struct CostEvaluator<'a> {
    model: SignalModel,
    points: Vec<Vec<f64>>,
    y: DVector<Complex64>,
    template: Vec<f64>,
    axes: &'a [GridAxis],
}

impl<'a> CostEvaluator<'a> {
    /// Cost and amplitudes at one nonlinear grid point given per-axis value
    /// choices.
    fn eval(&self, values: &[f64]) -> Option<(f64, Vec<Complex64>)> {
        let mut nonlinear = self.template.clone();
        for (axis, &v) in self.axes.iter().zip(values) {
            nonlinear[axis.param] = v;
        }
        let cols: Vec<DVector<Complex64>> = (0..self.model.components())
            .map(|k| component_column(&self.model, &nonlinear, k, &self.points))
            .collect();
        amplitude_solve(&cols, &self.y)
    }
}

/// Grid-based NLS estimate of the full parameter vector.
///
/// Returns the parameter vector minimizing `½‖y − g(θ)‖²` over the search
/// grid (ties broken by the lexicographically first grid point in axis
/// order), with amplitudes/phases recovered from the linear subproblem and
/// optionally refined by the polish pass.
pub fn nls_estimate(
    obs: &Observation,
    model: &SignalModel,
    grid: &CandidateGrid,
    search: &EstimationGrid,
) -> Result<ParamVector> {
    if obs.indices.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if obs.values.len() != obs.indices.len() {
        return Err(Error::DimensionMismatch {
            what: "observation",
            expected: obs.indices.len(),
            got: obs.values.len(),
        });
    }
    let points: Vec<Vec<f64>> = obs
        .indices
        .iter()
        .map(|&n| {
            if n >= grid.len() {
                Err(Error::IndexOutOfRange {
                    index: n,
                    size: grid.len(),
                })
            } else {
                Ok(grid.point(n).to_vec())
            }
        })
        .collect::<Result<_>>()?;
    let y = DVector::from_iterator(obs.values.len(), obs.values.iter().copied());
    let evaluator = CostEvaluator {
        model: *model,
        points,
        y,
        template: vec![0.0; model.param_count()],
        axes: search.axes(),
    };

    // Exhaustive pass over the Cartesian grid, first-index tie break.
    let dims: Vec<usize> = search.axes().iter().map(|a| a.values.len()).collect();
    let mut index = vec![0usize; dims.len()];
    let mut best: Option<(f64, Vec<f64>, Vec<Complex64>)> = None;
    loop {
        let values: Vec<f64> = search
            .axes()
            .iter()
            .zip(&index)
            .map(|(a, &i)| a.values[i])
            .collect();
        if let Some((cost, amps)) = evaluator.eval(&values) {
            if best.as_ref().is_none_or(|(b, _, _)| cost < *b) {
                best = Some((cost, values, amps));
            }
        }
        // advance odometer, last axis fastest
        let mut k = dims.len();
        loop {
            if k == 0 {
                break;
            }
            k -= 1;
            index[k] += 1;
            if index[k] < dims[k] {
                break;
            }
            index[k] = 0;
            if k == 0 {
                k = usize::MAX;
                break;
            }
        }
        if k == usize::MAX {
            break;
        }
    }
    let (mut cost, mut values, mut amps) =
        best.ok_or_else(|| Error::Numerical("every grid point was rank deficient".into()))?;

    if search.polish {
        polish(
            &evaluator,
            search,
            &mut cost,
            &mut values,
            &mut amps,
            search.polish_budget,
        );
    }

    assemble_estimate(model, search, &values, &amps)
}

/// Coordinate-wise quadratic refinement around the winning grid point.
/// Each pass fits a parabola through (x−h, x, x+h) per axis and steps to
/// its vertex when that improves the cost; `h` starts at the axis spacing
/// and shrinks between passes.
fn polish(
    evaluator: &CostEvaluator<'_>,
    search: &EstimationGrid,
    cost: &mut f64,
    values: &mut [f64],
    amps: &mut Vec<Complex64>,
    budget: usize,
) {
    let mut evals = 0usize;
    let mut steps: Vec<f64> = search
        .axes()
        .iter()
        .map(|a| {
            if a.values.len() > 1 {
                (a.values[a.values.len() - 1] - a.values[0]) / (a.values.len() - 1) as f64
            } else {
                0.0
            }
        })
        .collect();
    let damping_axes: Vec<bool> = search
        .axes()
        .iter()
        .map(|a| {
            let model = evaluator.model;
            model.damping_indices().contains(&a.param)
        })
        .collect();
    for _pass in 0..8 {
        let mut improved = false;
        for ax in 0..values.len() {
            let h = steps[ax];
            if h == 0.0 {
                continue;
            }
            if evals + 3 > budget {
                return;
            }
            let mut lo = values.to_vec();
            lo[ax] -= h;
            let mut hi = values.to_vec();
            hi[ax] += h;
            if damping_axes[ax] && lo[ax] < 0.0 {
                lo[ax] = 0.0;
            }
            let f_lo = evaluator.eval(&lo).map(|(c, _)| c);
            let f_hi = evaluator.eval(&hi).map(|(c, _)| c);
            evals += 2;
            let (Some(fl), Some(fh)) = (f_lo, f_hi) else {
                continue;
            };
            // Parabola vertex through three points, clamped to ±h.
            let denom = fl - 2.0 * *cost + fh;
            let mut delta = if denom.abs() > 1e-300 {
                0.5 * (fl - fh) / denom * h
            } else {
                0.0
            };
            if !delta.is_finite() {
                delta = 0.0;
            }
            delta = delta.clamp(-h, h);
            let mut cand = values.to_vec();
            cand[ax] += delta;
            if damping_axes[ax] && cand[ax] < 0.0 {
                cand[ax] = 0.0;
            }
            evals += 1;
            if let Some((c_new, a_new)) = evaluator.eval(&cand) {
                let mut best_local = (*cost, values.to_vec(), amps.clone());
                if fl < best_local.0 {
                    if let Some((cl, al)) = evaluator.eval(&lo) {
                        best_local = (cl, lo.clone(), al);
                    }
                }
                if fh < best_local.0 {
                    if let Some((ch, ah)) = evaluator.eval(&hi) {
                        best_local = (ch, hi.clone(), ah);
                    }
                }
                if c_new < best_local.0 {
                    best_local = (c_new, cand, a_new);
                }
                if best_local.0 < *cost {
                    *cost = best_local.0;
                    values.copy_from_slice(&best_local.1);
                    *amps = best_local.2;
                    improved = true;
                }
            }
        }
        for s in steps.iter_mut() {
            *s *= 0.5;
        }
        if !improved && _pass > 0 {
            break;
        }
    }
}

fn assemble_estimate(
    model: &SignalModel,
    search: &EstimationGrid,
    values: &[f64],
    amps: &[Complex64],
) -> Result<ParamVector> {
    let mut theta = vec![0.0; model.param_count()];
    for (axis, &v) in search.axes().iter().zip(values) {
        theta[axis.param] = v;
    }
    let per = model.params_per_component();
    for (k, c) in amps.iter().enumerate() {
        let alpha = c.norm().max(f64::MIN_POSITIVE);
        theta[k * per] = alpha;
        theta[k * per + per - 1] = c.arg();
    }
    ParamVector::new(*model, theta)
}

/// Root of the summed per-parameter mean squared errors over a subset:
/// `√( Σ_{p∈subset} mean_i (θ̂_i[p] − θ[p])² )`.
pub fn rmse(estimates: &[ParamVector], truth: &ParamVector, subset: &[usize]) -> f64 {
    rmse_impl(estimates, |_| truth, subset)
}

/// [`rmse`] with a per-trial truth, for studies whose true parameters are
/// redrawn each trial.
pub fn rmse_paired(estimates: &[ParamVector], truths: &[ParamVector], subset: &[usize]) -> f64 {
    rmse_impl(estimates, |i| &truths[i], subset)
}

fn rmse_impl<'a>(
    estimates: &[ParamVector],
    truth_of: impl Fn(usize) -> &'a ParamVector,
    subset: &[usize],
) -> f64 {
    if estimates.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for &p in subset {
        let mse: f64 = estimates
            .iter()
            .enumerate()
            .map(|(i, est)| {
                let e = est.values()[p] - truth_of(i).values()[p];
                e * e
            })
            .sum::<f64>()
            / estimates.len() as f64;
        total += mse;
    }
    total.sqrt()
}
