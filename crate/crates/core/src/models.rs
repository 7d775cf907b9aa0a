//! Parametric signal models: complex mean functions, analytic gradients, and
//! per-sample Fisher information matrices.
//!
//! Three model families are supported, all sums of `K` complex-exponential
//! components observed in white circularly symmetric Gaussian noise:
//!
//! * 1-D damped sinusoid: `s(t) = Σ_k α_k exp(2iπ f_k t − β_k t + i φ_k)`
//! * 1-D linear chirp:    `s(t) = Σ_k α_k exp(2iπ (f0_k + f1_k t) t + i φ_k)`
//! * 2-D damped sinusoid: `s(t) = Σ_k α_k exp(i φ_k) Π_d exp(2iπ f_{k,d} t_d − β_{k,d} t_d)`
//!
//! Parameters are laid out per component as (amplitude, frequency-like...,
//! damping-like..., phase), components concatenated, so canonical basis
//! indices are stable across the crate:
//!
//! * `DampedSinusoid1D`: `(α, f, β, φ)` — 4 per component
//! * `LinearChirp1D`:    `(α, f0, f1, φ)` — 4 per component
//! * `DampedSinusoid2D`: `(α, f1, f2, β1, β2, φ)` — 6 per component

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Model family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    DampedSinusoid1D,
    DampedSinusoid2D,
    LinearChirp1D,
}

/// A parametric signal model: a family plus a component count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalModel {
    kind: ModelKind,
    components: usize,
}

impl SignalModel {
    /// Creates a model with `components >= 1` components.
    pub fn new(kind: ModelKind, components: usize) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidInput(
                "component count must be positive".into(),
            ));
        }
        Ok(Self { kind, components })
    }

    pub fn damped_1d(components: usize) -> Result<Self> {
        Self::new(ModelKind::DampedSinusoid1D, components)
    }

    pub fn damped_2d(components: usize) -> Result<Self> {
        Self::new(ModelKind::DampedSinusoid2D, components)
    }

    pub fn chirp_1d(components: usize) -> Result<Self> {
        Self::new(ModelKind::LinearChirp1D, components)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Number of signal components `K`.
    pub fn components(&self) -> usize {
        self.components
    }

    /// Sampling dimension `D` (1 or 2, fixed by the family).
    pub fn sampling_dim(&self) -> usize {
        match self.kind {
            ModelKind::DampedSinusoid1D | ModelKind::LinearChirp1D => 1,
            ModelKind::DampedSinusoid2D => 2,
        }
    }

    /// Parameters per component.
    pub fn params_per_component(&self) -> usize {
        match self.kind {
            ModelKind::DampedSinusoid1D | ModelKind::LinearChirp1D => 4,
            ModelKind::DampedSinusoid2D => 6,
        }
    }

    /// Total parameter count `P`.
    pub fn param_count(&self) -> usize {
        self.components * self.params_per_component()
    }

    /// Human-readable parameter names in layout order, e.g. `f1_2` for the
    /// first-component frequency along the second sampling dimension.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.param_count());
        for k in 1..=self.components {
            match self.kind {
                ModelKind::DampedSinusoid1D => {
                    names.push(format!("alpha{k}"));
                    names.push(format!("f{k}"));
                    names.push(format!("beta{k}"));
                    names.push(format!("phi{k}"));
                }
                ModelKind::LinearChirp1D => {
                    names.push(format!("alpha{k}"));
                    names.push(format!("f0_{k}"));
                    names.push(format!("f1_{k}"));
                    names.push(format!("phi{k}"));
                }
                ModelKind::DampedSinusoid2D => {
                    names.push(format!("alpha{k}"));
                    names.push(format!("f{k}_1"));
                    names.push(format!("f{k}_2"));
                    names.push(format!("beta{k}_1"));
                    names.push(format!("beta{k}_2"));
                    names.push(format!("phi{k}"));
                }
            }
        }
        names
    }

    /// Indices of all amplitude parameters.
    pub fn amplitude_indices(&self) -> Vec<usize> {
        self.component_offsets().collect()
    }

    /// Indices of all frequency-like parameters (includes chirp rates).
    pub fn frequency_indices(&self) -> Vec<usize> {
        let span = match self.kind {
            ModelKind::DampedSinusoid1D => 1..2,
            ModelKind::LinearChirp1D => 1..3,
            ModelKind::DampedSinusoid2D => 1..3,
        };
        self.component_offsets()
            .flat_map(|o| span.clone().map(move |j| o + j))
            .collect()
    }

    /// Indices of all damping parameters (empty for chirps).
    pub fn damping_indices(&self) -> Vec<usize> {
        let span = match self.kind {
            ModelKind::DampedSinusoid1D => 2..3,
            ModelKind::LinearChirp1D => 0..0,
            ModelKind::DampedSinusoid2D => 3..5,
        };
        self.component_offsets()
            .flat_map(|o| span.clone().map(move |j| o + j))
            .collect()
    }

    /// Indices of all phase parameters.
    pub fn phase_indices(&self) -> Vec<usize> {
        let last = self.params_per_component() - 1;
        self.component_offsets().map(|o| o + last).collect()
    }

    fn component_offsets(&self) -> impl Iterator<Item = usize> {
        let per = self.params_per_component();
        (0..self.components).map(move |k| k * per)
    }
}

/// A validated parameter vector for a specific [`SignalModel`].
///
/// Units: amplitudes unitless, frequencies in cycles/sample, dampings in
/// 1/sample, phases in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    model: SignalModel,
    values: Vec<f64>,
}

impl ParamVector {
    /// Validates length, positivity of amplitudes, and nonnegativity of
    /// dampings. Amplitudes must be strictly positive: a zero amplitude
    /// makes the phase/amplitude block of the Fisher information singular.
    pub fn new(model: SignalModel, values: Vec<f64>) -> Result<Self> {
        if values.len() != model.param_count() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: model.param_count(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        for &i in &model.amplitude_indices() {
            if values[i] <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "amplitude at index {i} must be > 0, got {}",
                    values[i]
                )));
            }
        }
        for &i in &model.damping_indices() {
            if values[i] < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "damping at index {i} must be >= 0, got {}",
                    values[i]
                )));
            }
        }
        Ok(Self { model, values })
    }

    pub fn model(&self) -> SignalModel {
        self.model
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Copy with one entry replaced; revalidates the result.
    pub fn with_value(&self, index: usize, value: f64) -> Result<Self> {
        if index >= self.values.len() {
            return Err(Error::IndexOutOfRange {
                index,
                size: self.values.len(),
            });
        }
        let mut values = self.values.clone();
        values[index] = value;
        Self::new(self.model, values)
    }
}

/// The `N` candidate sampling points, each a `D`-vector in sample units.
///
/// `layout` records the `(N1, N2)` shape when the grid is a full Cartesian
/// product stored row-major; group-norm constraints require it.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    points: Vec<Vec<f64>>,
    dim: usize,
    layout: Option<(usize, usize)>,
}

impl CandidateGrid {
    /// Uniform integer grid `t = 0..n-1` in one dimension.
    pub fn uniform_1d(n: usize) -> Result<Self> {
        Self::uniform_1d_from(0.0, n)
    }

    /// Uniform unit-spaced 1-D grid starting at `start`.
    pub fn uniform_1d_from(start: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("grid must be nonempty".into()));
        }
        if !start.is_finite() {
            return Err(Error::InvalidInput("grid start must be finite".into()));
        }
        Ok(Self {
            points: (0..n).map(|t| vec![start + t as f64]).collect(),
            dim: 1,
            layout: None,
        })
    }

    /// Uniform integer grid `(0..n1-1) x (0..n2-1)`, row-major.
    pub fn uniform_2d(n1: usize, n2: usize) -> Result<Self> {
        Self::uniform_2d_from(0.0, n1, n2)
    }

    /// Uniform unit-spaced Cartesian 2-D grid starting at `(start, start)`,
    /// row-major.
    pub fn uniform_2d_from(start: f64, n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidInput("grid must be nonempty".into()));
        }
        if !start.is_finite() {
            return Err(Error::InvalidInput("grid start must be finite".into()));
        }
        let mut points = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            for j in 0..n2 {
                points.push(vec![start + i as f64, start + j as f64]);
            }
        }
        Ok(Self {
            points,
            dim: 2,
            layout: Some((n1, n2)),
        })
    }

    /// Arbitrary point list; all points must be distinct and share one
    /// dimension.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("grid must be nonempty".into()));
        }
        let dim = points[0].len();
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidInput(format!(
                "sampling dimension must be 1 or 2, got {dim}"
            )));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "candidate point",
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("candidate points must be finite".into()));
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(Error::InvalidInput(format!(
                        "candidate points {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(Self {
            points,
            dim,
            layout: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, n: usize) -> &[f64] {
        &self.points[n]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Cartesian shape `(N1, N2)`, when known.
    pub fn layout(&self) -> Option<(usize, usize)> {
        self.layout
    }
}

/// White circularly symmetric complex Gaussian noise with variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    variance: f64,
}

impl NoiseSpec {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise variance must be > 0, got {variance}"
            )));
        }
        Ok(Self { variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

fn check_point(model: SignalModel, t: &[f64]) -> Result<()> {
    if t.len() != model.sampling_dim() {
        return Err(Error::DimensionMismatch {
            what: "sampling point",
            expected: model.sampling_dim(),
            got: t.len(),
        });
    }
    if t.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("sampling point must be finite".into()));
    }
    Ok(())
}

/// Noiseless complex mean `s(t; θ)`.
pub fn mean(theta: &ParamVector, t: &[f64]) -> Result<Complex64> {
    let model = theta.model();
    check_point(model, t)?;
    let v = theta.values();
    let per = model.params_per_component();
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..model.components() {
        let c = &v[k * per..(k + 1) * per];
        acc += match model.kind() {
            ModelKind::DampedSinusoid1D => {
                // c = (α, f, β, φ)
                Complex64::from_polar(c[0] * (-c[2] * t[0]).exp(), TAU * c[1] * t[0] + c[3])
            }
            ModelKind::LinearChirp1D => {
                // c = (α, f0, f1, φ)
                Complex64::from_polar(c[0], TAU * (c[1] + c[2] * t[0]) * t[0] + c[3])
            }
            ModelKind::DampedSinusoid2D => {
                // c = (α, f1, f2, β1, β2, φ)
                let decay = (-(c[3] * t[0] + c[4] * t[1])).exp();
                let angle = TAU * (c[1] * t[0] + c[2] * t[1]) + c[5];
                Complex64::from_polar(c[0] * decay, angle)
            }
        };
    }
    Ok(acc)
}

/// Analytic gradient `∂s/∂θ_p` at one sampling point, in layout order.
pub fn grad_mean(theta: &ParamVector, t: &[f64]) -> Result<DVector<Complex64>> {
    let model = theta.model();
    check_point(model, t)?;
    let v = theta.values();
    let per = model.params_per_component();
    let mut grad = DVector::from_element(model.param_count(), Complex64::new(0.0, 0.0));
    let i2pi = Complex64::new(0.0, TAU);
    let iunit = Complex64::new(0.0, 1.0);
    for k in 0..model.components() {
        let c = &v[k * per..(k + 1) * per];
        let base = k * per;
        match model.kind() {
            ModelKind::DampedSinusoid1D => {
                let s = Complex64::from_polar(c[0] * (-c[2] * t[0]).exp(), TAU * c[1] * t[0] + c[3]);
                grad[base] = s / c[0];
                grad[base + 1] = i2pi * t[0] * s;
                grad[base + 2] = -t[0] * s;
                grad[base + 3] = iunit * s;
            }
            ModelKind::LinearChirp1D => {
                let s = Complex64::from_polar(c[0], TAU * (c[1] + c[2] * t[0]) * t[0] + c[3]);
                grad[base] = s / c[0];
                grad[base + 1] = i2pi * t[0] * s;
                grad[base + 2] = i2pi * t[0] * t[0] * s;
                grad[base + 3] = iunit * s;
            }
            ModelKind::DampedSinusoid2D => {
                let decay = (-(c[3] * t[0] + c[4] * t[1])).exp();
                let angle = TAU * (c[1] * t[0] + c[2] * t[1]) + c[5];
                let s = Complex64::from_polar(c[0] * decay, angle);
                grad[base] = s / c[0];
                grad[base + 1] = i2pi * t[0] * s;
                grad[base + 2] = i2pi * t[1] * s;
                grad[base + 3] = -t[0] * s;
                grad[base + 4] = -t[1] * s;
                grad[base + 5] = iunit * s;
            }
        }
    }
    Ok(grad)
}

/// Rank-≤2 factors of the per-sample Fisher information matrix.
///
/// For circularly symmetric complex Gaussian noise the information carried
/// by one sample is `F = (2/σ²) Re(conj(g) gᵀ)` with `g = ∂s/∂θ`, which
/// factors exactly as `u uᵀ + w wᵀ` with `u = √(2/σ²) Re(g)` and
/// `w = √(2/σ²) Im(g)`.
pub fn per_sample_fim_factors(
    theta: &ParamVector,
    t: &[f64],
    noise: &NoiseSpec,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let g = grad_mean(theta, t)?;
    let scale = (2.0 / noise.variance()).sqrt();
    let re = g.map(|z| scale * z.re);
    let im = g.map(|z| scale * z.im);
    Ok((re, im))
}

/// Per-sample Fisher information matrix `F(t; θ)`, a symmetric PSD `P×P`
/// matrix of rank at most 2.
pub fn per_sample_fim(theta: &ParamVector, t: &[f64], noise: &NoiseSpec) -> Result<DMatrix<f64>> {
    let (u, w) = per_sample_fim_factors(theta, t, noise)?;
    let p = u.len();
    let mut fim = DMatrix::zeros(p, p);
    fim.ger(1.0, &u, &u, 1.0);
    fim.ger(1.0, &w, &w, 1.0);
    Ok(fim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn damped_1d(values: &[f64]) -> ParamVector {
        let model = SignalModel::damped_1d(values.len() / 4).unwrap();
        ParamVector::new(model, values.to_vec()).unwrap()
    }

    /// Central finite differences of `mean` on the raw parameter values.
    fn fd_grad(theta: &ParamVector, t: &[f64], h: f64) -> DVector<Complex64> {
        let p = theta.len();
        let mut g = DVector::from_element(p, Complex64::new(0.0, 0.0));
        for i in 0..p {
            let x = theta.values()[i];
            let hi = theta.with_value(i, x + h).unwrap();
            let lo = theta.with_value(i, x - h).unwrap();
            g[i] = (mean(&hi, t).unwrap() - mean(&lo, t).unwrap()) / (2.0 * h);
        }
        g
    }

    #[test]
    fn mean_all_modulation_off() {
        let theta = damped_1d(&[1.0, 0.0, 0.0, 0.0]);
        let s = mean(&theta, &[5.0]).unwrap();
        assert!((s - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn mean_quarter_cycle_rotation() {
        let theta = damped_1d(&[2.0, 0.25, 0.0, 0.0]);
        let s = mean(&theta, &[1.0]).unwrap();
        assert!((s - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn mean_2d_at_origin() {
        let model = SignalModel::damped_2d(1).unwrap();
        let theta =
            ParamVector::new(model, vec![1.0, 0.2, 0.5, 1.0 / 20.0, 1.0 / 10.0, 0.5]).unwrap();
        let s = mean(&theta, &[0.0, 0.0]).unwrap();
        let expected = Complex64::from_polar(1.0, 0.5);
        assert!((s - expected).norm() < 1e-15);
    }

    #[test]
    fn mean_rejects_dimension_mismatch() {
        let theta = damped_1d(&[1.0, 0.1, 0.05, 0.0]);
        assert!(matches!(
            mean(&theta, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn grad_frozen_example_at_zero() {
        // t = 0 kills the frequency and damping sensitivities.
        let theta = damped_1d(&[2.0, 0.3, 0.1, 0.0]);
        let g = grad_mean(&theta, &[0.0]).unwrap();
        let expected = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 2.0),
        ];
        for (gi, ei) in g.iter().zip(expected.iter()) {
            assert!((gi - ei).norm() < 1e-6, "got {gi}, expected {ei}");
        }
        // Tight cross-check against the finite-difference oracle.
        let fd = fd_grad(&theta, &[0.0], 1e-6);
        for (gi, fi) in g.iter().zip(fd.iter()) {
            assert!((gi - fi).norm() <= 1e-6 * (1.0 + fi.norm()));
        }
    }

    #[test]
    fn grad_matches_finite_differences_randomized() {
        // 100 random (model, θ, t) draws across all three families.
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for draw in 0..100 {
            let (theta, t): (ParamVector, Vec<f64>) = match draw % 3 {
                0 => {
                    let model = SignalModel::damped_1d(1 + draw % 2).unwrap();
                    let mut vals = Vec::new();
                    for _ in 0..model.components() {
                        vals.extend([
                            0.5 + next(),
                            0.05 + 0.4 * next(),
                            0.02 + 0.2 * next(),
                            next(),
                        ]);
                    }
                    (
                        ParamVector::new(model, vals).unwrap(),
                        vec![(next() * 30.0).floor()],
                    )
                }
                1 => {
                    let model = SignalModel::chirp_1d(1 + draw % 2).unwrap();
                    let mut vals = Vec::new();
                    for _ in 0..model.components() {
                        vals.extend([
                            0.5 + next(),
                            0.05 + 0.3 * next(),
                            0.01 * next(),
                            next(),
                        ]);
                    }
                    (
                        ParamVector::new(model, vals).unwrap(),
                        vec![(next() * 20.0).floor()],
                    )
                }
                _ => {
                    let model = SignalModel::damped_2d(1).unwrap();
                    let vals = vec![
                        0.5 + next(),
                        0.05 + 0.3 * next(),
                        0.05 + 0.3 * next(),
                        0.02 + 0.1 * next(),
                        0.02 + 0.1 * next(),
                        next(),
                    ];
                    (
                        ParamVector::new(model, vals).unwrap(),
                        vec![(next() * 15.0).floor(), (next() * 15.0).floor()],
                    )
                }
            };
            let g = grad_mean(&theta, &t).unwrap();
            let fd = fd_grad(&theta, &t, 1e-6);
            let scale = fd.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-12);
            for (gi, fi) in g.iter().zip(fd.iter()) {
                assert!(
                    (gi - fi).norm() < 1e-5 * scale,
                    "gradient/FD mismatch: {gi} vs {fi} (draw {draw})"
                );
            }
        }
    }

    #[test]
    fn zero_amplitude_rejected_at_construction() {
        let model = SignalModel::damped_1d(1).unwrap();
        assert!(ParamVector::new(model, vec![0.0, 0.3, 0.1, 0.0]).is_err());
    }

    #[test]
    fn negative_damping_rejected() {
        let model = SignalModel::damped_1d(1).unwrap();
        assert!(ParamVector::new(model, vec![1.0, 0.3, -0.01, 0.0]).is_err());
    }

    #[test]
    fn fim_frozen_values_at_zero() {
        // Symbolic evaluation at t = 0, θ = (2, 0.3, 0.1, 0), σ² = 1:
        // g = (1, 0, 0, 2i), so F = 2·Re(conj(g)gᵀ) has F_αα = 2, F_φφ = 8,
        // zero everywhere else.
        let theta = damped_1d(&[2.0, 0.3, 0.1, 0.0]);
        let noise = NoiseSpec::new(1.0).unwrap();
        let f = per_sample_fim(&theta, &[0.0], &noise).unwrap();
        let mut expected = DMatrix::zeros(4, 4);
        expected[(0, 0)] = 2.0;
        expected[(3, 3)] = 8.0;
        assert!((f - expected).norm() < 1e-12);
    }

    #[test]
    fn fim_scales_inversely_with_variance() {
        let theta = damped_1d(&[1.3, 0.21, 0.07, 0.4]);
        let f1 = per_sample_fim(&theta, &[7.0], &NoiseSpec::new(1.0).unwrap()).unwrap();
        let f2 = per_sample_fim(&theta, &[7.0], &NoiseSpec::new(2.0).unwrap()).unwrap();
        assert!((&f2 - &f1 * 0.5).norm() < 1e-14 * f1.norm());
    }

    #[test]
    fn fim_symmetric_psd_rank_two_randomized() {
        let mut state = 123456789u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let noise = NoiseSpec::new(0.5).unwrap();
        for _ in 0..100 {
            let theta = damped_1d(&[
                0.5 + 2.0 * next(),
                0.05 + 0.4 * next(),
                0.01 + 0.2 * next(),
                next() * 6.0,
            ]);
            let t = vec![(next() * 40.0).floor()];
            let f = per_sample_fim(&theta, &t, &noise).unwrap();
            assert!((&f - f.transpose()).norm() < 1e-12 * (1.0 + f.norm()));
            let eig = f.clone().symmetric_eigen();
            let trace = f.trace();
            for ev in eig.eigenvalues.iter() {
                assert!(*ev >= -1e-12 * trace, "eigenvalue {ev} below PSD floor");
            }
            let svd = f.svd(false, false);
            let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
            sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert!(sv[2] < 1e-10 * sv[0].max(1e-300), "rank exceeds 2");
        }
    }

    #[test]
    fn undamped_mean_magnitude_periodic() {
        // Two undamped components with a common period 1/f1.
        let theta = damped_1d(&[1.0, 0.125, 0.0, 0.3, 0.7, 0.25, 0.0, 1.1]);
        let period = 1.0 / 0.125;
        for j in 0..5 {
            let t0 = 1.7;
            let a = mean(&theta, &[t0]).unwrap().norm();
            let b = mean(&theta, &[t0 + j as f64 * period]).unwrap().norm();
            assert!((a - b).abs() < 1e-12 * (1.0 + a));
        }
    }

    #[test]
    fn grid_constructors_validate() {
        assert!(CandidateGrid::uniform_1d(0).is_err());
        let g = CandidateGrid::uniform_2d(3, 4).unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(g.layout(), Some((3, 4)));
        assert_eq!(g.point(5), &[1.0, 1.0]);
        assert!(CandidateGrid::from_points(vec![vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn param_name_layout() {
        let model = SignalModel::damped_2d(2).unwrap();
        let names = model.param_names();
        assert_eq!(names[0], "alpha1");
        assert_eq!(names[5], "phi1");
        assert_eq!(names[6], "alpha2");
        assert_eq!(model.frequency_indices(), vec![1, 2, 7, 8]);
        assert_eq!(model.damping_indices(), vec![3, 4, 9, 10]);
        assert_eq!(model.amplitude_indices(), vec![0, 6]);
        assert_eq!(model.phase_indices(), vec![5, 11]);
    }
}
