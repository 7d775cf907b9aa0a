//! JSON configuration schema mirroring the scenario fields.
//!
//! Unknown keys are rejected everywhere so configs stay archivable and
//! diffable; all randomness flows from the single `seed` key.

use serde::{Deserialize, Serialize};

use sampler_core::designer::GroupBudgets;
use sampler_core::models::{CandidateGrid, ModelKind, ParamVector, SignalModel};
use sampler_core::scenario::{
    BaselineSpec, EvalSpec, ReweightSpec, Rounding, Scenario, ThetaGridSpec,
};
use sampler_core::{Error, NoiseSpec, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub name: Option<String>,
    pub model: ModelConfig,
    pub theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<ThetaGridConfig>,
    pub grid: GridConfig,
    pub noise: NoiseConfig,
    pub design: DesignConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `damped_sinusoid_1d`, `damped_sinusoid_2d`, or `linear_chirp_1d`.
    pub kind: String,
    pub components: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaGridConfig {
    pub param: usize,
    pub lower: f64,
    pub delta: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// One entry per sampling dimension; candidates are the unit-spaced
    /// points `start..start+size-1` per dimension.
    pub sizes: Vec<usize>,
    /// First sample coordinate (default 0).
    #[serde(default)]
    pub start: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_sweep: Option<Vec<f64>>,
    pub psi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_budgets: Option<GroupBudgetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reweight: Option<ReweightConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounding: Option<RoundingConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupBudgetConfig {
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReweightConfig {
    pub enabled: bool,
    #[serde(default = "default_reweight_iters")]
    pub max_iter: usize,
    #[serde(default = "default_reweight_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_reweight_tol")]
    pub tol: f64,
}

fn default_reweight_iters() -> usize {
    10
}
fn default_reweight_epsilon() -> f64 {
    1e-6
}
fn default_reweight_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundingConfig {
    /// `top_m` or `cutoff`.
    pub rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub trials: usize,
    #[serde(default = "default_points_per_dim")]
    pub points_per_dim: usize,
    #[serde(default = "default_width_mult")]
    pub width_mult: f64,
    #[serde(default = "default_polish")]
    pub polish: bool,
}

fn default_points_per_dim() -> usize {
    15
}
fn default_width_mult() -> f64 {
    3.0
}
fn default_polish() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub trials: usize,
    #[serde(default)]
    pub uniform: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: String,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates and converts into a core scenario.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let kind = match self.model.kind.as_str() {
            "damped_sinusoid_1d" => ModelKind::DampedSinusoid1D,
            "damped_sinusoid_2d" => ModelKind::DampedSinusoid2D,
            "linear_chirp_1d" => ModelKind::LinearChirp1D,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown model kind {other:?} (expected damped_sinusoid_1d, \
                     damped_sinusoid_2d, or linear_chirp_1d)"
                )))
            }
        };
        let model = SignalModel::new(kind, self.model.components)?;
        let theta = ParamVector::new(model, self.theta.clone())?;
        let grid = match self.grid.sizes.as_slice() {
            [n] => CandidateGrid::uniform_1d_from(self.grid.start, *n)?,
            [n1, n2] => CandidateGrid::uniform_2d_from(self.grid.start, *n1, *n2)?,
            other => {
                return Err(Error::InvalidInput(format!(
                    "grid.sizes must have 1 or 2 entries, got {}",
                    other.len()
                )))
            }
        };
        let noise = NoiseSpec::new(self.noise.variance)?;
        let budgets = match (&self.design.gamma, &self.design.gamma_sweep) {
            (Some(g), None) => vec![*g],
            (None, Some(sweep)) => sweep.clone(),
            (Some(_), Some(_)) => {
                return Err(Error::InvalidInput(
                    "design.gamma and design.gamma_sweep are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(Error::InvalidInput(
                    "design.gamma or design.gamma_sweep is required".into(),
                ))
            }
        };
        let rounding = match &self.design.rounding {
            None => None,
            Some(r) => match r.rule.as_str() {
                "top_m" => Some(Rounding::TopM(r.m.ok_or_else(|| {
                    Error::InvalidInput("rounding.m required for top_m".into())
                })?)),
                "cutoff" => Some(Rounding::Cutoff(r.xi.ok_or_else(|| {
                    Error::InvalidInput("rounding.xi required for cutoff".into())
                })?)),
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown rounding rule {other:?} (expected top_m or cutoff)"
                    )))
                }
            },
        };
        let group_budgets = match &self.design.group_budgets {
            None => None,
            Some(g) => {
                let layout = grid.layout().ok_or_else(|| {
                    Error::InvalidInput(
                        "group budgets require a 2-D Cartesian candidate grid".into(),
                    )
                })?;
                Some(GroupBudgets {
                    gamma1: g.gamma1.unwrap_or(f64::INFINITY),
                    gamma2: g.gamma2.unwrap_or(f64::INFINITY),
                    layout,
                })
            }
        };
        let reweight = self.design.reweight.as_ref().and_then(|r| {
            r.enabled.then_some(ReweightSpec {
                max_iter: r.max_iter,
                epsilon: r.epsilon,
                tol: r.tol,
            })
        });
        let scenario = Scenario {
            name: self.name.clone().unwrap_or_else(|| "config".into()),
            theta,
            theta_grid: self.theta_grid.as_ref().map(|t| ThetaGridSpec {
                param: t.param,
                lower: t.lower,
                delta: t.delta,
                count: t.count,
            }),
            grid,
            noise,
            budgets,
            psi: self.design.psi.clone(),
            caps: self.design.caps.clone(),
            group_budgets,
            reweight,
            rounding,
            eval: self.eval.as_ref().map(|e| EvalSpec {
                trials: e.trials,
                points_per_dim: e.points_per_dim,
                width_mult: e.width_mult,
                polish: e.polish,
            }),
            baseline: self.baseline.as_ref().map(|b| BaselineSpec {
                trials: b.trials,
                uniform: b.uniform,
            }),
            seed: self.seed,
            notes: self.notes.clone(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Re-encodes a scenario (used by `--dump-preset`).
    pub fn from_scenario(s: &Scenario) -> Self {
        let model = s.model();
        let kind = match model.kind() {
            ModelKind::DampedSinusoid1D => "damped_sinusoid_1d",
            ModelKind::DampedSinusoid2D => "damped_sinusoid_2d",
            ModelKind::LinearChirp1D => "linear_chirp_1d",
        };
        let sizes = match s.grid.layout() {
            Some((n1, n2)) => vec![n1, n2],
            None => vec![s.grid.len()],
        };
        let start = s.grid.point(0)[0];
        Config {
            name: Some(s.name.clone()),
            model: ModelConfig {
                kind: kind.into(),
                components: model.components(),
            },
            theta: s.theta.values().to_vec(),
            theta_grid: s.theta_grid.map(|t| ThetaGridConfig {
                param: t.param,
                lower: t.lower,
                delta: t.delta,
                count: t.count,
            }),
            grid: GridConfig { sizes, start },
            noise: NoiseConfig {
                variance: s.noise.variance(),
            },
            design: DesignConfig {
                gamma: (s.budgets.len() == 1).then(|| s.budgets[0]),
                gamma_sweep: (s.budgets.len() > 1).then(|| s.budgets.clone()),
                psi: s.psi.clone(),
                caps: s.caps.clone(),
                group_budgets: s.group_budgets.map(|g| GroupBudgetConfig {
                    gamma1: g.gamma1.is_finite().then_some(g.gamma1),
                    gamma2: g.gamma2.is_finite().then_some(g.gamma2),
                }),
                reweight: s.reweight.map(|r| ReweightConfig {
                    enabled: true,
                    max_iter: r.max_iter,
                    epsilon: r.epsilon,
                    tol: r.tol,
                }),
                rounding: s.rounding.map(|r| match r {
                    Rounding::TopM(m) => RoundingConfig {
                        rule: "top_m".into(),
                        m: Some(m),
                        xi: None,
                    },
                    Rounding::Cutoff(xi) => RoundingConfig {
                        rule: "cutoff".into(),
                        m: None,
                        xi: Some(xi),
                    },
                }),
            },
            eval: s.eval.map(|e| EvalConfig {
                trials: e.trials,
                points_per_dim: e.points_per_dim,
                width_mult: e.width_mult,
                polish: e.polish,
            }),
            baseline: s.baseline.map(|b| BaselineConfig {
                trials: b.trials,
                uniform: b.uniform,
            }),
            seed: s.seed,
            output: None,
            notes: s.notes.clone(),
        }
    }
}
