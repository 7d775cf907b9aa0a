//! Command-line front end: scenario configs, design/evaluate/compare/
//! simulate dispatch, CSV outputs.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use sampler_core::designer::{reweight_iterate, solve_sdp, threshold};
use sampler_core::error::Error;
use sampler_core::fisher::{aggregate_fim, crlb_diag};
use sampler_core::scenario::{self, crlb_rmse_curve, run_scenario, BaselineSpec, Scenario};
use sampler_core::Result;

use config::Config;

/// Optimal non-uniform sampling-scheme design and evaluation.
#[derive(Debug, Parser)]
#[command(name = "sampler", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Path to a JSON scenario config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in preset name (fig1, fig2, fig3, fig4, fig5_6, fig7_8, fig9_12).
    #[arg(long)]
    pub scenario: Option<String>,
    /// Damping override for single-component presets.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Base RNG seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker thread cap (default: machine parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory for CSV files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Print a preset's config as JSON and exit.
    #[arg(long, value_name = "NAME")]
    pub dump_preset: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the relaxed design and write weights.csv and crlb.csv.
    Design(CommonArgs),
    /// Evaluate bounds for a user-supplied weight vector.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// weights.csv-format file with the `w` column to evaluate.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Compare the design against random and uniform baselines.
    Compare(CommonArgs),
    /// Full Monte Carlo error-versus-bound pipeline.
    Simulate(CommonArgs),
}

/// Exit-code contract: 0 success, 1 usage/config error, 2 infeasible or
/// singular problem, 3 internal numerical failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_)
        | Error::DimensionMismatch { .. }
        | Error::IndexOutOfRange { .. }
        | Error::EmptyGrid
        | Error::TooLarge { .. }
        | Error::Io(_) => 1,
        Error::SingularFim { .. }
        | Error::InfeasibleStart(_)
        | Error::Infeasible { .. }
        | Error::AllSingular => 2,
        Error::MaxIterations { .. } | Error::Numerical(_) => 3,
    }
}

fn load_scenario(common: &CommonArgs) -> Result<Scenario> {
    let mut s = match (&common.config, &common.scenario) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::InvalidInput(format!("cannot read config {}: {e}", path.display()))
            })?;
            let cfg = Config::from_json(&text)?;
            cfg.to_scenario()?
        }
        (None, Some(name)) => match common.beta {
            Some(beta) => scenario::preset_with_beta(name, beta)?,
            None => scenario::preset(name)?,
        },
        (Some(_), Some(_)) => {
            return Err(Error::InvalidInput(
                "--config and --scenario are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(Error::InvalidInput(
                "either --config <path> or --scenario <preset> is required".into(),
            ))
        }
    };
    if common.beta.is_some() && common.config.is_some() {
        return Err(Error::InvalidInput(
            "--beta applies only to presets; edit the config instead".into(),
        ));
    }
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn prepare(common: &CommonArgs) -> Result<Option<Scenario>> {
    if let Some(name) = &common.dump_preset {
        let preset = scenario::preset(name)?;
        println!("{}", Config::from_scenario(&preset).to_json());
        return Ok(None);
    }
    if let Some(n) = common.threads {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::fs::create_dir_all(&common.out)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", common.out.display())))?;
    load_scenario(common).map(Some)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Design(common) => {
            let Some(s) = prepare(&common)? else {
                return Ok(());
            };
            cmd_design(&s, &common.out)
        }
        Command::Evaluate { common, weights } => {
            let Some(s) = prepare(&common)? else {
                return Ok(());
            };
            let weights = weights.ok_or_else(|| {
                Error::InvalidInput("evaluate requires --weights <path>".into())
            })?;
            cmd_evaluate(&s, &weights, &common.out)
        }
        Command::Compare(common) => {
            let Some(s) = prepare(&common)? else {
                return Ok(());
            };
            cmd_compare(&s, &common.out)
        }
        Command::Simulate(common) => {
            let Some(s) = prepare(&common)? else {
                return Ok(());
            };
            cmd_simulate(&s, &common.out)
        }
    }
}

fn crlb_envelope_at(
    s: &Scenario,
    weights: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let banks = s.banks()?;
    let p = s.model().param_count();
    let mut best = vec![f64::INFINITY; p];
    let mut worst = vec![f64::NEG_INFINITY; p];
    for (l, bank) in banks.iter().enumerate() {
        let agg = aggregate_fim(weights, bank)?;
        let crlb = crlb_diag(&agg, 0.0).map_err(|e| match e {
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

fn cmd_design(s: &Scenario, out: &Path) -> Result<()> {
    s.validate()?;
    let banks = s.banks()?;
    let multi = s.budgets.len() > 1;
    for &gamma in &s.budgets {
        let mut problem =
            sampler_core::designer::DesignProblem::new(banks.clone(), gamma, s.psi.clone())?;
        if let Some(caps) = &s.caps {
            problem = problem.with_caps(caps.clone())?;
        }
        if let Some(g) = s.group_budgets {
            problem = problem.with_group_budgets(g)?;
        }
        let result = match &s.reweight {
            Some(rw) => reweight_iterate(&problem, rw.max_iter, rw.epsilon, rw.tol)?,
            None => solve_sdp(&problem)?,
        };
        let rounding = s
            .rounding
            .unwrap_or(sampler_core::designer::RoundingRule::TopM(
                (gamma.floor() as usize).min(s.grid.len()),
            ));
        let selected = threshold(&result.weights, rounding)?;
        let (best, worst) = crlb_envelope_at(s, &binary_weights(s.grid.len(), &selected))?;
        let suffix = if multi {
            format!("_g{gamma}")
        } else {
            String::new()
        };
        output::write_weights(
            &out.join(format!("weights{suffix}.csv")),
            &s.grid,
            &result.weights,
            &selected,
        )?;
        output::write_crlb(
            &out.join(format!("crlb{suffix}.csv")),
            &s.model().param_names(),
            &s.psi,
            &result.mu,
            &best,
            &worst,
        )?;
        print!("{}", output::design_summary(s, &result));
    }
    Ok(())
}

fn binary_weights(n: usize, selected: &[usize]) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for &i in selected {
        w[i] = 1.0;
    }
    w
}

fn cmd_evaluate(s: &Scenario, weights_path: &Path, out: &Path) -> Result<()> {
    s.validate()?;
    let weights = output::read_weights(weights_path)?;
    if weights.len() != s.grid.len() {
        return Err(Error::DimensionMismatch {
            what: "weights file",
            expected: s.grid.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|&w| !(0.0..=1.0 + 1e-9).contains(&w)) {
        return Err(Error::InvalidInput(
            "weights must lie in [0, 1]".into(),
        ));
    }
    let (best, worst) = crlb_envelope_at(s, &weights)?;
    let objective: f64 = s.psi.iter().zip(&worst).map(|(a, b)| a * b).sum();
    output::write_crlb(
        &out.join("crlb.csv"),
        &s.model().param_names(),
        &s.psi,
        &worst,
        &best,
        &worst,
    )?;
    println!(
        "evaluate {}: objective {objective:.6e} over {} grid member(s)",
        s.name,
        s.param_grid()?.len()
    );
    Ok(())
}

fn cmd_compare(s: &Scenario, out: &Path) -> Result<()> {
    let mut s = s.clone();
    if s.baseline.is_none() {
        s.baseline = Some(BaselineSpec {
            trials: 10_000,
            uniform: true,
        });
    }
    s.validate()?;
    let report = run_scenario(&s)?;
    report.write_csv(&out.join("report.csv"))?;
    print!("{}", report.summary());
    Ok(())
}

fn cmd_simulate(s: &Scenario, out: &Path) -> Result<()> {
    if s.eval.is_none() {
        return Err(Error::InvalidInput(
            "simulate requires an eval section (trials, estimation grid)".into(),
        ));
    }
    s.validate()?;
    let report = crlb_rmse_curve(s)?;
    report.write_csv(&out.join("report.csv"))?;
    print!("{}", report.summary());
    Ok(())
}
