//! CSV writers for design artifacts.

use std::path::Path;

use sampler_core::designer::DesignResult;
use sampler_core::models::CandidateGrid;
use sampler_core::scenario::Scenario;
use sampler_core::{Error, Result};

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// `weights.csv`: per-candidate index, coordinates, relaxed weight, and
/// selection flag.
pub fn write_weights(
    path: &Path,
    grid: &CandidateGrid,
    weights: &[f64],
    selected: &[usize],
) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec!["index".to_string()];
    for d in 1..=grid.dim() {
        header.push(format!("t{d}"));
    }
    header.push("w".into());
    header.push("selected".into());
    wtr.write_record(&header)?;
    let chosen: std::collections::BTreeSet<usize> = selected.iter().copied().collect();
    for n in 0..grid.len() {
        let mut rec = vec![n.to_string()];
        for c in grid.point(n) {
            rec.push(fmt(*c));
        }
        rec.push(fmt(weights[n]));
        rec.push(usize::from(chosen.contains(&n)).to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `crlb.csv`: per-parameter emphasis, certified bound, and the best/worst
/// evaluated bounds over the parameter grid.
pub fn write_crlb(
    path: &Path,
    param_names: &[String],
    psi: &[f64],
    mu: &[f64],
    crlb_best: &[f64],
    crlb_worst: &[f64],
) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["param", "psi", "mu", "crlb_best", "crlb_worst"])?;
    for (i, name) in param_names.iter().enumerate() {
        wtr.write_record([
            name.clone(),
            fmt(psi[i]),
            fmt(mu[i]),
            fmt(crlb_best[i]),
            fmt(crlb_worst[i]),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the `w` column back from a `weights.csv`-format file.
pub fn read_weights(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read weights file {path:?}: {e}")))?;
    let headers = rdr.headers()?.clone();
    let w_idx = headers
        .iter()
        .position(|h| h == "w")
        .ok_or_else(|| Error::InvalidInput(format!("no `w` column in {path:?}")))?;
    let mut weights = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let value: f64 = record
            .get(w_idx)
            .ok_or_else(|| Error::InvalidInput("short record in weights file".into()))?
            .parse()
            .map_err(|e| Error::InvalidInput(format!("bad weight value: {e}")))?;
        weights.push(value);
    }
    Ok(weights)
}

/// Summary lines for a finished design.
pub fn design_summary(scenario: &Scenario, result: &DesignResult) -> String {
    let mut out = format!(
        "design {}: objective {:.6e}, {} of {} candidates selected\n",
        scenario.name,
        result.objective,
        result.selected.len(),
        scenario.grid.len()
    );
    out.push_str(&format!(
        "  solver: {} Newton steps, {} barrier rounds, relative gap {:.2e}\n",
        result.solver_info.iterations,
        result.solver_info.barrier_rounds,
        result.solver_info.kkt_residual
    ));
    if let Some(rw) = result.solver_info.reweight_iterations {
        out.push_str(&format!("  reweighting iterations: {rw}\n"));
    }
    out
}
