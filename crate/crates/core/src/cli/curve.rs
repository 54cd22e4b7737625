//! Acceptable-loss sweeps over (mode, launch power) cells.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{ExperimentConfig, Mode};
use crate::error::{invalid, Error, Result};
use crate::metrics::{acceptable_loss, LossSearch};
use crate::seed;

/// Frozen column order of curve CSV files.
pub const CURVE_HEADER: [&str; 7] = [
    "mode",
    "power_dbm",
    "target_gmi",
    "acceptable_loss_db",
    "gmi_at_solution",
    "seed",
    "runtime_s",
];

#[derive(Debug, Clone)]
pub struct CurveRequest {
    /// Selects the case; first case when `None`.
    pub target_gmi: Option<f64>,
    pub powers_dbm: Vec<f64>,
    pub modes: Vec<String>,
    pub tol_db: f64,
    pub timing: bool,
}

/// One (mode, power) cell of the sweep.
#[derive(Debug, Clone)]
pub struct CurveCell {
    pub mode: Mode,
    pub power_dbm: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub mode: String,
    pub power_dbm: f64,
    pub target_gmi: f64,
    pub result: LossSearch,
    pub seed: u64,
    pub runtime_s: Option<f64>,
}

/// Seed of a cell. It depends on the launch power only, so all modes at one
/// power see the same data and noise, and every bisection step of a cell
/// reuses it.
pub fn cell_seed(base_seed: u64, power_dbm: f64) -> u64 {
    seed::derive(base_seed, &[power_dbm.to_bits()])
}

/// Cells in output order: modes as listed, powers ascending.
pub fn cells(exp: &ExperimentConfig, req: &CurveRequest) -> Result<Vec<CurveCell>> {
    if req.modes.is_empty() || req.powers_dbm.is_empty() {
        return Err(invalid("a curve needs at least one mode and one power"));
    }
    if let Some(p) = req.powers_dbm.iter().find(|p| !p.is_finite()) {
        return Err(invalid(format!("launch power {p} is not finite")));
    }
    let mut powers = req.powers_dbm.clone();
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    let modes = req
        .modes
        .iter()
        .map(|m| exp.mode(m))
        .collect::<Result<Vec<_>>>()?;
    let base_seed = exp.base().sim.base_seed;
    Ok(modes
        .iter()
        .flat_map(|m| {
            powers.iter().map(move |&p| CurveCell {
                mode: m.clone(),
                power_dbm: p,
                seed: cell_seed(base_seed, p),
            })
        })
        .collect())
}

/// Evaluates every cell on the current rayon pool. Infeasible cells yield
/// rows; any other error aborts the sweep.
pub fn curve_rows(exp: &ExperimentConfig, req: &CurveRequest) -> Result<Vec<CurveRow>> {
    let case = exp.case(req.target_gmi)?;
    let cells = cells(exp, req)?;
    cells
        .par_iter()
        .map(|cell| {
            let start = Instant::now();
            let cfg = exp.link(case, &cell.mode);
            let result =
                acceptable_loss(&cfg, cell.power_dbm, case.target_gmi, req.tol_db, cell.seed)?;
            log::info!("{} @ {} dBm: {:?}", cell.mode.name, cell.power_dbm, result);
            Ok(CurveRow {
                mode: cell.mode.name.clone(),
                power_dbm: cell.power_dbm,
                target_gmi: case.target_gmi,
                result,
                seed: cell.seed,
                runtime_s: req.timing.then(|| start.elapsed().as_secs_f64()),
            })
        })
        .collect()
}

pub fn curve_record(r: &CurveRow) -> [String; 7] {
    [
        r.mode.clone(),
        r.power_dbm.to_string(),
        r.target_gmi.to_string(),
        r.result
            .loss_db()
            .map(|l| format!("{l:.4}"))
            .unwrap_or_else(|| "infeasible".into()),
        r.result
            .gmi()
            .map(|g| format!("{g:.6}"))
            .unwrap_or_default(),
        r.seed.to_string(),
        r.runtime_s.map(|t| format!("{t:.3}")).unwrap_or_default(),
    ]
}

pub fn write_curve_csv<W: Write>(out: W, rows: &[CurveRow], header: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        w.write_record(CURVE_HEADER)?;
    }
    for r in rows {
        w.write_record(curve_record(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Errors unless the first line of `path` is the curve header.
pub fn check_header(path: &Path) -> Result<()> {
    let mut first = String::new();
    BufReader::new(std::fs::File::open(path)?).read_line(&mut first)?;
    if first.trim_end() != CURVE_HEADER.join(",") {
        return Err(Error::Config {
            path: path.display().to_string(),
            message: "existing file does not carry the curve header".into(),
        });
    }
    Ok(())
}
