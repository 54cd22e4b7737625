//! Command-line front end: `run`, `curve`, `build-lut`,
//! `dump-constellation` and `validate`.

mod curve;
mod tables;
mod validate;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, LinkConfig};
use crate::error::{invalid, Result};
use crate::metrics::{propagate_with_waveform, SimResult};

pub use curve::{curve_rows, write_curve_csv, CurveCell, CurveRequest, CurveRow, CURVE_HEADER};
pub use tables::{
    constellation_rows, gray_violations, write_constellation_csv, write_lut_csv,
    ConstellationPoint, CONSTELLATION_HEADER,
};
pub use validate::{run_checks, Check};

/// Column names of `run` output.
pub const RUN_HEADER: [&str; 14] = [
    "mode",
    "power_dbm",
    "loss_db",
    "snr_db_analytic",
    "snr_db_empirical",
    "gmi_bits_per_2d",
    "shaped",
    "order",
    "kappa",
    "bandwidth_limited",
    "n_symbols",
    "seed",
    "tx_out_of_band",
    "launch_out_of_band",
];

#[derive(Debug, Parser)]
#[command(
    name = "satlink",
    version,
    about = "Ground-to-satellite optical feeder link simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one launch power and link loss.
    Run(RunArgs),
    /// Acceptable link loss versus launch power for several modes.
    Curve(CurveArgs),
    /// Write the sphere-shaping codebook as CSV.
    BuildLut(LutArgs),
    /// Write a labelled 2D constellation as CSV and check its Gray property.
    DumpConstellation(ConstellationArgs),
    /// Run the built-in analytic self-tests.
    Validate,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment file (TOML).
    pub config: PathBuf,
    /// Case selected by its target GMI (bit/2D); defaults to the first case.
    #[arg(long)]
    pub target_gmi: Option<f64>,
    /// Overrides the burst length in 4D symbols.
    #[arg(long)]
    pub n_symbols: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub power_dbm: f64,
    #[arg(long)]
    pub loss_db: f64,
    /// Defaults to the configured base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "shaped")]
    pub mode: String,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the launched waveform in the binary dump format.
    #[arg(long)]
    pub dump_launch: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated launch powers (dBm); defaults to the configured grid.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub powers: Option<Vec<f64>>,
    /// Comma-separated mode names; defaults to the configured list.
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<String>>,
    /// Bisection tolerance (dB); defaults to the configured value.
    #[arg(long)]
    pub tol_db: Option<f64>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Append rows to an existing CSV with the same header.
    #[arg(long)]
    pub append: bool,
    /// Worker threads.
    #[arg(long, env = "SATLINK_JOBS")]
    pub jobs: Option<usize>,
    /// Fill the runtime_s column (makes the output non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct LutArgs {
    /// QAM order the amplitudes are taken from.
    #[arg(long)]
    pub order: u32,
    #[arg(long, default_value_t = 4)]
    pub block_len: usize,
    #[arg(long)]
    pub k_bits: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConstellationArgs {
    #[arg(long)]
    pub order: u32,
    /// Shaping bits per 4D block; uniform QAM when absent.
    #[arg(long)]
    pub k_bits: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Run(a) => cmd_run(&a).map(|_| 0),
        Command::Curve(a) => cmd_curve(&a).map(|_| 0),
        Command::BuildLut(a) => cmd_build_lut(&a).map(|_| 0),
        Command::DumpConstellation(a) => cmd_dump_constellation(&a),
        Command::Validate => Ok(cmd_validate()),
    }
}

fn load(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut exp = ExperimentConfig::load(&common.config)?;
    if let Some(n) = common.n_symbols {
        exp.set_n_symbols(n)?;
    }
    Ok(exp)
}

/// Writes `bytes` to `path` (or stdout) only once everything is computed.
fn emit(path: Option<&Path>, bytes: &[u8], append: bool) -> Result<()> {
    match path {
        None => io::stdout().lock().write_all(bytes)?,
        Some(p) => {
            let mut f = File::options()
                .create(true)
                .append(append)
                .write(true)
                .truncate(!append)
                .open(p)?;
            f.write_all(bytes)?;
        }
    }
    Ok(())
}

fn run_link(exp: &ExperimentConfig, a: &RunArgs) -> Result<(LinkConfig, u64)> {
    let case = exp.case(a.common.target_gmi)?;
    let mode = exp.mode(&a.mode)?;
    let seed = a.seed.unwrap_or(exp.base().sim.base_seed);
    Ok((exp.link(case, &mode), seed))
}

pub fn cmd_run(a: &RunArgs) -> Result<SimResult> {
    let exp = load(&a.common)?;
    let (cfg, seed) = run_link(&exp, a)?;
    let (burst, launched) = propagate_with_waveform(&cfg, a.power_dbm, seed)?;
    let r = burst.evaluate(a.loss_db)?;
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(RUN_HEADER)?;
    out.write_record(run_record(&a.mode, &r))?;
    let bytes = out.into_inner().map_err(|e| invalid(e.to_string()))?;
    if let Some(p) = &a.dump_launch {
        launched.write_dump(io::BufWriter::new(File::create(p)?))?;
    }
    emit(a.out.as_deref(), &bytes, false)?;
    Ok(r)
}

pub fn run_record(mode: &str, r: &SimResult) -> Vec<String> {
    vec![
        mode.to_string(),
        r.launch_power_dbm.to_string(),
        r.loss_db.to_string(),
        format!("{:.4}", r.snr_db_analytic),
        format!("{:.4}", r.snr_db_empirical),
        format!("{:.6}", r.gmi_bits_per_2d),
        r.mode.shaped.to_string(),
        r.mode.order.to_string(),
        r.mode.kappa.map(|k| k.to_string()).unwrap_or_default(),
        r.mode.bandwidth_limited.to_string(),
        r.n_symbols.to_string(),
        r.seed.to_string(),
        format!("{:.3e}", r.diagnostics.tx_out_of_band),
        format!("{:.3e}", r.diagnostics.launch_out_of_band),
    ]
}

pub fn cmd_curve(a: &CurveArgs) -> Result<Vec<CurveRow>> {
    let exp = load(&a.common)?;
    let req = CurveRequest {
        target_gmi: a.common.target_gmi,
        powers_dbm: a
            .powers
            .clone()
            .unwrap_or_else(|| exp.curve.powers_dbm.clone()),
        modes: a.modes.clone().unwrap_or_else(|| exp.curve.modes.clone()),
        tol_db: a.tol_db.unwrap_or(exp.curve.tol_db),
        timing: a.timing,
    };
    let jobs = a.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid(e.to_string()))?;
    let rows = pool.install(|| curve_rows(&exp, &req))?;

    let header = match (&a.out, a.append) {
        (Some(p), true) if p.exists() && std::fs::metadata(p)?.len() > 0 => {
            curve::check_header(p)?;
            false
        }
        _ => true,
    };
    let mut buf = Vec::new();
    write_curve_csv(&mut buf, &rows, header)?;
    emit(a.out.as_deref(), &buf, a.append)?;
    Ok(rows)
}

pub fn cmd_build_lut(a: &LutArgs) -> Result<()> {
    let cb = crate::shaping::SphereCodebook::build(
        crate::shaping::AmplitudeAlphabet::for_qam(a.order)?,
        a.block_len,
        a.k_bits,
    )?;
    let (tx, rx) = cb.lut_size_bits();
    log::info!(
        "codebook: {} blocks, TX LUT {tx} bits, RX LUT {rx} bits",
        cb.len()
    );
    let mut buf = Vec::new();
    write_lut_csv(&mut buf, &cb)?;
    emit(a.out.as_deref(), &buf, false)
}

pub fn cmd_dump_constellation(a: &ConstellationArgs) -> Result<i32> {
    let points = constellation_rows(a.order, a.k_bits)?;
    let violations = tables::gray_violations(&points);
    let mut buf = Vec::new();
    write_constellation_csv(&mut buf, &points)?;
    emit(a.out.as_deref(), &buf, false)?;
    if violations.is_empty() {
        eprintln!(
            "gray check: {} points, all nearest neighbours differ in one bit",
            points.len()
        );
        Ok(0)
    } else {
        eprintln!("gray check FAILED for {} neighbour pairs", violations.len());
        Ok(1)
    }
}

pub fn cmd_validate() -> i32 {
    let checks = run_checks();
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {:<28} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        failed += usize::from(!c.passed);
    }
    println!("{} checks, {failed} failed", checks.len());
    i32::from(failed > 0)
}
