//! Run configuration.
//!
//! An experiment file (TOML) describes the physical link once and lists the
//! modulation cases and curve modes to evaluate; [`ExperimentConfig::link`]
//! resolves one (case, mode) pair into the flat [`LinkConfig`] consumed by
//! the simulator.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::channel::{
    photon_energy, FiberSpec, LinkNoise, PowerProfile, SsfmSteps, MANAKOV_FACTOR,
};
use crate::error::{invalid, Error, Result};
use crate::modem::{Constellation, RxParams, TxParams};
use crate::shaping::{AmplitudeAlphabet, SphereCodebook};

/// How a quoted electrical bandwidth maps to a brickwall cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthConvention {
    /// Total width: cutoff at +-bandwidth/2.
    #[default]
    TwoSided,
    /// Cutoff at +-bandwidth.
    OneSided,
}

impl BandwidthConvention {
    pub fn cutoff(self, bandwidth_hz: f64) -> f64 {
        match self {
            BandwidthConvention::TwoSided => bandwidth_hz / 2.0,
            BandwidthConvention::OneSided => bandwidth_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearModel {
    /// 8/9 coefficient for randomly varying birefringence.
    #[default]
    Manakov,
    /// Plain coefficient.
    Scalar,
}

impl NonlinearModel {
    pub fn factor(self) -> f64 {
        match self {
            NonlinearModel::Manakov => MANAKOV_FACTOR,
            NonlinearModel::Scalar => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapingConfig {
    pub block_len: usize,
    pub k_bits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationConfig {
    pub order: u32,
    /// `None` for uniform QAM.
    pub shaping: Option<ShapingConfig>,
}

impl ModulationConfig {
    pub fn constellation(&self) -> Result<Constellation> {
        match &self.shaping {
            None => Constellation::uniform(self.order),
            Some(s) => {
                let cb = SphereCodebook::build(
                    AmplitudeAlphabet::for_qam(self.order)?,
                    s.block_len,
                    s.k_bits,
                )?;
                Constellation::shaped(Arc::new(cb))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TxConfig {
    pub symbol_rate_hz: f64,
    pub rolloff: f64,
    pub samples_per_symbol: usize,
    pub dac_cutoff_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HpoaConfig {
    pub fiber: FiberSpec,
    /// Power profile shape; shifted so that it ends at the launch power.
    pub profile: PowerProfile,
    pub pigtail: FiberSpec,
    pub steps: SsfmSteps,
    pub nl_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlprConfig {
    pub enabled: bool,
    pub kappa: f64,
    pub gamma_eff_override: Option<f64>,
    pub l_eff_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RxConfig {
    pub adc_cutoff_hz: Option<f64>,
    pub cd_compensation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub noise_figure_db: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// 4D symbols per burst.
    pub n_symbols: usize,
    /// Symbols discarded at each burst end before scoring.
    pub guard: usize,
    pub base_seed: u64,
}

/// Every knob of one simulation point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub modulation: ModulationConfig,
    pub tx: TxConfig,
    pub hpoa: HpoaConfig,
    pub nlpr: NlprConfig,
    pub rx: RxConfig,
    pub noise: NoiseConfig,
    pub sim: SimConfig,
}

impl LinkConfig {
    /// Shaped 256QAM link with the default HPOA model: 30 m amplifier with a
    /// 30 dB exponential power profile, 3 m pigtail, 110 GHz two-sided
    /// front ends, 4 dB receiver noise figure.
    pub fn paper_default() -> LinkConfig {
        let profile = PowerProfile::exponential(30.0, 30.0, 0.0).expect("static profile");
        LinkConfig {
            modulation: ModulationConfig {
                order: 256,
                shaping: Some(ShapingConfig {
                    block_len: 4,
                    k_bits: 9,
                }),
            },
            tx: TxConfig {
                symbol_rate_hz: 100e9,
                rolloff: 0.05,
                samples_per_symbol: 8,
                dac_cutoff_hz: Some(55e9),
            },
            hpoa: HpoaConfig {
                fiber: FiberSpec::smf(30.0),
                profile,
                pigtail: FiberSpec::smf(3.0),
                steps: SsfmSteps::default(),
                nl_factor: MANAKOV_FACTOR,
            },
            nlpr: NlprConfig {
                enabled: false,
                kappa: 0.6,
                gamma_eff_override: None,
                l_eff_override: None,
            },
            rx: RxConfig {
                adc_cutoff_hz: Some(55e9),
                cd_compensation: true,
            },
            noise: NoiseConfig {
                noise_figure_db: 4.0,
                wavelength_nm: 1550.0,
            },
            sim: SimConfig {
                n_symbols: 1 << 16,
                guard: 256,
                base_seed: 1,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hpoa.fiber.validate()?;
        self.hpoa.pigtail.validate()?;
        if (self.hpoa.profile.length() - self.hpoa.fiber.length_m).abs()
            > 1e-9 * self.hpoa.fiber.length_m
        {
            return Err(invalid(
                "power profile length must equal the HPOA fiber length",
            ));
        }
        if self.tx.samples_per_symbol < 2 {
            return Err(invalid("samples_per_symbol must be >= 2"));
        }
        if !(0.0..=1.0).contains(&self.nlpr.kappa) {
            return Err(invalid("kappa must lie in [0, 1]"));
        }
        if self.sim.n_symbols == 0 || 2 * self.sim.guard >= self.sim.n_symbols {
            return Err(invalid("burst must be longer than twice the guard"));
        }
        if let Some(s) = &self.modulation.shaping {
            if s.block_len != 4 {
                return Err(invalid(
                    "shaped mode maps one block onto one 4D symbol (block_len = 4)",
                ));
            }
        }
        Ok(())
    }

    pub fn tx_params(&self) -> TxParams {
        TxParams {
            symbol_rate: self.tx.symbol_rate_hz,
            rolloff: self.tx.rolloff,
            sps: self.tx.samples_per_symbol,
            dac_cutoff: self.tx.dac_cutoff_hz,
        }
    }

    pub fn rx_params(&self, launch_power_w: f64) -> RxParams {
        let cd =
            self.hpoa.fiber.accumulated_dispersion() + self.hpoa.pigtail.accumulated_dispersion();
        RxParams {
            symbol_rate: self.tx.symbol_rate_hz,
            rolloff: self.tx.rolloff,
            sps: self.tx.samples_per_symbol,
            adc_cutoff: self.rx.adc_cutoff_hz,
            cd_compensation: self.rx.cd_compensation.then_some(cd),
            reference_power: launch_power_w,
        }
    }

    pub fn link_noise(&self, loss_db: f64) -> LinkNoise {
        LinkNoise {
            loss_db,
            noise_figure_db: self.noise.noise_figure_db,
            symbol_rate: self.tx.symbol_rate_hz,
            photon_energy: photon_energy(self.noise.wavelength_nm),
        }
    }

    /// True when both fibers are linear.
    pub fn is_linear(&self) -> bool {
        self.hpoa.fiber.gamma_per_w_km == 0.0 && self.hpoa.pigtail.gamma_per_w_km == 0.0
    }
}

/// A curve mode: which mitigation techniques are active.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub name: String,
    pub shaped: bool,
    /// TX share of the NLPR; `None` disables NLPR entirely.
    pub kappa: Option<f64>,
    pub unlimited_bandwidth: bool,
    /// Zero fiber nonlinearity (reference curve).
    pub linear: bool,
}

impl Mode {
    /// Parses a mode name. Recognised names: `uniform`, `shaped`,
    /// `shaped-tx-nlpr` (kappa = 1), `shaped-split-nlpr` (kappa =
    /// `split_kappa`), `shaped-nlpr@<kappa>`, `uniform-nlpr@<kappa>`,
    /// `ideal` (shaped, kappa = 1, unlimited bandwidth), `linear` and
    /// `linear-uniform` (no fiber nonlinearity).
    pub fn parse(name: &str, split_kappa: f64) -> Result<Mode> {
        let base = Mode {
            name: name.to_string(),
            shaped: true,
            kappa: None,
            unlimited_bandwidth: false,
            linear: false,
        };
        let mode = match name {
            "uniform" => Mode {
                shaped: false,
                ..base
            },
            "shaped" => base,
            "shaped-tx-nlpr" => Mode {
                kappa: Some(1.0),
                ..base
            },
            "shaped-split-nlpr" => Mode {
                kappa: Some(split_kappa),
                ..base
            },
            "ideal" => Mode {
                kappa: Some(1.0),
                unlimited_bandwidth: true,
                ..base
            },
            "linear" => Mode {
                linear: true,
                ..base
            },
            "linear-uniform" => Mode {
                shaped: false,
                linear: true,
                ..base
            },
            other => {
                let (prefix, k) = other
                    .split_once('@')
                    .ok_or_else(|| invalid(format!("unknown mode `{other}`")))?;
                let kappa: f64 = k
                    .parse()
                    .map_err(|_| invalid(format!("bad kappa in mode `{other}`")))?;
                if !(0.0..=1.0).contains(&kappa) {
                    return Err(invalid(format!("kappa out of range in mode `{other}`")));
                }
                match prefix {
                    "shaped-nlpr" => Mode {
                        kappa: Some(kappa),
                        ..base
                    },
                    "uniform-nlpr" => Mode {
                        shaped: false,
                        kappa: Some(kappa),
                        ..base
                    },
                    _ => return Err(invalid(format!("unknown mode `{other}`"))),
                }
            }
        };
        Ok(mode)
    }
}

/// One modulation case of the experiment (one target GMI).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub target_gmi: f64,
    pub order: u32,
    pub shaping_bits: usize,
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    /// QAM order of the uniform reference; defaults to `order`.
    pub uniform_order: Option<u32>,
}

fn default_block_len() -> usize {
    4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TxSection {
    symbol_rate_hz: f64,
    rolloff: f64,
    #[serde(default = "default_sps")]
    samples_per_symbol: usize,
    bandwidth_hz: Option<f64>,
    #[serde(default)]
    bandwidth_convention: BandwidthConvention,
}

fn default_sps() -> usize {
    8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiberSection {
    length_m: f64,
    alpha_db_per_km: f64,
    gamma_per_w_km: f64,
    dispersion_ps_nm_km: f64,
    ssfm_steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct HpoaSection {
    #[serde(flatten)]
    fiber: FiberSection,
    /// `[z_m, dB relative to the launch power]` pairs.
    profile: Vec<(f64, f64)>,
    #[serde(default)]
    nonlinear_model: NonlinearModel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NlprSection {
    #[serde(default = "default_kappa")]
    kappa: f64,
    gamma_eff_per_w_m: Option<f64>,
    l_eff_m: Option<f64>,
}

fn default_kappa() -> f64 {
    0.6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RxSection {
    bandwidth_hz: Option<f64>,
    #[serde(default)]
    bandwidth_convention: BandwidthConvention,
    #[serde(default = "yes")]
    cd_compensation: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    noise_figure_db: f64,
    #[serde(default = "default_wavelength")]
    wavelength_nm: f64,
}

fn default_wavelength() -> f64 {
    1550.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    #[serde(default = "default_n_symbols")]
    n_symbols: usize,
    #[serde(default = "default_guard")]
    guard: usize,
    #[serde(default)]
    base_seed: u64,
}

fn default_n_symbols() -> usize {
    1 << 16
}

fn default_guard() -> usize {
    256
}

/// Sweep grid of the `curve` command.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    #[serde(default)]
    pub powers_dbm: Vec<f64>,
    #[serde(default)]
    pub modes: Vec<String>,
    #[serde(default = "default_tol")]
    pub tol_db: f64,
}

fn default_tol() -> f64 {
    0.1
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            powers_dbm: (30..=50).map(f64::from).collect(),
            modes: [
                "uniform",
                "shaped",
                "shaped-tx-nlpr",
                "shaped-split-nlpr",
                "ideal",
            ]
            .map(String::from)
            .to_vec(),
            tol_db: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    tx: TxSection,
    hpoa: HpoaSection,
    pigtail: FiberSection,
    #[serde(default)]
    nlpr: Option<NlprSection>,
    rx: RxSection,
    noise: NoiseSection,
    #[serde(default)]
    sim: Option<SimSection>,
    cases: Vec<CaseConfig>,
    #[serde(default)]
    curve: Option<CurveConfig>,
}

/// Parsed experiment file.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Link for the first case in shaped mode, before mode overrides.
    base: LinkConfig,
    pub cases: Vec<CaseConfig>,
    pub curve: CurveConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
            path: "<document>".into(),
            message: e.to_string(),
        })?;
        let file: ExperimentFile =
            serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
                path: e.path().to_string(),
                message: e.inner().message().to_string(),
            })?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    fn from_file(f: ExperimentFile) -> Result<ExperimentConfig> {
        let cfg_err = |path: &str, message: String| Error::Config {
            path: path.to_string(),
            message,
        };
        let wavelength_nm = f.noise.wavelength_nm;
        let fiber = |s: &FiberSection| FiberSpec {
            length_m: s.length_m,
            alpha_db_per_km: s.alpha_db_per_km,
            gamma_per_w_km: s.gamma_per_w_km,
            dispersion_ps_nm_km: s.dispersion_ps_nm_km,
            wavelength_nm,
        };
        let profile = PowerProfile::new(f.hpoa.profile.clone())
            .map_err(|e| cfg_err("hpoa.profile", e.to_string()))?;
        if f.cases.is_empty() {
            return Err(cfg_err("cases", "at least one case is required".into()));
        }
        let nlpr = f.nlpr.unwrap_or(NlprSection {
            kappa: default_kappa(),
            gamma_eff_per_w_m: None,
            l_eff_m: None,
        });
        let sim = f.sim.unwrap_or(SimSection {
            n_symbols: default_n_symbols(),
            guard: default_guard(),
            base_seed: 0,
        });
        let first = &f.cases[0];
        let base = LinkConfig {
            modulation: ModulationConfig {
                order: first.order,
                shaping: Some(ShapingConfig {
                    block_len: first.block_len,
                    k_bits: first.shaping_bits,
                }),
            },
            tx: TxConfig {
                symbol_rate_hz: f.tx.symbol_rate_hz,
                rolloff: f.tx.rolloff,
                samples_per_symbol: f.tx.samples_per_symbol,
                dac_cutoff_hz: f
                    .tx
                    .bandwidth_hz
                    .map(|b| f.tx.bandwidth_convention.cutoff(b)),
            },
            hpoa: HpoaConfig {
                fiber: fiber(&f.hpoa.fiber),
                profile,
                pigtail: fiber(&f.pigtail),
                steps: SsfmSteps {
                    hpoa: f.hpoa.fiber.ssfm_steps,
                    pigtail: f.pigtail.ssfm_steps,
                },
                nl_factor: f.hpoa.nonlinear_model.factor(),
            },
            nlpr: NlprConfig {
                enabled: false,
                kappa: nlpr.kappa,
                gamma_eff_override: nlpr.gamma_eff_per_w_m,
                l_eff_override: nlpr.l_eff_m,
            },
            rx: RxConfig {
                adc_cutoff_hz: f
                    .rx
                    .bandwidth_hz
                    .map(|b| f.rx.bandwidth_convention.cutoff(b)),
                cd_compensation: f.rx.cd_compensation,
            },
            noise: NoiseConfig {
                noise_figure_db: f.noise.noise_figure_db,
                wavelength_nm,
            },
            sim: SimConfig {
                n_symbols: sim.n_symbols,
                guard: sim.guard,
                base_seed: sim.base_seed,
            },
        };
        base.validate()
            .map_err(|e| cfg_err("<link>", e.to_string()))?;
        for (i, c) in f.cases.iter().enumerate() {
            AmplitudeAlphabet::for_qam(c.order)
                .and_then(|a| SphereCodebook::build(a, c.block_len, c.shaping_bits))
                .map_err(|e| cfg_err(&format!("cases[{i}]"), e.to_string()))?;
        }
        Ok(ExperimentConfig {
            base,
            cases: f.cases,
            curve: f.curve.unwrap_or_default(),
        })
    }

    pub fn base(&self) -> &LinkConfig {
        &self.base
    }

    /// Overrides the burst length of every resolved link.
    pub fn set_n_symbols(&mut self, n: usize) -> Result<()> {
        let mut base = self.base.clone();
        base.sim.n_symbols = n;
        base.validate()?;
        self.base = base;
        Ok(())
    }

    /// The case whose target GMI equals `target` (first case for `None`).
    pub fn case(&self, target: Option<f64>) -> Result<&CaseConfig> {
        match target {
            None => Ok(&self.cases[0]),
            Some(t) => self
                .cases
                .iter()
                .find(|c| (c.target_gmi - t).abs() < 1e-9)
                .ok_or_else(|| invalid(format!("no case with target GMI {t}"))),
        }
    }

    pub fn mode(&self, name: &str) -> Result<Mode> {
        Mode::parse(name, self.base.nlpr.kappa)
    }

    /// Resolves a (case, mode) pair into a link configuration.
    pub fn link(&self, case: &CaseConfig, mode: &Mode) -> LinkConfig {
        let mut cfg = self.base.clone();
        cfg.modulation = if mode.shaped {
            ModulationConfig {
                order: case.order,
                shaping: Some(ShapingConfig {
                    block_len: case.block_len,
                    k_bits: case.shaping_bits,
                }),
            }
        } else {
            ModulationConfig {
                order: case.uniform_order.unwrap_or(case.order),
                shaping: None,
            }
        };
        apply_mode(&mut cfg, mode);
        cfg
    }
}

/// Applies the NLPR, bandwidth and linearity switches of `mode`.
pub fn apply_mode(cfg: &mut LinkConfig, mode: &Mode) {
    match mode.kappa {
        Some(k) => {
            cfg.nlpr.enabled = true;
            cfg.nlpr.kappa = k;
        }
        None => cfg.nlpr.enabled = false,
    }
    if mode.unlimited_bandwidth {
        cfg.tx.dac_cutoff_hz = None;
        cfg.rx.adc_cutoff_hz = None;
    }
    if mode.linear {
        cfg.hpoa.fiber.gamma_per_w_km = 0.0;
        cfg.hpoa.pigtail.gamma_per_w_km = 0.0;
    }
}
