//! Achievable-rate metrics and the acceptable-loss search.
//!
//! A simulation point is split in two stages. [`propagate`] runs the
//! deterministic, noiseless part of the chain (TX DSP, amplifier fiber, RX
//! front end) once; [`PropagatedBurst::evaluate`] then adds receiver noise
//! for a given link loss, equalizes and scores the burst. Because the noise
//! samples come from a fixed stream and are only rescaled with the loss,
//! GMI versus loss is evaluated with common random numbers, which keeps the
//! bisection in [`acceptable_loss`] well behaved.

use std::f64::consts::LN_2;

use rayon::prelude::*;

use crate::channel::{
    add_scaled_noise, dbm_to_w, effective_length, hpoa_transmit, lin_to_db, standard_noise,
    LinkNoise, SsfmSteps, SNR_WARN_DB,
};
use crate::config::LinkConfig;
use crate::error::{invalid, Error, Result};
use crate::modem::{
    dac, equalize, pas_modulate, qam_modulate_uniform, rx_frontend, tx_baseband, DemapScratch,
    SoftDemapper, TxFrame,
};
use crate::nlpr::{apply_tx_nlpr, NlprSpec};
use crate::seed::{self, DATA_STREAM, NOISE_STREAM};
use crate::signal::{Symbols, Waveform};
use rand::Rng;
use std::sync::Arc;

/// Lower bound on the per-4D noise variance handed to the demapper.
pub const NOISE_VARIANCE_FLOOR: f64 = 1e-12;

/// Loss interval searched by [`acceptable_loss`] (dB).
pub const LOSS_SEARCH_RANGE: (f64, f64) = (0.0, 100.0);

const CHUNK: usize = 1024;

/// What was simulated, in a form suitable for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDescriptor {
    pub shaped: bool,
    pub order: u32,
    /// TX share of the NLPR, `None` when NLPR is off.
    pub kappa: Option<f64>,
    /// False when both DAC and ADC are unlimited.
    pub bandwidth_limited: bool,
    pub linear: bool,
}

impl ModeDescriptor {
    pub fn of(cfg: &LinkConfig) -> ModeDescriptor {
        ModeDescriptor {
            shaped: cfg.modulation.shaping.is_some(),
            order: cfg.modulation.order,
            kappa: cfg.nlpr.enabled.then_some(cfg.nlpr.kappa),
            bandwidth_limited: cfg.tx.dac_cutoff_hz.is_some() || cfg.rx.adc_cutoff_hz.is_some(),
            linear: cfg.is_linear(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Energy fraction of the DAC output outside the nominal signal band
    /// `R (1 + rolloff) / 2`.
    pub tx_out_of_band: f64,
    /// Energy fraction of the launched signal outside the same band.
    pub launch_out_of_band: f64,
    pub ssfm_steps: SsfmSteps,
}

/// One evaluated simulation point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub launch_power_dbm: f64,
    pub loss_db: f64,
    /// SNR from the link budget.
    pub snr_db_analytic: f64,
    /// SNR measured after equalization; includes nonlinear distortion.
    pub snr_db_empirical: f64,
    pub gmi_bits_per_2d: f64,
    pub mode: ModeDescriptor,
    /// Scored 4D symbols (guards excluded).
    pub n_symbols: usize,
    pub seed: u64,
    pub diagnostics: Diagnostics,
}

/// Mean squared Euclidean distance between received and transmitted 4D
/// symbols.
pub fn estimate_noise_variance(rx: &Symbols, tx: &Symbols) -> Result<f64> {
    if rx.len() != tx.len() {
        return Err(Error::LengthMismatch(format!(
            "{} received vs {} transmitted symbols",
            rx.len(),
            tx.len()
        )));
    }
    if rx.is_empty() {
        return Err(invalid("cannot estimate noise variance from zero symbols"));
    }
    let sum: f64 =
        rx.x.iter()
            .zip(&tx.x)
            .chain(rx.y.iter().zip(&tx.y))
            .map(|(r, t)| (r - t).norm_sqr())
            .sum();
    Ok(sum / rx.len() as f64)
}

/// Per-bit-position averages of `-log2 P(b_i = b_true | y)`.
fn conditional_entropies(rx: &Symbols, frame: &TxFrame, noise_var_2d: f64) -> Result<Vec<f64>> {
    let dm = SoftDemapper::new(&frame.constellation, noise_var_2d)?;
    let m = dm.label_bits();
    let labels = frame.labels();
    // Per-chunk partial sums are reduced sequentially so the result does not
    // depend on the thread count.
    let partial: Vec<Vec<f64>> =
        rx.x.par_chunks(CHUNK)
            .zip(rx.y.par_chunks(CHUNK))
            .zip(labels.par_chunks(CHUNK))
            .map(|((xs, ys), ls)| {
                let mut scratch = DemapScratch::default();
                let mut lp = vec![[0.0; 2]; m];
                let mut acc = vec![0.0; m];
                for ((x, y), &label) in xs.iter().zip(ys).zip(ls) {
                    dm.log_posteriors([x.re, x.im, y.re, y.im], &mut scratch, &mut lp);
                    for (i, (a, l)) in acc.iter_mut().zip(&lp).enumerate() {
                        let bit = (label >> (m - 1 - i)) & 1;
                        *a -= l[bit as usize];
                    }
                }
                acc
            })
            .collect();
    let mut total = vec![0.0; m];
    for p in &partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let n = rx.len() as f64;
    Ok(total.into_iter().map(|t| t / (n * LN_2)).collect())
}

/// BMD GMI in bit per 2D symbol for equalized symbols `rx` against `frame`.
///
/// Uniform QAM: `sum_i [1 - H(B_i|Y)]+` over the label bits. Shaped QAM:
/// `[H(S) - sum_i H(B_i|Y)]+` where `H(S) = k + 4` is the entropy of the
/// equiprobable composite 4D symbol and the bit posteriors use its exact
/// prior. `sigma2_4d` is the noise variance per 4D symbol.
pub fn gmi_per_2d(rx: &Symbols, frame: &TxFrame, sigma2_4d: f64) -> Result<f64> {
    if rx.len() != frame.len() {
        return Err(Error::LengthMismatch(format!(
            "{} received symbols for a {}-symbol frame",
            rx.len(),
            frame.len()
        )));
    }
    if rx.is_empty() {
        return Err(invalid("cannot estimate GMI from zero symbols"));
    }
    if !(sigma2_4d >= 0.0) {
        return Err(invalid(format!(
            "noise variance must be >= 0, got {sigma2_4d}"
        )));
    }
    let var_2d = sigma2_4d.max(NOISE_VARIANCE_FLOOR) / 2.0;
    let h = conditional_entropies(rx, frame, var_2d)?;
    let c = &frame.constellation;
    let gmi_4d = if c.is_shaped() {
        (c.info_bits_4d() as f64 - h.iter().sum::<f64>()).max(0.0)
    } else {
        h.iter().map(|h| (1.0 - h).max(0.0)).sum()
    };
    Ok(gmi_4d / 2.0)
}

/// Largest achievable GMI per 2D of the configured modulation.
pub fn max_rate_per_2d(cfg: &LinkConfig) -> f64 {
    match &cfg.modulation.shaping {
        Some(s) => (s.k_bits + s.block_len) as f64 / 2.0,
        None => (cfg.modulation.order as f64).log2(),
    }
}

/// NLPR parameters for `cfg` at the given launch power, or `None` when NLPR
/// is disabled.
pub fn nlpr_spec(cfg: &LinkConfig, launch_power_dbm: f64) -> Option<NlprSpec> {
    if !cfg.nlpr.enabled {
        return None;
    }
    let h = &cfg.hpoa;
    Some(NlprSpec {
        kappa: cfg.nlpr.kappa,
        gamma_eff: cfg
            .nlpr
            .gamma_eff_override
            .unwrap_or(h.nl_factor * h.fiber.gamma_per_w_m()),
        l_eff: cfg
            .nlpr
            .l_eff_override
            .unwrap_or_else(|| effective_length(&h.profile, &h.pigtail)),
        reference_power: dbm_to_w(launch_power_dbm),
    })
}

fn random_bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = seed::rng(seed);
    (0..n).map(|_| rng.random::<bool>() as u8).collect()
}

/// Random frame of `n` 4D symbols for the configured modulation.
pub fn random_frame(cfg: &LinkConfig, n: usize, seed: u64) -> Result<TxFrame> {
    match &cfg.modulation.shaping {
        None => {
            let per = 2 * cfg.modulation.order.trailing_zeros() as usize;
            qam_modulate_uniform(cfg.modulation.order, &random_bits(n * per, seed))
        }
        Some(_) => {
            let c = cfg.modulation.constellation()?;
            let cb = c.codebook().expect("shaped constellation").clone();
            pas_modulate(Arc::clone(&cb), &random_bits(n * cb.frame_bits(), seed))
        }
    }
}

/// Noiseless received burst of one (configuration, launch power, seed).
#[derive(Debug, Clone)]
pub struct PropagatedBurst {
    /// Transmitted frame with guards removed.
    pub tx: TxFrame,
    /// Front-end output aligned with `tx`, before equalization.
    pub rx: Symbols,
    pub launch_power_dbm: f64,
    pub seed: u64,
    pub mode: ModeDescriptor,
    pub diagnostics: Diagnostics,
    noise: LinkNoise,
}

/// Runs TX, amplifier and RX front end without receiver noise, also
/// returning the launched waveform.
pub fn propagate_with_waveform(
    cfg: &LinkConfig,
    launch_power_dbm: f64,
    seed: u64,
) -> Result<(PropagatedBurst, Waveform)> {
    cfg.validate()?;
    if !launch_power_dbm.is_finite() {
        return Err(invalid("launch power must be finite"));
    }
    let frame = random_frame(cfg, cfg.sim.n_symbols, seed::derive(seed, &[DATA_STREAM]))?;
    let tx = cfg.tx_params();
    let nlpr = nlpr_spec(cfg, launch_power_dbm);

    let mut w = tx_baseband(&frame, &tx)?;
    if let Some(spec) = &nlpr {
        w = apply_tx_nlpr(&w, spec)?;
    }
    let w = dac(&w, tx.dac_cutoff)?;
    let band = cfg.tx.symbol_rate_hz * (1.0 + cfg.tx.rolloff) / 2.0;
    let tx_out_of_band = w.out_of_band_fraction(band);

    let h = &cfg.hpoa;
    let profile = h.profile.anchored(launch_power_dbm);
    let launched = hpoa_transmit(
        &w,
        &h.fiber,
        &profile,
        &h.pigtail,
        launch_power_dbm,
        h.steps,
        h.nl_factor,
    )?;
    let launch_out_of_band = launched.out_of_band_fraction(band);

    let rx_nlpr = nlpr.filter(|s| s.kappa < 1.0);
    let rx = rx_frontend(
        &launched,
        &cfg.rx_params(dbm_to_w(launch_power_dbm)),
        rx_nlpr.as_ref(),
    )?;

    let guard = cfg.sim.guard;
    let burst = PropagatedBurst {
        tx: frame.trimmed(guard),
        rx: rx.trimmed(guard),
        launch_power_dbm,
        seed,
        mode: ModeDescriptor::of(cfg),
        diagnostics: Diagnostics {
            tx_out_of_band,
            launch_out_of_band,
            ssfm_steps: h.steps,
        },
        noise: cfg.link_noise(0.0),
    };
    Ok((burst, launched))
}

/// Noiseless part of [`run_point`].
pub fn propagate(cfg: &LinkConfig, launch_power_dbm: f64, seed: u64) -> Result<PropagatedBurst> {
    propagate_with_waveform(cfg, launch_power_dbm, seed).map(|(b, _)| b)
}

impl PropagatedBurst {
    /// Adds receiver noise for `loss_db`, equalizes and computes the GMI.
    pub fn evaluate(&self, loss_db: f64) -> Result<SimResult> {
        let link = LinkNoise {
            loss_db,
            ..self.noise
        };
        link.validate()?;
        let snr = link.snr_linear(self.launch_power_dbm);
        if lin_to_db(snr) > SNR_WARN_DB {
            log::debug!("SNR of {:.1} dB at {loss_db} dB loss", lin_to_db(snr));
        }
        let noise = standard_noise(self.rx.len(), seed::derive(self.seed, &[NOISE_STREAM]));
        let mut rx = add_scaled_noise(&self.rx, &noise, (1.0 / snr).sqrt());
        equalize(&mut rx, &self.tx.symbols)?;
        let sigma2 = estimate_noise_variance(&rx, &self.tx.symbols)?;
        let gmi = gmi_per_2d(&rx, &self.tx, sigma2)?;
        let signal = self.tx.symbols.mean_energy_2d();
        Ok(SimResult {
            launch_power_dbm: self.launch_power_dbm,
            loss_db,
            snr_db_analytic: lin_to_db(snr),
            snr_db_empirical: lin_to_db(signal / (sigma2.max(NOISE_VARIANCE_FLOOR) / 2.0)),
            gmi_bits_per_2d: gmi,
            mode: self.mode.clone(),
            n_symbols: self.tx.len(),
            seed: self.seed,
            diagnostics: self.diagnostics.clone(),
        })
    }
}

/// Full chain for one launch power and link loss. Deterministic in `seed`.
pub fn run_point(
    cfg: &LinkConfig,
    launch_power_dbm: f64,
    loss_db: f64,
    seed: u64,
) -> Result<SimResult> {
    propagate(cfg, launch_power_dbm, seed)?.evaluate(loss_db)
}

/// Outcome of [`acceptable_loss`].
#[derive(Debug, Clone, PartialEq)]
pub enum LossSearch {
    /// Largest loss (within the tolerance) meeting the target, with the GMI
    /// reached there.
    Feasible { loss_db: f64, gmi: f64 },
    /// The target is not met even at zero loss; `gmi` is the best value
    /// reached (at zero loss), if any simulation ran.
    Infeasible { gmi: Option<f64> },
}

impl LossSearch {
    pub fn loss_db(&self) -> Option<f64> {
        match self {
            LossSearch::Feasible { loss_db, .. } => Some(*loss_db),
            LossSearch::Infeasible { .. } => None,
        }
    }

    pub fn gmi(&self) -> Option<f64> {
        match self {
            LossSearch::Feasible { gmi, .. } => Some(*gmi),
            LossSearch::Infeasible { gmi } => *gmi,
        }
    }
}

/// Bisection on a propagated burst; see [`acceptable_loss`].
pub fn acceptable_loss_for(
    burst: &PropagatedBurst,
    max_rate: f64,
    target: f64,
    tol_db: f64,
) -> Result<LossSearch> {
    if !(target > 0.0) {
        return Err(invalid(format!(
            "target GMI must be positive, got {target}"
        )));
    }
    if !(tol_db > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol_db}")));
    }
    if target >= max_rate {
        return Ok(LossSearch::Infeasible { gmi: None });
    }
    let gmi_at = |loss: f64| burst.evaluate(loss).map(|r| r.gmi_bits_per_2d);
    let (mut lo, mut hi) = LOSS_SEARCH_RANGE;
    let mut g_lo = gmi_at(lo)?;
    if g_lo < target {
        return Ok(LossSearch::Infeasible { gmi: Some(g_lo) });
    }
    let g_hi = gmi_at(hi)?;
    if g_hi >= target {
        return Ok(LossSearch::Feasible {
            loss_db: hi,
            gmi: g_hi,
        });
    }
    // Invariant: GMI(lo) >= target > GMI(hi).
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        let g = gmi_at(mid)?;
        if g >= target {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
        }
    }
    Ok(LossSearch::Feasible {
        loss_db: lo,
        gmi: g_lo,
    })
}

/// Largest link loss in [0, 100] dB whose GMI meets `target_gmi` (bit/2D),
/// to within `tol_db`. All evaluations share one propagated burst and one
/// noise stream.
pub fn acceptable_loss(
    cfg: &LinkConfig,
    launch_power_dbm: f64,
    target_gmi: f64,
    tol_db: f64,
    seed: u64,
) -> Result<LossSearch> {
    let max_rate = max_rate_per_2d(cfg);
    if target_gmi >= max_rate && target_gmi > 0.0 && tol_db > 0.0 {
        return Ok(LossSearch::Infeasible { gmi: None });
    }
    let burst = propagate(cfg, launch_power_dbm, seed)?;
    acceptable_loss_for(&burst, max_rate, target_gmi, tol_db)
}
