//! Constellations, bit labelling, TX waveform synthesis, the RX front end and
//! bitwise soft demapping.
//!
//! Every constellation here is a square QAM whose I and Q rails carry a
//! binary-reflected Gray code, MSB first. A dual-polarization symbol is a 4D
//! point `[x_i, x_q, y_i, y_q]` of signed odd-integer PAM levels and its label
//! is the concatenation of the four rail labels in that order.
//!
//! In shaped mode the transmitted 4D points are uniform over the PAS
//! composite set (codebook entry times sign pattern). Soft demapping uses
//! that exact prior; the label bits seen by the decoder are still the
//! per-rail Gray bits, as in any PAS receiver where the inverse DM runs after
//! decoding.

use std::sync::Arc;

use rayon::prelude::*;

use crate::channel::dispersion_phase;
use crate::error::{invalid, Error, Result};
use crate::nlpr::{apply_rx_nlpr, NlprSpec};
use crate::shaping::{bits_to_index, pas_map, qam_side, SphereCodebook};
use crate::signal::{
    apply_filter_freq, apply_spectral, matched_filter_and_decimate, upsample, FilterSpec, Symbols,
    Waveform,
};
use crate::C64;

/// Binary-reflected Gray code.
pub fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Inverse of [`gray`].
pub fn gray_inverse(mut g: usize) -> usize {
    let mut i = g;
    while g > 0 {
        g >>= 1;
        i ^= g;
    }
    i
}

/// One PAM rail with `side` levels `-(side-1), ..., -1, 1, ..., side-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PamRail {
    side: usize,
}

impl PamRail {
    pub fn new(side: usize) -> Result<Self> {
        if side < 2 || !side.is_power_of_two() {
            return Err(invalid(format!(
                "PAM rail size must be a power of two >= 2, got {side}"
            )));
        }
        Ok(PamRail { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bits(&self) -> usize {
        self.side.trailing_zeros() as usize
    }

    /// Signed level of rail index `i` (0 is the most negative level).
    pub fn level(&self, i: usize) -> i16 {
        2 * i as i16 - (self.side as i16 - 1)
    }

    pub fn index_of(&self, level: i16) -> Option<usize> {
        let i = level + self.side as i16 - 1;
        (level.rem_euclid(2) == 1 && i >= 0 && (i as usize) < 2 * self.side)
            .then_some(i as usize / 2)
    }

    /// Gray label of a signed level.
    pub fn label(&self, level: i16) -> usize {
        gray(self.index_of(level).expect("level outside the rail"))
    }

    /// Signed level carrying `label`.
    pub fn level_of_label(&self, label: usize) -> i16 {
        self.level(gray_inverse(label))
    }

    /// Nearest rail level to `y` (in level units).
    pub fn slice(&self, y: f64) -> i16 {
        let i = ((y + (self.side as f64 - 1.0)) / 2.0).round();
        self.level(i.clamp(0.0, self.side as f64 - 1.0) as usize)
    }

    /// Mean of `level^2` under a uniform distribution.
    pub fn uniform_energy(&self) -> f64 {
        let s = self.side as f64;
        (s * s - 1.0) / 3.0
    }
}

/// Symbol distribution of a constellation.
#[derive(Debug, Clone)]
pub enum Scheme {
    Uniform,
    Shaped(Arc<SphereCodebook>),
}

/// Square M-QAM, used with either a uniform or a PAS-shaped distribution.
#[derive(Debug, Clone)]
pub struct Constellation {
    order: u32,
    rail: PamRail,
    scheme: Scheme,
    /// `E[|s|^2]` per 2D symbol in level units under the active distribution.
    energy_2d: f64,
}

impl Constellation {
    pub fn uniform(order: u32) -> Result<Self> {
        let rail = PamRail::new(qam_side(order)?)?;
        Ok(Constellation {
            order,
            rail,
            scheme: Scheme::Uniform,
            energy_2d: 2.0 * rail.uniform_energy(),
        })
    }

    /// Shaped QAM driven by `cb`. One codebook block fills one 4D symbol, so
    /// the block length must be 4.
    pub fn shaped(cb: Arc<SphereCodebook>) -> Result<Self> {
        if cb.block_len() != 4 {
            return Err(invalid(format!(
                "4D mapping needs block length 4, got {}",
                cb.block_len()
            )));
        }
        let alphabet = cb.alphabet();
        let expected: Vec<u16> = (0..alphabet.len()).map(|i| 2 * i as u16 + 1).collect();
        if alphabet.levels() != expected.as_slice() {
            return Err(invalid(
                "shaped QAM needs the consecutive odd alphabet 1, 3, 5, ...",
            ));
        }
        let side = 2 * alphabet.len();
        Ok(Constellation {
            order: (side * side) as u32,
            rail: PamRail::new(side)?,
            energy_2d: cb.mean_block_energy() / 2.0,
            scheme: Scheme::Shaped(cb),
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn rail(&self) -> PamRail {
        self.rail
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn is_shaped(&self) -> bool {
        matches!(self.scheme, Scheme::Shaped(_))
    }

    pub fn codebook(&self) -> Option<&Arc<SphereCodebook>> {
        match &self.scheme {
            Scheme::Shaped(cb) => Some(cb),
            Scheme::Uniform => None,
        }
    }

    /// Normalization energy per 2D in level units.
    pub fn energy_2d(&self) -> f64 {
        self.energy_2d
    }

    /// Amplitude factor mapping levels to unit-mean-power symbols.
    pub fn scale(&self) -> f64 {
        1.0 / self.energy_2d.sqrt()
    }

    /// Gray label bits per 4D symbol.
    pub fn label_bits_4d(&self) -> usize {
        4 * self.rail.bits()
    }

    /// Information bits per 4D symbol; equals the entropy of the 4D symbol
    /// since all composite points are equiprobable.
    pub fn info_bits_4d(&self) -> usize {
        match &self.scheme {
            Scheme::Uniform => self.label_bits_4d(),
            Scheme::Shaped(cb) => cb.frame_bits(),
        }
    }

    /// Gray label of a 4D point, rails concatenated MSB first.
    pub fn label_4d(&self, levels: &[i16; 4]) -> u32 {
        let b = self.rail.bits();
        levels
            .iter()
            .fold(0u32, |acc, &v| (acc << b) | self.rail.label(v) as u32)
    }

    pub fn point(&self, levels: &[i16; 4]) -> (C64, C64) {
        let s = self.scale();
        (
            C64::new(levels[0] as f64 * s, levels[1] as f64 * s),
            C64::new(levels[2] as f64 * s, levels[3] as f64 * s),
        )
    }

    /// Nearest 4D point rail by rail (ignores the shaping prior).
    pub fn slice(&self, x: C64, y: C64) -> [i16; 4] {
        let inv = 1.0 / self.scale();
        [x.re, x.im, y.re, y.im].map(|v| self.rail.slice(v * inv))
    }
}

/// Transmitted frame: symbols plus everything needed to score them.
#[derive(Debug, Clone)]
pub struct TxFrame {
    pub symbols: Symbols,
    /// Signed PAM levels of each 4D symbol.
    pub levels: Vec<[i16; 4]>,
    pub info_bits: Vec<u8>,
    pub constellation: Arc<Constellation>,
}

impl TxFrame {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.levels
            .iter()
            .map(|l| self.constellation.label_4d(l))
            .collect()
    }

    /// Keeps symbols `guard..len-guard`; information bits are dropped.
    pub fn trimmed(&self, guard: usize) -> TxFrame {
        let n = self.len();
        let (lo, hi) = if 2 * guard >= n {
            (0, 0)
        } else {
            (guard, n - guard)
        };
        TxFrame {
            symbols: self.symbols.trimmed(guard),
            levels: self.levels[lo..hi].to_vec(),
            info_bits: Vec::new(),
            constellation: self.constellation.clone(),
        }
    }

    fn from_levels(levels: Vec<[i16; 4]>, info_bits: Vec<u8>, c: Arc<Constellation>) -> Self {
        let (x, y): (Vec<_>, Vec<_>) = levels.iter().map(|l| c.point(l)).unzip();
        TxFrame {
            symbols: Symbols { x, y },
            levels,
            info_bits,
            constellation: c,
        }
    }
}

/// Uniform Gray-labelled DP-QAM: each 4D symbol consumes `4 log2(sqrt M)`
/// bits in rail order X-I, X-Q, Y-I, Y-Q.
pub fn qam_modulate_uniform(order: u32, bits: &[u8]) -> Result<TxFrame> {
    let c = Arc::new(Constellation::uniform(order)?);
    let rail = c.rail();
    let per = c.label_bits_4d();
    if !bits.len().is_multiple_of(per) {
        return Err(Error::LengthMismatch(format!(
            "{} bits is not a multiple of {per} bits per 4D symbol",
            bits.len()
        )));
    }
    let levels = bits
        .chunks_exact(per)
        .map(|chunk| {
            let mut l = [0i16; 4];
            for (d, rail_bits) in chunk.chunks_exact(rail.bits()).enumerate() {
                l[d] = rail.level_of_label(bits_to_index(rail_bits));
            }
            l
        })
        .collect();
    Ok(TxFrame::from_levels(levels, bits.to_vec(), c))
}

/// PAS modulation: one frame of `k + 4` bits per 4D symbol.
pub fn pas_modulate(cb: Arc<SphereCodebook>, bits: &[u8]) -> Result<TxFrame> {
    let c = Arc::new(Constellation::shaped(cb.clone())?);
    let levels = pas_map(&cb, bits)?
        .into_iter()
        .map(|f| [f.symbol[0], f.symbol[1], f.symbol[2], f.symbol[3]])
        .collect();
    Ok(TxFrame::from_levels(levels, bits.to_vec(), c))
}

/// Result of hard-decision demodulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardDecision {
    pub bits: Vec<u8>,
    /// Shaped mode: number of sliced blocks outside the codebook (their DM
    /// bits are reported as zeros).
    pub invalid_blocks: usize,
}

/// Minimum-distance rail slicing followed by inverse labelling / inverse DM.
pub fn demodulate_hard(rx: &Symbols, c: &Constellation) -> Result<HardDecision> {
    let rail = c.rail();
    let mut bits = Vec::with_capacity(rx.len() * c.info_bits_4d());
    let mut invalid_blocks = 0;
    for (x, y) in rx.x.iter().zip(&rx.y) {
        let l = c.slice(*x, *y);
        match c.scheme() {
            Scheme::Uniform => {
                for v in l {
                    let label = rail.label(v);
                    bits.extend((0..rail.bits()).rev().map(|i| ((label >> i) & 1) as u8));
                }
            }
            Scheme::Shaped(cb) => {
                let amps = l.map(|v| v.unsigned_abs());
                match cb.dm_decode(&amps)? {
                    Some(dm) => bits.extend(dm),
                    None => {
                        invalid_blocks += 1;
                        bits.extend(std::iter::repeat_n(0u8, cb.k_bits()));
                    }
                }
                bits.extend(l.iter().map(|&v| (v < 0) as u8));
            }
        }
    }
    Ok(HardDecision {
        bits,
        invalid_blocks,
    })
}

/// Pulse shaping and DAC parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxParams {
    pub symbol_rate: f64,
    pub rolloff: f64,
    pub sps: usize,
    /// Brickwall cutoff of the DAC; `None` for unlimited bandwidth.
    pub dac_cutoff: Option<f64>,
}

impl TxParams {
    pub fn rrc(&self) -> FilterSpec {
        FilterSpec::rrc(self.rolloff, self.symbol_rate)
    }
}

/// Upsampled RRC waveform before the DAC. Unit-energy symbols give unit mean
/// power per polarization in expectation.
pub fn tx_baseband(frame: &TxFrame, p: &TxParams) -> Result<Waveform> {
    let w = upsample(&frame.symbols, p.sps, p.symbol_rate)?;
    let mut w = apply_filter_freq(&w, &p.rrc())?;
    w.scale_in_place(p.sps as f64);
    Ok(w)
}

/// Applies the DAC brickwall, if any.
pub fn dac(w: &Waveform, cutoff: Option<f64>) -> Result<Waveform> {
    match cutoff {
        Some(fc) => apply_filter_freq(w, &FilterSpec::brickwall(fc)),
        None => Ok(w.clone()),
    }
}

/// Upsample, RRC, DAC band limit.
pub fn tx_waveform(frame: &TxFrame, p: &TxParams) -> Result<Waveform> {
    dac(&tx_baseband(frame, p)?, p.dac_cutoff)
}

/// RX front-end parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxParams {
    pub symbol_rate: f64,
    pub rolloff: f64,
    pub sps: usize,
    /// Brickwall cutoff of the ADC; `None` for unlimited bandwidth.
    pub adc_cutoff: Option<f64>,
    /// Accumulated `beta2 * L` (s^2) to undo; `None` disables compensation.
    pub cd_compensation: Option<f64>,
    /// Total power of both polarizations (W) that maps to unit-energy
    /// symbols per 2D; the TX baseband has total power 2.
    pub reference_power: f64,
}

/// ADC band limit, optional RX phase rotation, chromatic-dispersion
/// compensation, matched filter and decimation at the known timing.
///
/// The output is on the TX symbol scale for an undistorted channel but is
/// not yet gain/phase corrected; see [`fit_gain`].
pub fn rx_frontend(w: &Waveform, p: &RxParams, rx_nlpr: Option<&NlprSpec>) -> Result<Symbols> {
    if !(p.reference_power > 0.0) {
        return Err(invalid("reference power must be positive"));
    }
    let mut w = w.scaled((2.0 / p.reference_power).sqrt());
    if let Some(fc) = p.adc_cutoff {
        w = apply_filter_freq(&w, &FilterSpec::brickwall(fc))?;
    }
    if let Some(spec) = rx_nlpr {
        w = apply_rx_nlpr(&w, spec)?;
    }
    if let Some(beta2_l) = p.cd_compensation {
        w = apply_spectral(&w, |f| C64::from_polar(1.0, -dispersion_phase(f, beta2_l)));
    }
    let mut s =
        matched_filter_and_decimate(&w, &FilterSpec::rrc(p.rolloff, p.symbol_rate), p.sps, 0)?;
    s.scale(C64::new(1.0 / p.sps as f64, 0.0));
    Ok(s)
}

/// Least-squares complex gain `h` minimizing `sum |rx - h tx|^2` over both
/// polarizations.
pub fn fit_gain(rx: &Symbols, tx: &Symbols) -> Result<C64> {
    if rx.len() != tx.len() || rx.is_empty() {
        return Err(Error::LengthMismatch(format!(
            "cannot fit gain between {} and {} symbols",
            rx.len(),
            tx.len()
        )));
    }
    let (num, den) =
        rx.x.iter()
            .zip(&tx.x)
            .chain(rx.y.iter().zip(&tx.y))
            .fold((C64::new(0.0, 0.0), 0.0), |(n, d), (r, t)| {
                (n + t.conj() * r, d + t.norm_sqr())
            });
    if den == 0.0 {
        return Err(invalid("reference symbols have zero energy"));
    }
    Ok(num / den)
}

/// Divides `rx` by the least-squares gain against `tx` and returns the gain.
pub fn equalize(rx: &mut Symbols, tx: &Symbols) -> Result<C64> {
    let h = fit_gain(rx, tx)?;
    if h.norm() == 0.0 {
        return Err(invalid("estimated channel gain is zero"));
    }
    rx.scale(h.inv());
    Ok(h)
}

/// [`rx_frontend`] followed by [`equalize`] against the known TX symbols.
pub fn recover_symbols(
    w: &Waveform,
    p: &RxParams,
    rx_nlpr: Option<&NlprSpec>,
    tx: &Symbols,
) -> Result<Symbols> {
    let mut rx = rx_frontend(w, p, rx_nlpr)?;
    equalize(&mut rx, tx)?;
    Ok(rx)
}

/// Smallest probability reported by the soft demapper.
pub const POSTERIOR_FLOOR: f64 = 1e-300;

/// Bitwise posteriors under the Gaussian auxiliary channel
/// `q(y|s) = exp(-|y - s|^2 / noise_var)` with the constellation's exact
/// 4D prior. `noise_var` is the complex noise variance per 2D symbol.
pub struct SoftDemapper<'a> {
    c: &'a Constellation,
    inv_var: f64,
    levels: Vec<f64>,
    /// Shaped mode: codebook entries as alphabet indices.
    tuples: Vec<[u8; 4]>,
}

/// Per-call working memory of [`SoftDemapper`].
#[derive(Debug, Clone, Default)]
pub struct DemapScratch {
    metric: Vec<f64>,
    marginal: Vec<f64>,
    amp_log: Vec<f64>,
    amp_weight: Vec<f64>,
    tuple_log: Vec<f64>,
}

impl<'a> SoftDemapper<'a> {
    pub fn new(c: &'a Constellation, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(invalid(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        let rail = c.rail();
        let levels = (0..rail.side())
            .map(|i| rail.level(i) as f64 * c.scale())
            .collect();
        let tuples = match c.scheme() {
            Scheme::Uniform => Vec::new(),
            Scheme::Shaped(cb) => cb
                .entries()
                .map(|e| {
                    let mut t = [0u8; 4];
                    for (slot, &a) in t.iter_mut().zip(e) {
                        *slot = ((a - 1) / 2) as u8;
                    }
                    t
                })
                .collect(),
        };
        Ok(SoftDemapper {
            c,
            inv_var: 1.0 / noise_var,
            levels,
            tuples,
        })
    }

    pub fn label_bits(&self) -> usize {
        self.c.label_bits_4d()
    }

    /// Writes `[ln P(b=0|y), ln P(b=1|y)]` for every label bit of the 4D
    /// observation `y = [x_i, x_q, y_i, y_q]`.
    pub fn log_posteriors(&self, y: [f64; 4], scratch: &mut DemapScratch, out: &mut [[f64; 2]]) {
        let side = self.levels.len();
        let half = side / 2;
        let s = scratch;
        s.metric.resize(4 * side, 0.0);
        s.marginal.resize(4 * side, 0.0);

        // Per-rail log-likelihoods, shifted so each rail peaks at 0.
        for d in 0..4 {
            let m = &mut s.metric[d * side..(d + 1) * side];
            let mut best = f64::NEG_INFINITY;
            for (slot, &lv) in m.iter_mut().zip(&self.levels) {
                let e = y[d] - lv;
                *slot = -e * e * self.inv_var;
                best = best.max(*slot);
            }
            m.iter_mut().for_each(|v| *v -= best);
        }

        if self.tuples.is_empty() {
            for (m, w) in s.metric.iter().zip(s.marginal.iter_mut()) {
                *w = m.exp();
            }
        } else {
            // Marginal weight of each signed level given the composite prior:
            // sum over codebook tuples of the product of per-rail likelihoods
            // (signs summed out), times the sign split of that rail.
            s.amp_log.resize(4 * half, 0.0);
            s.amp_weight.resize(4 * half, 0.0);
            for d in 0..4 {
                let m = &s.metric[d * side..(d + 1) * side];
                for a in 0..half {
                    let (pos, neg) = (m[half + a], m[half - 1 - a]);
                    let hi = pos.max(neg);
                    s.amp_log[d * half + a] = hi + ((pos - hi).exp() + (neg - hi).exp()).ln();
                }
            }
            s.tuple_log.clear();
            let mut best = f64::NEG_INFINITY;
            for t in &self.tuples {
                let w = s.amp_log[t[0] as usize]
                    + s.amp_log[half + t[1] as usize]
                    + s.amp_log[2 * half + t[2] as usize]
                    + s.amp_log[3 * half + t[3] as usize];
                best = best.max(w);
                s.tuple_log.push(w);
            }
            s.amp_weight.iter_mut().for_each(|v| *v = 0.0);
            for (t, &w) in self.tuples.iter().zip(&s.tuple_log) {
                let w = (w - best).exp();
                for d in 0..4 {
                    s.amp_weight[d * half + t[d] as usize] += w;
                }
            }
            for d in 0..4 {
                let m = &s.metric[d * side..(d + 1) * side];
                for a in 0..half {
                    let weight = s.amp_weight[d * half + a];
                    let lse = s.amp_log[d * half + a];
                    s.marginal[d * side + half + a] = weight * (m[half + a] - lse).exp();
                    s.marginal[d * side + half - 1 - a] = weight * (m[half - 1 - a] - lse).exp();
                }
            }
        }

        let bits = self.c.rail().bits();
        for d in 0..4 {
            let w = &s.marginal[d * side..(d + 1) * side];
            let total: f64 = w.iter().sum();
            for j in 0..bits {
                let shift = bits - 1 - j;
                let ones: f64 = w
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| (gray(*i) >> shift) & 1 == 1)
                    .map(|(_, v)| v)
                    .sum();
                let zeros = total - ones;
                out[d * bits + j] = [
                    (zeros / total).max(POSTERIOR_FLOOR).ln(),
                    (ones / total).max(POSTERIOR_FLOOR).ln(),
                ];
            }
        }
    }
}

/// `P(b_i = 1 | y)` for every label bit of every 4D symbol, flattened
/// symbol-major.
pub fn bit_posteriors(rx: &Symbols, c: &Constellation, noise_var: f64) -> Result<Vec<f64>> {
    let dm = SoftDemapper::new(c, noise_var)?;
    let m = dm.label_bits();
    let mut out = vec![0.0; rx.len() * m];
    out.par_chunks_mut(m * 1024)
        .zip(rx.x.par_chunks(1024).zip(rx.y.par_chunks(1024)))
        .for_each(|(out, (xs, ys))| {
            let mut scratch = DemapScratch::default();
            let mut lp = vec![[0.0; 2]; m];
            for (k, (x, y)) in xs.iter().zip(ys).enumerate() {
                dm.log_posteriors([x.re, x.im, y.re, y.im], &mut scratch, &mut lp);
                for (o, l) in out[k * m..(k + 1) * m].iter_mut().zip(&lp) {
                    *o = l[1].exp() / (l[0].exp() + l[1].exp());
                }
            }
        });
    Ok(out)
}
