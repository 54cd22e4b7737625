//! Dual-polarization waveforms and the spectral primitives built on them.
//!
//! All filtering is circular (periodic) over the whole burst: the spectrum of
//! each polarization is computed with a full-length FFT, multiplied by the
//! filter response and transformed back. `rustfft` handles arbitrary lengths,
//! so no padding is needed and lengths are preserved exactly.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use rustfft::{Fft as FftPlan, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::C64;

/// Magic bytes at the start of a waveform dump.
pub const DUMP_MAGIC: &[u8; 8] = b"SLWAVE01";
const DUMP_HEADER_LEN: usize = 32;

/// A pair of symbol sequences, one per polarization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Symbols {
    pub x: Vec<C64>,
    pub y: Vec<C64>,
}

impl Symbols {
    pub fn new(x: Vec<C64>, y: Vec<C64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(format!(
                "polarizations have {} and {} symbols",
                x.len(),
                y.len()
            )));
        }
        Ok(Symbols { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Drops `guard` symbols at both ends.
    pub fn trimmed(&self, guard: usize) -> Symbols {
        let n = self.len();
        if 2 * guard >= n {
            return Symbols::default();
        }
        Symbols {
            x: self.x[guard..n - guard].to_vec(),
            y: self.y[guard..n - guard].to_vec(),
        }
    }

    /// Mean energy per 2D symbol, averaged over both polarizations.
    pub fn mean_energy_2d(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let e: f64 = self.x.iter().chain(&self.y).map(|s| s.norm_sqr()).sum();
        e / (2 * self.len()) as f64
    }

    pub fn scale(&mut self, k: C64) {
        self.x
            .iter_mut()
            .chain(self.y.iter_mut())
            .for_each(|s| *s *= k);
    }
}

/// Dual-polarization complex baseband field on a uniform time grid.
///
/// Samples are in sqrt(W), so `|x|^2 + |y|^2` is the instantaneous optical
/// power.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pol_x: Vec<C64>,
    pol_y: Vec<C64>,
    sample_rate: f64,
    t0: f64,
}

impl Waveform {
    pub fn new(pol_x: Vec<C64>, pol_y: Vec<C64>, sample_rate: f64) -> Result<Self> {
        if pol_x.is_empty() || pol_x.len() != pol_y.len() {
            return Err(Error::LengthMismatch(format!(
                "waveform polarizations must be equal and nonempty, got {} and {}",
                pol_x.len(),
                pol_y.len()
            )));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(invalid(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        Ok(Waveform {
            pol_x,
            pol_y,
            sample_rate,
            t0: 0.0,
        })
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn pol_x(&self) -> &[C64] {
        &self.pol_x
    }

    pub fn pol_y(&self) -> &[C64] {
        &self.pol_y
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.pol_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pol_x.is_empty()
    }

    pub fn into_pols(self) -> (Vec<C64>, Vec<C64>) {
        (self.pol_x, self.pol_y)
    }

    /// Mutable access to both polarizations at once.
    pub fn pols_mut(&mut self) -> (&mut [C64], &mut [C64]) {
        (&mut self.pol_x, &mut self.pol_y)
    }

    /// Sum of `|x_k|^2 + |y_k|^2` over all samples.
    pub fn energy(&self) -> f64 {
        self.pol_x
            .iter()
            .chain(&self.pol_y)
            .map(|s| s.norm_sqr())
            .sum()
    }

    /// Instantaneous power per sample, summed over polarizations (W).
    pub fn instantaneous_power(&self) -> Vec<f64> {
        self.pol_x
            .iter()
            .zip(&self.pol_y)
            .map(|(x, y)| x.norm_sqr() + y.norm_sqr())
            .collect()
    }

    /// Mean of [`Waveform::instantaneous_power`] (W).
    pub fn mean_power(&self) -> f64 {
        self.energy() / self.len() as f64
    }

    /// Multiplies both polarizations by a real amplitude factor.
    pub fn scaled(&self, amplitude: f64) -> Waveform {
        let mut out = self.clone();
        out.scale_in_place(amplitude);
        out
    }

    pub fn scale_in_place(&mut self, amplitude: f64) {
        self.pol_x
            .iter_mut()
            .chain(self.pol_y.iter_mut())
            .for_each(|s| *s *= amplitude);
    }

    /// Rescales the waveform so that its mean power equals `target` watts.
    pub fn scale_to_power(&self, target: f64) -> Result<Waveform> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(invalid(format!(
                "target power must be positive, got {target}"
            )));
        }
        let p = self.mean_power();
        if p <= 0.0 {
            return Err(invalid("cannot rescale a zero-power waveform"));
        }
        Ok(self.scaled((target / p).sqrt()))
    }

    /// Frequency of each FFT bin in Hz, in standard FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        fft_frequencies(self.len(), self.sample_rate)
    }

    /// Fraction of the energy lying outside `|f| <= band_hz`.
    pub fn out_of_band_fraction(&self, band_hz: f64) -> f64 {
        let fft = Fft::new(self.len());
        let freqs = self.frequencies();
        let mut inside = 0.0;
        let mut total = 0.0;
        for pol in [&self.pol_x, &self.pol_y] {
            let mut buf = pol.clone();
            fft.forward(&mut buf);
            for (s, f) in buf.iter().zip(&freqs) {
                let e = s.norm_sqr();
                total += e;
                if f.abs() <= band_hz {
                    inside += e;
                }
            }
        }
        if total > 0.0 {
            (total - inside) / total
        } else {
            0.0
        }
    }

    /// Writes the debugging dump: a 32-byte header (magic, length as u64,
    /// sample rate and t0 as f64) followed by little-endian f64 re/im pairs,
    /// all of pol X then all of pol Y.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = [0u8; DUMP_HEADER_LEN];
        header[..8].copy_from_slice(DUMP_MAGIC);
        header[8..16].copy_from_slice(&(self.len() as u64).to_le_bytes());
        header[16..24].copy_from_slice(&self.sample_rate.to_le_bytes());
        header[24..32].copy_from_slice(&self.t0.to_le_bytes());
        out.write_all(&header)?;
        for s in self.pol_x.iter().chain(&self.pol_y) {
            out.write_all(&s.re.to_le_bytes())?;
            out.write_all(&s.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut input: R) -> Result<Waveform> {
        let mut header = [0u8; DUMP_HEADER_LEN];
        input.read_exact(&mut header)?;
        if &header[..8] != DUMP_MAGIC {
            return Err(invalid("not a waveform dump (bad magic)"));
        }
        let f64_at = |i: usize| f64::from_le_bytes(header[i..i + 8].try_into().unwrap());
        let len = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let sample_rate = f64_at(16);
        let t0 = f64_at(24);
        let mut read_pol = || -> Result<Vec<C64>> {
            let mut raw = vec![0u8; len * 16];
            input.read_exact(&mut raw)?;
            Ok(raw
                .chunks_exact(16)
                .map(|c| {
                    C64::new(
                        f64::from_le_bytes(c[..8].try_into().unwrap()),
                        f64::from_le_bytes(c[8..].try_into().unwrap()),
                    )
                })
                .collect())
        };
        let x = read_pol()?;
        let y = read_pol()?;
        Ok(Waveform::new(x, y, sample_rate)?.with_t0(t0))
    }
}

/// Bin frequencies (Hz) of a length-`n` DFT at `sample_rate`.
pub fn fft_frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    let df = sample_rate / n as f64;
    (0..n)
        .map(|k| {
            if k < n.div_ceil(2) {
                k as f64 * df
            } else {
                (k as f64 - n as f64) * df
            }
        })
        .collect()
}

/// Forward/inverse FFT pair of a fixed length. The inverse is normalized so
/// that `inverse(forward(x)) == x`.
#[derive(Clone)]
pub struct Fft {
    forward: Arc<dyn FftPlan<f64>>,
    inverse: Arc<dyn FftPlan<f64>>,
    len: usize,
}

impl Fft {
    pub fn new(len: usize) -> Fft {
        let mut planner = FftPlanner::new();
        Fft {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, buf: &mut [C64]) {
        self.forward.process(buf);
    }

    pub fn inverse(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
        let k = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|s| *s *= k);
    }
}

/// Root-raised-cosine amplitude response with unit passband gain.
pub fn rrc_response(f: f64, symbol_rate: f64, rolloff: f64) -> f64 {
    let f = f.abs();
    let f1 = (1.0 - rolloff) * symbol_rate / 2.0;
    let f2 = (1.0 + rolloff) * symbol_rate / 2.0;
    if f <= f1 {
        1.0
    } else if f > f2 {
        0.0
    } else {
        // sqrt of the raised-cosine roll-off 0.5*(1 + cos(pi*(f - f1)/(alpha*R)))
        (PI * (f - f1) / (2.0 * rolloff * symbol_rate)).cos()
    }
}

/// Frequency-domain filter applied identically to both polarizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterSpec {
    /// Root-raised cosine with unit passband gain.
    Rrc { rolloff: f64, symbol_rate: f64 },
    /// Ideal low-pass: bins with `|f| > cutoff_hz` are zeroed.
    Brickwall { cutoff_hz: f64 },
}

impl FilterSpec {
    pub fn rrc(rolloff: f64, symbol_rate: f64) -> FilterSpec {
        FilterSpec::Rrc {
            rolloff,
            symbol_rate,
        }
    }

    pub fn brickwall(cutoff_hz: f64) -> FilterSpec {
        FilterSpec::Brickwall { cutoff_hz }
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        match *self {
            FilterSpec::Rrc {
                rolloff,
                symbol_rate,
            } => {
                if !(0.0..=1.0).contains(&rolloff) {
                    return Err(invalid(format!(
                        "roll-off must lie in [0, 1], got {rolloff}"
                    )));
                }
                if !(symbol_rate > 0.0) {
                    return Err(invalid(format!(
                        "symbol rate must be positive, got {symbol_rate}"
                    )));
                }
                if symbol_rate * (1.0 + rolloff) > sample_rate {
                    return Err(Error::Undersampled {
                        symbol_rate,
                        rolloff,
                        sample_rate,
                    });
                }
            }
            FilterSpec::Brickwall { cutoff_hz } => {
                if !(cutoff_hz > 0.0) {
                    return Err(invalid(format!("cutoff must be positive, got {cutoff_hz}")));
                }
            }
        }
        Ok(())
    }

    /// Amplitude response at frequency `f` (Hz).
    pub fn response(&self, f: f64) -> f64 {
        match *self {
            FilterSpec::Rrc {
                rolloff,
                symbol_rate,
            } => rrc_response(f, symbol_rate, rolloff),
            FilterSpec::Brickwall { cutoff_hz } => {
                if f.abs() > cutoff_hz {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// True when the filter passes every bin of a grid at `sample_rate`
    /// unchanged (a brickwall at or above Nyquist).
    pub fn is_all_pass(&self, sample_rate: f64) -> bool {
        matches!(*self, FilterSpec::Brickwall { cutoff_hz } if cutoff_hz >= sample_rate / 2.0)
    }
}

/// Multiplies the spectrum of both polarizations by `response(f)`.
pub fn apply_spectral<F>(w: &Waveform, response: F) -> Waveform
where
    F: Fn(f64) -> C64,
{
    let fft = Fft::new(w.len());
    let h: Vec<C64> = w.frequencies().into_iter().map(response).collect();
    let filt = |pol: &[C64]| {
        let mut buf = pol.to_vec();
        fft.forward(&mut buf);
        buf.iter_mut().zip(&h).for_each(|(s, h)| *s *= h);
        fft.inverse(&mut buf);
        buf
    };
    Waveform {
        pol_x: filt(&w.pol_x),
        pol_y: filt(&w.pol_y),
        sample_rate: w.sample_rate,
        t0: w.t0,
    }
}

/// Applies `f` in the frequency domain. An all-pass brickwall returns the
/// input unchanged.
pub fn apply_filter_freq(w: &Waveform, f: &FilterSpec) -> Result<Waveform> {
    f.validate(w.sample_rate)?;
    if f.is_all_pass(w.sample_rate) {
        log::debug!("brickwall at or above Nyquist is a no-op");
        return Ok(w.clone());
    }
    Ok(apply_spectral(w, |freq| C64::new(f.response(freq), 0.0)))
}

/// Impulse-train upsampling: each symbol is followed by `sps - 1` zeros.
pub fn upsample(symbols: &Symbols, sps: usize, symbol_rate: f64) -> Result<Waveform> {
    if sps < 2 {
        return Err(invalid(format!(
            "samples per symbol must be >= 2, got {sps}"
        )));
    }
    if symbols.is_empty() {
        return Err(invalid("cannot upsample an empty symbol sequence"));
    }
    let spread = |s: &[C64]| {
        let mut out = vec![C64::new(0.0, 0.0); s.len() * sps];
        for (i, v) in s.iter().enumerate() {
            out[i * sps] = *v;
        }
        out
    };
    Waveform::new(
        spread(&symbols.x),
        spread(&symbols.y),
        symbol_rate * sps as f64,
    )
}

/// RRC matched filter followed by decimation at `phase` (in samples).
///
/// The output is multiplied by `sps`, which undoes the energy spreading of
/// impulse-train upsampling, so that upsample + RRC + this function is the
/// identity on symbols.
pub fn matched_filter_and_decimate(
    w: &Waveform,
    f: &FilterSpec,
    sps: usize,
    phase: usize,
) -> Result<Symbols> {
    if !matches!(f, FilterSpec::Rrc { .. }) {
        return Err(invalid("matched filter must be an RRC"));
    }
    if sps == 0 || phase >= sps {
        return Err(invalid(format!(
            "decimation phase {phase} out of range for sps {sps}"
        )));
    }
    if !w.len().is_multiple_of(sps) {
        return Err(Error::LengthMismatch(format!(
            "waveform length {} is not a multiple of sps {sps}",
            w.len()
        )));
    }
    let filtered = apply_filter_freq(w, f)?;
    let gain = sps as f64;
    let pick = |pol: &[C64]| -> Vec<C64> {
        pol.iter()
            .skip(phase)
            .step_by(sps)
            .map(|s| s * gain)
            .collect()
    };
    Symbols::new(pick(&filtered.pol_x), pick(&filtered.pol_y))
}
